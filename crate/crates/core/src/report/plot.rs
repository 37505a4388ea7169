use std::fmt::Write as _;
use std::io;
use std::path::Path;

use super::DistributionTable;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Default)]
pub struct PlotOptions {
    pub title: Option<String>,
    /// Time identifier to shade, as in a highlighted exercise.
    pub mark: Option<i64>,
    pub x_label: Option<String>,
    pub y_label: Option<String>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Step between y-axis ticks: 1, 2 or 5 times a power of ten, about 5 ticks.
fn tick_step(max: u64) -> u64 {
    let raw = (max.max(1) as f64 / 5.0).max(1.0);
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    step as u64
}

/// One polyline per leaf over time, with legend and axes, as standalone SVG.
pub fn render_svg(table: &DistributionTable, options: &PlotOptions) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let n = table.times.len();
    let max = table.counts.iter().flatten().copied().max().unwrap_or(0);
    let step = tick_step(max);
    let y_max = (max.div_ceil(step).max(1) * step) as f64;
    let x_of = |i: usize| {
        if n <= 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * i as f64 / (n - 1) as f64
        }
    };
    let y_of = |v: f64| TOP + plot_h * (1.0 - v / y_max);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    if let Some(title) = &options.title {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + plot_w / 2.0,
            escape(title)
        );
    }

    if let Some(pos) = options.mark.and_then(|m| table.times.iter().position(|t| *t == m)) {
        let half = if n <= 1 { plot_w / 2.0 } else { plot_w / (n - 1) as f64 / 2.0 };
        let x0 = (x_of(pos) - half).max(LEFT);
        let x1 = (x_of(pos) + half).min(LEFT + plot_w);
        let _ = writeln!(
            s,
            r##"<rect class="mark" x="{x0:.2}" y="{TOP:.2}" width="{:.2}" height="{plot_h:.2}" fill="#bbbbbb" fill-opacity="0.5"/>"##,
            x1 - x0
        );
    }

    // axes, ticks, grid
    let _ = writeln!(
        s,
        r#"<g stroke="black" fill="none"><line x1="{LEFT:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><line x1="{LEFT:.2}" y1="{TOP:.2}" x2="{LEFT:.2}" y2="{:.2}"/></g>"#,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h,
        TOP + plot_h
    );
    let mut v = 0;
    while v as f64 <= y_max {
        let y = y_of(v as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0
        );
        v += step;
    }
    let label_every = n.div_ceil(20).max(1);
    for (i, t) in table.times.iter().enumerate() {
        if i % label_every == 0 || i + 1 == n {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#,
                x_of(i),
                TOP + plot_h + 16.0
            );
        }
    }
    let x_label = options.x_label.as_deref().unwrap_or("time");
    let y_label = options.y_label.as_deref().unwrap_or("rows");
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(y_label)
    );

    for (l, leaf) in table.leaves.iter().enumerate() {
        let color = PALETTE[l % PALETTE.len()];
        let points: Vec<String> = table
            .counts
            .iter()
            .enumerate()
            .map(|(i, row)| format!("{:.2},{:.2}", x_of(i), y_of(row[l] as f64)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="leaf" data-leaf="{}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            escape(leaf),
            points.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * l as f64;
        let lx = LEFT + plot_w + 16.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(leaf)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_plot(table: &DistributionTable, path: &Path, options: &PlotOptions) -> io::Result<()> {
    std::fs::write(path, render_svg(table, options))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polyline_points(svg: &str, leaf: &str) -> Vec<(f64, f64)> {
        let key = format!("data-leaf=\"{leaf}\"");
        let line = svg.lines().find(|l| l.contains(&key)).unwrap();
        let pts = line.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
        pts.split(' ')
            .map(|p| {
                let (x, y) = p.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect()
    }

    #[test]
    fn single_leaf_flat_line() {
        let t = DistributionTable {
            times: vec![1, 2, 3],
            leaves: vec!["C".into()],
            counts: vec![vec![10], vec![10], vec![10]],
        };
        let svg = render_svg(&t, &PlotOptions::default());
        let pts = polyline_points(&svg, "C");
        assert_eq!(pts.len(), 3);
        assert!(pts.iter().all(|p| p.1 == pts[0].1));
        assert_eq!(svg, render_svg(&t, &PlotOptions::default()));
    }

    #[test]
    fn empty_leaf_sits_on_axis_and_mark_is_drawn() {
        let t = DistributionTable {
            times: vec![1, 2, 3, 4],
            leaves: vec!["C_1".into(), "C_2".into()],
            counts: vec![vec![4, 0], vec![4, 0], vec![2, 0], vec![4, 0]],
        };
        let opts = PlotOptions {
            mark: Some(3),
            title: Some("a < b".into()),
            ..Default::default()
        };
        let svg = render_svg(&t, &opts);
        let axis_y = TOP + (HEIGHT - TOP - BOTTOM);
        assert!(polyline_points(&svg, "C_2").iter().all(|p| (p.1 - axis_y).abs() < 1e-9));
        assert_eq!(svg.matches("class=\"mark\"").count(), 1);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(tick_step(0), 1);
        assert_eq!(tick_step(7), 2);
        assert_eq!(tick_step(40), 10);
        assert_eq!(tick_step(658), 200);
    }
}
