use std::fmt;

use crate::objective::Score;
use crate::search::{CategoryKey, MissingSide, SplitRule};
use crate::tree::{ClusterNode, ClusterTree};

/// One side of a split rule, as it applies on the path to a leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub rule: SplitRule,
    /// True on the rule-satisfied (`C_a`) side.
    pub satisfied: bool,
}

impl fmt::Display for Condition {
    /// Missing values follow `missing_side`, which is `B` unless annotated.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.rule {
            SplitRule::NumericLe {
                feature,
                threshold,
                missing_side,
            } => {
                let op = if self.satisfied { "<=" } else { ">" };
                write!(f, "{feature} {op} {threshold}")?;
                if *missing_side == MissingSide::A {
                    f.write_str(" (missing → left)")?;
                }
                Ok(())
            }
            SplitRule::CategoryEq { feature, category } => {
                let op = if self.satisfied { "==" } else { "!=" };
                match category {
                    CategoryKey::Value(v) => write!(f, "{feature} {op} {v:?}"),
                    CategoryKey::Missing => write!(f, "{feature} {op} <missing>"),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafRule {
    pub label: String,
    pub size: usize,
    pub conditions: Vec<Condition>,
    /// Split score at each level along the path, root first.
    pub scores: Vec<Score>,
}

impl LeafRule {
    pub fn rule_text(&self) -> String {
        self.conditions
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(" AND ")
    }

    fn score_text(&self) -> String {
        self.scores
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(" / ")
    }
}

pub fn leaf_rules(tree: &ClusterTree) -> Vec<LeafRule> {
    fn go(node: &ClusterNode, path: &mut Vec<(Condition, Score)>, out: &mut Vec<LeafRule>) {
        match &node.split {
            None => out.push(LeafRule {
                label: node.label.clone(),
                size: node.size,
                conditions: path.iter().map(|(c, _)| c.clone()).collect(),
                scores: path.iter().map(|(_, s)| *s).collect(),
            }),
            Some(split) => {
                for (child, satisfied) in [(&split.child_a, true), (&split.child_b, false)] {
                    let cond = Condition {
                        rule: split.rule.clone(),
                        satisfied,
                    };
                    path.push((cond, split.score));
                    go(child, path, out);
                    path.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    go(&tree.root, &mut Vec::new(), &mut out);
    out
}

/// Plain-text table, one line per leaf in depth-first order.
pub fn render_rules(tree: &ClusterTree) -> String {
    let rules = leaf_rules(tree);
    let header = ["label", "size", "scores", "rule"];
    let rows: Vec<[String; 4]> = rules
        .iter()
        .map(|r| {
            let rule = if r.conditions.is_empty() {
                "(all rows)".to_string()
            } else {
                r.rule_text()
            };
            [r.label.clone(), r.size.to_string(), r.score_text(), rule]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: [&str; 4]| {
        let mut l = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i + 1 == cells.len() {
                l.push_str(cell);
            } else {
                l.push_str(cell);
                l.push_str(&" ".repeat(widths[i] - cell.chars().count() + 2));
            }
        }
        out.push_str(l.trim_end());
        out.push('\n');
    };
    line(header);
    for row in &rows {
        line([&row[0], &row[1], &row[2], &row[3]]);
    }
    out
}

/// Same content as [`render_rules`] as comma-separated values.
pub fn render_rules_csv(tree: &ClusterTree) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(["label", "size", "scores", "rule"]).expect("in-memory write");
    for r in leaf_rules(tree) {
        w.write_record([r.label.clone(), r.size.to_string(), r.score_text(), r.rule_text()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}
