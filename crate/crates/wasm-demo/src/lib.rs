//! Browser bindings: generate a planted dataset, fit it, score a count series.
//! Results are returned as JSON strings so the page needs no glue types.

use detect_core::report::{export_distribution, render_svg, serialize_dataset, PlotOptions};
use detect_core::synth::{generate_planted_anomaly, generate_planted_shift, PlantSpec};
use detect_core::{eval_objective, fit, leaf_distributions, parse_dataset_str, CountSeries, FitConfig, IngestConfig, ObjectiveSpec};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn objective(name: &str, x: usize) -> Result<ObjectiveSpec, String> {
    match name {
        "f1" => Ok(ObjectiveSpec::StartEndShift),
        "f2" => Ok(ObjectiveSpec::AnomalyAt { x }),
        other => Err(format!("unknown objective '{other}'")),
    }
}

/// Planted dataset as CSV. `kind` is "shift" or "anomaly"; the planted step is 4 of 6.
pub fn synth(kind: &str, seed: u64) -> Result<String, String> {
    let spec = PlantSpec::example(seed);
    let (data, _) = match kind {
        "anomaly" => generate_planted_anomaly(&spec),
        _ => generate_planted_shift(&spec),
    }
    .map_err(|e| e.to_string())?;
    Ok(serialize_dataset(&data))
}

/// Fits `csv` and returns `{rules, distributions, svg, tree}` as JSON.
pub fn fit_csv(csv: &str, objective_name: &str, x: usize, min_size: usize) -> Result<String, String> {
    let data = parse_dataset_str(csv, &IngestConfig::default()).map_err(|e| e.to_string())?;
    let spec = objective(objective_name, x)?;
    let tree = fit(&data, &spec, &FitConfig::new(min_size)).map_err(|e| e.to_string())?;
    let table = leaf_distributions(&tree, &data).map_err(|e| e.to_string())?;
    let mark = match spec {
        ObjectiveSpec::AnomalyAt { x } => data.times().get(x - 1).copied(),
        _ => None,
    };
    let svg = render_svg(
        &table,
        &PlotOptions {
            title: Some(format!("{} leaves, objective {}", table.leaves.len(), tree.objective)),
            mark,
            x_label: Some("time".into()),
            y_label: Some("rows".into()),
        },
    );
    Ok(json!({
        "rules": detect_core::report::render_rules(&tree),
        "distributions": export_distribution(&table),
        "svg": svg,
        "tree": tree.to_canonical_json(),
    })
    .to_string())
}

/// Score of a count series read from comma or space separated integers.
pub fn score(counts: &str, objective_name: &str, x: usize) -> Result<f64, String> {
    let values = counts
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u64>().map_err(|_| format!("'{t}' is not a count")))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = objective(objective_name, x)?;
    let rest = CountSeries::zeros(values.len());
    eval_objective(&spec, &CountSeries(values), &rest).map(|s| s.0).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = synth)]
pub fn synth_js(kind: &str, seed: u64) -> Result<String, JsValue> {
    synth(kind, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = fitCsv)]
pub fn fit_csv_js(csv: &str, objective: &str, x: usize, min_size: usize) -> Result<String, JsValue> {
    fit_csv(csv, objective, x, min_size).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = score)]
pub fn score_js(counts: &str, objective: &str, x: usize) -> Result<f64, JsValue> {
    score(counts, objective, x).map_err(|e| JsValue::from_str(&e))
}
