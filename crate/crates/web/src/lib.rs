//! Browser bindings: the worked example with an editable query, a ROC
//! explorer over synthetic data, and feature-importance bars.
//!
//! Each export wraps a plain function returning JSON so the logic is
//! testable off the browser.

use serde_json::json;
use simdetect::{
    fit_forest_importance, generate_synthetic, run_protocol, toy, Algorithm, ClassifierConfig, ExperimentSpec,
    ForestConfig, SparseBinaryVector, SyntheticSpec,
};
use wasm_bindgen::prelude::*;

const SYNTH_DIM: usize = 40;
const SYNTH_BLOCK: usize = 5;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Parses 1-based feature numbers separated by spaces or commas.
pub fn parse_query(text: &str) -> Result<SparseBinaryVector, String> {
    let mut idx = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| match t.parse::<u32>() {
            Ok(j) if (1..=toy::DIM as u32).contains(&j) => Ok(j - 1),
            _ => Err(format!("features are numbered 1 to {}, got `{t}`", toy::DIM)),
        })
        .collect::<Result<Vec<_>, _>>()?;
    idx.sort_unstable();
    idx.dedup();
    SparseBinaryVector::new(idx, toy::DIM).map_err(err)
}

pub fn walkthrough_json(query: &str, trim_fraction: f64) -> Result<String, String> {
    let q = parse_query(query)?;
    let train = toy::dataset();
    let cfg = ClassifierConfig {
        trim_fraction,
        ..Default::default()
    };
    let w = toy::walkthrough(&train, &q, &cfg).map_err(err)?;
    let text = w.render(&train, &q);
    Ok(json!({ "text": text, "tables": w }).to_string())
}

fn synthetic(n_per_class: usize, noise: f64, seed: u64) -> Result<simdetect::LabeledDataset, String> {
    let spec = SyntheticSpec::two_blocks(n_per_class, SYNTH_DIM, SYNTH_BLOCK, noise, seed);
    generate_synthetic(&spec).map_err(err)
}

pub fn roc_json(n_per_class: usize, noise: f64, seed: u64) -> Result<String, String> {
    let data = synthetic(n_per_class, noise, seed)?;
    let spec = ExperimentSpec {
        algorithms: vec![Algorithm::Ann, Algorithm::Wann, Algorithm::Kmnn, Algorithm::Pdme],
        repeats: 1,
        master_seed: seed,
        keep_roc: true,
        ..Default::default()
    };
    let report = run_protocol(&data, &spec).map_err(err)?;
    let curves: Vec<_> = report
        .runs
        .iter()
        .map(|r| {
            let points: Vec<[f64; 2]> = r.roc.iter().flatten().map(|p| [p.fpr, p.tpr]).collect();
            json!({
                "algorithm": r.algorithm,
                "auc": r.auc_roc,
                "accuracy": r.test.accuracy,
                "points": points,
            })
        })
        .collect();
    Ok(json!({ "curves": curves, "maa": report.maa[0].test.max_accuracy }).to_string())
}

pub fn ranking_json(n_per_class: usize, noise: f64, seed: u64, n_trees: usize) -> Result<String, String> {
    let data = synthetic(n_per_class, noise, seed)?;
    let cfg = ForestConfig {
        n_trees,
        seed,
        ..Default::default()
    };
    let ranked = fit_forest_importance(&data, &cfg).map_err(err)?;
    Ok(json!({
        "importances": ranked.importances,
        "order": ranked.order,
        "planted": [[0, SYNTH_BLOCK], [SYNTH_BLOCK, 2 * SYNTH_BLOCK]],
    })
    .to_string())
}

#[wasm_bindgen]
pub fn toy_walkthrough(query: &str, trim_fraction: f64) -> Result<String, JsValue> {
    walkthrough_json(query, trim_fraction).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn roc_explorer(n_per_class: usize, noise: f64, seed: u32) -> Result<String, JsValue> {
    roc_json(n_per_class, noise, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn feature_ranking(n_per_class: usize, noise: f64, seed: u32, n_trees: usize) -> Result<String, JsValue> {
    ranking_json(n_per_class, noise, seed as u64, n_trees).map_err(|e| JsValue::from_str(&e))
}
