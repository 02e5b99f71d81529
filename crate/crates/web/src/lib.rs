//! Browser bindings for the demo page in `www/`. Every function returns a JSON
//! string; errors surface as JavaScript exceptions.

use eofkit::eof::{eof_minimize, ppt_check, wootters_eof, PptVerdict};
use eofkit::qcorr::cqc_degree;
use eofkit::states::{make, FamilySpec, Pauli};
use eofkit::OptimizerConfig;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn config(restarts: usize, seed: u64) -> OptimizerConfig {
    OptimizerConfig { restarts: restarts.max(1), ensemble_size: Some(4), ..OptimizerConfig::with_seed(seed) }
}

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, JsError> {
    serde_json::to_string(value).map_err(js)
}

#[derive(Serialize)]
struct SweepRow {
    param: f64,
    eof_upper: f64,
    oracle_value: f64,
    ppt: bool,
}

/// Werner or isotropic family on `points` evenly spaced parameters in [0, 1].
#[wasm_bindgen]
pub fn family_sweep(family: &str, points: usize, restarts: usize) -> Result<String, JsError> {
    let base: FamilySpec = family.parse().map_err(js)?;
    let points = points.clamp(2, 101);
    let mut rows = Vec::with_capacity(points);
    for k in 0..points {
        let param = k as f64 / (points - 1) as f64;
        let spec = base.with_parameter(param).map_err(js)?;
        let w = make(&spec).map_err(js)?.density();
        let layout = spec.layout().map_err(js)?;
        rows.push(SweepRow {
            param,
            eof_upper: eof_minimize(&w, layout, &config(restarts, 0)).map_err(js)?.value,
            oracle_value: wootters_eof(&w).map_err(js)?,
            ppt: ppt_check(&w, layout).map_err(js)?.verdict == PptVerdict::Ppt,
        });
    }
    to_json(&rows)
}

#[derive(Serialize)]
struct EofSummary {
    value: f64,
    converged: bool,
    ensemble_size: usize,
    weights: Vec<f64>,
}

/// Entanglement of formation of a named state such as `random_mixed:dim=4,rank=2,seed=3`.
#[wasm_bindgen]
pub fn entanglement(spec: &str, restarts: usize, seed: u64) -> Result<String, JsError> {
    let spec: FamilySpec = spec.parse().map_err(js)?;
    let w = make(&spec).map_err(js)?.density();
    let r = eof_minimize(&w, spec.layout().map_err(js)?, &config(restarts, seed)).map_err(js)?;
    to_json(&EofSummary {
        value: r.value,
        converged: r.converged,
        ensemble_size: r.optimal_ensemble.len(),
        weights: r.optimal_ensemble.weights(),
    })
}

/// Correlation degree for every pair of Pauli observables, as a 3 × 3 table
/// indexed by (x, y, z) on each side.
#[wasm_bindgen]
pub fn pauli_correlations(spec: &str, restarts: usize) -> Result<String, JsError> {
    let spec: FamilySpec = spec.parse().map_err(js)?;
    let w = make(&spec).map_err(js)?.density();
    let layout = spec.layout().map_err(js)?;
    let cfg = config(restarts, 0);
    let mut table = [[0.0; 3]; 3];
    for (i, a) in Pauli::XYZ.iter().enumerate() {
        for (j, b) in Pauli::XYZ.iter().enumerate() {
            table[i][j] = cqc_degree(&w, &a.observable(), &b.observable(), layout, &cfg).map_err(js)?.value;
        }
    }
    to_json(&table)
}
