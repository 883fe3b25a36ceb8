//! Browser bindings for three small demos: KG and exploitation scores
//! for a two-candidate belief, the uninstructive-bid diagnostics of a
//! context-free pair, and a short bandit run. Results are JSON strings.
//!
//! The [`demo`] module holds the plain Rust versions used by the tests.

use wasm_bindgen::prelude::*;

pub mod demo;

fn js(r: freightbid::Result<String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

/// `a` and `b` are `[α₀, α₁, β₀, β₁]` for the two candidates.
#[wasm_bindgen]
pub fn price_curves(a: &[f64], b: &[f64], q1: f64, tau: f64, points: usize) -> Result<String, JsError> {
    js(demo::price_curves(a, b, q1, tau, points).and_then(demo::to_json))
}

#[wasm_bindgen]
pub fn diagnose_pair(a: &[f64], b: &[f64], tau: f64, points: usize) -> Result<String, JsError> {
    js(demo::diagnose_pair(a, b, tau, points).and_then(demo::to_json))
}

/// `policies` is a comma-separated list such as `"kg,exploit"`.
#[wasm_bindgen]
pub fn simulate_bandit(seed: u32, steps: usize, resample_base: u32, tau: f64, policies: &str) -> Result<String, JsError> {
    js(demo::simulate_bandit(seed as u64, steps, resample_base as u64, tau, policies).and_then(demo::to_json))
}
