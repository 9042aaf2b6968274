//! Browser bindings: three interactive views over the analysis library,
//! exchanging JSON strings with the page.

use ergokit::chain::Gi1Chain;
use ergokit::spectral::Eta;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn parse(spec_json: &str) -> Result<Gi1Chain, JsValue> {
    Gi1Chain::from_json(spec_json).map_err(err)
}

/// Bundled chain spec by name (c1..c5), as JSON.
#[wasm_bindgen]
pub fn preset(name: &str) -> Result<String, JsValue> {
    ergokit::fixtures::by_name(name)
        .map(|s| s.to_json())
        .ok_or_else(|| err(format!("unknown preset {name}")))
}

/// Ergodicity classification report as JSON.
#[wasm_bindgen]
pub fn classify_chain(spec_json: &str, max_degree: u32) -> Result<String, JsValue> {
    let chain = parse(spec_json)?;
    let report = ergokit::classify(&chain, max_degree.clamp(2, 8)).map_err(err)?;
    serde_json::to_string(&report).map_err(err)
}

/// Perron-root curve over a z grid, plus the decay root and the upward
/// radius: `{points: [[z, chi], ...], eta, phi_a_plus}`.
#[wasm_bindgen]
pub fn chi_curve(spec_json: &str, z0: f64, z1: f64, n: u32) -> Result<String, JsValue> {
    let chain = parse(spec_json)?;
    if !(z1 > z0 && z0 > 0.0) || n < 2 {
        return Err(err("grid needs z1 > z0 > 0 and n >= 2"));
    }
    let n = n.min(2000);
    let mut points = Vec::new();
    for i in 0..n {
        let z = z0 + (z1 - z0) * i as f64 / (n - 1) as f64;
        if let Ok(pair) = ergokit::spectral::perron(&chain, z) {
            points.push(json!([z, pair.chi]));
        }
    }
    let eta = match ergokit::spectral::find_eta(&chain) {
        Ok(r) => match r.eta {
            Eta::Root { value } => json!(value),
            Eta::BeyondScan { bound } => json!(format!("> {bound:e}")),
            Eta::Infinite => json!("inf"),
        },
        Err(e) => json!(format!("unavailable: {e}")),
    };
    let radius = chain.a_plus.radius();
    Ok(json!({
        "points": points,
        "eta": eta,
        "phi_a_plus": if radius.is_finite() { json!(radius) } else { json!("inf") },
    })
    .to_string())
}

/// Stationary per-level masses with the tail fit:
/// `{levels: [...], tail_fit: {...}, residual}`.
#[wasm_bindgen]
pub fn stationary_tail(spec_json: &str, levels: u32) -> Result<String, JsValue> {
    let chain = parse(spec_json)?;
    let levels = levels.clamp(20, 2000) as usize;
    let sol = ergokit::stationary::truncate_and_solve(&chain, levels).map_err(err)?;
    let masses: Vec<f64> = (0..=levels).map(|i| sol.level_mass(i)).collect();
    let fit = ergokit::stationary::tail_fit(&sol).ok();
    Ok(json!({
        "levels": masses,
        "tail_fit": fit.map(|f| serde_json::to_value(&f).unwrap()),
        "residual": sol.residual,
    })
    .to_string())
}

/// Total-variation curve from a point start:
/// `{distances: [...], fitted_rate, window}`.
#[wasm_bindgen]
pub fn tv_curve(
    spec_json: &str,
    init_level: u32,
    init_phase: u32,
    horizon: u32,
    levels: u32,
) -> Result<String, JsValue> {
    let chain = parse(spec_json)?;
    let levels = levels.clamp(20, 1500) as usize;
    let horizon = horizon.clamp(10, 5000) as usize;
    let curve = ergokit::hitting::tv_curve(
        &chain,
        levels,
        (init_level as usize, init_phase as usize),
        horizon,
    )
    .map_err(err)?;
    Ok(json!({
        "distances": curve.distances,
        "fitted_rate": curve.fitted_rate,
        "r_squared": curve.r_squared,
        "window": [curve.window.0, curve.window.1],
    })
    .to_string())
}
