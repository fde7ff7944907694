//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export returns a JSON string; the `*_json` functions hold the logic
//! so it can be tested natively.

use pvwind::pso::PsoSchedule;
use pvwind::pv::{iv_curve as sample_iv, module_mpp, PvModuleParams, PvOperatingConditions};
use pvwind::tuning::{pole_placement_gains, tune, FitnessSpec};
use pvwind::wind::{power_coefficient, TurbineParams};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Module I-V and P-V curve at irradiance `g` (W/m²) and cell temperature
/// `t_cell_c`, plus the maximum power point.
pub fn iv_curve_json(g: f64, t_cell_c: f64, points: usize) -> Result<String, String> {
    let params = PvModuleParams::default();
    let cond = PvOperatingConditions::from_celsius(g, t_cell_c).map_err(|e| e.to_string())?;
    let curve = sample_iv(&cond, &params, points.clamp(2, 2000)).map_err(|e| e.to_string())?;
    let mpp = module_mpp(&cond, &params).map_err(|e| e.to_string())?;
    Ok(json!({
        "v": curve.iter().map(|p| p.v).collect::<Vec<_>>(),
        "i": curve.iter().map(|p| p.i).collect::<Vec<_>>(),
        "p": curve.iter().map(|p| p.p).collect::<Vec<_>>(),
        "mpp": { "v": mpp.v, "i": mpp.i, "p": mpp.p },
    })
    .to_string())
}

/// Power coefficient against tip-speed ratio at pitch `beta` (degrees),
/// with the curve's peak.
pub fn cp_curve_json(beta: f64, lambda_max: f64, points: usize) -> Result<String, String> {
    if !(lambda_max > 0.0 && lambda_max <= 30.0) {
        return Err(format!("lambda_max {lambda_max} outside (0, 30]"));
    }
    let c = TurbineParams::default().cp_coeffs;
    let n = points.clamp(2, 5000);
    let mut lambda = Vec::with_capacity(n);
    let mut cp = Vec::with_capacity(n);
    for k in 1..=n {
        let l = lambda_max * k as f64 / n as f64;
        lambda.push(l);
        cp.push(power_coefficient(l, beta, &c).map_err(|e| e.to_string())?.max(0.0));
    }
    let (k_best, cp_best) = cp
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::MIN), |a, (k, v)| if v > a.1 { (k, v) } else { a });
    Ok(json!({
        "lambda": lambda,
        "cp": cp,
        "peak": { "lambda": lambda[k_best], "cp": cp_best },
    })
    .to_string())
}

/// Tunes a PI loop on the first-order surrogate toward the response of the
/// pole-placement design at (`zeta`, `omega_n`); returns the best-fitness
/// trace and both gain pairs.
pub fn pso_trace_json(zeta: f64, omega_n: f64, population: usize, generations: usize, seed: u64) -> Result<String, String> {
    if population > 200 || generations > 500 {
        return Err("budget too large for the browser demo".into());
    }
    let spec = FitnessSpec::pole_surrogate(1.0, 1.0, zeta, omega_n);
    spec.validate().map_err(|e| e.to_string())?;
    let target = pole_placement_gains(1.0, 1.0, zeta, omega_n);
    let bounds = pvwind::pso::Bounds::new(vec![0.0, 0.0], vec![50.0, 100.0]).map_err(|e| e.to_string())?;
    let r = tune(&spec, &PsoSchedule::default(), bounds, population, generations, seed).map_err(|e| e.to_string())?;
    Ok(json!({
        "trace": r.trace,
        "gains": { "kp": r.gains.kp, "ki": r.gains.ki },
        "target": { "kp": target.kp, "ki": target.ki },
        "fitness": r.fitness,
        "evaluations": r.evaluations,
    })
    .to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn iv_curve(g: f64, t_cell_c: f64, points: usize) -> Result<String, JsValue> {
    js(iv_curve_json(g, t_cell_c, points))
}

#[wasm_bindgen]
pub fn cp_curve(beta: f64, lambda_max: f64, points: usize) -> Result<String, JsValue> {
    js(cp_curve_json(beta, lambda_max, points))
}

#[wasm_bindgen]
pub fn pso_trace(zeta: f64, omega_n: f64, population: usize, generations: usize, seed: u64) -> Result<String, JsValue> {
    js(pso_trace_json(zeta, omega_n, population, generations, seed))
}
