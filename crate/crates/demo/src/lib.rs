//! Browser bindings: basis plots, the d₀⁺ contour check and the theta-group
//! reduction. Every export returns a flat `Float64Array` or a JSON string.

use num_complex::Complex64;
use serde_json::json;
use theta_interp::basis::{basis_values, d0_closed_form, eval_d_with, Families, MethodChoice};
use theta_interp::forms::Sign;
use theta_interp::modular::{automorphy_jtheta, eval_modular, reduce_gamma_theta};
use wasm_bindgen::prelude::*;

/// Largest index the plot offers; higher indices need the extended-precision path.
pub const MAX_PLOT_INDEX: usize = 2;

/// Largest index offered for single-point evaluation.
pub const MAX_POINT_INDEX: usize = 16;

fn grid(x_min: f64, x_max: f64, steps: usize) -> Result<Vec<f64>, String> {
    if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) || !(2..=20_000).contains(&steps) {
        return Err("grid needs x_min < x_max and 2..=20000 steps".into());
    }
    let last = (steps - 1) as f64;
    Ok((0..steps).map(|k| x_min + (x_max - x_min) * k as f64 / last).collect())
}

pub fn curve(n: usize, x_min: f64, x_max: f64, steps: usize) -> Result<Vec<f64>, String> {
    if n > MAX_PLOT_INDEX {
        return Err(format!("index must be at most {MAX_PLOT_INDEX}"));
    }
    let mut out = Vec::with_capacity(3 * steps);
    for x in grid(x_min, x_max, steps)? {
        let (a, ah) = basis_values(x, n, Families::EVEN, MethodChoice::Auto).map_err(|e| e.to_string())?.a(n);
        out.extend([x, a.value, ah.value]);
    }
    Ok(out)
}

pub fn point(n: usize, x: f64) -> Result<Vec<f64>, String> {
    if n > MAX_POINT_INDEX {
        return Err(format!("index must be at most {MAX_POINT_INDEX}"));
    }
    let (a, ah) = basis_values(x, n, Families::EVEN, MethodChoice::Auto).map_err(|e| e.to_string())?.a(n);
    Ok(vec![a.value, ah.value, a.abs_error_estimate.max(ah.abs_error_estimate)])
}

pub fn d0_rows(x_min: f64, x_max: f64, steps: usize) -> Result<Vec<f64>, String> {
    let mut out = Vec::with_capacity(4 * steps);
    for x in grid(x_min, x_max, steps)? {
        let c = eval_d_with(Sign::Plus, 0, x, MethodChoice::Contour).map_err(|e| e.to_string())?.value;
        let e = d0_closed_form(x);
        out.extend([x, c, e, (c - e).abs()]);
    }
    Ok(out)
}

pub fn reduction(re: f64, im: f64) -> Result<serde_json::Value, String> {
    let tau = Complex64::new(re, im);
    let (red, word) = reduce_gamma_theta(tau).map_err(|e| e.to_string())?;
    let m = eval_modular(tau).map_err(|e| e.to_string())?;
    let mr = eval_modular(red).map_err(|e| e.to_string())?;
    let j = automorphy_jtheta(red, &word).map_err(|e| e.to_string())?;
    let c = |z: Complex64| [z.re, z.im];
    Ok(json!({
        "tau": c(tau),
        "reduced": c(red),
        "word": word.to_string(),
        "letters": word.letters().len(),
        "j_tau": c(m.j),
        "j_reduced": c(mr.j),
        "theta_tau": c(m.theta),
        "theta_reduced": c(mr.theta),
        "automorphy": c(j),
    }))
}

fn js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// `[x, a_n(x), â_n(x)]` per grid point, flattened.
#[wasm_bindgen]
pub fn basis_curve(n: usize, x_min: f64, x_max: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    js(curve(n, x_min, x_max, steps))
}

/// `[a_n(x), â_n(x), error estimate]` at one point.
#[wasm_bindgen]
pub fn basis_point(n: usize, x: f64) -> Result<Vec<f64>, JsError> {
    js(point(n, x))
}

/// `[x, contour, closed form, |difference|]` for d₀⁺, flattened.
#[wasm_bindgen]
pub fn d0_comparison(x_min: f64, x_max: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    js(d0_rows(x_min, x_max, steps))
}

/// Reduces `τ` into the theta-group domain and reports `J` and `θ` on both sides.
#[wasm_bindgen]
pub fn reduce_point(re: f64, im: f64) -> Result<String, JsError> {
    js(reduction(re, im).map(|v| v.to_string()))
}
