//! Browser entry points. Everything here is cheap enough to run on each input event.

use num_complex::Complex64;
use wasm_bindgen::prelude::*;

use modart::complexity::{complexity_report, ComplexityParams};
use modart::descriptors::{pole_descriptors, pole_from_descriptors};
use modart::render::energy_decay_curve;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// `[t60_s, freq_hz]` of the pole `re + i·im`.
#[wasm_bindgen]
pub fn descriptors(re: f64, im: f64, fs_e: f64) -> Result<Vec<f64>, JsError> {
    if !(fs_e > 0.0) {
        return Err(js_err("fs_e must be positive"));
    }
    let (t60, freq) = pole_descriptors(Complex64::new(re, im), fs_e).map_err(js_err)?;
    Ok(vec![t60, freq])
}

/// `[re, im]` of the pole with the given decay time and envelope frequency.
#[wasm_bindgen]
pub fn pole(t60: f64, freq: f64, fs_e: f64) -> Result<Vec<f64>, JsError> {
    if !(t60 > 0.0 && fs_e > 0.0) {
        return Err(js_err("t60 and fs_e must be positive"));
    }
    let p = pole_from_descriptors(t60, freq, fs_e);
    Ok(vec![p.re, p.im])
}

/// Energy response of a real decaying mode plus one conjugate pair,
/// `h[n] = a₀·p₀ⁿ + 2·a₁·Re(p₁ⁿ)`, with both poles given by descriptors.
pub fn two_mode_response(
    t60_main: f64,
    t60_pair: f64,
    freq_pair: f64,
    pair_weight: f64,
    fs_e: f64,
    n: usize,
) -> Vec<f64> {
    let p0 = pole_from_descriptors(t60_main, 0.0, fs_e).re;
    let p1 = pole_from_descriptors(t60_pair, freq_pair, fs_e);
    let (mut z0, mut z1) = (1.0, Complex64::new(1.0, 0.0));
    (0..n)
        .map(|_| {
            let h = z0 + 2.0 * pair_weight * z1.re;
            z0 *= p0;
            z1 *= p1;
            h
        })
        .collect()
}

/// Normalized EDC in dB of [`two_mode_response`]; samples where the curve
/// is no longer positive are reported as NaN.
#[wasm_bindgen]
pub fn edc_db(
    t60_main: f64,
    t60_pair: f64,
    freq_pair: f64,
    pair_weight: f64,
    fs_e: f64,
    n: usize,
) -> Result<Vec<f64>, JsError> {
    if !(t60_main > 0.0 && t60_pair > 0.0 && fs_e > 0.0) || n == 0 {
        return Err(js_err("decay times, rate and length must be positive"));
    }
    let edc = energy_decay_curve(&two_mode_response(t60_main, t60_pair, freq_pair, pair_weight, fs_e, n));
    let e0 = edc[0];
    Ok(edc
        .iter()
        .map(|&e| if e > 0.0 && e0 > 0.0 { 10.0 * (e / e0).log10() } else { f64::NAN })
        .collect())
}

/// Per-update operation counts for 1..=`max_endpoints` moving sources and
/// listeners, flattened as `[k, rtm_tree, tdart, modart]` rows.
#[wasm_bindgen]
pub fn update_costs(n_patches: f64, visibility: f64, n_modes: f64, max_endpoints: usize) -> Result<Vec<f64>, JsError> {
    if !(n_patches >= 1.0 && visibility > 0.0 && visibility <= 1.0 && n_modes >= 0.0) {
        return Err(js_err("need N_P ≥ 1, 0 < ν ≤ 1 and N_K ≥ 0"));
    }
    let mut rows = Vec::with_capacity(4 * max_endpoints);
    for k in 1..=max_endpoints {
        let k = k as f64;
        let p = ComplexityParams {
            n_patches,
            visibility,
            n_paths: None,
            n_modes,
            ..ComplexityParams::three_room(k)
        };
        let r = complexity_report(&p);
        rows.extend([k, r.rtm_tree, r.tdart, r.modart]);
    }
    Ok(rows)
}
