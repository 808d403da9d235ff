//! Comparison of energy responses in the log domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::energy_decay_curve;

/// Length of the smoothing window used for envelopes, in seconds.
pub const ENVELOPE_WINDOW_S: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    /// Mean absolute log-envelope difference over the window, in dB.
    pub mean_log_error_db: f64,
    /// First and one-past-last compared sample.
    pub start: usize,
    pub end: usize,
    /// Decay time fitted to each response's EDC over the window.
    pub reference_t60_s: f64,
    pub candidate_t60_s: f64,
}

/// Centered moving average over `width` samples, shrinking at the edges.
pub fn envelope(h: &[f64], width: usize) -> Vec<f64> {
    let width = width.max(1);
    let half = width / 2;
    // Direct sums: prefix differences lose the tail of a decaying response.
    (0..h.len())
        .map(|n| {
            let lo = n.saturating_sub(half);
            let hi = (n + width - half).min(h.len());
            h[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Mean `|10·log10(env_a/env_b)|` over samples `start..end`.
pub fn log_envelope_error(a: &[f64], b: &[f64], width: usize, start: usize, end: usize) -> Result<f64> {
    let end = end.min(a.len()).min(b.len());
    if start >= end {
        return Err(Error::Validation(format!("empty comparison window {start}..{end}")));
    }
    let (ea, eb) = (envelope(a, width), envelope(b, width));
    let floor = f64::MIN_POSITIVE;
    let total: f64 = (start..end)
        .map(|n| (10.0 * (ea[n].max(floor) / eb[n].max(floor)).log10()).abs())
        .sum();
    Ok(total / (end - start) as f64)
}

/// Decay time from a least-squares line through `10·log10(EDC)` over `start..end`.
pub fn fit_t60(h: &[f64], fs_e: f64, start: usize, end: usize) -> Result<f64> {
    let edc = energy_decay_curve(h);
    let end = end.min(h.len());
    let points: Vec<(f64, f64)> = (start..end)
        .filter(|&n| edc[n] > 0.0)
        .map(|n| (n as f64 / fs_e, 10.0 * edc[n].log10()))
        .collect();
    if points.len() < 2 {
        return Err(Error::Validation("need two positive EDC samples for a fit".into()));
    }
    let m = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    let slope = sxy / sxx;
    Ok(-60.0 / slope)
}

/// Compares `candidate` against `reference` from `start_s` to the end of the shorter response.
pub fn compare(reference: &[f64], candidate: &[f64], fs_e: f64, start_s: f64) -> Result<CompareReport> {
    let start = (start_s * fs_e).ceil().max(0.0) as usize;
    let end = reference.len().min(candidate.len());
    let width = (ENVELOPE_WINDOW_S * fs_e).round().max(1.0) as usize;
    Ok(CompareReport {
        mean_log_error_db: log_envelope_error(reference, candidate, width, start, end)?,
        start,
        end,
        reference_t60_s: fit_t60(reference, fs_e, start, end)?,
        candidate_t60_s: fit_t60(candidate, fs_e, start, end)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(p: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| p.powi(k as i32)).collect()
    }

    #[test]
    fn identical_inputs_have_zero_error() {
        let h = decay(0.99, 1000);
        let r = compare(&h, &h, 1000.0, 0.1).unwrap();
        assert_eq!(r.mean_log_error_db, 0.0);
        assert_eq!(r.reference_t60_s, r.candidate_t60_s);
    }

    #[test]
    fn factor_two_is_three_decibels() {
        let a = decay(0.99, 500);
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        let e = log_envelope_error(&a, &b, 5, 0, 500).unwrap();
        assert!((e - 10.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn fitted_t60_of_exponential() {
        // p = 10^(−6/(T·fs)) decays 60 dB in T seconds.
        let (t60, fs) = (0.5, 1000.0);
        let h = decay(10f64.powf(-6.0 / (t60 * fs)), 5000);
        let t = fit_t60(&h, fs, 0, 1000).unwrap();
        assert!((t - t60).abs() < 1e-6, "{t}");
    }

    #[test]
    fn envelope_keeps_relative_precision_in_the_tail() {
        let h = decay(0.9, 400);
        let e = envelope(&h, 4);
        let expect = (h[396] + h[397] + h[398] + h[399]) / 4.0;
        assert!((e[398] / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn envelope_of_constant_is_constant() {
        assert!(envelope(&[2.0; 7], 4).iter().all(|&v| (v - 2.0).abs() < 1e-15));
    }

    #[test]
    fn empty_window_is_rejected() {
        assert!(log_envelope_error(&[1.0], &[1.0], 1, 3, 5).is_err());
    }
}
