//! Simultaneous root finding on the characteristic polynomial of the loop.
//!
//! Every estimate takes a Newton correction deflated by all other estimates
//! (Ehrlich–Aberth), updated Jacobi-style from a snapshot of the previous
//! sweep. Estimates freeze once their step is tiny, once the loop matrix
//! turns numerically singular there, or once they fall below the magnitude
//! threshold. Frozen estimates keep contributing to the deflation sum.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptors::magnitude_threshold;
use crate::error::{Error, Result};
use crate::loops::LoopOperator;

/// Which part of the plane to search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Restrict {
    All,
    RealPositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EaiOptions {
    pub t_tr: f64,
    pub fs_e: f64,
    pub restrict: Restrict,
    pub max_iterations: usize,
    pub step_tolerance: f64,
    pub condition_limit: f64,
    pub merge_tolerance: f64,
}

impl EaiOptions {
    pub fn new(t_tr: f64, fs_e: f64, restrict: Restrict) -> Self {
        EaiOptions {
            t_tr,
            fs_e,
            restrict,
            max_iterations: 500,
            step_tolerance: 1e-10,
            condition_limit: 1e12,
            merge_tolerance: 1e-8,
        }
    }

    pub fn threshold(&self) -> f64 {
        magnitude_threshold(self.t_tr, self.fs_e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Live,
    Converged,
    Dropped,
}

#[derive(Debug, Clone, Copy)]
struct Estimate {
    z: Complex64,
    state: State,
    /// Sign-change interval `(lo, hi, sign at lo)` kept on the real axis.
    bracket: Option<(f64, f64, f64)>,
}

/// Poles of the loop above the magnitude threshold of `opts`.
pub fn eai_poles(op: &LoopOperator, opts: &EaiOptions) -> Result<Vec<Complex64>> {
    if !(opts.t_tr > 0.0 && opts.fs_e > 0.0) {
        return Err(Error::Validation("t_tr and fs_e must be positive".into()));
    }
    let theta = opts.threshold();
    let mut est: Vec<Estimate> = match opts.restrict {
        Restrict::All => circle_seeds(op)
            .into_iter()
            .map(|z| Estimate {
                z,
                state: State::Live,
                bracket: None,
            })
            .collect(),
        Restrict::RealPositive => sign_change_seeds(op, theta),
    };
    log::debug!("eai: {} seeds, threshold {theta:.6}", est.len());

    let mut iterations = 0;
    while est.iter().any(|e| e.state == State::Live) {
        if iterations == opts.max_iterations {
            let unconverged = est.iter().filter(|e| e.state == State::Live).count();
            let survivors = est
                .iter()
                .filter(|e| e.state == State::Converged && e.z.norm() >= theta)
                .map(|e| e.z)
                .collect();
            return Err(Error::NoConvergence {
                iterations,
                unconverged,
                survivors,
            });
        }
        iterations += 1;
        let snapshot: Vec<Complex64> = est.iter().map(|e| e.z).collect();
        let updates: Vec<Option<Estimate>> = est
            .par_iter()
            .enumerate()
            .map(|(i, e)| (e.state == State::Live).then(|| sweep(op, opts, theta, &snapshot, i, e.bracket)))
            .collect();
        for (e, u) in est.iter_mut().zip(updates) {
            if let Some(u) = u {
                *e = u;
            }
        }
    }
    log::debug!("eai: converged after {iterations} sweeps");

    let found: Vec<Complex64> = est
        .iter()
        .filter(|e| e.state == State::Converged && e.z.norm() >= theta)
        .map(|e| e.z)
        .collect();
    Ok(tidy(found, opts.merge_tolerance, opts.restrict))
}

fn sweep(
    op: &LoopOperator,
    opts: &EaiOptions,
    theta: f64,
    snapshot: &[Complex64],
    i: usize,
    bracket: Option<(f64, f64, f64)>,
) -> Estimate {
    let z = snapshot[i];
    let done = |z, state| Estimate { z, state, bracket };
    let ev = match opts.restrict {
        Restrict::All => op.newton(z),
        Restrict::RealPositive => op.newton_det(z),
    };
    if ev.condition > opts.condition_limit {
        return done(z, State::Converged);
    }
    let n = ev.step;
    let mut s = Complex64::new(0.0, 0.0);
    for (j, &w) in snapshot.iter().enumerate() {
        if j != i && w != z {
            s += (z - w).inv();
        }
    }
    let delta = n / (1.0 - n * s);
    let mut next = z - delta;
    if !next.re.is_finite() || !next.im.is_finite() {
        return done(z, State::Dropped);
    }
    if opts.restrict == Restrict::RealPositive {
        next.im = 0.0;
        if let Some((lo, hi, sign_lo)) = bracket {
            // Projected steps that leave the sign-change interval bisect it instead.
            if !(next.re > lo && next.re < hi) {
                next.re = 0.5 * (lo + hi);
            }
            let step = (next.re - z.re).abs();
            let sign = op.determinant(next).re.signum();
            let shrunk = if sign == sign_lo { (next.re, hi, sign_lo) } else { (lo, next.re, sign_lo) };
            let state = if step < opts.step_tolerance || shrunk.1 - shrunk.0 < opts.step_tolerance {
                State::Converged
            } else {
                State::Live
            };
            return Estimate {
                z: next,
                state,
                bracket: Some(shrunk),
            };
        }
        if !(next.re > 0.0 && next.re < 1.0) {
            return done(next, State::Dropped);
        }
    }
    if next.norm() < theta {
        return done(next, State::Dropped);
    }
    let state = if delta.norm() < opts.step_tolerance {
        State::Converged
    } else {
        State::Live
    };
    done(next, state)
}

/// `round(Στ)` points on a circle whose radius is the geometric mean of the
/// column sums, rotated so no seed sits on the real axis.
fn circle_seeds(op: &LoopOperator) -> Vec<Complex64> {
    let total = op.total_delay();
    let count = total.round().max(1.0) as usize;
    let log_sum: f64 = op
        .matrix()
        .column_sums()
        .iter()
        .map(|&c| c.max(1e-12).ln())
        .sum();
    let radius = (log_sum / total).exp().min(1.0);
    (0..count)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / count as f64;
            Complex64::from_polar(radius, angle)
        })
        .collect()
}

/// Midpoints of the grid cells in `[θ, 1]` where `det(I − A·D(x))` changes sign.
fn sign_change_seeds(op: &LoopOperator, theta: f64) -> Vec<Estimate> {
    let cells = (op.total_delay().round() as usize).clamp(64, 2048);
    let xs: Vec<f64> = (0..=cells)
        .map(|k| theta + (1.0 - theta) * k as f64 / cells as f64)
        .collect();
    let signs: Vec<f64> = xs
        .par_iter()
        .map(|&x| op.determinant(Complex64::new(x, 0.0)).re.signum())
        .collect();
    xs.windows(2)
        .zip(signs.windows(2))
        .filter(|(_, s)| s[0] != s[1])
        .map(|(x, s)| Estimate {
            z: Complex64::new(0.5 * (x[0] + x[1]), 0.0),
            state: State::Live,
            bracket: Some((x[0], x[1], s[0])),
        })
        .collect()
}

/// Merges near-duplicates, snaps nearly real values onto the axis and
/// enforces exact conjugate pairing.
fn tidy(mut roots: Vec<Complex64>, merge: f64, restrict: Restrict) -> Vec<Complex64> {
    for r in &mut roots {
        if r.im.abs() <= 1e-9 {
            r.im = 0.0;
        }
    }
    roots.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));
    let mut kept: Vec<Complex64> = Vec::with_capacity(roots.len());
    for r in roots {
        if !kept.iter().any(|k| (k - r).norm() < merge) {
            kept.push(r);
        }
    }
    if restrict == Restrict::RealPositive {
        return kept;
    }
    // Keep one representative per conjugate pair and mirror it.
    let mut upper: Vec<Complex64> = Vec::new();
    let mut real: Vec<Complex64> = Vec::new();
    for r in &kept {
        if r.im == 0.0 {
            real.push(*r);
        } else {
            let rep = if r.im > 0.0 { *r } else { r.conj() };
            if !upper.iter().any(|k| (k - rep).norm() < merge) {
                upper.push(rep);
            }
        }
    }
    let mut out = real;
    for r in upper {
        out.push(r);
        out.push(r.conj());
    }
    out.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::FeedbackMatrix;
    use crate::sparse::CsrMatrix;

    fn single_loop(g: f64, tau: usize) -> LoopOperator {
        let fb = FeedbackMatrix::from_matrix(CsrMatrix::from_dense(1, 1, &[g])).unwrap();
        LoopOperator::new(&fb, vec![tau as f64]).unwrap()
    }

    #[test]
    fn single_loop_roots_are_roots_of_gain() {
        // 1 − g·z^(−τ) = 0  ⇔  z^τ = g
        let (g, tau) = (0.8, 5);
        let op = single_loop(g, tau);
        let poles = eai_poles(&op, &EaiOptions::new(0.01, 1000.0, Restrict::All)).unwrap();
        assert_eq!(poles.len(), tau);
        let r = g.powf(1.0 / tau as f64);
        for p in &poles {
            assert!((p.norm() - r).abs() < 1e-12, "{p}");
            assert!((p.powi(tau as i32) - g).norm() < 1e-12);
        }
        assert!(poles.iter().any(|p| p.im == 0.0 && p.re > 0.0));
    }

    #[test]
    fn threshold_discards_fast_modes() {
        let op = single_loop(0.8, 4);
        // |p| = 0.8^(1/4) ≈ 0.9457 has T60 ≈ 0.25 s at 1 kHz.
        let above = eai_poles(&op, &EaiOptions::new(0.2, 1000.0, Restrict::All)).unwrap();
        assert_eq!(above.len(), 4);
        let below = eai_poles(&op, &EaiOptions::new(0.3, 1000.0, Restrict::All)).unwrap();
        assert!(below.is_empty());
    }

    #[test]
    fn real_positive_finds_single_real_root() {
        let op = single_loop(0.5, 3);
        let poles = eai_poles(&op, &EaiOptions::new(0.01, 1000.0, Restrict::RealPositive)).unwrap();
        assert_eq!(poles.len(), 1);
        assert!((poles[0].re - 0.5f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn iteration_cap_reports_survivors() {
        let op = single_loop(0.8, 6);
        let mut o = EaiOptions::new(0.01, 1000.0, Restrict::All);
        o.max_iterations = 1;
        assert!(matches!(eai_poles(&op, &o), Err(Error::NoConvergence { iterations: 1, .. })));
    }

    #[test]
    fn two_path_loop_matches_companion_roots() {
        // A = [[0, a], [b, 0]] with delays 1, 2: det = 1 − ab·z^(−3).
        let fb = FeedbackMatrix::from_matrix(CsrMatrix::from_dense(2, 2, &[0.0, 0.6, 0.9, 0.0])).unwrap();
        let op = LoopOperator::new(&fb, vec![1.0, 2.0]).unwrap();
        let poles = eai_poles(&op, &EaiOptions::new(0.01, 1000.0, Restrict::All)).unwrap();
        assert_eq!(poles.len(), 3);
        for p in &poles {
            assert!((p.powi(3) - 0.54).norm() < 1e-12, "{p}");
        }
    }
}
