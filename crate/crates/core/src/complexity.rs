//! Operation counts of ray tracing, time-domain ART and modal ART under
//! interactive source and listener movement, read with unit constants.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityParams {
    /// Surface patches.
    pub n_patches: f64,
    /// Fraction of patches visible from a patch.
    pub visibility: f64,
    /// Paths; derived as `ν·N_P²` when absent.
    pub n_paths: Option<f64>,
    pub n_sources: f64,
    pub n_listeners: f64,
    pub moved_sources: f64,
    pub moved_listeners: f64,
    /// EIR length in samples.
    pub n_samples: f64,
    /// Modes kept by the modal model.
    pub n_modes: f64,
    pub n_rays: f64,
    /// Reflection order of the ray tracer being compared against.
    pub n_reflections: f64,
}

impl ComplexityParams {
    /// Parameters of the three-room comparison with every endpoint moving.
    pub fn three_room(n_endpoints: f64) -> Self {
        ComplexityParams {
            n_patches: 140.0,
            visibility: 0.4,
            n_paths: Some(7982.0),
            n_sources: n_endpoints,
            n_listeners: n_endpoints,
            moved_sources: n_endpoints,
            moved_listeners: n_endpoints,
            n_samples: 2000.0,
            n_modes: 10.0,
            n_rays: 1e5,
            n_reflections: 100.0,
        }
    }

    pub fn paths(&self) -> f64 {
        self.n_paths
            .unwrap_or(self.visibility * self.n_patches * self.n_patches)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub rtm_naive: f64,
    pub rtm_tree: f64,
    pub tdart: f64,
    pub tdart_static_sources: f64,
    pub modart: f64,
}

/// One order of tracing from each moved source and listener.
pub fn tracing_cost(p: &ComplexityParams) -> f64 {
    (p.moved_sources + p.moved_listeners) * p.n_rays * p.n_patches.ln()
}

/// Sample-by-sample recursion with sparse input and output gains.
pub fn recursion_cost(p: &ComplexityParams) -> f64 {
    if p.n_sources + p.n_listeners == 0.0 {
        return 0.0;
    }
    p.n_samples * p.paths() * p.visibility * (p.n_sources + p.n_listeners + p.n_patches)
}

/// Residue dot products for the moved endpoints.
pub fn residue_dot_cost(p: &ComplexityParams) -> f64 {
    p.n_modes * p.paths() * p.visibility * (p.moved_sources + p.moved_listeners)
}

pub fn complexity_report(p: &ComplexityParams) -> ComplexityReport {
    let per_ray = p.n_listeners * p.n_reflections * p.n_rays;
    let static_sources = p.moved_listeners * p.n_rays * p.n_patches.ln()
        + p.n_samples * p.paths() * p.visibility * p.n_listeners;
    ComplexityReport {
        rtm_naive: per_ray * (p.n_patches + p.n_sources),
        rtm_tree: per_ray * (p.n_patches.ln() + p.n_sources),
        tdart: tracing_cost(p) + recursion_cost(p),
        tdart_static_sources: static_sources,
        modart: tracing_cost(p) + residue_dot_cost(p),
    }
}

/// Cost of one simultaneous-iteration sweep over all `n_states` estimates.
pub fn eai_sweep_cost(n_states: f64, n_paths: f64) -> f64 {
    n_states * n_states + n_states * n_paths.powi(3)
}

/// Sparse matrix-vector work for `n_modes` eigenvalues of the state transition matrix.
pub fn arnoldi_cost(n_modes: f64, n_states: f64, n_paths: f64, visibility: f64, n_patches: f64) -> f64 {
    n_modes * (n_states + n_paths * (visibility * n_patches - 1.0))
}

/// Columnar text: a header line, then one line per `(x, report)` row.
pub fn report_table(x_label: &str, rows: &[(f64, ComplexityReport)]) -> String {
    let mut s = format!("{x_label} rtm_naive rtm_tree tdart tdart_static_sources modart\n");
    for (x, r) in rows {
        writeln!(
            s,
            "{x} {:e} {:e} {:e} {:e} {:e}",
            r.rtm_naive, r.rtm_tree, r.tdart, r.tdart_static_sources, r.modart
        )
        .unwrap();
    }
    s
}

/// Reports for `N_S = N_R = n` over `counts`, all endpoints moving.
pub fn sweep_endpoints(base: &ComplexityParams, counts: impl IntoIterator<Item = usize>) -> Vec<(f64, ComplexityReport)> {
    counts
        .into_iter()
        .map(|n| {
            let n = n as f64;
            let p = ComplexityParams {
                n_sources: n,
                n_listeners: n,
                moved_sources: n,
                moved_listeners: n,
                ..*base
            };
            (n, complexity_report(&p))
        })
        .collect()
}

/// Reports over patch counts, with the path count following `ν·N_P²`.
pub fn sweep_patches(base: &ComplexityParams, patches: impl IntoIterator<Item = f64>) -> Vec<(f64, ComplexityReport)> {
    patches
        .into_iter()
        .map(|n_patches| {
            let p = ComplexityParams {
                n_patches,
                n_paths: None,
                ..*base
            };
            (n_patches, complexity_report(&p))
        })
        .collect()
}

/// Log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}
