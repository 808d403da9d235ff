//! Feedback matrix, delays, and endpoint gains of the radiance transfer system.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::PathSet;
use crate::sampling::{self, streams, RayRng};
use crate::scene::{Ray, Scene, Vec3};
use crate::sparse::CsrMatrix;

/// Patch-level factorisation `A = S·R` of a reflection kernel.
///
/// `R` collects the energy arriving at each patch and `S` redistributes it
/// over the departing paths, so `A[(b→c),(a→b)] = departure_gain[(b→c)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchFactors {
    pub n_patches: usize,
    pub from: Vec<usize>,
    pub to: Vec<usize>,
    pub departure_gain: Vec<f64>,
}

impl PatchFactors {
    pub fn n_paths(&self) -> usize {
        self.from.len()
    }
}

/// Sparse nonnegative feedback matrix, with its patch factorisation when the
/// matrix came from a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackMatrix {
    pub matrix: CsrMatrix,
    pub factors: Option<PatchFactors>,
}

impl FeedbackMatrix {
    /// Wraps an arbitrary square matrix (no patch structure).
    pub fn from_matrix(matrix: CsrMatrix) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(Error::Dimension(format!(
                "feedback matrix must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(FeedbackMatrix {
            matrix,
            factors: None,
        })
    }

    /// Expands patch factors into the explicit matrix. Every structural entry
    /// is stored, including zero gains.
    pub fn from_factors(factors: PatchFactors) -> Self {
        let n = factors.n_paths();
        let mut incoming = vec![Vec::new(); factors.n_patches];
        for k in 0..n {
            incoming[factors.to[k]].push(k);
        }
        let mut triplets = Vec::new();
        for row in 0..n {
            let b = factors.from[row];
            for &col in &incoming[b] {
                triplets.push((row, col, factors.departure_gain[row]));
            }
        }
        let matrix = CsrMatrix::from_triplets(n, n, &triplets).expect("indices in range");
        FeedbackMatrix {
            matrix,
            factors: Some(factors),
        }
    }

    pub fn n_paths(&self) -> usize {
        self.matrix.rows()
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }
}

/// Ideal-diffuse kernel: energy arriving at `b` leaves along `(b→c)` with
/// weight `(1−α_b)·F[b][c]·exp(−μ·length)`.
pub fn assemble_feedback(scene: &Scene, paths: &PathSet, f: &CsrMatrix, air_absorption: f64) -> FeedbackMatrix {
    let patches = scene.patches();
    let gains = paths
        .paths()
        .iter()
        .map(|p| {
            (1.0 - patches[p.from].alpha) * f.get(p.from, p.to) * (-air_absorption * p.length).exp()
        })
        .collect();
    FeedbackMatrix::from_factors(PatchFactors {
        n_patches: scene.n_patches(),
        from: paths.paths().iter().map(|p| p.from).collect(),
        to: paths.paths().iter().map(|p| p.to).collect(),
        departure_gain: gains,
    })
}

/// Per-path propagation delays in samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySet {
    pub real: Vec<f64>,
    pub integer: Vec<usize>,
}

impl DelaySet {
    pub fn from_real(real: Vec<f64>) -> Self {
        let integer = real.iter().map(|&d| (d.round() as usize).max(1)).collect();
        DelaySet { real, integer }
    }

    pub fn from_integer(integer: Vec<usize>) -> Self {
        DelaySet {
            real: integer.iter().map(|&d| d as f64).collect(),
            integer,
        }
    }

    pub fn from_paths(paths: &PathSet, fs_e: f64, speed_of_sound: f64) -> Self {
        DelaySet::from_real(
            paths
                .paths()
                .iter()
                .map(|p| p.length * fs_e / speed_of_sound)
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.real.len()
    }

    pub fn is_empty(&self) -> bool {
        self.real.is_empty()
    }

    /// Delays as used by the pole search: real-valued or rounded.
    pub fn values(&self, fractional: bool) -> Vec<f64> {
        if fractional {
            self.real.clone()
        } else {
            self.integer.iter().map(|&d| d as f64).collect()
        }
    }

    /// Total state count `Σ integer delays`.
    pub fn total(&self) -> usize {
        self.integer.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainEntry {
    pub path: usize,
    pub gain: f64,
    /// Delay in samples at the system rate.
    pub delay: f64,
}

/// Sparse gain vector, entries sorted by path index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseGain {
    pub entries: Vec<GainEntry>,
}

impl SparseGain {
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn total_gain(&self) -> f64 {
        self.entries.iter().map(|e| e.gain).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectGain {
    pub gain: f64,
    pub delay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndpointKind {
    Source,
    Listener,
}

impl EndpointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EndpointKind::Source => "source",
            EndpointKind::Listener => "listener",
        }
    }

    fn stream(self, index: usize) -> u64 {
        match self {
            EndpointKind::Source => streams::SOURCE_BASE + index as u64,
            EndpointKind::Listener => streams::LISTENER_BASE + index as u64,
        }
    }
}

/// Input gains per source, output gains per listener, and direct terms
/// indexed `[listener][source]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSet {
    pub sources: Vec<SparseGain>,
    pub listeners: Vec<SparseGain>,
    pub direct: Vec<Vec<Option<DirectGain>>>,
    /// Identifies the system the gains were traced against.
    pub system_id: String,
}

impl GainSet {
    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn n_listeners(&self) -> usize {
        self.listeners.len()
    }
}

/// Settings shared by every endpoint trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceConfig {
    pub n_rays: usize,
    pub seed: u64,
    pub fs_e: f64,
}

/// Traces one endpoint with uniformly distributed rays.
///
/// A source ray reaching patch `p` feeds every path `(p→q)` with
/// `(1−α_p)·F[p][q]/n_rays`. A listener ray reaching `p` gathers the energy
/// departing `p` with weight `4/(n_rays·area_p)`, which turns patch exitance
/// into intensity at the listener. Each entry's delay is the gain-weighted
/// mean ray length. Rays are seeded from `(seed, kind, index)` so a re-trace
/// at the same position is bit-identical.
pub fn endpoint_gains(
    scene: &Scene,
    paths: &PathSet,
    f: &CsrMatrix,
    position: &Vec3,
    kind: EndpointKind,
    index: usize,
    cfg: &TraceConfig,
) -> SparseGain {
    let n_rays = cfg.n_rays.max(1);
    let stream = kind.stream(index);
    let hits: Vec<(usize, f64)> = (0..n_rays)
        .into_par_iter()
        .map(|r| {
            let mut rng = RayRng::new(cfg.seed, stream);
            rng.seek(r as u64);
            let dir = sampling::uniform_sphere(rng.gen(), rng.gen());
            let hit = scene
                .intersect(&Ray::new(*position, dir))
                .expect("watertight scene");
            (hit.polygon_index, hit.distance)
        })
        .collect();

    let patches = scene.patches();
    let to_samples = cfg.fs_e / scene.speed_of_sound();
    let mut gain = vec![0.0f64; paths.len()];
    let mut weighted_delay = vec![0.0f64; paths.len()];
    let mut plain = vec![(0.0f64, 0usize); paths.len()];
    for (p, d) in hits {
        let delay = d * to_samples;
        let patch = &patches[p];
        for &k in paths.outgoing(p) {
            let g = match kind {
                EndpointKind::Source => {
                    (1.0 - patch.alpha) * f.get(p, paths.get(k).to) / n_rays as f64
                }
                EndpointKind::Listener => 4.0 / (n_rays as f64 * patch.area),
            };
            gain[k] += g;
            weighted_delay[k] += g * delay;
            plain[k].0 += delay;
            plain[k].1 += 1;
        }
    }
    // Zero-gain entries keep the unweighted mean arrival delay.
    let entries = (0..paths.len())
        .filter(|&k| plain[k].1 > 0)
        .map(|k| GainEntry {
            path: k,
            gain: gain[k],
            delay: if gain[k] > 0.0 {
                weighted_delay[k] / gain[k]
            } else {
                plain[k].0 / plain[k].1 as f64
            },
        })
        .collect();
    SparseGain { entries }
}

/// Line-of-sight term: inverse-square gain and propagation delay.
pub fn direct_gain(scene: &Scene, source: &Vec3, listener: &Vec3, fs_e: f64) -> Option<DirectGain> {
    let r = (listener - source).norm();
    if r < 1e-9 || !scene.line_of_sight(source, listener) {
        return None;
    }
    Some(DirectGain {
        gain: 1.0 / (4.0 * PI * r * r),
        delay: r * fs_e / scene.speed_of_sound(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::paths::{enumerate_paths, form_factors};

    fn shoebox_parts(alpha: f64) -> (Scene, PathSet, CsrMatrix) {
        let scene = fixtures::shoebox([1.0, 1.3, 0.8], alpha).unwrap();
        let paths = enumerate_paths(&scene);
        let f = form_factors(&scene, 400, 1);
        (scene, paths, f)
    }

    #[test]
    fn lossless_columns_sum_to_one() {
        let (scene, paths, f) = shoebox_parts(0.0);
        let a = assemble_feedback(&scene, &paths, &f, 0.0);
        for s in a.matrix.column_sums() {
            assert!((s - 1.0).abs() < 1e-12, "{s}");
        }
    }

    #[test]
    fn nnz_matches_degree_products() {
        let (scene, paths, f) = shoebox_parts(0.3);
        let a = assemble_feedback(&scene, &paths, &f, 0.0);
        let expect: usize = (0..scene.n_patches())
            .map(|b| paths.incoming(b).len() * paths.outgoing(b).len())
            .sum();
        assert_eq!(a.nnz(), expect);
    }

    #[test]
    fn total_absorber_zeroes_departing_rows() {
        let mut d = fixtures::shoebox_description([1.0, 1.3, 0.8], 0.3);
        d.materials.push(crate::scene::MaterialDescription { alpha: 1.0 });
        d.polygons[2].material_id = 1;
        let scene = Scene::from_description(d).unwrap();
        let paths = enumerate_paths(&scene);
        let f = form_factors(&scene, 200, 1);
        let a = assemble_feedback(&scene, &paths, &f, 0.0);
        for &k in paths.outgoing(2) {
            assert!(a.matrix.row(k).all(|(_, v)| v == 0.0));
        }
        for &k in paths.incoming(2) {
            assert!(a.matrix.row(k).any(|(_, v)| v > 0.0));
        }
    }

    #[test]
    fn integer_delays_round_with_floor_of_one() {
        let d = DelaySet::from_real(vec![0.2, 1.49, 1.51, 7.0]);
        assert_eq!(d.integer, vec![1, 1, 2, 7]);
        assert_eq!(d.total(), 11);
    }

    #[test]
    fn direct_gain_inverse_square() {
        let scene = fixtures::shoebox([4.0, 4.0, 4.0], 0.5).unwrap();
        let a = Vec3::new(1.0, 2.0, 2.0);
        let g = direct_gain(&scene, &a, &Vec3::new(2.0, 2.0, 2.0), 1000.0).unwrap();
        assert!((g.gain - 1.0 / (4.0 * PI)).abs() < 1e-15);
        let g = direct_gain(&scene, &a, &Vec3::new(3.0, 2.0, 2.0), 1000.0).unwrap();
        assert!((g.gain - 1.0 / (16.0 * PI)).abs() < 1e-15);
        assert!((g.delay - 2000.0 / 343.0).abs() < 1e-12);
    }

    #[test]
    fn listener_support_covers_every_departing_path() {
        let (scene, paths, f) = shoebox_parts(0.3);
        let cfg = TraceConfig { n_rays: 2000, seed: 5, fs_e: 1000.0 };
        let g = endpoint_gains(&scene, &paths, &f, &Vec3::new(0.5, 0.6, 0.4), EndpointKind::Listener, 0, &cfg);
        assert_eq!(g.nnz(), paths.len());
        assert!(g.entries.iter().all(|e| e.gain > 0.0 && e.delay > 0.0));
    }
}
