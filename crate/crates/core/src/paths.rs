//! Volumetric paths between mutually visible patches, and form factors.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;

use crate::sampling::{self, streams, RayRng};
use crate::scene::{Ray, Scene, Vec3};
use crate::sparse::CsrMatrix;

/// Point pairs tested per patch pair when deciding visibility.
pub const VISIBILITY_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub from: usize,
    pub to: usize,
    pub length: f64,
}

/// Directed paths ordered by `(from, to)`.
#[derive(Debug, Clone)]
pub struct PathSet {
    paths: Vec<Path>,
    index: HashMap<(usize, usize), usize>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
}

impl PathSet {
    /// Builds a path set from directed pairs; pairs are sorted and deduplicated.
    pub fn new(n_patches: usize, mut paths: Vec<Path>) -> Self {
        paths.sort_by_key(|p| (p.from, p.to));
        paths.dedup_by_key(|p| (p.from, p.to));
        let mut index = HashMap::with_capacity(paths.len());
        let mut outgoing = vec![Vec::new(); n_patches];
        let mut incoming = vec![Vec::new(); n_patches];
        for (k, p) in paths.iter().enumerate() {
            index.insert((p.from, p.to), k);
            outgoing[p.from].push(k);
            incoming[p.to].push(k);
        }
        PathSet {
            paths,
            index,
            outgoing,
            incoming,
        }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn n_patches(&self) -> usize {
        self.outgoing.len()
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn get(&self, k: usize) -> &Path {
        &self.paths[k]
    }

    pub fn index_of(&self, from: usize, to: usize) -> Option<usize> {
        self.index.get(&(from, to)).copied()
    }

    /// Indices of paths departing `patch`, ordered by destination.
    pub fn outgoing(&self, patch: usize) -> &[usize] {
        &self.outgoing[patch]
    }

    /// Indices of paths arriving at `patch`, ordered by origin.
    pub fn incoming(&self, patch: usize) -> &[usize] {
        &self.incoming[patch]
    }

    /// Mean fraction of other patches visible from a patch.
    pub fn visibility_ratio(&self) -> f64 {
        let n = self.n_patches();
        if n < 2 {
            return 0.0;
        }
        self.len() as f64 / (n * (n - 1)) as f64
    }

    /// Triplet-style text table: header `n_paths`, then `from to length_m` per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.len());
        for p in &self.paths {
            s.push_str(&format!("{} {} {:e}\n", p.from, p.to, p.length));
        }
        s
    }
}

/// Stratum centers of a `4x4` grid over a patch.
fn visibility_points(scene: &Scene, patch: usize) -> Vec<Vec3> {
    let p = &scene.patches()[patch];
    (0..VISIBILITY_SAMPLES)
        .map(|i| {
            let (u, v) = sampling::stratum(i, VISIBILITY_SAMPLES, 0.5, 0.5);
            p.sample(u, v)
        })
        .collect()
}

/// Point pairs that must see each other for two patches to be connected.
pub const DEFAULT_VISIBILITY_QUORUM: usize = VISIBILITY_SAMPLES.div_ceil(2);

/// Mutual visibility between two patches: at least `quorum` of the point
/// pairs must face each other and see each other.
pub fn mutually_visible(scene: &Scene, a: usize, b: usize, pa: &[Vec3], pb: &[Vec3], quorum: usize) -> bool {
    let (patch_a, patch_b) = (&scene.patches()[a], &scene.patches()[b]);
    let tol = 1e-9 * scene.bounding_diagonal().max(1.0);
    let needed = quorum.clamp(1, VISIBILITY_SAMPLES);
    let mut seen = 0;
    for i in 0..VISIBILITY_SAMPLES {
        // Pair strata through a fixed permutation so pairs are not all parallel.
        let j = (i * 5 + 3) % VISIBILITY_SAMPLES;
        let (x, y) = (&pa[i], &pb[j]);
        if patch_a.signed_distance(y) > tol
            && patch_b.signed_distance(x) > tol
            && scene.line_of_sight(x, y)
        {
            seen += 1;
            if seen >= needed {
                return true;
            }
        }
    }
    false
}

/// All directed paths between mutually visible patches, using the default quorum.
pub fn enumerate_paths(scene: &Scene) -> PathSet {
    enumerate_paths_with(scene, DEFAULT_VISIBILITY_QUORUM)
}

pub fn enumerate_paths_with(scene: &Scene, quorum: usize) -> PathSet {
    let n = scene.n_patches();
    let points: Vec<Vec<Vec3>> = (0..n).map(|i| visibility_points(scene, i)).collect();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .collect();
    let visible: Vec<bool> = pairs
        .par_iter()
        .map(|&(a, b)| mutually_visible(scene, a, b, &points[a], &points[b], quorum))
        .collect();
    let patches = scene.patches();
    let mut paths = Vec::new();
    for (&(a, b), vis) in pairs.iter().zip(visible) {
        if vis {
            let length = (patches[a].centroid - patches[b].centroid).norm();
            paths.push(Path { from: a, to: b, length });
            paths.push(Path { from: b, to: a, length });
        }
    }
    PathSet::new(n, paths)
}

/// First-hit patch for each of `n_rays` cosine-distributed rays leaving `patch`.
pub fn trace_patch(scene: &Scene, patch: usize, n_rays: usize, seed: u64) -> Vec<usize> {
    let p = &scene.patches()[patch];
    let (t1, t2) = p.tangent_frame();
    let mut rng = RayRng::new(seed, streams::PATCH_BASE + patch as u64);
    (0..n_rays)
        .map(|r| {
            rng.seek(r as u64);
            let (u, v) = sampling::stratum(r, n_rays, rng.gen(), rng.gen());
            let origin = p.sample(u, v);
            let dir = sampling::cosine_hemisphere(rng.gen(), rng.gen(), &p.normal, &t1, &t2);
            scene
                .intersect(&Ray::new(origin, dir))
                .expect("watertight scene")
                .polygon_index
        })
        .collect()
}

/// Monte-Carlo form factors: `F[i][j]` is the fraction of diffuse rays
/// leaving patch `i` whose first hit is patch `j`. Rows sum to one.
pub fn form_factors(scene: &Scene, n_rays_per_patch: usize, seed: u64) -> CsrMatrix {
    let n = scene.n_patches();
    let n_rays = n_rays_per_patch.max(1);
    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut counts = vec![0usize; n];
            for j in trace_patch(scene, i, n_rays, seed) {
                counts[j] += 1;
            }
            counts
        })
        .collect();
    let mut triplets = Vec::new();
    for (i, counts) in rows.iter().enumerate() {
        for (j, &c) in counts.iter().enumerate() {
            if c > 0 {
                triplets.push((i, j, c as f64 / n_rays as f64));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &triplets).expect("indices in range")
}

/// Fraction of each patch's form-factor mass landing on patches it has no path to.
pub fn unreachable_mass(paths: &PathSet, f: &CsrMatrix) -> Vec<f64> {
    (0..f.rows())
        .map(|i| {
            f.row(i)
                .filter(|&(j, _)| paths.index_of(i, j).is_none())
                .map(|(_, v)| v)
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn unit_shoebox_has_thirty_paths() {
        let scene = fixtures::shoebox([1.0, 1.0, 1.0], 0.5).unwrap();
        let paths = enumerate_paths(&scene);
        assert_eq!(paths.len(), 30);
        for p in paths.paths() {
            assert!(paths.index_of(p.to, p.from).is_some());
        }
    }

    #[test]
    fn shoebox_rows_sum_to_one_and_no_self_hits() {
        let scene = fixtures::shoebox([1.0, 1.0, 1.0], 0.5).unwrap();
        let f = form_factors(&scene, 500, 3);
        for i in 0..6 {
            let s: f64 = f.row(i).map(|(_, v)| v).sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert_eq!(f.get(i, i), 0.0);
        }
    }

    #[test]
    fn form_factors_are_deterministic() {
        let scene = fixtures::shoebox([1.0, 1.3, 0.8], 0.5).unwrap();
        assert_eq!(form_factors(&scene, 200, 9), form_factors(&scene, 200, 9));
    }

    #[test]
    fn coplanar_patches_do_not_see_each_other() {
        let scene = fixtures::shoebox32().unwrap();
        let paths = enumerate_paths(&scene);
        for p in paths.paths() {
            let (a, b) = (&scene.patches()[p.from], &scene.patches()[p.to]);
            assert!(a.normal.dot(&b.normal) < 1.0 - 1e-9);
        }
    }
}
