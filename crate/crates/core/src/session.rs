//! Interactive state: a fixed modal model with movable sources and listeners.
//!
//! A move re-traces one endpoint and recomputes only that endpoint's
//! couplings. The modal model and the system it came from are shared and
//! never mutated, so readers can hold a snapshot while a move is applied.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::{direct_gain, EndpointKind, GainSet, SparseGain};
use crate::error::{Error, Result};
use crate::modal::ModalModel;
use crate::render::{listener_coupling, render_pair, residue_components, source_coupling, ResidueComponents};
use crate::scene::Vec3;
use crate::system::SceneSystem;

/// Trace index offset for residue-map probes, clear of real listener indices.
const PROBE_INDEX_BASE: usize = 1 << 32;

/// Work done by one move, or accumulated over many.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveCost {
    pub rays: u64,
    pub dot_products: u64,
    pub wall_us: u64,
}

impl std::ops::AddAssign for MoveCost {
    fn add_assign(&mut self, o: MoveCost) {
        self.rays += o.rays;
        self.dot_products += o.dot_products;
        self.wall_us += o.wall_us;
    }
}

/// Endpoint-dependent state at one revision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub revision: u64,
    pub sources: Vec<[f64; 3]>,
    pub listeners: Vec<[f64; 3]>,
    pub gains: GainSet,
    pub residues: ResidueComponents,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveOutcome {
    pub revision: u64,
    pub kind: EndpointKind,
    pub index: usize,
    pub cost: MoveCost,
}

/// Content hashes of everything a move must leave alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedHashes {
    pub feedback: String,
    pub delays: String,
    pub poles: String,
    pub eigenvectors: String,
    pub undriven: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: f64,
    pub y: f64,
    /// Real residue per requested mode.
    pub values: Vec<f64>,
}

/// Residues over a horizontal listener grid for a fixed source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidueGrid {
    pub revision: u64,
    pub grid: usize,
    pub z: f64,
    pub source: usize,
    pub modes: Vec<usize>,
    /// Cell centers inside the enclosure, row-major from the lowest `y`.
    pub points: Vec<GridPoint>,
}

type ProbeSet = Arc<Vec<(f64, f64, SparseGain)>>;

/// Moves are serialized by the writer lock; readers clone the current
/// snapshot pointer and never wait for a move in progress.
pub struct Session {
    id: String,
    system: Arc<SceneSystem>,
    model: Arc<ModalModel>,
    writer: Mutex<MoveCost>,
    snapshot: RwLock<Arc<Snapshot>>,
    probes: Mutex<HashMap<(usize, u64), ProbeSet>>,
}

impl Session {
    /// Starts at revision 0 with the scene's own endpoints.
    pub fn new(id: impl Into<String>, system: Arc<SceneSystem>, model: Arc<ModalModel>) -> Result<Self> {
        let gains = system.system.gains.clone();
        let residues = residue_components(&model, &gains)?;
        let snapshot = Snapshot {
            revision: 0,
            sources: system.scene.sources().iter().map(|v| [v.x, v.y, v.z]).collect(),
            listeners: system.scene.listeners().iter().map(|v| [v.x, v.y, v.z]).collect(),
            gains,
            residues,
        };
        Ok(Session {
            id: id.into(),
            system,
            model,
            writer: Mutex::new(MoveCost::default()),
            snapshot: RwLock::new(Arc::new(snapshot)),
            probes: Mutex::new(HashMap::new()),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn system(&self) -> &Arc<SceneSystem> {
        &self.system
    }

    pub fn model(&self) -> &Arc<ModalModel> {
        &self.model
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        Arc::clone(&self.snapshot.read().expect("snapshot lock"))
    }

    pub fn revision(&self) -> u64 {
        self.snapshot().revision
    }

    pub fn total_cost(&self) -> MoveCost {
        *self.writer.lock().expect("writer lock")
    }

    /// Moves one endpoint, failing with a conflict if `expected` is given
    /// and differs from the current revision.
    pub fn move_checked(
        &self,
        expected: Option<u64>,
        kind: EndpointKind,
        index: usize,
        position: [f64; 3],
    ) -> Result<MoveOutcome> {
        self.apply_move(expected, kind, index, position).map(|(o, _)| o)
    }

    /// [`Session::move_checked`] that also returns the snapshot the move produced.
    pub fn apply_move(
        &self,
        expected: Option<u64>,
        kind: EndpointKind,
        index: usize,
        position: [f64; 3],
    ) -> Result<(MoveOutcome, Arc<Snapshot>)> {
        let mut totals = self.writer.lock().expect("writer lock");
        let start = Instant::now();
        let old = self.snapshot();
        if let Some(expected) = expected {
            if expected != old.revision {
                return Err(Error::RevisionConflict {
                    expected,
                    current: old.revision,
                });
            }
        }
        let count = match kind {
            EndpointKind::Source => old.sources.len(),
            EndpointKind::Listener => old.listeners.len(),
        };
        if index >= count {
            return Err(Error::Validation(format!(
                "{} index {index} out of range ({count} present)",
                kind.as_str()
            )));
        }
        let p = Vec3::from(position);
        if !position.iter().all(|c| c.is_finite()) || !self.system.scene.contains_point(&p) {
            return Err(Error::OutOfEnclosure {
                kind: kind.as_str(),
                index,
                position,
            });
        }

        let gain = self.system.trace(&p, kind, index);
        let dm = self.model.delay_mode;
        let couplings: Vec<Complex64> = self
            .model
            .modes
            .iter()
            .map(|m| match kind {
                EndpointKind::Source => source_coupling(m, &gain, dm),
                EndpointKind::Listener => listener_coupling(m, &gain, dm),
            })
            .collect();
        let cost = MoveCost {
            rays: self.system.config.endpoint_rays as u64,
            dot_products: (self.model.len() * gain.nnz()) as u64,
            wall_us: 0,
        };

        let mut next = Snapshot::clone(&old);
        let scene = &self.system.scene;
        let fs_e = self.system.config.fs_e;
        match kind {
            EndpointKind::Source => {
                next.sources[index] = position;
                next.gains.sources[index] = gain;
                for (row, c) in next.residues.source.iter_mut().zip(&couplings) {
                    row[index] = *c;
                }
                for (l, lp) in next.listeners.iter().enumerate() {
                    next.gains.direct[l][index] = direct_gain(scene, &p, &Vec3::from(*lp), fs_e);
                }
            }
            EndpointKind::Listener => {
                next.listeners[index] = position;
                next.gains.listeners[index] = gain;
                for (row, c) in next.residues.listener.iter_mut().zip(&couplings) {
                    row[index] = *c;
                }
                for (s, sp) in next.sources.iter().enumerate() {
                    next.gains.direct[index][s] = direct_gain(scene, &Vec3::from(*sp), &p, fs_e);
                }
            }
        }
        next.revision += 1;
        let revision = next.revision;
        let next = Arc::new(next);
        *self.snapshot.write().expect("snapshot lock") = Arc::clone(&next);

        let cost = MoveCost {
            wall_us: start.elapsed().as_micros() as u64,
            ..cost
        };
        *totals += cost;
        let outcome = MoveOutcome {
            revision,
            kind,
            index,
            cost,
        };
        Ok((outcome, next))
    }

    /// Re-traces one endpoint at `position` and updates only its couplings.
    pub fn move_endpoint(&self, kind: EndpointKind, index: usize, position: [f64; 3]) -> Result<MoveOutcome> {
        self.move_checked(None, kind, index, position)
    }

    pub fn fixed_hashes(&self) -> FixedHashes {
        let fb = &self.system.system.feedback;
        let modes = &self.model.modes;
        FixedHashes {
            feedback: digest(&fb.matrix.to_triplet_text()),
            delays: digest(&self.system.system.delays),
            poles: digest(&modes.iter().map(|m| m.pole.value).collect::<Vec<_>>()),
            eigenvectors: digest(&modes.iter().map(|m| (&m.left, &m.right)).collect::<Vec<_>>()),
            undriven: digest(&modes.iter().map(|m| m.undriven_residue).collect::<Vec<_>>()),
        }
    }

    /// Residues of `modes` for source `source` over a `grid x grid` lattice
    /// of cell centers spanning the scene's horizontal bounds at height `z`
    /// (default: the first listener's height). Points outside the enclosure
    /// are left out. Probe gains are cached per `(grid, z)`.
    pub fn residue_grid(&self, modes: &[usize], grid: usize, z: Option<f64>, source: usize) -> Result<ResidueGrid> {
        let snap = self.snapshot();
        if grid == 0 {
            return Err(Error::Validation("grid must be at least 1".into()));
        }
        if source >= snap.sources.len() {
            return Err(Error::Validation(format!("source {source} out of range")));
        }
        if let Some(&m) = modes.iter().find(|&&m| m >= self.model.len()) {
            return Err(Error::Validation(format!("mode {m} out of range ({} modes)", self.model.len())));
        }
        let (lo, hi) = self.system.scene.bounds();
        let z = z.unwrap_or_else(|| snap.listeners.first().map_or(0.5 * (lo.z + hi.z), |l| l[2]));
        let probes = self.probes(grid, z);
        let dm = self.model.delay_mode;
        let points = probes
            .par_iter()
            .map(|(x, y, gain)| GridPoint {
                x: *x,
                y: *y,
                values: modes
                    .iter()
                    .map(|&m| {
                        let mode = &self.model.modes[m];
                        let c = listener_coupling(mode, gain, dm);
                        (c * snap.residues.source[m][source].conj() * snap.residues.undriven[m]).re
                    })
                    .collect(),
            })
            .collect();
        Ok(ResidueGrid {
            revision: snap.revision,
            grid,
            z,
            source,
            modes: modes.to_vec(),
            points,
        })
    }

    fn probes(&self, grid: usize, z: f64) -> ProbeSet {
        let key = (grid, z.to_bits());
        if let Some(p) = self.probes.lock().expect("probe cache").get(&key) {
            return Arc::clone(p);
        }
        let (lo, hi) = self.system.scene.bounds();
        let (dx, dy) = ((hi.x - lo.x) / grid as f64, (hi.y - lo.y) / grid as f64);
        let cells: Vec<(usize, f64, f64)> = (0..grid * grid)
            .map(|c| {
                let (i, j) = (c % grid, c / grid);
                (c, lo.x + (i as f64 + 0.5) * dx, lo.y + (j as f64 + 0.5) * dy)
            })
            .filter(|&(_, x, y)| self.system.scene.contains_point(&Vec3::new(x, y, z)))
            .collect();
        let set: ProbeSet = Arc::new(
            cells
                .into_iter()
                .map(|(c, x, y)| {
                    let g = self.system.trace(&Vec3::new(x, y, z), EndpointKind::Listener, PROBE_INDEX_BASE + c);
                    (x, y, g)
                })
                .collect(),
        );
        self.probes.lock().expect("probe cache").insert(key, Arc::clone(&set));
        set
    }
}

/// Renders one pair of a snapshot.
pub fn render_snapshot(
    model: &ModalModel,
    snap: &Snapshot,
    listener: usize,
    source: usize,
    n_samples: usize,
    include_direct: bool,
) -> Result<Vec<f64>> {
    if listener >= snap.listeners.len() || source >= snap.sources.len() {
        return Err(Error::Validation(format!("no pair (listener {listener}, source {source})")));
    }
    if n_samples == 0 {
        return Err(Error::Validation("n must be at least 1".into()));
    }
    let direct = if include_direct { snap.gains.direct[listener][source] } else { None };
    render_pair(model, &snap.residues, listener, source, direct, n_samples)
}

fn digest<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("hashable value serialises");
    hex::encode(Sha256::digest(bytes))
}
