//! The assembled radiance transfer system and its construction from a scene.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::{
    assemble_feedback, direct_gain, endpoint_gains, DelaySet, EndpointKind, FeedbackMatrix,
    GainSet, SparseGain, TraceConfig,
};
use crate::error::{Error, Result};
use crate::paths::{enumerate_paths_with, form_factors, PathSet, DEFAULT_VISIBILITY_QUORUM};
use crate::scene::{Scene, Vec3};
use crate::sparse::CsrMatrix;

/// Feedback matrix, delays, rate and endpoint gains.
#[derive(Debug, Clone)]
pub struct ArtSystem {
    pub feedback: FeedbackMatrix,
    pub delays: DelaySet,
    pub fs_e: f64,
    pub gains: GainSet,
}

impl ArtSystem {
    pub fn new(feedback: FeedbackMatrix, delays: DelaySet, fs_e: f64, gains: GainSet) -> Result<Self> {
        let n = feedback.n_paths();
        if delays.len() != n {
            return Err(Error::Dimension(format!(
                "{} delays for {n} paths",
                delays.len()
            )));
        }
        if !(fs_e > 0.0) {
            return Err(Error::Validation(format!("fs_e must be positive, got {fs_e}")));
        }
        for g in gains.sources.iter().chain(&gains.listeners) {
            if let Some(e) = g.entries.iter().find(|e| e.path >= n) {
                return Err(Error::Dimension(format!(
                    "gain entry on path {} but the system has {n} paths",
                    e.path
                )));
            }
        }
        if gains.direct.len() != gains.listeners.len()
            || gains.direct.iter().any(|row| row.len() != gains.sources.len())
        {
            return Err(Error::Dimension("direct gains must be listeners x sources".into()));
        }
        Ok(ArtSystem {
            feedback,
            delays,
            fs_e,
            gains,
        })
    }

    pub fn n_paths(&self) -> usize {
        self.feedback.n_paths()
    }

    pub fn n_sources(&self) -> usize {
        self.gains.n_sources()
    }

    pub fn n_listeners(&self) -> usize {
        self.gains.n_listeners()
    }

    /// Largest total input-plus-output delay, in whole samples.
    pub fn max_endpoint_delay(&self) -> usize {
        let max = |gs: &[SparseGain]| {
            gs.iter()
                .flat_map(|g| g.entries.iter().map(|e| e.delay))
                .fold(0.0f64, f64::max)
        };
        (max(&self.gains.sources).round() + max(&self.gains.listeners).round()) as usize
    }
}

/// Knobs for building a system from a scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub fs_e: f64,
    pub seed: u64,
    /// Form-factor rays per patch.
    pub patch_rays: usize,
    /// Rays per source or listener.
    pub endpoint_rays: usize,
    /// Air absorption coefficient per meter (energy).
    pub air_absorption: f64,
    /// Point pairs (of 16) that must see each other to connect two patches.
    pub visibility_quorum: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            fs_e: 1000.0,
            seed: 1,
            patch_rays: 4000,
            endpoint_rays: 20000,
            air_absorption: 0.0,
            visibility_quorum: DEFAULT_VISIBILITY_QUORUM,
        }
    }
}

/// A scene together with everything derived from it.
#[derive(Debug, Clone)]
pub struct SceneSystem {
    pub scene: Scene,
    pub paths: PathSet,
    pub form_factors: CsrMatrix,
    pub system: ArtSystem,
    pub config: BuildConfig,
}

impl SceneSystem {
    pub fn build(scene: Scene, config: BuildConfig) -> Result<Self> {
        if !(config.fs_e > 0.0) {
            return Err(Error::Validation(format!("fs_e must be positive, got {}", config.fs_e)));
        }
        let paths = enumerate_paths_with(&scene, config.visibility_quorum);
        let f = form_factors(&scene, config.patch_rays, config.seed);
        let feedback = assemble_feedback(&scene, &paths, &f, config.air_absorption);
        let delays = DelaySet::from_paths(&paths, config.fs_e, scene.speed_of_sound());
        let system_id = system_id(&scene, &config);
        let mut ss = SceneSystem {
            system: ArtSystem::new(
                feedback,
                delays,
                config.fs_e,
                GainSet {
                    sources: Vec::new(),
                    listeners: Vec::new(),
                    direct: Vec::new(),
                    system_id,
                },
            )?,
            scene,
            paths,
            form_factors: f,
            config,
        };
        let sources = ss.scene.sources();
        let listeners = ss.scene.listeners();
        ss.system.gains.sources = sources
            .iter()
            .enumerate()
            .map(|(i, p)| ss.trace(p, EndpointKind::Source, i))
            .collect();
        ss.system.gains.listeners = listeners
            .iter()
            .enumerate()
            .map(|(i, p)| ss.trace(p, EndpointKind::Listener, i))
            .collect();
        ss.system.gains.direct = listeners
            .iter()
            .map(|l| sources.iter().map(|s| direct_gain(&ss.scene, s, l, config.fs_e)).collect())
            .collect();
        Ok(ss)
    }

    pub fn trace_config(&self) -> TraceConfig {
        TraceConfig {
            n_rays: self.config.endpoint_rays,
            seed: self.config.seed,
            fs_e: self.config.fs_e,
        }
    }

    /// Gains of one endpoint at an arbitrary position (no containment check).
    pub fn trace(&self, position: &Vec3, kind: EndpointKind, index: usize) -> SparseGain {
        endpoint_gains(
            &self.scene,
            &self.paths,
            &self.form_factors,
            position,
            kind,
            index,
            &self.trace_config(),
        )
    }
}

fn system_id(scene: &Scene, config: &BuildConfig) -> String {
    let mut h = Sha256::new();
    h.update(scene.hash().as_bytes());
    h.update(serde_json::to_vec(config).expect("config serialises"));
    hex::encode(&h.finalize()[..16])
}
