use num_complex::Complex64;
use thiserror::Error;

/// Errors raised anywhere in the engine.
///
/// Variants are grouped so that front-ends can map them onto exit codes:
/// input problems (`Parse`, `Validation`, ...) versus numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {source_name}: {message}")]
    Parse { source_name: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("simulation unstable: sample {sample} of path/output {index} reached {value:e}")]
    Instability { sample: usize, index: usize, value: f64 },

    #[error("transfer function is singular at z = {z} (condition number {condition:e})")]
    Singularity { z: Complex64, condition: f64 },

    #[error("pole search did not converge after {iterations} iterations; {unconverged} estimates still moving")]
    NoConvergence {
        iterations: usize,
        unconverged: usize,
        survivors: Vec<Complex64>,
    },

    #[error("krylov breakdown persisted after {restarts} restarts")]
    Breakdown { restarts: usize },

    #[error("{z} is not a pole: smallest singular value {sigma_min:e} exceeds {bound:e}")]
    NotAPole { z: Complex64, sigma_min: f64, bound: f64 },

    #[error("degenerate mode at {z}: residue denominator {denominator:e}")]
    DegenerateMode { z: Complex64, denominator: f64 },

    #[error("no pole passes the selection (threshold {threshold}, largest magnitude {max_magnitude})")]
    EmptySelection { threshold: f64, max_magnitude: f64 },

    #[error("gain set and modal model were built from different scenes ({gains} vs {model})")]
    StaleModel { gains: String, model: String },

    #[error("rendered response is not real: imaginary residue {imag:e} vs norm {norm:e}")]
    NonRealOutput { imag: f64, norm: f64 },

    #[error("full decomposition produced significant negative energy {value:e} at sample {sample}")]
    Negativity { sample: usize, value: f64 },

    #[error("pole magnitude is 1; T60 is undefined")]
    UndefinedT60,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("energy response contains negative value {value:e} at sample {sample}")]
    NegativeEnergy { sample: usize, value: f64 },

    #[error("{kind} {index} at {position:?} is outside the enclosure")]
    OutOfEnclosure {
        kind: &'static str,
        index: usize,
        position: [f64; 3],
    },

    #[error("incompatible options: {0}")]
    IncompatibleFlags(String),

    #[error("revision conflict: expected {expected}, current {current}")]
    RevisionConflict { expected: u64, current: u64 },
}

impl Error {
    /// True for errors caused by bad input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::Io { .. }
                | Error::Dimension(_)
                | Error::OutOfEnclosure { .. }
                | Error::IncompatibleFlags(_)
                | Error::StaleModel { .. }
                | Error::Domain(_)
        )
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
