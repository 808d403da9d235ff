//! Modal models: poles with their eigenvectors and undriven residues.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::descriptors::{magnitude_threshold, pole_descriptors};
use crate::error::{Error, Result};
use crate::loops::LoopOperator;
use crate::system::ArtSystem;

/// Imaginary parts at or below this count as real when selecting real poles.
pub const REAL_TOLERANCE: f64 = 1e-10;

/// Denominators of the undriven residue below this signal a repeated pole.
pub const DEGENERACY_LIMIT: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Eai,
    Arnoldi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DelayMode {
    Integer,
    Fractional,
}

impl DelayMode {
    pub fn is_fractional(self) -> bool {
        self == DelayMode::Fractional
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub value: Complex64,
    pub magnitude: f64,
    pub phase: f64,
    pub t60_s: f64,
    pub freq_hz: f64,
    pub backend: Backend,
}

impl Pole {
    pub fn new(value: Complex64, fs_e: f64, backend: Backend) -> Result<Self> {
        let (t60_s, freq_hz) = pole_descriptors(value, fs_e)?;
        Ok(Pole {
            value,
            magnitude: value.norm(),
            phase: value.arg(),
            t60_s,
            freq_hz,
            backend,
        })
    }

    pub fn is_real_positive(&self) -> bool {
        self.value.im.abs() <= REAL_TOLERANCE && self.value.re > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModePair {
    pub pole: Pole,
    pub left: Vec<Complex64>,
    pub right: Vec<Complex64>,
    pub undriven_residue: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalModel {
    /// Sorted by descending pole magnitude.
    pub modes: Vec<ModePair>,
    pub fs_e: f64,
    pub transition_time_s: f64,
    pub delay_mode: DelayMode,
    /// Identifier of the system the model was decomposed from.
    pub system_id: String,
    /// Whether the model holds every pole of the system.
    pub complete: bool,
    /// First sample from which a complete model's sum is exact; earlier
    /// samples still carry the delay lines' finite transient.
    #[serde(default)]
    pub settle_samples: usize,
}

impl ModalModel {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn poles(&self) -> impl Iterator<Item = &Pole> {
        self.modes.iter().map(|m| &m.pole)
    }
}

/// Which poles a model keeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    All,
    RealPositive,
    /// Modes whose |frequency| lies in `[lo, hi]` Hz.
    Band { lo: f64, hi: f64 },
}

/// Left and right null vectors `(u, v)` of the loop matrix at `pole`,
/// both of unit norm with the first nonzero entry real positive.
pub fn eigenvectors_at(op: &LoopOperator, pole: Complex64) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    op.null_vectors(pole)
}

/// Scalar factor of the residue that does not depend on sources or
/// listeners, scaled so that the mode contributes `R·pⁿ` at sample `n`.
pub fn undriven_residue(op: &LoopOperator, pole: Complex64, u: &[Complex64], v: &[Complex64]) -> Result<Complex64> {
    let denominator = -pole * op.derivative_form(pole, u, v);
    if denominator.norm() < DEGENERACY_LIMIT {
        return Err(Error::DegenerateMode {
            z: pole,
            denominator: denominator.norm(),
        });
    }
    Ok(denominator.inv())
}

/// Poles passing the magnitude threshold for `t_tr` and the selection
/// criterion, conjugate-closed unless only real poles are requested.
pub fn select_poles(poles: &[Pole], t_tr: f64, fs_e: f64, selection: Selection) -> Result<Vec<Pole>> {
    let theta = magnitude_threshold(t_tr, fs_e);
    let above = |p: &&Pole| p.magnitude >= theta;
    let mut kept: Vec<Pole> = match selection {
        Selection::RealPositive => poles
            .iter()
            .filter(above)
            .filter(|p| p.is_real_positive())
            .copied()
            .collect(),
        Selection::All => poles.iter().filter(above).copied().collect(),
        Selection::Band { lo, hi } => poles
            .iter()
            .filter(above)
            .filter(|p| (lo..=hi).contains(&p.freq_hz.abs()))
            .copied()
            .collect(),
    };
    if selection != Selection::RealPositive {
        let missing: Vec<Pole> = kept
            .iter()
            .filter(|p| p.value.im != 0.0)
            .filter(|p| !kept.iter().any(|q| q.value == p.value.conj()))
            .map(|p| Pole::new(p.value.conj(), fs_e, p.backend))
            .collect::<Result<_>>()?;
        kept.extend(missing);
    }
    if kept.is_empty() {
        return Err(Error::EmptySelection {
            threshold: theta,
            max_magnitude: poles.iter().map(|p| p.magnitude).fold(0.0, f64::max),
        });
    }
    kept.sort_by(|a, b| {
        b.magnitude
            .total_cmp(&a.magnitude)
            .then(b.value.im.total_cmp(&a.value.im))
    });
    Ok(kept)
}

/// Builds the modal model for `poles` of `system`. Repeated poles are
/// skipped with a warning; conjugate partners share mirrored vectors.
pub fn build_model(
    system: &ArtSystem,
    poles: &[Pole],
    t_tr: f64,
    selection: Selection,
    delay_mode: DelayMode,
    complete: bool,
) -> Result<ModalModel> {
    let op = LoopOperator::new(&system.feedback, system.delays.values(delay_mode.is_fractional()))?;
    let selected = select_poles(poles, t_tr, system.fs_e, selection)?;
    let mut modes: Vec<ModePair> = Vec::with_capacity(selected.len());
    for pole in selected {
        if pole.value.im < 0.0 {
            if let Some(partner) = modes.iter().find(|m| m.pole.value == pole.value.conj()) {
                let mirrored = ModePair {
                    pole,
                    left: partner.left.iter().map(|c| c.conj()).collect(),
                    right: partner.right.iter().map(|c| c.conj()).collect(),
                    undriven_residue: partner.undriven_residue.conj(),
                };
                modes.push(mirrored);
                continue;
            }
        }
        let (left, right) = eigenvectors_at(&op, pole.value)?;
        match undriven_residue(&op, pole.value, &left, &right) {
            Ok(undriven_residue) => modes.push(ModePair {
                pole,
                left,
                right,
                undriven_residue,
            }),
            Err(e @ Error::DegenerateMode { .. }) => log::warn!("skipping mode: {e}"),
            Err(e) => return Err(e),
        }
    }
    // A skipped upper partner leaves an orphaned lower one.
    let orphans: Vec<Complex64> = modes
        .iter()
        .filter(|m| m.pole.value.im != 0.0)
        .filter(|m| !modes.iter().any(|o| o.pole.value == m.pole.value.conj()))
        .map(|m| m.pole.value)
        .collect();
    modes.retain(|m| !orphans.contains(&m.pole.value));
    Ok(ModalModel {
        modes,
        fs_e: system.fs_e,
        transition_time_s: t_tr,
        delay_mode,
        system_id: system.gains.system_id.clone(),
        complete,
        settle_samples: 0,
    })
}
