//! One-call modal decomposition of an assembled system.

use serde::{Deserialize, Serialize};

use crate::arnoldi::{arnoldi_poles, conjugate_close, dense_core, ArnoldiOptions, Want};
use crate::eai::{eai_poles, EaiOptions, Restrict};
use crate::error::{Error, Result};
use crate::loops::LoopOperator;
use crate::modal::{build_model, Backend, DelayMode, ModalModel, Pole, Selection};
use crate::state_space::build_state_transition;
use crate::system::ArtSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    pub backend: Backend,
    pub t_tr: f64,
    pub restrict: Restrict,
    pub delay_mode: DelayMode,
    pub arnoldi: ArnoldiOptions,
}

impl DecomposeOptions {
    pub fn new(backend: Backend, t_tr: f64, restrict: Restrict) -> Self {
        DecomposeOptions {
            backend,
            t_tr,
            restrict,
            delay_mode: DelayMode::Integer,
            arnoldi: ArnoldiOptions::default(),
        }
    }

    pub fn fractional(mut self, fractional: bool) -> Self {
        self.delay_mode = if fractional { DelayMode::Fractional } else { DelayMode::Integer };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.backend == Backend::Arnoldi && self.delay_mode.is_fractional() {
            return Err(Error::IncompatibleFlags(
                "the arnoldi backend needs integer delays; use --backend eai with --fractional".into(),
            ));
        }
        if !(self.t_tr > 0.0) {
            return Err(Error::Validation(format!("t_tr must be positive, got {}", self.t_tr)));
        }
        Ok(())
    }

    fn selection(&self) -> Selection {
        match self.restrict {
            Restrict::All => Selection::All,
            Restrict::RealPositive => Selection::RealPositive,
        }
    }
}

/// Poles of `system` above the threshold of `opts`, sorted by descending magnitude.
pub fn find_poles(system: &ArtSystem, opts: &DecomposeOptions) -> Result<Vec<Pole>> {
    opts.validate()?;
    let mut poles = match opts.backend {
        Backend::Eai => {
            let op = LoopOperator::new(&system.feedback, system.delays.values(opts.delay_mode.is_fractional()))?;
            let eai = EaiOptions::new(opts.t_tr, system.fs_e, opts.restrict);
            eai_poles(&op, &eai)?
                .into_iter()
                .map(|z| Pole::new(z, system.fs_e, Backend::Eai))
                .collect::<Result<Vec<_>>>()?
        }
        Backend::Arnoldi => {
            let st = build_state_transition(&system.feedback, &system.delays.integer)?;
            let theta = EaiOptions::new(opts.t_tr, system.fs_e, opts.restrict).threshold();
            arnoldi_poles(&st, Want::Threshold(theta), system.fs_e, &opts.arnoldi)?
        }
    };
    poles.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude).then(b.value.im.total_cmp(&a.value.im)));
    Ok(poles)
}

/// Poles, eigenvectors and undriven residues of the selected modes.
pub fn decompose(system: &ArtSystem, opts: &DecomposeOptions) -> Result<ModalModel> {
    let poles = find_poles(system, opts)?;
    build_model(system, &poles, opts.t_tr, opts.selection(), opts.delay_mode, false)
}

/// Every nonzero pole of a small system, from a dense eigensolver on the
/// state transition matrix. Integer delays only.
pub fn full_decomposition(system: &ArtSystem) -> Result<ModalModel> {
    let st = build_state_transition(&system.feedback, &system.delays.integer)?;
    let (values, index) = dense_core(&st.matrix);
    let poles = conjugate_close(values)
        .into_iter()
        .map(|z| Pole::new(z, system.fs_e, Backend::Arnoldi))
        .collect::<Result<Vec<_>>>()?;
    let t_tr = f64::MIN_POSITIVE;
    let mut model = build_model(system, &poles, t_tr, Selection::All, DelayMode::Integer, true)?;
    model.settle_samples = index + system.max_endpoint_delay();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{DelaySet, FeedbackMatrix, GainSet};
    use crate::sparse::CsrMatrix;

    fn scalar_system(g: f64, tau: usize) -> ArtSystem {
        let fb = FeedbackMatrix::from_matrix(CsrMatrix::from_dense(1, 1, &[g])).unwrap();
        let gains = GainSet {
            sources: vec![],
            listeners: vec![],
            direct: vec![],
            system_id: "scalar".into(),
        };
        ArtSystem::new(fb, DelaySet::from_integer(vec![tau]), 1000.0, gains).unwrap()
    }

    #[test]
    fn arnoldi_with_fractional_delays_is_rejected() {
        let o = DecomposeOptions::new(Backend::Arnoldi, 0.1, Restrict::All).fractional(true);
        assert!(matches!(o.validate(), Err(Error::IncompatibleFlags(_))));
    }

    #[test]
    fn backends_agree_on_a_comb() {
        let sys = scalar_system(0.8, 5);
        let o = DecomposeOptions::new(Backend::Eai, 0.01, Restrict::All);
        let eai = find_poles(&sys, &o).unwrap();
        let arn = find_poles(&sys, &DecomposeOptions { backend: Backend::Arnoldi, ..o }).unwrap();
        assert_eq!(eai.len(), 5);
        assert_eq!(arn.len(), 5);
        for a in &eai {
            let d = arn.iter().map(|b| (a.value - b.value).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-10, "{} unmatched", a.value);
        }
    }

    #[test]
    fn full_decomposition_of_a_comb_is_complete() {
        let model = full_decomposition(&scalar_system(0.5, 3)).unwrap();
        assert!(model.complete);
        assert_eq!(model.len(), 3);
        for m in &model.modes {
            assert!((m.pole.magnitude - 0.5f64.cbrt()).abs() < 1e-12);
            assert!((m.undriven_residue - 1.0 / 3.0).norm() < 1e-10);
        }
    }
}
