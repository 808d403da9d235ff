//! Endpoint residues, modal EIR synthesis and noise shaping.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::assembly::{DirectGain, GainSet, SparseGain};
use crate::error::{Error, Result};
use crate::loops::delay_factor;
use crate::modal::{DelayMode, ModalModel, ModePair};
use crate::sampling::{streams, RayRng};
use crate::tdart::EnergyResponse;

/// Relative imaginary residue tolerated in a rendered response.
pub const REALNESS_TOLERANCE: f64 = 1e-9;

/// Negative samples down to this fraction of the peak are clamped to zero.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-9;

/// Per-mode endpoint couplings, indexed `[mode][endpoint]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidueComponents {
    pub system_id: String,
    /// `ρ_b` per source, stored so that `conj(ρ_b) = uᴴ·b(p)`.
    pub source: Vec<Vec<Complex64>>,
    /// `ρ_c = c(p)·v` per listener.
    pub listener: Vec<Vec<Complex64>>,
    pub undriven: Vec<Complex64>,
}

impl ResidueComponents {
    pub fn n_modes(&self) -> usize {
        self.undriven.len()
    }

    /// Full residue `R_m[l][s]`.
    pub fn residue(&self, mode: usize, listener: usize, source: usize) -> Complex64 {
        self.listener[mode][listener] * self.source[mode][source].conj() * self.undriven[mode]
    }
}

fn gain_at(entry_delay: f64, delay_mode: DelayMode) -> f64 {
    match delay_mode {
        DelayMode::Fractional => entry_delay,
        DelayMode::Integer => entry_delay.round().max(0.0),
    }
}

/// `conj(uᴴ·b(p))` for one source.
pub fn source_coupling(mode: &ModePair, gain: &SparseGain, delay_mode: DelayMode) -> Complex64 {
    let p = mode.pole.value;
    let proj: Complex64 = gain
        .entries
        .iter()
        .map(|e| mode.left[e.path].conj() * delay_factor(p, gain_at(e.delay, delay_mode)) * e.gain)
        .sum();
    proj.conj()
}

/// `c(p)·v` for one listener.
pub fn listener_coupling(mode: &ModePair, gain: &SparseGain, delay_mode: DelayMode) -> Complex64 {
    let p = mode.pole.value;
    gain.entries
        .iter()
        .map(|e| mode.right[e.path] * delay_factor(p, gain_at(e.delay, delay_mode)) * e.gain)
        .sum()
}

/// Couplings of every source and listener to every mode of `model`.
pub fn residue_components(model: &ModalModel, gains: &GainSet) -> Result<ResidueComponents> {
    if model.system_id != gains.system_id {
        return Err(Error::StaleModel {
            gains: gains.system_id.clone(),
            model: model.system_id.clone(),
        });
    }
    let dm = model.delay_mode;
    Ok(ResidueComponents {
        system_id: model.system_id.clone(),
        source: model
            .modes
            .iter()
            .map(|m| gains.sources.iter().map(|g| source_coupling(m, g, dm)).collect())
            .collect(),
        listener: model
            .modes
            .iter()
            .map(|m| gains.listeners.iter().map(|g| listener_coupling(m, g, dm)).collect())
            .collect(),
        undriven: model.modes.iter().map(|m| m.undriven_residue).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub n_samples: usize,
    pub fs_e: f64,
    pub include_direct: bool,
    pub noise_seed: u64,
    pub fs_audio: f64,
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Validation("n_samples must be at least 1".into()));
        }
        if !(self.fs_e > 0.0) {
            return Err(Error::Validation("fs_e must be positive".into()));
        }
        if !(self.fs_audio >= 2.0 * self.fs_e) {
            return Err(Error::Validation(format!(
                "fs_audio {} must be at least twice fs_e {}",
                self.fs_audio, self.fs_e
            )));
        }
        Ok(())
    }
}

/// `Σ_m R_m·pₘⁿ` for one source-listener pair, before taking the real part.
pub fn modal_sum(model: &ModalModel, residues: &ResidueComponents, listener: usize, source: usize, n_samples: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n_samples];
    for (m, mode) in model.modes.iter().enumerate() {
        let r = residues.residue(m, listener, source);
        if r == Complex64::new(0.0, 0.0) {
            continue;
        }
        let p = mode.pole.value;
        let mut term = r;
        for y in out.iter_mut() {
            *y += term;
            term *= p;
        }
    }
    out
}

/// Renders every listener/source pair of the model.
pub fn render_eir(
    model: &ModalModel,
    residues: &ResidueComponents,
    direct: &[Vec<Option<DirectGain>>],
    config: &RenderConfig,
) -> Result<EnergyResponse> {
    config.validate()?;
    let n_listeners = residues.listener.first().map_or(direct.len(), Vec::len);
    let n_sources = residues.source.first().map_or(direct.first().map_or(0, Vec::len), Vec::len);
    let mut data = Vec::with_capacity(n_listeners);
    for l in 0..n_listeners {
        let mut row = Vec::with_capacity(n_sources);
        for s in 0..n_sources {
            let d = if config.include_direct { direct.get(l).and_then(|r| r.get(s)).copied().flatten() } else { None };
            row.push(render_pair(model, residues, l, s, d, config.n_samples)?);
        }
        data.push(row);
    }
    Ok(EnergyResponse { fs_e: model.fs_e, data })
}

/// One rendered response, realness and negativity checked.
pub fn render_pair(
    model: &ModalModel,
    residues: &ResidueComponents,
    listener: usize,
    source: usize,
    direct: Option<DirectGain>,
    n_samples: usize,
) -> Result<Vec<f64>> {
    let sum = modal_sum(model, residues, listener, source, n_samples);
    let norm = sum.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let imag = sum.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if imag > REALNESS_TOLERANCE * norm {
        return Err(Error::NonRealOutput { imag, norm });
    }
    let mut h: Vec<f64> = sum.iter().map(|c| c.re).collect();
    if let Some(d) = direct {
        let t = d.delay.round().max(0.0) as usize;
        if t < n_samples {
            h[t] += d.gain;
        }
    }
    let peak = h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = -NEGATIVITY_TOLERANCE * peak;
    for (n, v) in h.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v >= floor {
                *v = 0.0;
            } else if model.complete && n >= model.settle_samples {
                return Err(Error::Negativity { sample: n, value: *v });
            }
        }
    }
    Ok(h)
}

/// Turns an energy envelope into a pressure-like signal at `fs_audio`:
/// linear interpolation, square root, then seeded unit Gaussian noise.
pub fn noise_shape(eir: &[f64], fs_e: f64, fs_audio: f64, seed: u64) -> Result<Vec<f64>> {
    if let Some((sample, &value)) = eir.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeEnergy { sample, value });
    }
    if eir.is_empty() {
        return Ok(Vec::new());
    }
    let ratio = fs_e / fs_audio;
    let n_out = ((eir.len() as f64) / ratio).ceil() as usize;
    let mut rng = RayRng::new(seed, streams::NOISE);
    let last = eir.len() - 1;
    Ok((0..n_out)
        .map(|i| {
            let t = i as f64 * ratio;
            let k = (t.floor() as usize).min(last);
            let frac = t - k as f64;
            let e = if k == last { eir[last] } else { eir[k] * (1.0 - frac) + eir[k + 1] * frac };
            let noise: f64 = StandardNormal.sample(&mut rng);
            e.sqrt() * noise
        })
        .collect())
}

/// Noise-shaped reverberation plus a deterministic direct impulse whose
/// energy matches the direct term of the EIR.
pub fn synthesize_rir(reverb: &[f64], direct: Option<DirectGain>, fs_e: f64, fs_audio: f64, seed: u64) -> Result<Vec<f64>> {
    let mut rir = noise_shape(reverb, fs_e, fs_audio, seed)?;
    if let Some(d) = direct {
        let t = (d.delay / fs_e * fs_audio).round().max(0.0) as usize;
        if t < rir.len() {
            rir[t] += (d.gain * fs_audio / fs_e).sqrt();
        }
    }
    Ok(rir)
}

/// Backward-integrated energy decay curve, `EDC[n] = Σ_{k≥n} h[k]`.
pub fn energy_decay_curve(h: &[f64]) -> Vec<f64> {
    let mut edc = vec![0.0; h.len()];
    let mut acc = 0.0;
    for (e, v) in edc.iter_mut().zip(h).rev() {
        acc += v;
        *e = acc;
    }
    edc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::GainEntry;
    use crate::modal::{Backend, Pole};

    fn single_mode(p: Complex64, r: Complex64) -> (ModalModel, ResidueComponents) {
        let pole = Pole::new(p, 1000.0, Backend::Eai).unwrap();
        let model = ModalModel {
            modes: vec![ModePair {
                pole,
                left: vec![Complex64::new(1.0, 0.0)],
                right: vec![Complex64::new(1.0, 0.0)],
                undriven_residue: r,
            }],
            fs_e: 1000.0,
            transition_time_s: 0.1,
            delay_mode: DelayMode::Integer,
            system_id: "x".into(),
            complete: false,
            settle_samples: 0,
        };
        let res = ResidueComponents {
            system_id: "x".into(),
            source: vec![vec![Complex64::new(1.0, 0.0)]],
            listener: vec![vec![Complex64::new(1.0, 0.0)]],
            undriven: vec![r],
        };
        (model, res)
    }

    fn cfg(n: usize) -> RenderConfig {
        RenderConfig {
            n_samples: n,
            fs_e: 1000.0,
            include_direct: false,
            noise_seed: 1,
            fs_audio: 8000.0,
        }
    }

    #[test]
    fn single_mode_is_a_straight_line_in_log() {
        let p = 0.99;
        let (model, res) = single_mode(Complex64::new(p, 0.0), Complex64::new(2.0, 0.0));
        let h = render_eir(&model, &res, &[vec![None]], &cfg(500)).unwrap();
        let y = h.get(0, 0);
        for n in 1..500 {
            assert!(((y[n] / y[n - 1]).ln() - p.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn lone_complex_mode_is_not_real() {
        let (model, res) = single_mode(Complex64::new(0.5, 0.5), Complex64::new(1.0, 0.0));
        assert!(matches!(
            render_eir(&model, &res, &[vec![None]], &cfg(10)),
            Err(Error::NonRealOutput { .. })
        ));
    }

    #[test]
    fn stale_gains_are_rejected() {
        let (model, _) = single_mode(Complex64::new(0.5, 0.0), Complex64::new(1.0, 0.0));
        let gains = GainSet {
            sources: vec![],
            listeners: vec![],
            direct: vec![],
            system_id: "y".into(),
        };
        assert!(matches!(residue_components(&model, &gains), Err(Error::StaleModel { .. })));
    }

    #[test]
    fn empty_source_gain_has_zero_coupling() {
        let (model, _) = single_mode(Complex64::new(0.5, 0.0), Complex64::new(1.0, 0.0));
        let empty = SparseGain { entries: vec![] };
        assert_eq!(source_coupling(&model.modes[0], &empty, DelayMode::Integer), Complex64::new(0.0, 0.0));
        let one = SparseGain {
            entries: vec![GainEntry { path: 0, gain: 2.0, delay: 1.0 }],
        };
        assert!((listener_coupling(&model.modes[0], &one, DelayMode::Integer) - 4.0).norm() < 1e-15);
    }

    #[test]
    fn render_config_validation() {
        let mut c = cfg(0);
        assert!(c.validate().is_err());
        c.n_samples = 1;
        c.fs_audio = 1500.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_energy_gives_silence() {
        let r = noise_shape(&[0.0; 10], 1000.0, 8000.0, 3).unwrap();
        assert_eq!(r.len(), 80);
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noise_shape_is_deterministic() {
        let e = [1.0, 0.5, 0.25];
        assert_eq!(noise_shape(&e, 1000.0, 4000.0, 9).unwrap(), noise_shape(&e, 1000.0, 4000.0, 9).unwrap());
        assert_ne!(noise_shape(&e, 1000.0, 4000.0, 9).unwrap(), noise_shape(&e, 1000.0, 4000.0, 10).unwrap());
        assert!(matches!(noise_shape(&[-1.0], 1.0, 2.0, 0), Err(Error::NegativeEnergy { .. })));
    }

    #[test]
    fn constant_energy_has_unit_mean_square() {
        // Windows of 8 samples of N(0,1)²: mean 1, variance 2/8.
        let r = noise_shape(&vec![1.0; 4000], 1000.0, 8000.0, 5).unwrap();
        let windows: Vec<f64> = r.chunks(8).map(|w| w.iter().map(|v| v * v).sum::<f64>() / 8.0).collect();
        let sigma = (2.0f64 / 8.0).sqrt();
        let outside = windows.iter().filter(|m| (*m - 1.0).abs() > 3.0 * sigma).count();
        // P(χ²₈ > 20) ≈ 1.03%, so about 5 of 500 windows land outside 3σ.
        assert!((outside as f64) < 0.025 * windows.len() as f64, "{outside}");
        let overall = r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64;
        let se = (2.0 / r.len() as f64).sqrt();
        assert!((overall - 1.0).abs() < 3.0 * se);
    }

    #[test]
    fn direct_impulse_is_deterministic() {
        let d = DirectGain { gain: 0.5, delay: 2.0 };
        let r = synthesize_rir(&[0.0; 5], Some(d), 1000.0, 4000.0, 1).unwrap();
        assert_eq!(r[8], 2.0f64.sqrt());
        assert_eq!(r.iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn edc_is_backward_sum() {
        assert_eq!(energy_decay_curve(&[1.0, 2.0, 3.0]), vec![6.0, 5.0, 3.0]);
    }
}
