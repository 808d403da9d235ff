//! Time-domain reference simulation and transfer-function evaluation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::assembly::SparseGain;
use crate::error::{Error, Result};
use crate::loops::{delay_factor, LoopOperator};
use crate::system::ArtSystem;

/// Any state or output sample above this signals an unstable configuration.
pub const INSTABILITY_LIMIT: f64 = 1e12;

/// Condition number above which `transfer_eval` refuses to invert.
pub const SINGULARITY_LIMIT: f64 = 1e12;

/// Energy impulse responses indexed `[listener][source][sample]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyResponse {
    pub fs_e: f64,
    pub data: Vec<Vec<Vec<f64>>>,
}

impl EnergyResponse {
    pub fn get(&self, listener: usize, source: usize) -> &[f64] {
        &self.data[listener][source]
    }

    pub fn n_samples(&self) -> usize {
        self.data
            .first()
            .and_then(|r| r.first())
            .map_or(0, Vec::len)
    }
}

/// Runs the delay-line recursion `x[n] = A·(x_k[n−τ_k]) + b·u[n]` with
/// integer delays and an impulse at every source.
pub fn simulate_eir(system: &ArtSystem, n_samples: usize) -> Result<EnergyResponse> {
    let ns = system.n_sources();
    let mut data = vec![vec![Vec::new(); ns]; system.n_listeners()];
    for s in 0..ns {
        let per_listener = simulate_source(system, s, 1.0, n_samples)?;
        for (l, y) in per_listener.into_iter().enumerate() {
            data[l][s] = y;
        }
    }
    Ok(EnergyResponse {
        fs_e: system.fs_e,
        data,
    })
}

fn rounded(delay: f64) -> usize {
    delay.round().max(0.0) as usize
}

/// Impulse response of every listener to source `s` driven with amplitude `amp`.
pub fn simulate_source(system: &ArtSystem, s: usize, amp: f64, n_samples: usize) -> Result<Vec<Vec<f64>>> {
    let n = system.n_paths();
    let delays = &system.delays.integer;
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0usize);
    for &d in delays {
        offsets.push(offsets.last().unwrap() + d);
    }
    let mut ring = vec![0.0f64; *offsets.last().unwrap()];

    // Input injections per sample.
    let mut inject: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_samples];
    for e in &system.gains.sources[s].entries {
        let t = rounded(e.delay);
        if t < n_samples {
            inject[t].push((e.path, amp * e.gain));
        }
    }

    let mut outputs = vec![vec![0.0f64; n_samples]; system.n_listeners()];
    for (l, row) in system.gains.direct.iter().enumerate() {
        if let Some(d) = row[s] {
            let t = rounded(d.delay);
            if t < n_samples {
                outputs[l][t] += amp * d.gain;
            }
        }
    }

    let mut delayed = vec![0.0f64; n];
    let mut x = vec![0.0f64; n];
    let factors = system.feedback.factors.as_ref();
    let mut arriving = vec![0.0f64; factors.map_or(0, |f| f.n_patches)];
    for t in 0..n_samples {
        for k in 0..n {
            delayed[k] = ring[offsets[k] + t % delays[k]];
        }
        match factors {
            Some(f) => {
                arriving.iter_mut().for_each(|v| *v = 0.0);
                for k in 0..n {
                    arriving[f.to[k]] += delayed[k];
                }
                for k in 0..n {
                    x[k] = f.departure_gain[k] * arriving[f.from[k]];
                }
            }
            None => system.feedback.matrix.mul_vec(&delayed, &mut x),
        }
        for &(k, g) in &inject[t] {
            x[k] += g;
        }
        for k in 0..n {
            let v = x[k];
            if !(v <= INSTABILITY_LIMIT) {
                return Err(Error::Instability {
                    sample: t,
                    index: k,
                    value: v,
                });
            }
            ring[offsets[k] + t % delays[k]] = v;
        }
        for (l, g) in system.gains.listeners.iter().enumerate() {
            scatter_output(g, &x, t, &mut outputs[l]);
        }
    }
    for (l, y) in outputs.iter().enumerate() {
        if let Some((t, &v)) = y.iter().enumerate().find(|(_, v)| !(**v <= INSTABILITY_LIMIT)) {
            return Err(Error::Instability {
                sample: t,
                index: l,
                value: v,
            });
        }
    }
    Ok(outputs)
}

fn scatter_output(g: &SparseGain, x: &[f64], t: usize, out: &mut [f64]) {
    for e in &g.entries {
        let at = t + rounded(e.delay);
        if at < out.len() {
            out[at] += e.gain * x[e.path];
        }
    }
}

/// Evaluates `c(z)·(I − A·D(z))⁻¹·b(z) + d(z)`, returned as `[listener][source]`.
///
/// With `fractional` the path and endpoint delays keep their real values;
/// otherwise every delay is rounded the way [`simulate_eir`] rounds it.
pub fn transfer_eval(system: &ArtSystem, z: Complex64, fractional: bool) -> Result<Vec<Vec<Complex64>>> {
    let op = LoopOperator::new(&system.feedback, system.delays.values(fractional))?;
    let round = |d: f64| if fractional { d } else { d.round().max(0.0) };
    let n = system.n_paths();
    let zero = Complex64::new(0.0, 0.0);
    let mut out = vec![vec![zero; system.n_sources()]; system.n_listeners()];
    for (s, bs) in system.gains.sources.iter().enumerate() {
        let mut b = vec![zero; n];
        for e in &bs.entries {
            b[e.path] += delay_factor(z, round(e.delay)) * e.gain;
        }
        let x = op.solve(z, &b, SINGULARITY_LIMIT)?;
        for (l, cl) in system.gains.listeners.iter().enumerate() {
            let mut acc = zero;
            for e in &cl.entries {
                acc += x[e.path] * delay_factor(z, round(e.delay)) * e.gain;
            }
            if let Some(d) = system.gains.direct[l][s] {
                acc += delay_factor(z, round(d.delay)) * d.gain;
            }
            out[l][s] = acc;
        }
    }
    Ok(out)
}
