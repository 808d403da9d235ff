//! Expanded state-space form of the delay network.
//!
//! The state stacks, in order: the inner shift registers of every path with
//! delay ≥ 3 (`τ−2` cells each, oldest first), one "last sample" cell per path
//! with delay ≥ 2, and the `N_L` current path inputs `x[n]`. Paths with delay
//! 2 have no inner cells and paths with delay 1 have no cells besides their
//! input, which the feedback block then reads directly.

use crate::assembly::FeedbackMatrix;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone)]
pub struct StateTransition {
    pub matrix: CsrMatrix,
    pub n_paths: usize,
    /// Index of the first `x` cell; `x_k` lives at `x_offset + k`.
    pub x_offset: usize,
    /// State index holding `x_k[n−τ_k+1]`, i.e. the value the feedback reads.
    pub read_index: Vec<usize>,
}

impl StateTransition {
    pub fn n_states(&self) -> usize {
        self.matrix.rows()
    }

    /// `x̄[n+1] = Ā·x̄[n] + B̄·v` where `B̄` places `v` on the `x` block.
    pub fn step(&self, state: &[f64], input: &[f64], next: &mut [f64]) {
        self.matrix.mul_vec(state, next);
        for (k, v) in input.iter().enumerate() {
            next[self.x_offset + k] += v;
        }
    }
}

/// Builds `Ā` for integer delays.
pub fn build_state_transition(feedback: &FeedbackMatrix, delays: &[usize]) -> Result<StateTransition> {
    let n = feedback.n_paths();
    if delays.len() != n {
        return Err(Error::Dimension(format!("{} delays for {n} paths", delays.len())));
    }
    if let Some(k) = delays.iter().position(|&d| d == 0) {
        return Err(Error::Dimension(format!("path {k} has zero delay")));
    }
    let inner_total: usize = delays.iter().map(|&d| d.saturating_sub(2)).sum();
    let n_tail = delays.iter().filter(|&&d| d >= 2).count();
    let x_offset = inner_total + n_tail;
    let n_states = x_offset + n;

    let mut inner_start = Vec::with_capacity(n);
    let mut tail_index = vec![usize::MAX; n];
    let mut acc = 0;
    for &d in delays {
        inner_start.push(acc);
        acc += d.saturating_sub(2);
    }
    let mut t = inner_total;
    for (k, &d) in delays.iter().enumerate() {
        if d >= 2 {
            tail_index[k] = t;
            t += 1;
        }
    }
    let read_index: Vec<usize> = (0..n)
        .map(|k| if delays[k] >= 2 { tail_index[k] } else { x_offset + k })
        .collect();

    let mut triplets = Vec::with_capacity(n_states - n + feedback.nnz());
    for (k, &d) in delays.iter().enumerate() {
        let x_cell = x_offset + k;
        if d >= 3 {
            let s = inner_start[k];
            let len = d - 2;
            // Oldest inner cell feeds the tail cell; the rest shift towards it.
            triplets.push((tail_index[k], s, 1.0));
            for i in 0..len - 1 {
                triplets.push((s + i, s + i + 1, 1.0));
            }
            triplets.push((s + len - 1, x_cell, 1.0));
        } else if d == 2 {
            triplets.push((tail_index[k], x_cell, 1.0));
        }
    }
    for (r, c, v) in feedback.matrix.triplets() {
        triplets.push((x_offset + r, read_index[c], v));
    }
    let matrix = CsrMatrix::from_triplets(n_states, n_states, &triplets)?;
    Ok(StateTransition {
        matrix,
        n_paths: n,
        x_offset,
        read_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{GainEntry, GainSet, SparseGain, DelaySet};
    use crate::system::ArtSystem;
    use crate::tdart::simulate_source;

    fn feedback(a: &[f64], n: usize) -> FeedbackMatrix {
        FeedbackMatrix::from_matrix(CsrMatrix::from_dense(n, n, a)).unwrap()
    }

    #[test]
    fn toy_sizes() {
        let fb = feedback(&[0.1, 0.2, 0.3, 0.4], 2);
        let st = build_state_transition(&fb, &[3, 4]).unwrap();
        assert_eq!(st.n_states(), 7);
        assert_eq!(st.matrix.nnz(), 5 + fb.nnz());
    }

    #[test]
    fn zero_delay_rejected() {
        let fb = feedback(&[0.1], 1);
        assert!(build_state_transition(&fb, &[0]).is_err());
        assert!(build_state_transition(&fb, &[1, 2]).is_err());
    }

    fn simulate_expanded(st: &StateTransition, sys: &ArtSystem, n_samples: usize) -> Vec<f64> {
        let n = sys.n_paths();
        let mut state = vec![0.0; st.n_states()];
        let mut next = vec![0.0; st.n_states()];
        let mut y = vec![0.0; n_samples];
        for t in 0..n_samples {
            let mut v = vec![0.0; n];
            for e in &sys.gains.sources[0].entries {
                if e.delay.round() as usize == t {
                    v[e.path] += e.gain;
                }
            }
            st.step(&state, &v, &mut next);
            std::mem::swap(&mut state, &mut next);
            for e in &sys.gains.listeners[0].entries {
                let at = t + e.delay.round() as usize;
                if at < n_samples {
                    y[at] += e.gain * state[st.x_offset + e.path];
                }
            }
        }
        y
    }

    #[test]
    fn expanded_simulation_matches_recursion() {
        for delays in [vec![3usize, 4, 5], vec![1, 1, 1], vec![1, 2, 5], vec![2, 2, 3], vec![4, 1, 2]] {
            let a = [0.1, 0.2, 0.3, 0.25, 0.05, 0.1, 0.2, 0.3, 0.15];
            let fb = feedback(&a, 3);
            let gains = GainSet {
                sources: vec![SparseGain {
                    entries: vec![
                        GainEntry { path: 0, gain: 1.0, delay: 0.0 },
                        GainEntry { path: 2, gain: 0.5, delay: 3.0 },
                    ],
                }],
                listeners: vec![SparseGain {
                    entries: (0..3).map(|k| GainEntry { path: k, gain: 1.0, delay: k as f64 }).collect(),
                }],
                direct: vec![vec![None]],
                system_id: "t".into(),
            };
            let sys = ArtSystem::new(fb.clone(), DelaySet::from_integer(delays.clone()), 100.0, gains).unwrap();
            let st = build_state_transition(&fb, &delays).unwrap();
            assert_eq!(st.n_states(), delays.iter().sum::<usize>());
            let expect = simulate_source(&sys, 0, 1.0, 60).unwrap();
            let got = simulate_expanded(&st, &sys, 60);
            // Summation order only differs when delay-1 and longer paths are mixed.
            let mixed = delays.contains(&1) && delays.iter().any(|&d| d > 1);
            if mixed {
                for (a, b) in expect[0].iter().zip(&got) {
                    assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300), "delays {delays:?}");
                }
            } else {
                assert_eq!(expect[0], got, "delays {delays:?}");
            }
        }
    }
}
