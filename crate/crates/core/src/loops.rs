//! Evaluation of the loop matrix `I − A·D(z)` at complex frequencies.
//!
//! When the feedback matrix carries its patch factorisation `A = S·R`, the
//! determinant, null vectors and inverse are all obtained from the much
//! smaller patch matrix `K(z) = R·D(z)·S` (one row and column per patch):
//! `det(I − A·D) = det(I − K)`, right null vectors map through `v = S·y` and
//! left null vectors through `uᴴ = wᴴ·R·D(z)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::assembly::{FeedbackMatrix, PatchFactors};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub type C64 = Complex64;

/// Principal-branch `z^(−τ)`.
pub fn delay_factor(z: C64, tau: f64) -> C64 {
    if tau.fract() == 0.0 && tau.abs() < i32::MAX as f64 {
        z.powi(-(tau as i32))
    } else {
        (-tau * z.ln()).exp()
    }
}

#[derive(Debug, Clone)]
enum Form {
    /// Dense `N_L × N_L` matrix.
    Dense(DMatrix<f64>),
    /// Patch factors plus, per patch pair, the path index.
    Patch {
        factors: PatchFactors,
    },
}

/// The feedback loop of a system together with the delays it is analysed with.
#[derive(Debug, Clone)]
pub struct LoopOperator {
    matrix: CsrMatrix,
    delays: Vec<f64>,
    form: Form,
}

/// Result of one Newton evaluation.
#[derive(Debug, Clone, Copy)]
pub struct NewtonEval {
    /// `f(z)/f′(z)` for the characteristic polynomial.
    pub step: C64,
    /// 1-norm condition number of the loop matrix.
    pub condition: f64,
}

impl LoopOperator {
    /// Chooses the patch form when the feedback matrix is factored and the
    /// patch count is smaller than the path count.
    pub fn new(feedback: &FeedbackMatrix, delays: Vec<f64>) -> Result<Self> {
        let n = feedback.n_paths();
        if delays.len() != n {
            return Err(Error::Dimension(format!("{} delays for {n} paths", delays.len())));
        }
        let form = match &feedback.factors {
            Some(f) if f.n_patches < n => Form::Patch { factors: f.clone() },
            _ => {
                let d = feedback.matrix.to_dense();
                Form::Dense(DMatrix::from_row_slice(n, n, &d))
            }
        };
        Ok(LoopOperator {
            matrix: feedback.matrix.clone(),
            delays,
            form,
        })
    }

    pub fn n_paths(&self) -> usize {
        self.delays.len()
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Degree of the characteristic polynomial, `Σ τ`.
    pub fn total_delay(&self) -> f64 {
        self.delays.iter().sum()
    }

    pub fn uses_patch_form(&self) -> bool {
        matches!(self.form, Form::Patch { .. })
    }

    /// The reduced loop matrix: `I − A·D(z)` or `I − K(z)`.
    pub fn reduced(&self, z: C64) -> DMatrix<C64> {
        match &self.form {
            Form::Dense(a) => {
                let n = a.nrows();
                let d: Vec<C64> = self.delays.iter().map(|&t| delay_factor(z, t)).collect();
                DMatrix::from_fn(n, n, |i, j| {
                    let id = if i == j { 1.0 } else { 0.0 };
                    C64::new(id, 0.0) - d[j] * a[(i, j)]
                })
            }
            Form::Patch { factors } => {
                let np = factors.n_patches;
                let mut m = DMatrix::<C64>::identity(np, np);
                for k in 0..factors.n_paths() {
                    let (a, b) = (factors.from[k], factors.to[k]);
                    m[(b, a)] -= delay_factor(z, self.delays[k]) * factors.departure_gain[k];
                }
                m
            }
        }
    }

    /// `det` of the reduced loop matrix (equal to `det(I − A·D(z))`).
    pub fn determinant(&self, z: C64) -> C64 {
        self.reduced(z).lu().determinant()
    }

    /// Newton correction for the polynomial `z^(Στ)·det(I − A·D(z))`, whose
    /// logarithmic derivative is `(Στ + tr(M⁻¹·(τ∘K)))/z` in patch form and
    /// `Σ_k τ_k·z^(τ_k−1)·(P⁻¹)_kk` with `P = diag(z^τ) − A` in dense form.
    pub fn newton(&self, z: C64) -> NewtonEval {
        self.newton_with(z, true)
    }

    /// Newton correction for `det(I − A·D(z))` itself. Without the `z^(Στ)`
    /// factor the zero root no longer dominates the step far from `0`.
    pub fn newton_det(&self, z: C64) -> NewtonEval {
        self.newton_with(z, false)
    }

    fn newton_with(&self, z: C64, polynomial: bool) -> NewtonEval {
        let power = if polynomial { 0.0 } else { self.total_delay() };
        match &self.form {
            Form::Dense(a) => {
                let n = a.nrows();
                let mut p = DMatrix::<C64>::from_fn(n, n, |i, j| C64::new(-a[(i, j)], 0.0));
                for k in 0..n {
                    p[(k, k)] += delay_factor(z, -self.delays[k]);
                }
                let Some((inv, condition)) = inverse_with_condition(&p) else {
                    return singular();
                };
                let mut log_deriv = -power / z;
                for k in 0..n {
                    log_deriv += inv[(k, k)] * self.delays[k] * delay_factor(z, 1.0 - self.delays[k]);
                }
                NewtonEval {
                    step: log_deriv.inv(),
                    condition,
                }
            }
            Form::Patch { factors } => {
                let m = self.reduced(z);
                let Some((inv, condition)) = inverse_with_condition(&m) else {
                    return singular();
                };
                // tr(M⁻¹·(τ∘K)) = Σ_k M⁻¹[a_k][b_k]·τ_k·K[b_k][a_k]
                let mut tr = C64::new(0.0, 0.0);
                for k in 0..factors.n_paths() {
                    let (a, b) = (factors.from[k], factors.to[k]);
                    let kval = delay_factor(z, self.delays[k]) * factors.departure_gain[k];
                    tr += inv[(a, b)] * kval * self.delays[k];
                }
                let log_deriv = (C64::new(self.total_delay() - power, 0.0) + tr) / z;
                NewtonEval {
                    step: log_deriv.inv(),
                    condition,
                }
            }
        }
    }

    /// Right and left null vectors `(u, v)` of `I − A·D(p)`, each of unit norm
    /// with its first nonzero entry real positive.
    pub fn null_vectors(&self, p: C64) -> Result<(Vec<C64>, Vec<C64>)> {
        let m = self.reduced(p);
        let svd = m.clone().svd(false, true);
        let sv = &svd.singular_values;
        let smin = sv.min();
        let smax = sv.max();
        let bound = 1e-6 * smax.max(1.0);
        if smin > bound {
            return Err(Error::NotAPole {
                z: p,
                sigma_min: smin,
                bound,
            });
        }
        let right = smallest_right_singular(&svd);
        // The left singular vectors of a complex SVD come out far less
        // accurate than the right ones, so take them from the adjoint.
        let left = smallest_right_singular(&m.adjoint().svd(false, true));
        let (u, v) = match &self.form {
            Form::Dense(_) => (left.iter().copied().collect(), right.iter().copied().collect()),
            Form::Patch { factors } => {
                let v: Vec<C64> = (0..factors.n_paths())
                    .map(|k| right[factors.from[k]] * factors.departure_gain[k])
                    .collect();
                // uᴴ = wᴴ·R·D(p)  ⇒  u_k = w[to_k]·conj(p^(−τ_k))
                let u: Vec<C64> = (0..factors.n_paths())
                    .map(|k| left[factors.to[k]] * delay_factor(p, self.delays[k]).conj())
                    .collect();
                (u, v)
            }
        };
        Ok((normalize(u), normalize(v)))
    }

    /// `uᴴ·A·D′(p)·v` with `D′` the elementwise derivative of `z^(−τ)`.
    pub fn derivative_form(&self, p: C64, u: &[C64], v: &[C64]) -> C64 {
        let t: Vec<C64> = v
            .iter()
            .zip(&self.delays)
            .map(|(&vk, &tau)| vk * delay_factor(p, tau + 1.0) * (-tau))
            .collect();
        let mut at = vec![C64::new(0.0, 0.0); t.len()];
        self.matrix.mul_vec_complex(&t, &mut at);
        u.iter().zip(&at).map(|(uk, ak)| uk.conj() * ak).sum()
    }

    /// Solves `(I − A·D(z))·x = rhs`, failing when the loop matrix is
    /// numerically singular (condition above `limit`).
    pub fn solve(&self, z: C64, rhs: &[C64], limit: f64) -> Result<Vec<C64>> {
        let m = self.reduced(z);
        let Some((inv, condition)) = inverse_with_condition(&m) else {
            return Err(Error::Singularity {
                z,
                condition: f64::INFINITY,
            });
        };
        if condition > limit {
            return Err(Error::Singularity { z, condition });
        }
        match &self.form {
            Form::Dense(_) => {
                let x = inv * DVector::from_column_slice(rhs);
                Ok(x.iter().copied().collect())
            }
            Form::Patch { factors } => {
                // (I − S·R·D)⁻¹ = I + S·(I − K)⁻¹·R·D
                let np = factors.n_patches;
                let mut r = DVector::<C64>::zeros(np);
                for k in 0..factors.n_paths() {
                    r[factors.to[k]] += rhs[k] * delay_factor(z, self.delays[k]);
                }
                let y = inv * r;
                Ok((0..factors.n_paths())
                    .map(|k| rhs[k] + y[factors.from[k]] * factors.departure_gain[k])
                    .collect())
            }
        }
    }
}

fn smallest_right_singular(svd: &nalgebra::linalg::SVD<C64, nalgebra::Dyn, nalgebra::Dyn>) -> DVector<C64> {
    let i = svd.singular_values.imin();
    svd.v_t.as_ref().expect("requested").row(i).adjoint()
}

fn singular() -> NewtonEval {
    NewtonEval {
        step: C64::new(0.0, 0.0),
        condition: f64::INFINITY,
    }
}

fn norm1(m: &DMatrix<C64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse and 1-norm condition number, or `None` when LU breaks down.
pub fn inverse_with_condition(m: &DMatrix<C64>) -> Option<(DMatrix<C64>, f64)> {
    let inv = m.clone().lu().try_inverse()?;
    let cond = norm1(m) * norm1(&inv);
    if !cond.is_finite() {
        return None;
    }
    Some((inv, cond))
}

/// Unit 2-norm with the first nonzero entry rotated onto the positive real axis.
pub fn normalize(mut x: Vec<C64>) -> Vec<C64> {
    let norm = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return x;
    }
    let tol = 1e-12 * norm;
    let phase = x
        .iter()
        .find(|c| c.norm() > tol)
        .map(|c| c / c.norm())
        .unwrap_or(C64::new(1.0, 0.0));
    let scale = phase.conj() / norm;
    for c in &mut x {
        *c *= scale;
    }
    x
}
