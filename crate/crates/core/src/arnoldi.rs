//! Largest-magnitude eigenvalues of sparse operators by implicitly
//! restarted Arnoldi iteration with exact shifts.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::modal::{Backend, Pole};
use crate::sampling::{streams, RayRng};
use crate::sparse::CsrMatrix;
use crate::state_space::StateTransition;

type C64 = Complex64;

/// Most consecutive Krylov breakdowns tolerated before giving up.
pub const MAX_BREAKDOWNS: usize = 5;

/// A square operator applied to complex vectors.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.mul_vec_complex(x, y)
    }
}

/// How many eigenvalues to compute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Want {
    /// The given number of largest-magnitude eigenvalues.
    Count(usize),
    /// Every eigenvalue at or above the given magnitude.
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ArnoldiOptions {
    /// Accepted relative residual `‖Aq − θq‖/|θ|`.
    pub tolerance: f64,
    pub max_restarts: usize,
    pub seed: u64,
    /// Eigenvalues below this magnitude are treated as exact zeros.
    pub zero_floor: f64,
}

impl Default for ArnoldiOptions {
    fn default() -> Self {
        ArnoldiOptions {
            tolerance: 1e-9,
            max_restarts: 1000,
            seed: 1,
            zero_floor: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RitzPair {
    pub value: C64,
    pub vector: Vec<C64>,
    /// `‖Aq − θq‖/|θ|` for the unit vector `q`.
    pub residual: f64,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn random_vector(n: usize, rng: &mut RayRng) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        })
        .collect()
}

/// Classical Gram-Schmidt applied twice; returns the accumulated coefficients.
fn orthogonalize(basis: &[Vec<C64>], w: &mut [C64]) -> Vec<C64> {
    let mut coeffs = vec![C64::new(0.0, 0.0); basis.len()];
    for _ in 0..2 {
        let h: Vec<C64> = basis.iter().map(|v| dot(v, w)).collect();
        for (v, &c) in basis.iter().zip(&h) {
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= c * vi;
            }
        }
        for (a, b) in coeffs.iter_mut().zip(&h) {
            *a += b;
        }
    }
    coeffs
}

/// Eigenvector of upper-triangular `t` for its `i`-th diagonal entry.
fn triangular_eigenvector(t: &DMatrix<C64>, i: usize) -> DVector<C64> {
    let m = t.nrows();
    let lambda = t[(i, i)];
    let scale = t.norm().max(f64::MIN_POSITIVE);
    let mut y = DVector::<C64>::zeros(m);
    y[i] = C64::new(1.0, 0.0);
    for j in (0..i).rev() {
        let s: C64 = (j + 1..=i).map(|l| t[(j, l)] * y[l]).sum();
        let mut d = t[(j, j)] - lambda;
        if d.norm() < f64::EPSILON * scale {
            d = C64::new(f64::EPSILON * scale, 0.0);
        }
        y[j] = -s / d;
    }
    let n = y.norm();
    y / C64::new(n, 0.0)
}

struct Factorization<'a> {
    op: &'a dyn LinearOperator,
    basis: Vec<Vec<C64>>,
    h: DMatrix<C64>,
    rng: RayRng,
    breakdowns: usize,
}

impl Factorization<'_> {
    /// Sets basis vector `j + 1` from the residual `w`, or from a fresh random
    /// direction when the Krylov space has become invariant.
    fn push_residual(&mut self, j: usize, mut w: Vec<C64>, scale: f64) -> Result<()> {
        let beta = norm(&w);
        self.basis.truncate(j + 1);
        if beta > 1e-12 * scale.max(1e-300) {
            self.h[(j + 1, j)] = C64::new(beta, 0.0);
            w.iter_mut().for_each(|c| *c /= beta);
            self.basis.push(w);
            self.breakdowns = 0;
            return Ok(());
        }
        self.breakdowns += 1;
        if self.breakdowns > MAX_BREAKDOWNS {
            return Err(Error::Breakdown {
                restarts: self.breakdowns - 1,
            });
        }
        let n = self.op.dim();
        let mut r = random_vector(n, &mut self.rng);
        orthogonalize(&self.basis, &mut r);
        let nr = norm(&r);
        r.iter_mut().for_each(|c| *c /= nr);
        self.h[(j + 1, j)] = C64::new(0.0, 0.0);
        self.basis.push(r);
        Ok(())
    }

    fn extend(&mut self, from: usize, to: usize) -> Result<()> {
        let n = self.op.dim();
        for j in from..to {
            let mut w = vec![C64::new(0.0, 0.0); n];
            self.op.apply(&self.basis[j], &mut w);
            let scale = norm(&w);
            let coeffs = orthogonalize(&self.basis[..=j], &mut w);
            for (i, c) in coeffs.into_iter().enumerate() {
                self.h[(i, j)] = c;
            }
            self.push_residual(j, w, scale)?;
        }
        Ok(())
    }
}

/// The `nev` largest-magnitude eigenpairs of `op`.
pub fn largest_eigenpairs(op: &dyn LinearOperator, nev: usize, opts: &ArnoldiOptions) -> Result<Vec<RitzPair>> {
    let n = op.dim();
    let k = nev.min(n);
    if k == 0 {
        return Ok(Vec::new());
    }
    let m = (2 * k + 1).max(k + 20).min(n);
    let mut rng = RayRng::new(opts.seed, streams::ARNOLDI);
    let mut start = random_vector(n, &mut rng);
    let ns = norm(&start);
    start.iter_mut().for_each(|c| *c /= ns);
    let mut f = Factorization {
        op,
        basis: vec![start],
        h: DMatrix::zeros(m + 1, m),
        rng,
        breakdowns: 0,
    };
    let mut filled = 0;
    let mut converged_count = 0;
    for restart in 0..=opts.max_restarts {
        f.extend(filled, m)?;
        let hm = f.h.view((0, 0), (m, m)).into_owned();
        let (q, t) = Schur::new(hm.clone()).unpack();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| t[(b, b)].norm().total_cmp(&t[(a, a)].norm()));
        let beta = f.h[(m, m - 1)].norm();
        let ritz: Vec<(C64, DVector<C64>)> = order
            .iter()
            .map(|&i| (t[(i, i)], &q * triangular_eigenvector(&t, i)))
            .collect();
        let estimate = |(theta, y): &(C64, DVector<C64>)| beta * y[m - 1].norm() / theta.norm().max(1e-300);
        converged_count = ritz[..k].iter().filter(|r| estimate(r) <= opts.tolerance).count();
        if converged_count == k || m == n {
            let pairs: Vec<RitzPair> = ritz[..k]
                .iter()
                .map(|(theta, y)| ritz_pair(op, &f.basis[..m], *theta, y))
                .collect();
            if m == n || pairs.iter().all(|p| p.residual <= opts.tolerance) {
                log::debug!("arnoldi: {k} pairs after {restart} restarts");
                return Ok(pairs);
            }
        }
        // Keep conjugate or equal-magnitude partners of the last wanted value together.
        let mut keep = k;
        while keep + 1 < m && (ritz[keep].0.norm() - ritz[keep - 1].0.norm()).abs() <= 1e-8 * ritz[keep - 1].0.norm() {
            keep += 1;
        }
        keep = keep.max(converged_count + 1).min(m - 1);
        let shifts: Vec<C64> = ritz[keep..].iter().map(|r| r.0).collect();
        restart_with(&mut f, m, keep, &shifts)?;
        filled = keep;
    }
    let survivors = Vec::new();
    Err(Error::NoConvergence {
        iterations: opts.max_restarts,
        unconverged: k - converged_count,
        survivors,
    })
}

fn ritz_pair(op: &dyn LinearOperator, basis: &[Vec<C64>], theta: C64, y: &DVector<C64>) -> RitzPair {
    let n = op.dim();
    let mut x = vec![C64::new(0.0, 0.0); n];
    for (v, c) in basis.iter().zip(y.iter()) {
        for (xi, vi) in x.iter_mut().zip(v) {
            *xi += c * vi;
        }
    }
    let nx = norm(&x);
    x.iter_mut().for_each(|c| *c /= nx);
    let mut ax = vec![C64::new(0.0, 0.0); n];
    op.apply(&x, &mut ax);
    let r: f64 = ax
        .iter()
        .zip(&x)
        .map(|(a, xi)| (a - theta * xi).norm_sqr())
        .sum::<f64>()
        .sqrt();
    RitzPair {
        value: theta,
        vector: x,
        residual: r / theta.norm().max(1e-300),
    }
}

/// Compresses an `m`-step factorization to `keep` steps by applying the
/// given shifts as implicit QR steps.
fn restart_with(f: &mut Factorization, m: usize, keep: usize, shifts: &[C64]) -> Result<()> {
    let mut h = f.h.view((0, 0), (m, m)).into_owned();
    let mut q_acc = DMatrix::<C64>::identity(m, m);
    for &mu in shifts {
        let shifted = &h - DMatrix::<C64>::identity(m, m) * mu;
        let qr = shifted.qr();
        let qj = qr.q();
        h = qj.adjoint() * &h * &qj;
        q_acc *= &qj;
    }
    for j in 0..m {
        for i in j + 2..m {
            h[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    let n = f.op.dim();
    // New basis: first keep+1 columns of V·Q.
    let mut rotated: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); n]; keep + 1];
    for (c, out) in rotated.iter_mut().enumerate() {
        for (r, v) in f.basis[..m].iter().enumerate() {
            let coef = q_acc[(r, c)];
            if coef != C64::new(0.0, 0.0) {
                for (o, vi) in out.iter_mut().zip(v) {
                    *o += coef * vi;
                }
            }
        }
    }
    let beta_k = h[(keep, keep - 1)];
    let sigma = q_acc[(m - 1, keep - 1)];
    let beta_m = f.h[(m, m - 1)];
    let next = &f.basis[m];
    let residual: Vec<C64> = rotated[keep]
        .iter()
        .zip(next)
        .map(|(v, fm)| v * beta_k + fm * (beta_m * sigma))
        .collect();
    let mut new_h = DMatrix::<C64>::zeros(m + 1, m);
    new_h.view_mut((0, 0), (keep, keep)).copy_from(&h.view((0, 0), (keep, keep)));
    f.h = new_h;
    rotated.truncate(keep);
    f.basis = rotated;
    let scale = h.view((0, 0), (keep, keep)).norm();
    f.push_residual(keep - 1, residual, scale)
}

/// All eigenvalues of a small sparse matrix from a dense decomposition.
pub fn dense_eigenvalues(a: &CsrMatrix) -> Vec<C64> {
    let n = a.rows();
    let d = DMatrix::from_row_slice(n, n, &a.to_dense());
    d.complex_eigenvalues().iter().copied().collect()
}

/// Numerical rank of `m`, counting singular values above a relative floor.
fn rank(m: &DMatrix<f64>) -> (usize, DMatrix<f64>) {
    let svd = m.clone().svd(true, false);
    let floor = svd.singular_values.max() * (m.nrows() as f64) * 1e-13;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let r = order.iter().filter(|&&i| svd.singular_values[i] > floor).count();
    let u = svd.u.expect("left singular vectors requested");
    let basis = DMatrix::from_fn(m.nrows(), r, |row, col| u[(row, order[col])]);
    (r, basis)
}

/// Nonzero eigenvalues of `a`, each with its algebraic multiplicity.
///
/// Delay-line states make zero a highly defective eigenvalue, which a plain
/// dense solver scatters into a ring of spurious small values. Restricting
/// `a` to `range(aᵏ)`, where `k` is the step at which the rank of the powers
/// stops falling, removes the nilpotent part exactly.
pub fn dense_nonzero_eigenvalues(a: &CsrMatrix) -> Vec<C64> {
    dense_core(a).0
}

/// Nonzero eigenvalues of `a` and the index of its zero eigenvalue, the
/// smallest `k` with `rank(aᵏ) = rank(aᵏ⁺¹)`.
pub fn dense_core(a: &CsrMatrix) -> (Vec<C64>, usize) {
    let n = a.rows();
    let dense = DMatrix::from_row_slice(n, n, &a.to_dense());
    let mut power = DMatrix::<f64>::identity(n, n);
    let (mut r, mut basis) = (n, DMatrix::<f64>::identity(n, n));
    let mut index = 0;
    for _ in 0..n {
        let next = &dense * &power;
        let (rn, bn) = rank(&next);
        if rn == r {
            break;
        }
        (r, basis, power) = (rn, bn, next);
        index += 1;
        if r == 0 {
            return (Vec::new(), index);
        }
    }
    let core = basis.transpose() * &dense * &basis;
    (core.complex_eigenvalues().iter().copied().collect(), index)
}

/// Eigenvalues of `a` selected by `want`, sorted by descending magnitude,
/// conjugate-closed, with values below the zero floor discarded.
pub fn eigenvalues(a: &CsrMatrix, want: Want, opts: &ArnoldiOptions) -> Result<Vec<C64>> {
    let n = a.rows();
    let mut values = match want {
        Want::Count(c) if c + 1 >= n => dense_nonzero_eigenvalues(a),
        Want::Count(c) => largest_eigenpairs(a, c, opts)?.into_iter().map(|p| p.value).collect(),
        Want::Threshold(theta) => {
            let mut nev = 8usize;
            loop {
                if 2 * nev + 1 >= n {
                    let mut all = dense_nonzero_eigenvalues(a);
                    all.retain(|z| z.norm() >= theta);
                    break all;
                }
                let vals: Vec<C64> = largest_eigenpairs(a, nev, opts)?.into_iter().map(|p| p.value).collect();
                let smallest = vals.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
                if smallest < theta {
                    break vals.into_iter().filter(|z| z.norm() >= theta).collect();
                }
                nev *= 2;
            }
        }
    };
    values.retain(|z| z.norm() >= opts.zero_floor);
    Ok(conjugate_close(values))
}

/// Snaps near-real values onto the axis and pairs every complex value
/// with its exact conjugate.
pub(crate) fn conjugate_close(values: Vec<C64>) -> Vec<C64> {
    let mut upper: Vec<C64> = Vec::new();
    let mut out: Vec<C64> = Vec::new();
    for z in values {
        let scale = z.norm();
        if z.im.abs() <= 1e-12 * scale.max(1.0) {
            out.push(C64::new(z.re, 0.0));
        } else if z.im > 0.0 {
            upper.push(z);
        } else if !upper.iter().any(|u| (u - z.conj()).norm() <= 1e-8 * scale) {
            // Lower member whose partner was not computed.
            upper.push(z.conj());
        }
    }
    // Drop lower members that duplicated an upper one.
    let mut seen: Vec<C64> = Vec::new();
    for u in upper {
        if !seen.iter().any(|s| (s - u).norm() <= 1e-8 * u.norm()) {
            seen.push(u);
        }
    }
    for u in seen {
        out.push(u);
        out.push(u.conj());
    }
    out.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));
    out
}

/// Poles of the expanded state-space system.
pub fn arnoldi_poles(st: &StateTransition, want: Want, fs_e: f64, opts: &ArnoldiOptions) -> Result<Vec<Pole>> {
    eigenvalues(&st.matrix, want, opts)?
        .into_iter()
        .map(|z| Pole::new(z, fs_e, Backend::Arnoldi))
        .collect()
}
