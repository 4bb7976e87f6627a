//! Spectral quantities of a walk: the second-largest eigenvalue, the
//! classical gap, and the phase gap of the quantized walk.
//!
//! The walk matrix `W` is similar to the symmetric matrix
//! `S = diag(pi^-1/2) W diag(pi^1/2)` whose off-diagonal entries are
//! `sqrt(W_yx W_xy)`, so eigenvalues are computed on `S`. Small systems use a
//! dense symmetric eigensolve; larger ones a Lanczos iteration with the known
//! top eigenvector `sqrt(pi)` deflated exactly.

use crate::error::{Error, Result};
use crate::exec;
use crate::walk::{boltzmann, DeltaTable, TransitionMatrix, WalkSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Largest spin count handled by the dense eigensolve path.
pub const DENSE_SPECTRAL_SPINS: usize = 8;

const LANCZOS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMethod {
    Dense,
    Iterative,
}

/// Gap report for one walk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Second-largest (signed) eigenvalue of the transition matrix.
    pub lambda1: f64,
    /// Classical spectral gap `1 - lambda1`.
    pub gap: f64,
    /// Phase gap of the quantized walk, `arccos(lambda1)`.
    pub phase_gap: f64,
    pub method: SpectralMethod,
    pub residual: f64,
}

impl SpectralReport {
    fn from_lambda(lambda1: f64, method: SpectralMethod, residual: f64) -> Self {
        let clamped = lambda1.clamp(-1.0, 1.0);
        SpectralReport {
            lambda1,
            gap: 1.0 - lambda1,
            phase_gap: clamped.acos(),
            method,
            residual,
        }
    }
}

/// Symmetrized walk operator in the same implicit sparse layout as
/// [`TransitionMatrix`], with the stationary eigenvector kept alongside.
pub(crate) struct SymmetrizedWalk {
    dim: usize,
    n_moves: usize,
    masks: Vec<u64>,
    /// `s_off[x * N + j] = S[x ^ mask_j, x] = sqrt(W_yx W_xy)`
    s_off: Vec<f64>,
    diag: Vec<f64>,
    /// `sqrt(pi)`, the exact top eigenvector of `S`.
    top: Vec<f64>,
}

impl SymmetrizedWalk {
    pub fn build(spec: &WalkSpec) -> Result<Self> {
        let table = DeltaTable::build(&spec.model, &spec.moves)?;
        let pi = boltzmann(&spec.model, spec.beta)?;
        Self::from_parts(&table, spec, &pi)
    }

    /// Builds from a shared energy-difference table and a precomputed
    /// stationary vector, so annealing scans avoid redundant table work.
    pub fn from_parts(
        table: &DeltaTable,
        spec: &WalkSpec,
        pi: &crate::walk::DistVec,
    ) -> Result<Self> {
        let w = TransitionMatrix::from_delta_table(table, spec);
        let dim = w.dim();
        let n_moves = w.move_count();
        let masks = w.move_masks().to_vec();
        let mut s_off = vec![0.0f64; dim * n_moves];
        {
            let masks_ref = &masks;
            exec::for_each_chunk_mut(&mut s_off, n_moves * exec::CHUNK, |base, chunk| {
                let x0 = base / n_moves;
                for (row, xs) in chunk.chunks_mut(n_moves).enumerate() {
                    let x = x0 + row;
                    for (j, v) in xs.iter_mut().enumerate() {
                        let y = x ^ masks_ref[j] as usize;
                        *v = (w.off_entry(x, j) * w.off_entry(y, j)).sqrt();
                    }
                }
            });
        }
        let diag = (0..dim).map(|x| w.diag_entry(x)).collect();
        let top = pi.as_slice().iter().map(|&p| p.sqrt()).collect();
        Ok(SymmetrizedWalk {
            dim,
            n_moves,
            masks,
            s_off,
            diag,
            top,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `out = S v`.
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n_moves = self.n_moves;
        let masks = &self.masks;
        let s_off = &self.s_off;
        let diag = &self.diag;
        exec::for_each_chunk_mut(out, exec::CHUNK, |base, chunk| {
            for (i, o) in chunk.iter_mut().enumerate() {
                let y = base + i;
                let mut acc = diag[y] * v[y];
                for (j, &m) in masks.iter().enumerate() {
                    // S is symmetric: the entry pairing y with x = y ^ m_j is
                    // stored at both rows.
                    acc += s_off[y * n_moves + j] * v[y ^ m as usize];
                }
                *o = acc;
            }
        });
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.dim, self.dim);
        for x in 0..self.dim {
            s[(x, x)] = self.diag[x];
            for (j, &m) in self.masks.iter().enumerate() {
                let y = x ^ m as usize;
                s[(y, x)] += self.s_off[x * self.n_moves + j];
            }
        }
        s
    }
}

/// Second-largest eigenvalue via dense symmetric eigendecomposition of `S`.
pub fn spectral_dense(spec: &WalkSpec) -> Result<SpectralReport> {
    let n = spec.model.spin_count();
    if n > DENSE_SPECTRAL_SPINS {
        return Err(Error::Capacity {
            requested: n,
            limit: DENSE_SPECTRAL_SPINS,
        });
    }
    let sym = SymmetrizedWalk::build(spec)?;
    let dense = sym.to_dense();
    let eig = dense.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..sym.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda1 = eig.eigenvalues[order[1]];
    let v = eig.eigenvectors.column(order[1]);
    let residual = (&dense * v - v * lambda1).norm();
    Ok(SpectralReport::from_lambda(
        lambda1,
        SpectralMethod::Dense,
        residual,
    ))
}

/// Second-largest eigenvalue via Lanczos on `S` with `sqrt(pi)` deflated.
pub fn spectral_iterative(spec: &WalkSpec) -> Result<SpectralReport> {
    let sym = SymmetrizedWalk::build(spec)?;
    lanczos_second_eigenvalue(&sym, None).map(|(report, _)| report)
}

/// Dense for `n <= 8`, Lanczos above.
pub fn spectral(spec: &WalkSpec) -> Result<SpectralReport> {
    if spec.model.spin_count() <= DENSE_SPECTRAL_SPINS {
        spectral_dense(spec)
    } else {
        spectral_iterative(spec)
    }
}

/// Lanczos with full reorthogonalization on the deflated operator
/// `A = S - 2 v0 v0^T`, which moves the known eigenvalue 1 down to -1 so the
/// largest remaining eigenvalue is exactly lambda1. Returns the report and
/// the converged Ritz vector (useful as a warm start at a nearby beta).
pub(crate) fn lanczos_second_eigenvalue(
    sym: &SymmetrizedWalk,
    warm_start: Option<&[f64]>,
) -> Result<(SpectralReport, Vec<f64>)> {
    let dim = sym.dim();
    let cap = (50.0 * (dim as f64).sqrt()) as usize + 2000;
    let v0 = &sym.top;

    let mut v = match warm_start {
        Some(w) if w.len() == dim => w.to_vec(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ dim as u64);
            (0..dim).map(|_| rng.random::<f64>() - 0.5).collect()
        }
    };
    orthogonalize(&mut v, v0);
    let norm = exec::dot_f64(&v, &v).sqrt();
    if norm < 1e-300 {
        // Warm start happened to be parallel to the deflated direction.
        let mut rng = ChaCha8Rng::seed_from_u64(0xa11ce);
        v = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        orthogonalize(&mut v, v0);
    }
    let norm = exec::dot_f64(&v, &v).sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }

    let mut basis: Vec<Vec<f64>> = vec![v.clone()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0f64; dim];
    let mut best_residual = f64::INFINITY;

    for k in 0..cap {
        sym.apply(&basis[k], &mut w);
        // Deflation: A v = S v - 2 v0 (v0 . v).
        let overlap = exec::dot_f64(v0, &basis[k]);
        for (wi, t) in w.iter_mut().zip(v0.iter()) {
            *wi -= 2.0 * overlap * t;
        }
        let alpha = exec::dot_f64(&basis[k], &w);
        alphas.push(alpha);
        {
            let vk = &basis[k];
            for i in 0..dim {
                w[i] -= alpha * vk[i];
            }
            if k > 0 {
                let vp = &basis[k - 1];
                let beta_prev = betas[k - 1];
                for i in 0..dim {
                    w[i] -= beta_prev * vp[i];
                }
            }
        }
        // Full reorthogonalization against v0 and the stored basis.
        orthogonalize(&mut w, v0);
        for b in &basis {
            orthogonalize(&mut w, b);
        }
        let beta = exec::dot_f64(&w, &w).sqrt();

        // Convergence: Ritz residual for the top eigenvalue of T_k.
        let (theta, s) = tridiag_top_eigenpair(&alphas, &betas);
        let residual = beta * s.last().copied().unwrap_or(1.0).abs();
        best_residual = best_residual.min(residual);
        if residual <= LANCZOS_TOL || beta < 1e-14 {
            let mut ritz = vec![0.0f64; dim];
            for (ci, b) in s.iter().zip(basis.iter()) {
                for i in 0..dim {
                    ritz[i] += ci * b[i];
                }
            }
            let report =
                SpectralReport::from_lambda(theta, SpectralMethod::Iterative, residual);
            return Ok((report, ritz));
        }
        betas.push(beta);
        let mut next = w.clone();
        for x in next.iter_mut() {
            *x /= beta;
        }
        basis.push(next);
    }
    Err(Error::NoConvergence {
        residual: best_residual,
        iterations: cap,
    })
}

fn orthogonalize(v: &mut [f64], against: &[f64]) {
    let overlap = exec::dot_f64(v, against);
    if overlap != 0.0 {
        for (x, a) in v.iter_mut().zip(against.iter()) {
            *x -= overlap * a;
        }
    }
}

/// Largest eigenpair of the symmetric tridiagonal matrix with diagonal
/// `alphas` and off-diagonal `betas`: Sturm bisection for the eigenvalue,
/// one shifted inverse-iteration solve for the eigenvector.
fn tridiag_top_eigenpair(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let k = alphas.len();
    if k == 1 {
        return (alphas[0], vec![1.0]);
    }
    let bound = |i: usize| -> f64 {
        let left = if i > 0 { betas[i - 1].abs() } else { 0.0 };
        let right = if i < k - 1 { betas[i].abs() } else { 0.0 };
        left + right
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        lo = lo.min(alphas[i] - bound(i));
        hi = hi.max(alphas[i] + bound(i));
    }
    // Count of eigenvalues below x via the Sturm sequence.
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut q = alphas[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..k {
            let b2 = betas[i - 1] * betas[i - 1];
            let denom = if q.abs() < 1e-300 {
                1e-300_f64.copysign(if q < 0.0 { -1.0 } else { 1.0 })
            } else {
                q
            };
            q = alphas[i] - x - b2 / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    let scale = hi.abs().max(lo.abs()).max(1.0);
    let mut a = lo;
    let mut b = hi + scale * 1e-12;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if count_below(mid) >= k {
            b = mid;
        } else {
            a = mid;
        }
        if b - a <= 1e-15 * scale {
            break;
        }
    }
    let theta = 0.5 * (a + b);
    // Inverse iteration on (T - (theta + eps) I).
    let shift = theta + 1e-12 * scale;
    let mut s = vec![1.0f64; k];
    for _ in 0..3 {
        s = solve_tridiag_shifted(alphas, betas, shift, &s);
        let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            s = vec![1.0 / (k as f64).sqrt(); k];
            break;
        }
        for x in s.iter_mut() {
            *x /= norm;
        }
    }
    (theta, s)
}

/// Thomas solve of `(T - shift I) x = rhs` with partial regularization.
fn solve_tridiag_shifted(alphas: &[f64], betas: &[f64], shift: f64, rhs: &[f64]) -> Vec<f64> {
    let k = alphas.len();
    let mut c = vec![0.0f64; k];
    let mut d = vec![0.0f64; k];
    let mut denom = alphas[0] - shift;
    if denom.abs() < 1e-300 {
        denom = 1e-300;
    }
    if k > 1 {
        c[0] = betas[0] / denom;
    }
    d[0] = rhs[0] / denom;
    for i in 1..k {
        let mut m = alphas[i] - shift - betas[i - 1] * c[i - 1];
        if m.abs() < 1e-300 {
            m = 1e-300;
        }
        if i < k - 1 {
            c[i] = betas[i] / m;
        }
        d[i] = (rhs[i] - betas[i - 1] * d[i - 1]) / m;
    }
    let mut x = vec![0.0f64; k];
    x[k - 1] = d[k - 1];
    for i in (0..k - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}
