//! Exact simulation of the quantized Metropolis-Hastings walk on the compact
//! System x Move x Coin space.
//!
//! The move register of the circuit is unary over the padded slot count `M`,
//! but the walk never leaves the span of the all-zeros state and the one-hot
//! states, so states are stored over `M + 1` reachable move slots (slot 0 is
//! the null state). One walk application is the composition
//! `reflection . move_prep_adj . coin_adj . flip . coin . move_prep`.
//!
//! The move preparation fixes only its action on the null slot (null ->
//! uniform over all M slots). Its completion to a full orthogonal operator is
//! a free choice; both a Householder involution and a rotation-tree completion
//! are provided behind the same interface, and the choice is recorded so
//! result files can state it.

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::walk::{DeltaTable, DistVec, WalkSpec};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Dense-guard for extracting the projected walk matrix.
pub const MAX_EXTRACT_SPINS: usize = 8;
/// Dense-guard for full diagonalization of the compact walk operator.
pub const MAX_EIGENPHASE_SPINS: usize = 4;

/// Which orthogonal completion realizes the move preparation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VCompletion {
    /// Reflection through `(e_null - uniform)/||.||`; self-inverse.
    Householder,
    /// Binary fan-out of two-dimensional rotations, mirroring a swap-tree
    /// preparation of the uniform unary state. Requires a power-of-two slot
    /// count.
    RotationTree,
}

/// One component of the walk operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    /// Move preparation: null slot -> uniform superposition over move slots.
    MovePrep,
    MovePrepAdj,
    /// Boltzmann coin: rotates the coin by the acceptance amplitude of the
    /// selected move; identity on the null and padded slots.
    Coin,
    CoinAdj,
    /// Flips the proposed spins, conditioned on the coin being 1.
    Flip,
    /// Reflection about the null-move, coin-0 subspace (`2P - I`): amplitudes
    /// outside that slice change sign.
    Reflection,
}

#[derive(Debug, Clone, Copy)]
struct CoinAmp {
    /// `sqrt(1 - A)`: amplitude to keep the coin at 0.
    keep: f64,
    /// `sqrt(A)`: amplitude to set the coin to 1.
    go: f64,
}

#[derive(Debug, Clone, Copy)]
enum TreeOp {
    Swap(usize, usize),
    Givens(usize, usize),
}

/// Precomputed walk operator for one `WalkSpec`: coin-rotation amplitudes per
/// (configuration, move) and the move-space operator. Immutable and shareable.
pub struct WalkOperatorHandle {
    spec: WalkSpec,
    n_sys: usize,
    dim_sys: usize,
    n_moves: usize,
    m_pad: usize,
    masks: Vec<u64>,
    amps: Vec<CoinAmp>,
    completion: VCompletion,
    tree_ops: Vec<TreeOp>,
}

impl WalkOperatorHandle {
    pub fn new(spec: &WalkSpec, completion: VCompletion) -> Result<Self> {
        let table = DeltaTable::build(&spec.model, &spec.moves)?;
        Self::from_delta_table(&table, spec, completion)
    }

    /// Builds from a shared energy-difference table; the table is the
    /// beta-independent part, so annealing schedules reuse it across handles.
    pub fn from_delta_table(
        table: &DeltaTable,
        spec: &WalkSpec,
        completion: VCompletion,
    ) -> Result<Self> {
        let n_sys = spec.model.spin_count();
        let dim_sys = table.state_count();
        let n_moves = table.move_count();
        let m_pad = spec.slot_count();
        if completion == VCompletion::RotationTree && !m_pad.is_power_of_two() {
            return Err(invalid(
                "rotation-tree move preparation needs a power-of-two slot count",
            ));
        }
        let mut amps = vec![
            CoinAmp {
                keep: 0.0,
                go: 0.0
            };
            dim_sys * n_moves
        ];
        exec::for_each_chunk_mut(&mut amps, n_moves * exec::CHUNK, |base, chunk| {
            let x0 = base / n_moves;
            for (row, xs) in chunk.chunks_mut(n_moves).enumerate() {
                let x = x0 + row;
                for (j, v) in xs.iter_mut().enumerate() {
                    let a = spec.rule.probability(table.delta(x, j), spec.beta);
                    *v = CoinAmp {
                        keep: (1.0 - a).sqrt(),
                        go: a.sqrt(),
                    };
                }
            }
        });
        let tree_ops = if completion == VCompletion::RotationTree {
            build_tree_ops(m_pad)
        } else {
            Vec::new()
        };
        Ok(WalkOperatorHandle {
            spec: spec.clone(),
            n_sys,
            dim_sys,
            n_moves,
            m_pad,
            masks: table.move_masks().to_vec(),
            amps,
            completion,
            tree_ops,
        })
    }

    pub fn spec(&self) -> &WalkSpec {
        &self.spec
    }

    pub fn spin_count(&self) -> usize {
        self.n_sys
    }

    pub fn slot_count(&self) -> usize {
        self.m_pad
    }

    pub fn completion(&self) -> VCompletion {
        self.completion
    }

    /// Compact state dimension `2^n * (M+1) * 2`.
    pub fn compact_dim(&self) -> usize {
        self.dim_sys * (self.m_pad + 1) * 2
    }

    /// Worst deviation of `keep^2 + go^2` from 1 across the rotation table.
    pub fn rotation_norm_error(&self) -> f64 {
        self.amps
            .iter()
            .map(|a| (a.keep * a.keep + a.go * a.go - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Fan-out schedule preparing `e_1 -> uniform over slots 1..=M` (plus the
/// initial null <-> slot-1 swap), for M a power of two.
fn build_tree_ops(m_pad: usize) -> Vec<TreeOp> {
    let mut ops = vec![TreeOp::Swap(0, 1)];
    let mut step = m_pad / 2;
    while step >= 1 {
        let mut base = 1;
        while base + step <= m_pad {
            ops.push(TreeOp::Givens(base, base + step));
            base += 2 * step;
        }
        step /= 2;
    }
    ops
}

/// Complex amplitude tensor over (configuration, move slot, coin).
#[derive(Debug, Clone)]
pub struct QState {
    n_sys: usize,
    dim_sys: usize,
    m_pad: usize,
    amps: Vec<Complex64>,
}

impl QState {
    fn zero(n_sys: usize, m_pad: usize) -> Self {
        let dim_sys = 1usize << n_sys;
        QState {
            n_sys,
            dim_sys,
            m_pad,
            amps: vec![Complex64::ZERO; dim_sys * (m_pad + 1) * 2],
        }
    }

    /// Coherent encoding of a probability distribution: amplitude
    /// `sqrt(p_x)` on `(x, null, 0)`.
    pub fn from_distribution(p: &DistVec, n_sys: usize, m_pad: usize) -> Result<Self> {
        if p.len() != 1usize << n_sys {
            return Err(invalid("distribution length does not match spin count"));
        }
        let total = exec::sum_f64(p.as_slice());
        if (total - 1.0).abs() > 1e-10 {
            return Err(invalid(format!(
                "input distribution sums to {total}, not 1"
            )));
        }
        let mut s = Self::zero(n_sys, m_pad);
        let stride = (m_pad + 1) * 2;
        for (x, &px) in p.as_slice().iter().enumerate() {
            s.amps[x * stride] = Complex64::new(px.sqrt(), 0.0);
        }
        Ok(s)
    }

    /// Basis state `(x, null, 0)`.
    pub fn computational(n_sys: usize, m_pad: usize, x: usize) -> Self {
        let mut s = Self::zero(n_sys, m_pad);
        s.amps[x * (m_pad + 1) * 2] = Complex64::ONE;
        s
    }

    /// Basis state at a flat compact index; columns of dense operator dumps.
    pub fn basis_flat(n_sys: usize, m_pad: usize, flat: usize) -> Self {
        let mut s = Self::zero(n_sys, m_pad);
        s.amps[flat] = Complex64::ONE;
        s
    }

    #[inline]
    fn idx(&self, x: usize, m: usize, c: usize) -> usize {
        (x * (self.m_pad + 1) + m) * 2 + c
    }

    pub fn amplitude(&self, x: usize, m: usize, c: usize) -> Complex64 {
        self.amps[self.idx(x, m, c)]
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn spin_count(&self) -> usize {
        self.n_sys
    }

    pub fn slot_count(&self) -> usize {
        self.m_pad
    }

    pub fn norm_sqr(&self) -> f64 {
        exec::sum_by(&self.amps, |_, a| a.norm_sqr())
    }

    pub fn dot(&self, other: &QState) -> Complex64 {
        let re = exec::sum_by(&self.amps, |i, a| {
            a.re * other.amps[i].re + a.im * other.amps[i].im
        });
        let im = exec::sum_by(&self.amps, |i, a| {
            a.re * other.amps[i].im - a.im * other.amps[i].re
        });
        Complex64::new(re, im)
    }

    pub fn distance(&self, other: &QState) -> f64 {
        exec::sum_by(&self.amps, |i, a| (a - other.amps[i]).norm_sqr()).sqrt()
    }

    /// Probability of measuring each system configuration:
    /// `p(x) = sum_{m,c} |amp(x,m,c)|^2`.
    pub fn system_marginal(&self) -> DistVec {
        let stride = (self.m_pad + 1) * 2;
        let mut p = vec![0.0f64; self.dim_sys];
        {
            let amps = &self.amps;
            exec::for_each_chunk_mut(&mut p, exec::CHUNK, |base, chunk| {
                for (i, v) in chunk.iter_mut().enumerate() {
                    let x = base + i;
                    *v = amps[x * stride..(x + 1) * stride]
                        .iter()
                        .map(Complex64::norm_sqr)
                        .sum();
                }
            });
        }
        DistVec::from_raw(p)
    }

    fn check_compatible(&self, h: &WalkOperatorHandle) -> Result<()> {
        if self.n_sys != h.n_sys || self.m_pad != h.m_pad {
            return Err(invalid("state and handle dimensions differ"));
        }
        Ok(())
    }

    /// Applies one component in place.
    pub fn apply(&mut self, component: Component, h: &WalkOperatorHandle) -> Result<()> {
        self.check_compatible(h)?;
        match component {
            Component::MovePrep => self.apply_move_prep(h, false),
            Component::MovePrepAdj => self.apply_move_prep(h, true),
            Component::Coin => self.apply_coin(h, false),
            Component::CoinAdj => self.apply_coin(h, true),
            Component::Flip => self.apply_flip(h),
            Component::Reflection => self.apply_reflection(),
        }
        Ok(())
    }

    /// One full walk application.
    pub fn apply_walk(&mut self, h: &WalkOperatorHandle) -> Result<()> {
        #[cfg(debug_assertions)]
        let before = self.norm_sqr();
        self.apply(Component::MovePrep, h)?;
        self.apply(Component::Coin, h)?;
        self.apply(Component::Flip, h)?;
        self.apply(Component::CoinAdj, h)?;
        self.apply(Component::MovePrepAdj, h)?;
        self.apply(Component::Reflection, h)?;
        #[cfg(debug_assertions)]
        {
            let after = self.norm_sqr();
            debug_assert!(
                (after - before).abs() <= 1e-10 * before.max(1.0),
                "walk application drifted the norm: {before} -> {after}"
            );
        }
        Ok(())
    }

    /// The projected walk without the reflection; used to read off the
    /// similarity-transformed classical matrix.
    fn apply_walk_core(&mut self, h: &WalkOperatorHandle) -> Result<()> {
        self.apply(Component::MovePrep, h)?;
        self.apply(Component::Coin, h)?;
        self.apply(Component::Flip, h)?;
        self.apply(Component::CoinAdj, h)?;
        self.apply(Component::MovePrepAdj, h)?;
        Ok(())
    }

    fn apply_move_prep(&mut self, h: &WalkOperatorHandle, adjoint: bool) {
        let m_pad = self.m_pad;
        let slots = m_pad + 1;
        let block = slots * 2;
        match h.completion {
            VCompletion::Householder => {
                // Reflection through w = e_null - u, ||w||^2 = 2: v -= (w.v) w.
                let inv_sqrt_m = 1.0 / (m_pad as f64).sqrt();
                exec::for_each_chunk_mut(&mut self.amps, block * 256, |_, chunk| {
                    for xblock in chunk.chunks_mut(block) {
                        for c in 0..2 {
                            let mut dot = xblock[c];
                            for m in 1..slots {
                                dot -= xblock[m * 2 + c] * inv_sqrt_m;
                            }
                            xblock[c] -= dot;
                            for m in 1..slots {
                                xblock[m * 2 + c] += dot * inv_sqrt_m;
                            }
                        }
                    }
                });
            }
            VCompletion::RotationTree => {
                let ops = &h.tree_ops;
                let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
                exec::for_each_chunk_mut(&mut self.amps, block * 256, |_, chunk| {
                    for xblock in chunk.chunks_mut(block) {
                        for c in 0..2 {
                            if !adjoint {
                                for op in ops.iter() {
                                    apply_tree_op(xblock, c, *op, false, inv_sqrt2);
                                }
                            } else {
                                for op in ops.iter().rev() {
                                    apply_tree_op(xblock, c, *op, true, inv_sqrt2);
                                }
                            }
                        }
                    }
                });
            }
        }
    }

    fn apply_coin(&mut self, h: &WalkOperatorHandle, adjoint: bool) {
        let slots = self.m_pad + 1;
        let block = slots * 2;
        let n_moves = h.n_moves;
        let amps_table = &h.amps;
        exec::for_each_chunk_mut(&mut self.amps, block * 256, |base, chunk| {
            let x0 = base / block;
            for (row, xblock) in chunk.chunks_mut(block).enumerate() {
                let x = x0 + row;
                for j in 1..=n_moves {
                    let CoinAmp { keep, go } = amps_table[x * n_moves + (j - 1)];
                    let a0 = xblock[j * 2];
                    let a1 = xblock[j * 2 + 1];
                    if adjoint {
                        xblock[j * 2] = a0 * keep + a1 * go;
                        xblock[j * 2 + 1] = a1 * keep - a0 * go;
                    } else {
                        xblock[j * 2] = a0 * keep - a1 * go;
                        xblock[j * 2 + 1] = a1 * keep + a0 * go;
                    }
                }
            }
        });
    }

    fn apply_flip(&mut self, h: &WalkOperatorHandle) {
        let slots = self.m_pad + 1;
        // Coin-1 amplitudes move between configuration pairs x <-> x ^ mask_j.
        for (j, &mask) in h.masks.iter().enumerate() {
            let m = j + 1;
            for x in 0..self.dim_sys {
                let y = x ^ mask as usize;
                if x < y {
                    let ix = (x * slots + m) * 2 + 1;
                    let iy = (y * slots + m) * 2 + 1;
                    self.amps.swap(ix, iy);
                }
            }
        }
    }

    fn apply_reflection(&mut self) {
        let block = (self.m_pad + 1) * 2;
        exec::for_each_chunk_mut(&mut self.amps, block * 256, |_, chunk| {
            for xblock in chunk.chunks_mut(block) {
                for (i, a) in xblock.iter_mut().enumerate() {
                    if i != 0 {
                        *a = -*a;
                    }
                }
            }
        });
    }
}

#[inline]
fn apply_tree_op(xblock: &mut [Complex64], c: usize, op: TreeOp, adjoint: bool, inv_sqrt2: f64) {
    match op {
        TreeOp::Swap(a, b) => xblock.swap(a * 2 + c, b * 2 + c),
        TreeOp::Givens(a, b) => {
            let va = xblock[a * 2 + c];
            let vb = xblock[b * 2 + c];
            if adjoint {
                xblock[a * 2 + c] = (va + vb) * inv_sqrt2;
                xblock[b * 2 + c] = (vb - va) * inv_sqrt2;
            } else {
                xblock[a * 2 + c] = (va - vb) * inv_sqrt2;
                xblock[b * 2 + c] = (va + vb) * inv_sqrt2;
            }
        }
    }
}

/// Columns of the projected operator `P (V' B' F B V) P` restricted to the
/// null-move, coin-0 slice. For a reversible spec this equals
/// `diag(pi^-1/2) W_pad diag(pi^1/2)`.
pub fn extract_x_matrix(h: &WalkOperatorHandle) -> Result<DMatrix<f64>> {
    if h.n_sys > MAX_EXTRACT_SPINS {
        return Err(Error::Capacity {
            requested: h.n_sys,
            limit: MAX_EXTRACT_SPINS,
        });
    }
    let dim = h.dim_sys;
    let stride = (h.m_pad + 1) * 2;
    let mut x_mat = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut state = QState::computational(h.n_sys, h.m_pad, col);
        state.apply_walk_core(h)?;
        for row in 0..dim {
            let a = state.amps[row * stride];
            debug_assert!(a.im.abs() < 1e-12);
            x_mat[(row, col)] = a.re;
        }
    }
    Ok(x_mat)
}

/// Dense matrix of one full walk application on the compact space.
pub fn walk_dense_matrix(h: &WalkOperatorHandle) -> Result<DMatrix<f64>> {
    let dim = h.compact_dim();
    if dim > 8192 {
        return Err(Error::Capacity {
            requested: dim,
            limit: 8192,
        });
    }
    let mut u = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut state = QState::basis_flat(h.n_sys, h.m_pad, col);
        state.apply_walk(h)?;
        for row in 0..dim {
            let a = state.amps[row];
            debug_assert!(a.im.abs() < 1e-12);
            u[(row, col)] = a.re;
        }
    }
    Ok(u)
}

/// All eigenphases of the compact walk operator in `[0, pi]`, sorted.
/// Every eigenvalue `lambda_k` of the padded classical walk appears as
/// `arccos(lambda_k)`.
///
/// The walk matrix is real orthogonal, hence normal: its eigenvalues
/// `exp(±i theta)` share eigenvectors with the symmetric part
/// `(U + U^T)/2`, whose eigenvalues are exactly `cos theta`. A symmetric
/// eigensolve is therefore both sufficient and far more robust than a
/// general Schur iteration on a spectrum hugging the unit circle.
pub fn eigenphases_small(h: &WalkOperatorHandle) -> Result<Vec<f64>> {
    if h.n_sys > MAX_EIGENPHASE_SPINS {
        return Err(Error::Capacity {
            requested: h.n_sys,
            limit: MAX_EIGENPHASE_SPINS,
        });
    }
    let u = walk_dense_matrix(h)?;
    let sym = (&u + u.transpose()) * 0.5;
    let mut phases: Vec<f64> = sym
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|c| c.clamp(-1.0, 1.0).acos())
        .collect();
    phases.sort_by(f64::total_cmp);
    Ok(phases)
}
