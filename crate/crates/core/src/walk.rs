//! Metropolis-Hastings and Glauber transition matrices on Ising state spaces,
//! Boltzmann distributions, distribution evolution, and trajectory sampling.
//!
//! Transitions propose a move uniformly (over the raw move set, or over the
//! padded power-of-two slot count where trailing slots are no-ops) and accept
//! with a probability depending only on the energy difference. Columns are
//! stored implicitly: the off-diagonal targets of column `x` are `x ^ mask_j`.

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::ising::{IsingModel, MoveSet, SpinConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

/// Guard for operations that materialize a vector over all 2^n configurations.
pub const MAX_DENSE_SPINS: usize = 26;

/// Acceptance rule for a proposed move with energy difference `dE` at inverse
/// temperature `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptanceRule {
    /// `min(1, exp(-beta dE))`
    Metropolis,
    /// Heat-bath: `1 / (1 + exp(beta dE))`
    Glauber,
}

impl AcceptanceRule {
    /// Acceptance probability; saturates cleanly for large `|beta * dE|`.
    #[inline]
    pub fn probability(self, delta_e: f64, beta: f64) -> f64 {
        let a = beta * delta_e;
        match self {
            AcceptanceRule::Metropolis => {
                if a <= 0.0 {
                    1.0
                } else {
                    (-a).exp()
                }
            }
            AcceptanceRule::Glauber => 1.0 / (1.0 + a.exp()),
        }
    }
}

/// Everything that determines a walk: model, move set, inverse temperature,
/// acceptance rule, and whether the move register is padded to a power of two.
#[derive(Debug, Clone)]
pub struct WalkSpec {
    pub model: Arc<IsingModel>,
    pub moves: Arc<MoveSet>,
    pub beta: f64,
    pub rule: AcceptanceRule,
    pub padded: bool,
}

impl WalkSpec {
    pub fn new(
        model: Arc<IsingModel>,
        moves: Arc<MoveSet>,
        beta: f64,
        rule: AcceptanceRule,
        padded: bool,
    ) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(invalid("beta must be finite and non-negative"));
        }
        if !moves.compatible_with(&model) {
            return Err(invalid("move set indexes spins outside the model"));
        }
        Ok(WalkSpec {
            model,
            moves,
            beta,
            rule,
            padded,
        })
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        let mut s = self.clone();
        s.beta = beta;
        s
    }

    /// Number of move slots: `2^ceil(log2 N)` when padded, else `N`.
    pub fn slot_count(&self) -> usize {
        if self.padded {
            self.moves.len().next_power_of_two()
        } else {
            self.moves.len()
        }
    }

    pub fn state_count(&self) -> Result<usize> {
        let n = self.model.spin_count();
        if n > MAX_DENSE_SPINS {
            return Err(Error::Capacity {
                requested: n,
                limit: MAX_DENSE_SPINS,
            });
        }
        Ok(1usize << n)
    }

    pub fn same_chain(&self, other: &WalkSpec) -> bool {
        (Arc::ptr_eq(&self.model, &other.model) || self.model.terms() == other.model.terms())
            && (Arc::ptr_eq(&self.moves, &other.moves) || self.moves == other.moves)
            && self.rule == other.rule
            && self.padded == other.padded
    }
}

/// Probability vector over the 2^n spin configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct DistVec(Vec<f64>);

impl DistVec {
    pub fn uniform(dim: usize) -> Self {
        DistVec(vec![1.0 / dim as f64; dim])
    }

    pub fn point(dim: usize, at: usize) -> Self {
        let mut p = vec![0.0; dim];
        p[at] = 1.0;
        DistVec(p)
    }

    /// Wraps without validation; for internally constructed vectors such as
    /// measured marginals whose normalization carries float error.
    pub(crate) fn from_raw(p: Vec<f64>) -> Self {
        DistVec(p)
    }

    /// Wraps a raw vector after checking non-negativity and normalization.
    pub fn from_vec(p: Vec<f64>) -> Result<Self> {
        if p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(invalid("distribution entries must be finite and >= 0"));
        }
        let total = exec::sum_f64(&p);
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("distribution sums to {total}, not 1")));
        }
        Ok(DistVec(p))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn mass(&self, indices: &[u64]) -> f64 {
        indices.iter().map(|&i| self.0[i as usize]).sum()
    }

    pub fn total_variation(&self, other: &DistVec) -> f64 {
        0.5 * exec::sum_by(&self.0, |i, p| (p - other.0[i]).abs())
    }
}

/// Energies of all 2^n configurations, filled by a Gray-code sweep so each
/// entry costs one single-spin energy difference. Each aligned chunk restarts
/// from a full evaluation, which bounds accumulated rounding and lets chunks
/// fill independently: the Gray images of the counter range
/// `[H 2^k, (H+1) 2^k)` are exactly the block starting at `gray(H) 2^k`.
pub fn energy_table(model: &IsingModel) -> Result<Vec<f64>> {
    let n = model.spin_count();
    if n > MAX_DENSE_SPINS {
        return Err(Error::Capacity {
            requested: n,
            limit: MAX_DENSE_SPINS,
        });
    }
    let dim = 1usize << n;
    let mut table = vec![0.0f64; dim];
    exec::for_each_chunk_mut(&mut table, exec::CHUNK, |base, chunk| {
        let block = gray_inverse((base / chunk.len()) as u64);
        let t0 = block * chunk.len() as u64;
        let mut x = gray(t0);
        let mut e = model.energy_of_index(x);
        chunk[(x as usize) - base] = e;
        for l in 1..chunk.len() {
            let t = t0 + l as u64;
            let bit = t.trailing_zeros() as usize;
            e += single_flip_delta(model, x, bit);
            x ^= 1 << bit;
            chunk[(x as usize) - base] = e;
        }
    });
    Ok(table)
}

#[inline]
fn gray(t: u64) -> u64 {
    t ^ (t >> 1)
}

#[inline]
fn gray_inverse(g: u64) -> u64 {
    let mut t = g;
    let mut shift = 1;
    while shift < 64 {
        t ^= t >> shift;
        shift <<= 1;
    }
    t
}

#[inline]
fn single_flip_delta(model: &IsingModel, x: u64, spin: usize) -> f64 {
    let mut d = 0.0;
    for &tid in model.terms_of_spin(spin) {
        let t = &model.terms()[tid as usize];
        let mask = t
            .support
            .iter()
            .fold(0u64, |m, &s| m | (1 << s));
        d += -2.0 * t.coupling * crate::ising::parity_sign(x & mask);
    }
    d
}

/// Boltzmann distribution `exp(-beta E) / Z` from a precomputed energy table,
/// shifted by the minimum of `beta * E` for stability.
pub fn boltzmann_from_energies(energies: &[f64], beta: f64) -> DistVec {
    let shift = energies
        .iter()
        .map(|&e| beta * e)
        .fold(f64::INFINITY, f64::min);
    let mut p: Vec<f64> = vec![0.0; energies.len()];
    exec::for_each_chunk_mut(&mut p, exec::CHUNK, |base, chunk| {
        for (i, v) in chunk.iter_mut().enumerate() {
            *v = (shift - beta * energies[base + i]).exp();
        }
    });
    let z = exec::sum_f64(&p);
    exec::for_each_chunk_mut(&mut p, exec::CHUNK, |_, chunk| {
        for v in chunk.iter_mut() {
            *v /= z;
        }
    });
    DistVec(p)
}

/// Boltzmann distribution over all 2^n configurations (n <= 26 guard).
pub fn boltzmann(model: &IsingModel, beta: f64) -> Result<DistVec> {
    Ok(boltzmann_from_energies(&energy_table(model)?, beta))
}

/// Precomputed energy differences `dE_j(x)` for every configuration and move.
///
/// The differences do not depend on temperature, so one table serves every
/// beta of an annealing schedule. When the model produces few distinct values
/// (chains, binary couplings) an index form lets acceptance rows be built
/// from a handful of exponentials.
#[derive(Debug)]
pub struct DeltaTable {
    dim: usize,
    n_moves: usize,
    masks: Vec<u64>,
    delta: Vec<f64>,
    distinct: Option<Distinct>,
}

#[derive(Debug)]
struct Distinct {
    values: Vec<f64>,
    index: Vec<u32>,
}

const MAX_DISTINCT: usize = 1024;

impl DeltaTable {
    pub fn build(model: &IsingModel, moves: &MoveSet) -> Result<Self> {
        let n = model.spin_count();
        if n > MAX_DENSE_SPINS {
            return Err(Error::Capacity {
                requested: n,
                limit: MAX_DENSE_SPINS,
            });
        }
        if !moves.compatible_with(model) {
            return Err(invalid("move set indexes spins outside the model"));
        }
        let dim = 1usize << n;
        let n_moves = moves.len();
        let masks = moves.masks64();
        // Per move: term ids with odd overlap (the only ones whose product
        // changes sign) and their masks.
        let mut odd_terms: Vec<Vec<(u64, f64)>> = Vec::with_capacity(n_moves);
        for mv in moves.moves() {
            let mut ids: Vec<u32> = mv
                .iter()
                .flat_map(|&s| model.terms_of_spin(s).iter().copied())
                .collect();
            ids.sort_unstable();
            ids.dedup();
            let mut entries = Vec::new();
            for id in ids {
                let t = &model.terms()[id as usize];
                let overlap = t.support.iter().filter(|s| mv.contains(s)).count();
                if overlap % 2 == 1 {
                    let mask = t.support.iter().fold(0u64, |m, &s| m | (1 << s));
                    entries.push((mask, t.coupling));
                }
            }
            odd_terms.push(entries);
        }
        let mut delta = vec![0.0f64; dim * n_moves];
        exec::for_each_chunk_mut(&mut delta, n_moves * exec::CHUNK, |base, chunk| {
            let x0 = base / n_moves;
            for (row, xs) in chunk.chunks_mut(n_moves).enumerate() {
                let x = (x0 + row) as u64;
                for (j, v) in xs.iter_mut().enumerate() {
                    let mut d = 0.0;
                    for &(mask, j_l) in &odd_terms[j] {
                        d += -2.0 * j_l * crate::ising::parity_sign(x & mask);
                    }
                    *v = d;
                }
            }
        });
        let distinct = Self::detect_distinct(&delta);
        Ok(DeltaTable {
            dim,
            n_moves,
            masks,
            delta,
            distinct,
        })
    }

    fn detect_distinct(delta: &[f64]) -> Option<Distinct> {
        let mut rank: HashMap<u64, u32> = HashMap::new();
        let mut values = Vec::new();
        for &d in delta {
            let bits = d.to_bits();
            if !rank.contains_key(&bits) {
                if values.len() >= MAX_DISTINCT {
                    return None;
                }
                rank.insert(bits, values.len() as u32);
                values.push(d);
            }
        }
        let index = delta.iter().map(|d| rank[&d.to_bits()]).collect();
        Some(Distinct { values, index })
    }

    pub fn state_count(&self) -> usize {
        self.dim
    }

    pub fn move_count(&self) -> usize {
        self.n_moves
    }

    pub fn move_masks(&self) -> &[u64] {
        &self.masks
    }

    /// `dE_j(x)` for configuration index `x` and move `j`.
    #[inline]
    pub fn delta(&self, x: usize, j: usize) -> f64 {
        self.delta[x * self.n_moves + j]
    }

    /// Fills `out[x * N + j] = A(dE_j(x))` for the given rule and beta.
    pub fn acceptance_into(&self, rule: AcceptanceRule, beta: f64, out: &mut [f64]) {
        assert_eq!(out.len(), self.delta.len());
        match &self.distinct {
            Some(d) => {
                let table: Vec<f64> = d
                    .values
                    .iter()
                    .map(|&v| rule.probability(v, beta))
                    .collect();
                exec::for_each_chunk_mut(out, exec::CHUNK * 4, |base, chunk| {
                    for (i, v) in chunk.iter_mut().enumerate() {
                        *v = table[d.index[base + i] as usize];
                    }
                });
            }
            None => {
                let delta = &self.delta;
                exec::for_each_chunk_mut(out, exec::CHUNK * 4, |base, chunk| {
                    for (i, v) in chunk.iter_mut().enumerate() {
                        *v = rule.probability(delta[base + i], beta);
                    }
                });
            }
        }
    }
}

/// Column-stochastic transition matrix in implicit sparse form: column `x`
/// holds off-diagonal entries at rows `x ^ mask_j` plus a diagonal that
/// absorbs rejected and padded-slot weight.
#[derive(Debug)]
pub struct TransitionMatrix {
    dim: usize,
    n_moves: usize,
    slot_count: usize,
    masks: Vec<u64>,
    /// `off[x * N + j] = W[x ^ mask_j, x]`
    off: Vec<f64>,
    diag: Vec<f64>,
}

impl TransitionMatrix {
    pub fn build(spec: &WalkSpec) -> Result<Self> {
        let table = DeltaTable::build(&spec.model, &spec.moves)?;
        Ok(Self::from_delta_table(&table, spec))
    }

    pub fn from_delta_table(table: &DeltaTable, spec: &WalkSpec) -> Self {
        let dim = table.state_count();
        let n_moves = table.move_count();
        let slot_count = spec.slot_count();
        let mut off = vec![0.0f64; dim * n_moves];
        table.acceptance_into(spec.rule, spec.beta, &mut off);
        let inv_m = 1.0 / slot_count as f64;
        let mut diag = vec![0.0f64; dim];
        {
            let off_ref = &off;
            exec::for_each_chunk_mut(&mut diag, exec::CHUNK, |base, chunk| {
                for (i, d) in chunk.iter_mut().enumerate() {
                    let x = base + i;
                    let mut acc = 0.0;
                    for j in 0..n_moves {
                        acc += off_ref[x * n_moves + j];
                    }
                    *d = 1.0 - acc * inv_m;
                }
            });
        }
        // Scale acceptances into transition probabilities.
        exec::for_each_chunk_mut(&mut off, exec::CHUNK * 4, |_, chunk| {
            for v in chunk.iter_mut() {
                *v *= inv_m;
            }
        });
        TransitionMatrix {
            dim,
            n_moves,
            slot_count,
            masks: table.move_masks().to_vec(),
            off,
            diag,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn move_count(&self) -> usize {
        self.n_moves
    }

    pub fn slot_count(&self) -> usize {
        self.slot_count
    }

    pub fn move_masks(&self) -> &[u64] {
        &self.masks
    }

    /// Off-diagonal entry `W[x ^ mask_j, x]`.
    #[inline]
    pub fn off_entry(&self, x: usize, j: usize) -> f64 {
        self.off[x * self.n_moves + j]
    }

    #[inline]
    pub fn diag_entry(&self, x: usize) -> f64 {
        self.diag[x]
    }

    /// `p' = W p`.
    pub fn apply(&self, p: &DistVec) -> DistVec {
        let mut out = vec![0.0f64; self.dim];
        self.apply_into(p.as_slice(), &mut out);
        DistVec(out)
    }

    pub(crate) fn apply_into(&self, p: &[f64], out: &mut [f64]) {
        let n_moves = self.n_moves;
        let masks = &self.masks;
        let off = &self.off;
        let diag = &self.diag;
        exec::for_each_chunk_mut(out, exec::CHUNK, |base, chunk| {
            for (i, o) in chunk.iter_mut().enumerate() {
                let y = base + i;
                let mut acc = diag[y] * p[y];
                for (j, &m) in masks.iter().enumerate() {
                    let x = y ^ m as usize;
                    acc += off[x * n_moves + j] * p[x];
                }
                *o = acc;
            }
        });
    }

    /// Maximum deviation of any column sum from 1.
    pub fn column_sum_error(&self) -> f64 {
        (0..self.dim)
            .map(|x| {
                let s: f64 = self.diag[x]
                    + (0..self.n_moves)
                        .map(|j| self.off[x * self.n_moves + j])
                        .sum::<f64>();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Max over stored entry pairs of `|W_yx pi_x - W_xy pi_y|`.
    pub fn detailed_balance_residual(&self, pi: &DistVec) -> f64 {
        assert_eq!(pi.len(), self.dim);
        let p = pi.as_slice();
        let mut worst = 0.0f64;
        for x in 0..self.dim {
            for (j, &m) in self.masks.iter().enumerate() {
                let y = x ^ m as usize;
                let fwd = self.off[x * self.n_moves + j] * p[x];
                let back = self.off[y * self.n_moves + j] * p[y];
                worst = worst.max((fwd - back).abs());
            }
        }
        worst
    }

    /// Dense form for small state spaces (oracles, diagnostics).
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if self.dim > 4096 {
            return Err(Error::Capacity {
                requested: self.dim,
                limit: 4096,
            });
        }
        let mut w = DMatrix::zeros(self.dim, self.dim);
        for x in 0..self.dim {
            w[(x, x)] = self.diag[x];
            for (j, &m) in self.masks.iter().enumerate() {
                let y = x ^ m as usize;
                w[(y, x)] += self.off[x * self.n_moves + j];
            }
        }
        Ok(w)
    }
}

/// Detailed-balance residual of an arbitrary dense transition matrix.
pub fn dense_detailed_balance_residual(w: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let d = w.nrows();
    let mut worst = 0.0f64;
    for x in 0..d {
        for y in 0..d {
            worst = worst.max((w[(y, x)] * pi[x] - w[(x, y)] * pi[y]).abs());
        }
    }
    worst
}

/// Applies walk steps to a distribution without materializing matrices; the
/// acceptance row is rebuilt per step so beta may vary along a schedule.
pub struct Evolver {
    table: Arc<DeltaTable>,
    rule: AcceptanceRule,
    slot_count: usize,
    acc: Vec<f64>,
    scratch: Vec<f64>,
    drift: f64,
}

impl Evolver {
    pub fn new(table: Arc<DeltaTable>, rule: AcceptanceRule, slot_count: usize) -> Self {
        let dim = table.state_count();
        let len = dim * table.move_count();
        Evolver {
            table,
            rule,
            slot_count,
            acc: vec![0.0; len],
            scratch: vec![0.0; dim],
            drift: 0.0,
        }
    }

    pub fn for_spec(spec: &WalkSpec) -> Result<Self> {
        let table = DeltaTable::build(&spec.model, &spec.moves)?;
        Ok(Self::new(Arc::new(table), spec.rule, spec.slot_count()))
    }

    /// One step `p <- W(beta) p`, renormalizing and recording the drift.
    pub fn step(&mut self, p: &mut DistVec, beta: f64) {
        let dim = self.table.state_count();
        let n_moves = self.table.move_count();
        assert_eq!(p.len(), dim);
        self.table.acceptance_into(self.rule, beta, &mut self.acc);
        let inv_m = 1.0 / self.slot_count as f64;
        let masks = self.table.move_masks();
        let acc = &self.acc;
        let input = p.as_slice();
        exec::for_each_chunk_mut(&mut self.scratch, exec::CHUNK, |base, chunk| {
            for (i, o) in chunk.iter_mut().enumerate() {
                let y = base + i;
                let mut diag_acc = 0.0;
                let mut gather = 0.0;
                for (j, &m) in masks.iter().enumerate() {
                    diag_acc += acc[y * n_moves + j];
                    let x = y ^ m as usize;
                    gather += acc[x * n_moves + j] * input[x];
                }
                *o = (1.0 - diag_acc * inv_m) * input[y] + gather * inv_m;
            }
        });
        let total = exec::sum_f64(&self.scratch);
        self.drift = self.drift.max((total - 1.0).abs());
        let out = p.as_mut_slice();
        let scratch = &self.scratch;
        exec::for_each_chunk_mut(out, exec::CHUNK, |base, chunk| {
            for (i, v) in chunk.iter_mut().enumerate() {
                *v = scratch[base + i] / total;
            }
        });
    }

    /// Largest normalization drift observed before renormalizing.
    pub fn max_drift(&self) -> f64 {
        self.drift
    }
}

/// Applies the schedule's matrices in order: `p = W_t ... W_1 p0`.
/// All specs must share the model, move set, rule, and padding.
pub fn evolve(schedule: &[WalkSpec], p0: &DistVec) -> Result<DistVec> {
    let Some(first) = schedule.first() else {
        return Ok(p0.clone());
    };
    if !schedule.iter().all(|s| first.same_chain(s)) {
        return Err(invalid("schedule mixes different chains"));
    }
    if p0.len() != first.state_count()? {
        return Err(invalid("distribution length does not match the model"));
    }
    let mut ev = Evolver::for_spec(first)?;
    let mut p = p0.clone();
    for spec in schedule {
        ev.step(&mut p, spec.beta);
    }
    Ok(p)
}

/// Outcome of a stochastic walk: final configuration, per-step energies, and
/// the largest discrepancy seen when the incremental energy was resynced
/// against a full recomputation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub final_config: SpinConfig,
    pub energies: Vec<f64>,
    pub max_energy_drift: f64,
}

const TRAJECTORY_RESYNC: u64 = 1 << 16;

/// Samples one stochastic trajectory through the schedule. Each step draws a
/// slot uniformly from the padded slot count (trailing slots are no-ops) and
/// accepts per the rule. Deterministic for a given seed.
pub fn sample_trajectory(schedule: &[WalkSpec], x0: &SpinConfig, seed: u64) -> Result<Trajectory> {
    let Some(first) = schedule.first() else {
        return Ok(Trajectory {
            final_config: x0.clone(),
            energies: Vec::new(),
            max_energy_drift: 0.0,
        });
    };
    if !schedule.iter().all(|s| first.same_chain(s)) {
        return Err(invalid("schedule mixes different chains"));
    }
    if x0.len() != first.model.spin_count() {
        return Err(invalid("start configuration does not match the model"));
    }
    let model = &first.model;
    let moves = &first.moves;
    let slot_count = first.slot_count();
    let n_moves = moves.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = x0.clone();
    let mut energy = model.energy(&x)?;
    let mut energies = Vec::with_capacity(schedule.len());
    let mut max_drift = 0.0f64;
    for (step, spec) in schedule.iter().enumerate() {
        let slot = rng.random_range(0..slot_count);
        let u: f64 = rng.random();
        if slot < n_moves {
            let z = moves.get(slot);
            let delta = model.energy_delta(&x, z)?;
            if u < spec.rule.probability(delta, spec.beta) {
                x.flip_subset(z);
                energy += delta;
            }
        }
        if (step as u64 + 1) % TRAJECTORY_RESYNC == 0 {
            let exact = model.energy(&x)?;
            max_drift = max_drift.max((energy - exact).abs());
            energy = exact;
        }
        energies.push(energy);
    }
    Ok(Trajectory {
        final_config: x,
        energies,
        max_energy_drift: max_drift,
    })
}
