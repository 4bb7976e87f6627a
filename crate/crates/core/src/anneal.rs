//! Total-time-to-solution machinery: classical annealed scans, measurement
//! (Zeno) schedules with and without rewind, the coherent unitary-sequence
//! heuristic, minimum-TTS grid scans, and power-law speedup fits.
//!
//! All heuristics share the linear schedule `beta_j = (j/L) beta_final` and
//! describe success as landing in the set of ground-state configurations.
//! The classical benchmark drives the unpadded walk; the quantum heuristics
//! drive the padded one, whose slot count is what the circuit implements.

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::ising::{IsingModel, MoveSet};
use crate::spectral::{
    lanczos_second_eigenvalue, spectral_dense, SymmetrizedWalk, DENSE_SPECTRAL_SPINS,
};
use crate::szegedy::{QState, VCompletion, WalkOperatorHandle};
use crate::walk::{
    boltzmann_from_energies, energy_table, AcceptanceRule, DeltaTable, DistVec, Evolver, WalkSpec,
};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

/// Ground-state search by exhaustive scan is allowed up to this many spins.
pub const MAX_TARGET_SPINS: usize = 20;

/// Linear annealing schedule: `beta_j = (j/L) beta_final` for `j = 1..=L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub beta_final: f64,
    pub levels: usize,
    pub betas: Vec<f64>,
}

impl Schedule {
    pub fn linear(beta_final: f64, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(invalid("schedule needs at least one level"));
        }
        if !(beta_final.is_finite() && beta_final >= 0.0) {
            return Err(invalid("beta_final must be finite and non-negative"));
        }
        let betas = (1..=levels)
            .map(|j| (j as f64 / levels as f64) * beta_final)
            .collect();
        Ok(Schedule {
            beta_final,
            levels,
            betas,
        })
    }
}

/// One evaluated point of a TTS scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtsRow {
    pub duration: f64,
    pub success_prob: f64,
    pub tts: f64,
}

/// Scan results over a duration grid, with the scan parameter kept alongside.
#[derive(Debug, Clone)]
pub struct TtsCurve {
    pub params: Vec<u64>,
    pub rows: Vec<TtsRow>,
    pub argmin: usize,
    /// Set when the scan hit its hard cap before the stop rule fired.
    pub truncated: bool,
}

impl TtsCurve {
    pub fn min_row(&self) -> &TtsRow {
        &self.rows[self.argmin]
    }

    pub fn min_tts(&self) -> f64 {
        self.rows[self.argmin].tts
    }
}

/// Repetitions to reach a target confidence, clamped below at one run:
/// `duration * max(1, log(1-confidence) / log(1-p))`.
pub fn tts(duration: f64, p: f64, confidence: f64) -> Result<f64> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(invalid("duration must be positive"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("success probability must lie in [0, 1]"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid("confidence must lie in (0, 1)"));
    }
    if p == 0.0 {
        return Ok(f64::INFINITY);
    }
    let reps = (1.0 - confidence).ln() / (-p).ln_1p();
    Ok(duration * reps.max(1.0))
}

/// Configurations attaining the global energy minimum, with exhaustive
/// verification of every member.
#[derive(Debug, Clone)]
pub struct TargetSet {
    pub indices: Vec<u64>,
    pub min_energy: f64,
}

impl TargetSet {
    pub fn find(model: &IsingModel) -> Result<Self> {
        let energies = energy_table(model)?;
        Self::from_energies(model, &energies)
    }

    pub fn from_energies(model: &IsingModel, energies: &[f64]) -> Result<Self> {
        let n = model.spin_count();
        if n > MAX_TARGET_SPINS {
            return Err(Error::Capacity {
                requested: n,
                limit: MAX_TARGET_SPINS,
            });
        }
        let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let tol = 1e-9 * (1.0 + min.abs());
        let mut indices = Vec::new();
        for (idx, &e) in energies.iter().enumerate() {
            if e <= min + tol {
                indices.push(idx as u64);
            }
        }
        Ok(TargetSet {
            indices,
            min_energy: min,
        })
    }

    pub fn mass(&self, p: &DistVec) -> f64 {
        p.mass(&self.indices)
    }
}

/// Whether success counts the full degenerate ground set or a single
/// representative state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    DegenerateSet,
    SingleState,
}

/// Duration convention for the unitary heuristic's TTS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitaryDuration {
    /// Each of the L walk applications costs one step (default).
    Steps,
    /// Bill the same measurement budget as the Zeno schedule.
    SumInverseGaps,
}

/// Geometric scan with local refinement around the minimum.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridPolicy {
    pub ratio: f64,
    /// Stop once TTS has risen this factor above the running minimum.
    pub stop_factor: f64,
    /// Half-width of the refinement window around the argmin, as a fraction.
    pub refine_frac: f64,
    pub refine_points: usize,
    pub hard_cap: u64,
    /// Minimum grid points before the stop rule may fire.
    pub min_points: usize,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy {
            ratio: 1.25,
            stop_factor: 2.0,
            refine_frac: 0.2,
            refine_points: 8,
            hard_cap: 1 << 22,
            min_points: 6,
        }
    }
}

fn scan_integer_grid<F>(grid: &GridPolicy, mut eval: F) -> Result<TtsCurve>
where
    F: FnMut(u64) -> Result<TtsRow>,
{
    let mut params: Vec<u64> = Vec::new();
    let mut rows: Vec<TtsRow> = Vec::new();
    let mut best = f64::INFINITY;
    let mut truncated = false;
    let mut t = 1u64;
    loop {
        let row = eval(t)?;
        best = best.min(row.tts);
        params.push(t);
        rows.push(row);
        if rows.len() >= grid.min_points && row.tts >= grid.stop_factor * best {
            break;
        }
        let next = ((t as f64) * grid.ratio).round() as u64;
        let next = next.max(t + 1);
        if next > grid.hard_cap {
            truncated = true;
            break;
        }
        t = next;
    }
    // Refine around the coarse argmin.
    let coarse_argmin = argmin(&rows);
    let center = params[coarse_argmin];
    let lo = ((center as f64) * (1.0 - grid.refine_frac)).ceil().max(1.0) as u64;
    let hi = ((center as f64) * (1.0 + grid.refine_frac)).floor() as u64;
    if hi > lo && grid.refine_points > 0 {
        let span = hi - lo;
        let count = grid.refine_points.min(span as usize + 1);
        for k in 0..count {
            let candidate = lo + (span * k as u64) / (count.max(2) as u64 - 1).max(1);
            if candidate == 0 || params.contains(&candidate) {
                continue;
            }
            let row = eval(candidate)?;
            params.push(candidate);
            rows.push(row);
        }
    }
    // Present rows in scan-parameter order.
    let mut order: Vec<usize> = (0..params.len()).collect();
    order.sort_by_key(|&i| params[i]);
    let params: Vec<u64> = order.iter().map(|&i| params[i]).collect();
    let rows: Vec<TtsRow> = order.iter().map(|&i| rows[i]).collect();
    let argmin = argmin(&rows);
    Ok(TtsCurve {
        params,
        rows,
        argmin,
        truncated,
    })
}

fn argmin(rows: &[TtsRow]) -> usize {
    rows.iter()
        .enumerate()
        .min_by(|a, b| a.1.tts.total_cmp(&b.1.tts))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Expected walk applications for one successful level transition with
/// rewind, from the three-state absorbing recursion. `inv_gap_prev` and
/// `inv_gap` are the measurement costs of the previous and current level;
/// `overlap_sq` is the squared overlap between their stationary states.
pub fn rewind_level_cost(inv_gap_prev: f64, inv_gap: f64, overlap_sq: f64) -> f64 {
    let f = overlap_sq;
    if f <= 0.0 {
        return f64::INFINITY;
    }
    if f >= 1.0 {
        // Never fails: one measurement of the current level.
        return inv_gap;
    }
    (inv_gap * (1.0 + 2.0 * f) + inv_gap_prev) / (2.0 * f)
}

/// Assembles a Zeno TTS row from per-level inverse gaps (index 0 is the
/// easy starting level), squared overlaps `F_j^2` between consecutive levels,
/// and the target mass of the final stationary distribution.
pub fn zeno_tts_from_parts(
    inv_gaps: &[f64],
    overlaps_sq: &[f64],
    target_mass: f64,
    confidence: f64,
    rewind: bool,
) -> Result<TtsRow> {
    let levels = overlaps_sq.len();
    if inv_gaps.len() != levels + 1 {
        return Err(invalid("need one more gap than overlaps (level 0 included)"));
    }
    let (duration, success_prob) = if rewind {
        let cost: f64 = (1..=levels)
            .map(|j| rewind_level_cost(inv_gaps[j - 1], inv_gaps[j], overlaps_sq[j - 1]))
            .sum();
        (cost, target_mass)
    } else {
        let cost: f64 = inv_gaps[1..].iter().sum();
        let pass: f64 = overlaps_sq.iter().product();
        (cost, target_mass * pass)
    };
    let t = tts(duration, success_prob, confidence)?;
    Ok(TtsRow {
        duration,
        success_prob,
        tts: t,
    })
}

/// Log-log least-squares fit of quantum against classical minimum TTS.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeedupFit {
    pub exponent: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    pub pairs: usize,
}

pub fn fit_speedup(pairs: &[(f64, f64)]) -> Result<SpeedupFit> {
    if pairs.len() < 3 {
        return Err(invalid("power-law fit needs at least 3 pairs"));
    }
    if pairs.iter().any(|&(c, q)| c <= 0.0 || q <= 0.0) {
        return Err(invalid("TTS values must be positive and finite"));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(invalid("degenerate fit: all classical values equal"));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + exponent * x);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(SpeedupFit {
        exponent,
        intercept,
        residual,
        pairs: pairs.len(),
    })
}

/// Per-instance benchmark context: the shared energy-difference table, the
/// ground-state set, and caches reused across all four heuristics. One
/// instance is driven sequentially; distinct instances run concurrently.
pub struct AnnealBench {
    unpadded: WalkSpec,
    padded: WalkSpec,
    beta_final: f64,
    confidence: f64,
    energies: Vec<f64>,
    target: TargetSet,
    table: Arc<DeltaTable>,
    completion: VCompletion,
    unitary_duration: UnitaryDuration,
    target_mode: TargetMode,
    grid: GridPolicy,
    /// Phase gap of the padded walk per beta (keyed by bit pattern).
    gap_cache: HashMap<u64, f64>,
    warm: Option<Vec<f64>>,
}

impl AnnealBench {
    pub fn new(
        model: Arc<IsingModel>,
        moves: Arc<MoveSet>,
        rule: AcceptanceRule,
        beta_final: f64,
        confidence: f64,
    ) -> Result<Self> {
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(invalid("confidence must lie in (0, 1)"));
        }
        if !(beta_final.is_finite() && beta_final >= 0.0) {
            return Err(invalid("beta_final must be finite and non-negative"));
        }
        let unpadded = WalkSpec::new(model.clone(), moves.clone(), 0.0, rule, false)?;
        let padded = WalkSpec::new(model.clone(), moves.clone(), 0.0, rule, true)?;
        let energies = energy_table(&model)?;
        let target = TargetSet::from_energies(&model, &energies)?;
        let table = Arc::new(DeltaTable::build(&model, &moves)?);
        Ok(AnnealBench {
            unpadded,
            padded,
            beta_final,
            confidence,
            energies,
            target,
            table,
            completion: VCompletion::Householder,
            unitary_duration: UnitaryDuration::Steps,
            target_mode: TargetMode::DegenerateSet,
            grid: GridPolicy::default(),
            gap_cache: HashMap::new(),
            warm: None,
        })
    }

    pub fn with_completion(mut self, completion: VCompletion) -> Self {
        self.completion = completion;
        self
    }

    pub fn with_unitary_duration(mut self, mode: UnitaryDuration) -> Self {
        self.unitary_duration = mode;
        self
    }

    pub fn with_target_mode(mut self, mode: TargetMode) -> Self {
        if mode == TargetMode::SingleState {
            self.target.indices.truncate(1);
        }
        self.target_mode = mode;
        self
    }

    pub fn with_grid(mut self, grid: GridPolicy) -> Self {
        self.grid = grid;
        self
    }

    pub fn target(&self) -> &TargetSet {
        &self.target
    }

    pub fn target_mode(&self) -> TargetMode {
        self.target_mode
    }

    pub fn completion(&self) -> VCompletion {
        self.completion
    }

    pub fn unitary_duration(&self) -> UnitaryDuration {
        self.unitary_duration
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn beta_final(&self) -> f64 {
        self.beta_final
    }

    fn dim(&self) -> usize {
        self.table.state_count()
    }

    /// Success probability of the classical annealed walk after a fresh
    /// `steps`-step linear ramp from the uniform distribution.
    pub fn classical_success_prob(&mut self, steps: u64) -> Result<f64> {
        let schedule = Schedule::linear(self.beta_final, steps as usize)?;
        let mut p = DistVec::uniform(self.dim());
        let mut evolver = Evolver::new(
            self.table.clone(),
            self.unpadded.rule,
            self.unpadded.slot_count(),
        );
        for &beta in &schedule.betas {
            evolver.step(&mut p, beta);
        }
        Ok(self.target.mass(&p))
    }

    pub fn classical_min_tts(&mut self) -> Result<TtsCurve> {
        let grid = self.grid;
        let confidence = self.confidence;
        scan_integer_grid(&grid, |steps| {
            let p = self.classical_success_prob(steps)?;
            let t = tts(steps as f64, p, confidence)?;
            Ok(TtsRow {
                duration: steps as f64,
                success_prob: p,
                tts: t,
            })
        })
    }

    /// Phase gap of the padded walk at `beta`, cached. Equal rationals
    /// `j/L` produce bit-identical betas, so the key is exact.
    pub fn phase_gap(&mut self, beta: f64) -> Result<f64> {
        if let Some(&g) = self.gap_cache.get(&beta.to_bits()) {
            return Ok(g);
        }
        let spec = self.padded.with_beta(beta);
        let gap = if spec.model.spin_count() <= DENSE_SPECTRAL_SPINS {
            spectral_dense(&spec)?.phase_gap
        } else {
            let pi = boltzmann_from_energies(&self.energies, beta);
            let sym = SymmetrizedWalk::from_parts(&self.table, &spec, &pi)?;
            let (report, vector) = lanczos_second_eigenvalue(&sym, self.warm.as_deref())?;
            self.warm = Some(vector);
            report.phase_gap
        };
        self.gap_cache.insert(beta.to_bits(), gap);
        Ok(gap)
    }

    /// Zeno TTS for an `L`-level schedule. Computes the per-level stationary
    /// overlaps and measurement costs, then assembles the row.
    pub fn zeno_tts(&mut self, levels: usize, rewind: bool) -> Result<TtsRow> {
        let schedule = Schedule::linear(self.beta_final, levels)?;
        let mut inv_gaps = Vec::with_capacity(levels + 1);
        inv_gaps.push(1.0 / self.phase_gap(0.0)?);
        let mut overlaps_sq = Vec::with_capacity(levels);
        let mut prev = boltzmann_from_energies(&self.energies, 0.0);
        for &beta in &schedule.betas {
            let cur = boltzmann_from_energies(&self.energies, beta);
            let overlap = exec::sum_by(prev.as_slice(), |i, p| (p * cur.as_slice()[i]).sqrt());
            overlaps_sq.push((overlap * overlap).min(1.0));
            inv_gaps.push(1.0 / self.phase_gap(beta)?);
            prev = cur;
        }
        let target_mass = self.target.mass(&prev);
        zeno_tts_from_parts(
            &inv_gaps,
            &overlaps_sq,
            target_mass,
            self.confidence,
            rewind,
        )
    }

    pub fn zeno_min_tts(&mut self, rewind: bool) -> Result<TtsCurve> {
        let grid = self.grid;
        scan_integer_grid(&grid, |levels| self.zeno_tts(levels as usize, rewind))
    }

    fn uniform_state(&self) -> Result<QState> {
        QState::from_distribution(
            &DistVec::uniform(self.dim()),
            self.padded.model.spin_count(),
            self.padded.slot_count(),
        )
    }

    /// Applies the padded walk operators of the `L`-level ramp to a coherent
    /// uniform start and measures the ground-set mass of the system register.
    pub fn unitary_success_prob(&mut self, levels: usize) -> Result<f64> {
        let mut state = self.uniform_state()?;
        if levels > 0 {
            let schedule = Schedule::linear(self.beta_final, levels)?;
            for &beta in &schedule.betas {
                let spec = self.padded.with_beta(beta);
                let handle =
                    WalkOperatorHandle::from_delta_table(&self.table, &spec, self.completion)?;
                state.apply_walk(&handle)?;
            }
        }
        Ok(self.target.mass(&state.system_marginal()))
    }

    fn unitary_duration_cost(&mut self, levels: usize) -> Result<f64> {
        match self.unitary_duration {
            UnitaryDuration::Steps => Ok(levels as f64),
            UnitaryDuration::SumInverseGaps => {
                let schedule = Schedule::linear(self.beta_final, levels)?;
                let mut cost = 0.0;
                for &beta in &schedule.betas {
                    cost += 1.0 / self.phase_gap(beta)?;
                }
                Ok(cost)
            }
        }
    }

    pub fn unitary_tts(&mut self, levels: usize) -> Result<TtsRow> {
        let p = self.unitary_success_prob(levels)?;
        let duration = self.unitary_duration_cost(levels)?;
        let t = tts(duration, p, self.confidence)?;
        Ok(TtsRow {
            duration,
            success_prob: p,
            tts: t,
        })
    }

    pub fn unitary_min_tts(&mut self) -> Result<TtsCurve> {
        let grid = self.grid;
        scan_integer_grid(&grid, |levels| self.unitary_tts(levels as usize))
    }
}
