//! (k,d)-local Ising energy functions, spin configurations, and move sets.
//!
//! An energy function is a sum of coupling terms `J * prod_{s in support} x_s`
//! over spin subsets of size at most `k`, with every spin appearing in at most
//! `d` terms. Moves are spin subsets whose joint flip proposes a transition.

use crate::error::{invalid, Error, Result};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// One coupling term of an Ising energy function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    #[serde(rename = "j")]
    pub coupling: f64,
    /// Sorted, duplicate-free spin indices; never empty.
    #[serde(rename = "omega")]
    pub support: Vec<usize>,
}

/// How a model was generated, kept so result files can state their inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub seed: Option<u64>,
}

/// Immutable Ising energy function on `n` spins.
///
/// Construction merges duplicate supports by summing couplings and recomputes
/// the arity and degree bounds from the term list; they are never trusted
/// from input.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct IsingModel {
    n: usize,
    terms: Vec<Term>,
    max_arity: usize,
    degree_bound: usize,
    terms_of_spin: Vec<Vec<u32>>,
    /// Per-term bit mask over spins, available when `n <= 64`.
    masks64: Option<Vec<u64>>,
    provenance: Option<Provenance>,
}

/// JSON schema: `{ "n": ..., "terms": [{"j": ..., "omega": [...]}, ...] }`
/// plus optional generator provenance.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    n: usize,
    terms: Vec<Term>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl TryFrom<ModelFile> for IsingModel {
    type Error = Error;
    fn try_from(f: ModelFile) -> Result<Self> {
        let provenance = f.generator.map(|generator| Provenance {
            generator,
            seed: f.seed,
        });
        let mut m = IsingModel::new(f.n, f.terms)?;
        m.provenance = provenance;
        Ok(m)
    }
}

impl From<IsingModel> for ModelFile {
    fn from(m: IsingModel) -> Self {
        let (generator, seed) = match m.provenance {
            Some(p) => (Some(p.generator), p.seed),
            None => (None, None),
        };
        ModelFile {
            n: m.n,
            terms: m.terms,
            generator,
            seed,
        }
    }
}

impl IsingModel {
    /// Build a model from raw terms. Duplicate supports are merged by summing
    /// their couplings; supports are sorted and validated against `n`.
    pub fn new(n: usize, terms: Vec<Term>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("model needs at least one spin"));
        }
        let mut merged: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for t in terms {
            let mut support = t.support;
            if support.is_empty() {
                return Err(invalid("term with empty support"));
            }
            support.sort_unstable();
            support.dedup();
            if let Some(&s) = support.iter().find(|&&s| s >= n) {
                return Err(invalid(format!("spin index {s} out of range for n = {n}")));
            }
            *merged.entry(support).or_insert(0.0) += t.coupling;
        }
        let terms: Vec<Term> = merged
            .into_iter()
            .map(|(support, coupling)| Term { coupling, support })
            .collect();
        let max_arity = terms.iter().map(|t| t.support.len()).max().unwrap_or(0);
        let mut terms_of_spin = vec![Vec::new(); n];
        for (idx, t) in terms.iter().enumerate() {
            for &s in &t.support {
                terms_of_spin[s].push(idx as u32);
            }
        }
        let degree_bound = terms_of_spin.iter().map(Vec::len).max().unwrap_or(0);
        let masks64 = if n <= 64 {
            Some(
                terms
                    .iter()
                    .map(|t| t.support.iter().fold(0u64, |m, &s| m | (1 << s)))
                    .collect(),
            )
        } else {
            None
        };
        Ok(IsingModel {
            n,
            terms,
            max_arity,
            degree_bound,
            terms_of_spin,
            masks64,
            provenance: None,
        })
    }

    /// Open ferromagnetic chain: terms `(J = -1, {i, i+1})` for `i = 0..n-2`.
    pub fn chain(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid("chain needs n >= 2"));
        }
        let terms = (0..n - 1)
            .map(|i| Term {
                coupling: -1.0,
                support: vec![i, i + 1],
            })
            .collect();
        let mut m = Self::new(n, terms)?;
        m.provenance = Some(Provenance {
            generator: "chain".into(),
            seed: None,
        });
        Ok(m)
    }

    /// Default number of pairs for [`IsingModel::random_sparse`]: `round(3.5 n)`.
    pub fn default_pair_count(n: usize) -> usize {
        (3.5 * n as f64).round() as usize
    }

    /// Random sparse pair model: `pair_count` distinct unordered pairs sampled
    /// uniformly without replacement, couplings drawn from a standard normal.
    /// Deterministic for a given seed.
    pub fn random_sparse(n: usize, pair_count: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(invalid("random sparse model needs n >= 2"));
        }
        let all_pairs = n * (n - 1) / 2;
        if pair_count == 0 || pair_count > all_pairs {
            return Err(invalid(format!(
                "pair_count {pair_count} out of range (1..={all_pairs})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chosen = sample(&mut rng, all_pairs, pair_count);
        let mut terms = Vec::with_capacity(pair_count);
        for flat in chosen.iter() {
            let (i, j) = unflatten_pair(flat);
            let coupling: f64 = StandardNormal.sample(&mut rng);
            terms.push(Term {
                coupling,
                support: vec![i, j],
            });
        }
        let mut m = Self::new(n, terms)?;
        m.provenance = Some(Provenance {
            generator: "random_sparse".into(),
            seed: Some(seed),
        });
        Ok(m)
    }

    /// Complete pair graph with couplings drawn uniformly from {+1, -1}.
    pub fn complete_binary(n: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(invalid("complete graph needs n >= 2"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                let coupling = if rng.random::<bool>() { 1.0 } else { -1.0 };
                terms.push(Term {
                    coupling,
                    support: vec![i, j],
                });
            }
        }
        let mut m = Self::new(n, terms)?;
        m.provenance = Some(Provenance {
            generator: "complete_binary".into(),
            seed: Some(seed),
        });
        Ok(m)
    }

    pub fn spin_count(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Maximum term arity (the `k` of a (k,d)-local model).
    pub fn max_arity(&self) -> usize {
        self.max_arity
    }

    /// Maximum number of terms any one spin belongs to (the `d`).
    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    pub fn terms_of_spin(&self, spin: usize) -> &[u32] {
        &self.terms_of_spin[spin]
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn set_provenance(&mut self, p: Provenance) {
        self.provenance = Some(p);
    }

    /// Energy `E(x) = sum_l J_l prod_{s in support_l} x_s`.
    pub fn energy(&self, x: &SpinConfig) -> Result<f64> {
        if x.len() != self.n {
            return Err(invalid(format!(
                "configuration has {} spins, model has {}",
                x.len(),
                self.n
            )));
        }
        Ok(self
            .terms
            .iter()
            .map(|t| t.coupling * x.product_over(&t.support))
            .sum())
    }

    /// Energy for a configuration given as a bit index (bit set = spin -1).
    /// Only valid for `n <= 64`; used by exhaustive scans.
    pub(crate) fn energy_of_index(&self, x: u64) -> f64 {
        let masks = self.masks64.as_ref().expect("index form needs n <= 64");
        self.terms
            .iter()
            .zip(masks)
            .map(|(t, &m)| t.coupling * parity_sign(x & m))
            .sum()
    }

    /// `E(x * z) - E(x)`, touching only the terms whose support intersects
    /// the move `z`. Equals `-2 * sum_{l : |support_l ∩ z| odd} J_l prod_l(x)`.
    pub fn energy_delta(&self, x: &SpinConfig, z: &[usize]) -> Result<f64> {
        if x.len() != self.n {
            return Err(invalid("configuration length mismatch"));
        }
        if z.iter().any(|&s| s >= self.n) {
            return Err(invalid("move flips a spin outside the model"));
        }
        let mut term_ids: Vec<u32> = z
            .iter()
            .flat_map(|&s| self.terms_of_spin[s].iter().copied())
            .collect();
        term_ids.sort_unstable();
        term_ids.dedup();
        let mut delta = 0.0;
        for id in term_ids {
            let t = &self.terms[id as usize];
            let overlap = t.support.iter().filter(|s| z.contains(s)).count();
            if overlap % 2 == 1 {
                delta += -2.0 * t.coupling * x.product_over(&t.support);
            }
        }
        Ok(delta)
    }

    /// Union of supports of all terms intersecting the move: the spins whose
    /// values determine the energy difference of that move. Its size is
    /// bounded by `|z| * k * d`.
    pub fn neighborhood(&self, z: &[usize]) -> Result<Vec<usize>> {
        if z.iter().any(|&s| s >= self.n) {
            return Err(invalid("move flips a spin outside the model"));
        }
        let mut spins: Vec<usize> = z
            .iter()
            .flat_map(|&s| self.terms_of_spin[s].iter().copied())
            .flat_map(|id| self.terms[id as usize].support.iter().copied())
            .collect();
        spins.sort_unstable();
        spins.dedup();
        Ok(spins)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| invalid(format!("bad model JSON: {e}")))
    }
}

/// `(+1)` for even popcount, `(-1)` for odd: the product of the masked spins.
#[inline]
pub(crate) fn parity_sign(bits: u64) -> f64 {
    if bits.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Inverse of the row-major flattening of the strictly-upper pair (i, j).
fn unflatten_pair(flat: usize) -> (usize, usize) {
    // Pair (i, j), i < j, flattened as i*(2n-i-1)/2 + (j-i-1); invert by scan-free
    // triangular root on j-major order instead: enumerate (j, i) with i < j.
    // flat = j*(j-1)/2 + i.
    let j = ((1.0 + (1.0 + 8.0 * flat as f64).sqrt()) / 2.0).floor() as usize;
    let j = if j * (j - 1) / 2 > flat { j - 1 } else { j };
    let i = flat - j * (j - 1) / 2;
    (i, j)
}

/// Set of proposal moves: spin subsets to flip jointly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveSet {
    moves: Vec<Vec<usize>>,
    max_flip: usize,
    membership_bound: usize,
}

impl MoveSet {
    pub fn new(moves: Vec<Vec<usize>>) -> Result<Self> {
        if moves.is_empty() {
            return Err(invalid("move set cannot be empty"));
        }
        let mut normalized: Vec<Vec<usize>> = Vec::with_capacity(moves.len());
        for mut m in moves {
            if m.is_empty() {
                return Err(invalid("trivial (empty) move is not allowed"));
            }
            m.sort_unstable();
            m.dedup();
            normalized.push(m);
        }
        let mut seen = normalized.clone();
        seen.sort();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("duplicate move"));
        }
        let max_flip = normalized.iter().map(Vec::len).max().unwrap_or(0);
        let max_spin = normalized
            .iter()
            .flat_map(|m| m.iter().copied())
            .max()
            .unwrap_or(0);
        let mut membership = vec![0usize; max_spin + 1];
        for m in &normalized {
            for &s in m {
                membership[s] += 1;
            }
        }
        let membership_bound = membership.into_iter().max().unwrap_or(0);
        Ok(MoveSet {
            moves: normalized,
            max_flip,
            membership_bound,
        })
    }

    /// The default move set: one single-spin flip per spin, `N = n`, `c = 1`.
    pub fn single_spin_flips(n: usize) -> Self {
        Self::new((0..n).map(|i| vec![i]).collect()).expect("nonempty by construction")
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn moves(&self) -> &[Vec<usize>] {
        &self.moves
    }

    pub fn get(&self, j: usize) -> &[usize] {
        &self.moves[j]
    }

    /// Maximum spins flipped by one move (the `c`).
    pub fn max_flip(&self) -> usize {
        self.max_flip
    }

    /// Maximum number of moves containing any one spin.
    pub fn membership_bound(&self) -> usize {
        self.membership_bound
    }

    /// Bit masks of the moves, valid for models with `n <= 64`.
    pub fn masks64(&self) -> Vec<u64> {
        self.moves
            .iter()
            .map(|m| m.iter().fold(0u64, |acc, &s| acc | (1 << s)))
            .collect()
    }

    pub fn compatible_with(&self, model: &IsingModel) -> bool {
        self.moves
            .iter()
            .all(|m| m.iter().all(|&s| s < model.spin_count()))
    }
}

/// Bit-packed configuration of `n` spins with values in {+1, -1}.
/// A set bit means the spin is -1; the all-zero word vector is all +1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    words: Vec<u64>,
    n: usize,
}

impl SpinConfig {
    pub fn all_plus(n: usize) -> Self {
        SpinConfig {
            words: vec![0; n.div_ceil(64)],
            n,
        }
    }

    /// Configuration from a bit index; requires `n <= 63`.
    pub fn from_index(n: usize, index: u64) -> Self {
        assert!(n <= 63, "index form needs n <= 63");
        assert!(index < (1u64 << n));
        SpinConfig {
            words: vec![index],
            n,
        }
    }

    pub fn from_signs(signs: &[i8]) -> Self {
        let mut c = Self::all_plus(signs.len());
        for (i, &s) in signs.iter().enumerate() {
            if s < 0 {
                c.words[i / 64] |= 1 << (i % 64);
            }
        }
        c
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut words = vec![0u64; n.div_ceil(64)];
        for w in words.iter_mut() {
            *w = rng.random();
        }
        if n % 64 != 0 {
            let last = words.len() - 1;
            words[last] &= (1u64 << (n % 64)) - 1;
        }
        SpinConfig { words, n }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Spin value at `i`: +1 or -1.
    #[inline]
    pub fn spin(&self, i: usize) -> f64 {
        if self.words[i / 64] >> (i % 64) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn flip_subset(&mut self, z: &[usize]) {
        for &i in z {
            self.flip(i);
        }
    }

    pub fn flipped(&self, z: &[usize]) -> Self {
        let mut c = self.clone();
        c.flip_subset(z);
        c
    }

    pub fn negated(&self) -> Self {
        let mut c = self.clone();
        for w in c.words.iter_mut() {
            *w = !*w;
        }
        if self.n % 64 != 0 {
            let last = c.words.len() - 1;
            c.words[last] &= (1u64 << (self.n % 64)) - 1;
        }
        c
    }

    /// Bit index of the configuration; requires `n <= 63`.
    pub fn index(&self) -> u64 {
        assert!(self.n <= 63, "index form needs n <= 63");
        self.words[0]
    }

    /// Product of the spin values over the given subset.
    #[inline]
    pub fn product_over(&self, subset: &[usize]) -> f64 {
        let mut negatives = 0u32;
        for &s in subset {
            negatives += (self.words[s / 64] >> (s % 64) & 1) as u32;
        }
        if negatives % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            write!(f, "{}", if self.spin(i) > 0.0 { '+' } else { '-' })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent energy oracle over an i8 spin vector, written against the
    /// raw definition rather than the packed representation.
    fn naive_energy(terms: &[Term], spins: &[i8]) -> f64 {
        terms
            .iter()
            .map(|t| {
                let prod: i64 = t.support.iter().map(|&s| spins[s] as i64).product();
                t.coupling * prod as f64
            })
            .sum()
    }

    fn signs_of(x: &SpinConfig) -> Vec<i8> {
        (0..x.len()).map(|i| x.spin(i) as i8).collect()
    }

    #[test]
    fn chain_n3_terms() {
        let m = IsingModel::chain(3).unwrap();
        assert_eq!(m.terms().len(), 2);
        for (t, support) in m.terms().iter().zip([vec![0, 1], vec![1, 2]]) {
            assert_eq!(t.coupling, -1.0);
            assert_eq!(t.support, support);
        }
        assert_eq!(m.max_arity(), 2);
        assert_eq!(m.degree_bound(), 2);
    }

    #[test]
    fn chain_rejects_n1() {
        assert!(IsingModel::chain(1).is_err());
    }

    #[test]
    fn chain_n3_all_plus_energy() {
        let m = IsingModel::chain(3).unwrap();
        let e = m.energy(&SpinConfig::all_plus(3)).unwrap();
        assert_eq!(e, -2.0);
    }

    #[test]
    fn chain_n4_ground_states_by_brute_force() {
        let m = IsingModel::chain(4).unwrap();
        let mut best = f64::INFINITY;
        let mut ground = Vec::new();
        for idx in 0..16u64 {
            let e = m.energy(&SpinConfig::from_index(4, idx)).unwrap();
            if e < best - 1e-12 {
                best = e;
                ground = vec![idx];
            } else if (e - best).abs() <= 1e-12 {
                ground.push(idx);
            }
        }
        assert_eq!(best, -3.0);
        assert_eq!(ground, vec![0, 0b1111]);
    }

    #[test]
    fn random_sparse_saturated_has_all_pairs() {
        let m = IsingModel::random_sparse(4, 6, 7).unwrap();
        assert_eq!(m.terms().len(), 6);
        let supports: Vec<_> = m.terms().iter().map(|t| t.support.clone()).collect();
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert!(supports.contains(&vec![i, j]));
            }
        }
    }

    #[test]
    fn random_sparse_is_deterministic() {
        let a = IsingModel::random_sparse(10, 35, 99).unwrap();
        let b = IsingModel::random_sparse(10, 35, 99).unwrap();
        assert_eq!(a.terms(), b.terms());
    }

    #[test]
    fn random_sparse_coupling_variance_near_unit() {
        // Pool couplings across seeds; sample variance of a standard normal.
        let mut js = Vec::new();
        for seed in 0..12u64 {
            let m = IsingModel::random_sparse(10, 35, seed).unwrap();
            js.extend(m.terms().iter().map(|t| t.coupling));
        }
        let mean = js.iter().sum::<f64>() / js.len() as f64;
        let var = js.iter().map(|j| (j - mean).powi(2)).sum::<f64>() / (js.len() - 1) as f64;
        assert!((0.5..=1.5).contains(&var), "variance {var}");
    }

    #[test]
    fn random_sparse_rejects_bad_pair_count() {
        assert!(IsingModel::random_sparse(4, 0, 1).is_err());
        assert!(IsingModel::random_sparse(4, 7, 1).is_err());
    }

    #[test]
    fn complete_binary_small() {
        let m = IsingModel::complete_binary(3, 5).unwrap();
        assert_eq!(m.terms().len(), 3);
        assert!(m.terms().iter().all(|t| t.coupling.abs() == 1.0));
    }

    #[test]
    fn complete_binary_term_count_large() {
        let m = IsingModel::complete_binary(500, 0).unwrap();
        assert_eq!(m.terms().len(), 124_750);
    }

    #[test]
    fn complete_binary_all_plus_energy_is_coupling_sum() {
        let m = IsingModel::complete_binary(4, 3).unwrap();
        let total: f64 = m.terms().iter().map(|t| t.coupling).sum();
        let e = m.energy(&SpinConfig::all_plus(4)).unwrap();
        assert_eq!(e, total);
    }

    #[test]
    fn empty_term_list_energy_zero() {
        let m = IsingModel::new(3, vec![]).unwrap();
        assert_eq!(m.energy(&SpinConfig::all_plus(3)).unwrap(), 0.0);
    }

    #[test]
    fn chain_frustrated_energy() {
        let m = IsingModel::chain(3).unwrap();
        let x = SpinConfig::from_signs(&[1, -1, 1]);
        assert_eq!(m.energy(&x).unwrap(), 2.0);
    }

    #[test]
    fn energy_matches_naive_oracle() {
        let m = IsingModel::random_sparse(8, 28, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = SpinConfig::random(8, &mut rng);
            let fast = m.energy(&x).unwrap();
            let slow = naive_energy(m.terms(), &signs_of(&x));
            assert!((fast - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_rejects_length_mismatch() {
        let m = IsingModel::chain(3).unwrap();
        assert!(m.energy(&SpinConfig::all_plus(4)).is_err());
    }

    #[test]
    fn delta_of_untouched_spin_is_zero() {
        // Spin 2 appears in no term.
        let m = IsingModel::new(
            3,
            vec![Term {
                coupling: -1.0,
                support: vec![0, 1],
            }],
        )
        .unwrap();
        let x = SpinConfig::all_plus(3);
        assert_eq!(m.energy_delta(&x, &[2]).unwrap(), 0.0);
    }

    #[test]
    fn chain_center_flip_delta() {
        let m = IsingModel::chain(3).unwrap();
        let x = SpinConfig::all_plus(3);
        assert_eq!(m.energy_delta(&x, &[1]).unwrap(), 4.0);
    }

    #[test]
    fn delta_matches_full_energy_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..100 {
            let m = IsingModel::random_sparse(8, 20, trial).unwrap();
            let x = SpinConfig::random(8, &mut rng);
            let z: Vec<usize> = {
                let k = rng.random_range(1..=3usize);
                let mut s: Vec<usize> = (0..8).collect();
                for i in 0..k {
                    let j = rng.random_range(i..8);
                    s.swap(i, j);
                }
                s.truncate(k);
                s
            };
            let delta = m.energy_delta(&x, &z).unwrap();
            let full = m.energy(&x.flipped(&z)).unwrap() - m.energy(&x).unwrap();
            assert!((delta - full).abs() < 1e-12, "delta {delta} vs {full}");
        }
    }

    #[test]
    fn delta_antisymmetry() {
        let m = IsingModel::random_sparse(6, 12, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = SpinConfig::random(6, &mut rng);
            let z = vec![rng.random_range(0..6)];
            let fwd = m.energy_delta(&x, &z).unwrap();
            let back = m.energy_delta(&x.flipped(&z), &z).unwrap();
            assert!((fwd + back).abs() < 1e-12);
        }
    }

    #[test]
    fn neighborhood_isolated_spin_is_empty() {
        let m = IsingModel::new(
            3,
            vec![Term {
                coupling: 1.0,
                support: vec![0, 1],
            }],
        )
        .unwrap();
        assert!(m.neighborhood(&[2]).unwrap().is_empty());
    }

    #[test]
    fn neighborhood_chain_interior() {
        let m = IsingModel::chain(4).unwrap();
        assert_eq!(m.neighborhood(&[1]).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn neighborhood_bound_single_spin_moves() {
        let m = IsingModel::random_sparse(10, 35, 17).unwrap();
        let bound = m.max_arity() * m.degree_bound();
        for i in 0..10 {
            let nbhd = m.neighborhood(&[i]).unwrap();
            assert!(nbhd.len() <= bound);
        }
    }

    #[test]
    fn global_flip_symmetry_for_even_arity() {
        let m = IsingModel::random_sparse(7, 15, 23).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let x = SpinConfig::random(7, &mut rng);
            let e = m.energy(&x).unwrap();
            let e_neg = m.energy(&x.negated()).unwrap();
            assert_eq!(e, e_neg);
        }
    }

    #[test]
    fn degree_and_membership_bounds_are_tight() {
        let m = IsingModel::chain(5).unwrap();
        // Interior spins of a chain belong to exactly two terms.
        let witness = (0..5).any(|s| m.terms_of_spin(s).len() == m.degree_bound());
        assert!(witness);
        let moves = MoveSet::new(vec![vec![0], vec![1], vec![0, 1]]).unwrap();
        assert_eq!(moves.membership_bound(), 2);
        let witness_move = [0, 1]
            .iter()
            .any(|&s| moves.moves().iter().filter(|m| m.contains(&s)).count() == 2);
        assert!(witness_move);
    }

    #[test]
    fn duplicate_supports_merge() {
        let m = IsingModel::new(
            2,
            vec![
                Term {
                    coupling: 1.5,
                    support: vec![0, 1],
                },
                Term {
                    coupling: -0.5,
                    support: vec![1, 0],
                },
            ],
        )
        .unwrap();
        assert_eq!(m.terms().len(), 1);
        assert_eq!(m.terms()[0].coupling, 1.0);
    }

    #[test]
    fn move_set_rules() {
        assert!(MoveSet::new(vec![vec![]]).is_err());
        assert!(MoveSet::new(vec![vec![0], vec![0]]).is_err());
        let single = MoveSet::single_spin_flips(5);
        assert_eq!(single.len(), 5);
        assert_eq!(single.max_flip(), 1);
        assert_eq!(single.membership_bound(), 1);
    }

    #[test]
    fn json_round_trip_keeps_seed() {
        let m = IsingModel::random_sparse(6, 10, 42).unwrap();
        let s = m.to_json();
        assert!(s.contains("\"seed\": 42"));
        let back = IsingModel::from_json(&s).unwrap();
        assert_eq!(back.terms(), m.terms());
        assert_eq!(back.provenance().unwrap().seed, Some(42));
    }

    #[test]
    fn unflatten_pair_covers_all() {
        let n = 7;
        let mut seen = std::collections::HashSet::new();
        for flat in 0..n * (n - 1) / 2 {
            let (i, j) = unflatten_pair(flat);
            assert!(i < j && j < n);
            assert!(seen.insert((i, j)));
        }
    }
}
