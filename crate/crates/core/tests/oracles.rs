//! Cross-implementation oracles: every fast path in the crate is checked
//! against an independent dense or stochastic computation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use walklab::anneal::{rewind_level_cost, AnnealBench, Schedule};
use walklab::ising::{IsingModel, MoveSet};
use walklab::szegedy::{
    eigenphases_small, extract_x_matrix, walk_dense_matrix, VCompletion, WalkOperatorHandle,
};
use walklab::walk::{boltzmann, AcceptanceRule, TransitionMatrix, WalkSpec};

fn padded_spec(model: IsingModel, beta: f64, rule: AcceptanceRule) -> WalkSpec {
    let n = model.spin_count();
    WalkSpec::new(
        Arc::new(model),
        Arc::new(MoveSet::single_spin_flips(n)),
        beta,
        rule,
        true,
    )
    .unwrap()
}

/// The projected walk matrix must equal the similarity-transformed padded
/// classical matrix for every generator, rule, and temperature.
#[test]
fn extraction_equivalence_across_models() {
    let models: Vec<IsingModel> = vec![
        IsingModel::chain(2).unwrap(),
        IsingModel::chain(4).unwrap(),
        IsingModel::chain(6).unwrap(),
        IsingModel::random_sparse(4, 6, 3).unwrap(),
        IsingModel::random_sparse(6, 15, 4).unwrap(),
        IsingModel::complete_binary(5, 5).unwrap(),
    ];
    for model in models {
        for rule in [AcceptanceRule::Metropolis, AcceptanceRule::Glauber] {
            for beta in [0.0, 0.5, 1.0, 2.0] {
                let spec = padded_spec(model.clone(), beta, rule);
                let h = WalkOperatorHandle::new(&spec, VCompletion::Householder).unwrap();
                let x = extract_x_matrix(&h).unwrap();
                let w = TransitionMatrix::build(&spec).unwrap().to_dense().unwrap();
                let pi = boltzmann(&spec.model, beta).unwrap();
                let dim = w.nrows();
                let mut err: f64 = 0.0;
                for col in 0..dim {
                    for row in 0..dim {
                        let expected =
                            w[(row, col)] * (pi.as_slice()[col] / pi.as_slice()[row]).sqrt();
                        err = err.max((x[(row, col)] - expected).abs());
                    }
                }
                assert!(
                    err <= 1e-10,
                    "n={} rule={rule:?} beta={beta}: extraction error {err}",
                    spec.model.spin_count()
                );
            }
        }
    }
}

/// Every classical eigenvalue must appear among the walk eigenphases as its
/// arccos, for chains and random models alike.
#[test]
fn eigenphase_correspondence_small_models() {
    let models = vec![
        IsingModel::chain(2).unwrap(),
        IsingModel::chain(3).unwrap(),
        IsingModel::chain(4).unwrap(),
        IsingModel::random_sparse(3, 3, 7).unwrap(),
        IsingModel::random_sparse(4, 6, 8).unwrap(),
        IsingModel::complete_binary(4, 9).unwrap(),
    ];
    for model in models {
        let spec = padded_spec(model, 1.0, AcceptanceRule::Metropolis);
        let h = WalkOperatorHandle::new(&spec, VCompletion::Householder).unwrap();
        let phases = eigenphases_small(&h).unwrap();
        assert!(phases[0] <= 1e-9, "phase 0 missing");
        let w = TransitionMatrix::build(&spec).unwrap().to_dense().unwrap();
        for lambda in w.complex_eigenvalues().iter() {
            assert!(lambda.im.abs() < 1e-9);
            let target = lambda.re.clamp(-1.0, 1.0).acos();
            let nearest = phases
                .iter()
                .map(|p| (p - target).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(
                nearest <= 1e-9,
                "lambda {} missing a phase (nearest {nearest:.2e})",
                lambda.re
            );
        }
    }
}

/// The fast success-probability path must match a dense operator-product
/// computation of the full compact walk sequence.
#[test]
fn unitary_success_matches_dense_product() {
    let n = 3;
    let model = IsingModel::chain(n).unwrap();
    let beta_final = 2.0;
    let levels = 16;
    let mut bench = AnnealBench::new(
        Arc::new(model.clone()),
        Arc::new(MoveSet::single_spin_flips(n)),
        AcceptanceRule::Metropolis,
        beta_final,
        0.99,
    )
    .unwrap();
    let fast = bench.unitary_success_prob(levels).unwrap();

    // Dense oracle on the compact space.
    let spec = padded_spec(model, 0.0, AcceptanceRule::Metropolis);
    let schedule = Schedule::linear(beta_final, levels).unwrap();
    let m_pad = spec.slot_count();
    let dim_sys = 1usize << n;
    let dim = dim_sys * (m_pad + 1) * 2;
    let mut state = DVector::<f64>::zeros(dim);
    let amp = (1.0 / dim_sys as f64).sqrt();
    for x in 0..dim_sys {
        state[x * (m_pad + 1) * 2] = amp;
    }
    for &beta in &schedule.betas {
        let h = WalkOperatorHandle::new(&spec.with_beta(beta), VCompletion::Householder).unwrap();
        let u = walk_dense_matrix(&h).unwrap();
        state = u * state;
    }
    let ground: Vec<usize> = bench.target().indices.iter().map(|&i| i as usize).collect();
    let mut slow = 0.0;
    for x in ground {
        for slot in 0..(m_pad + 1) * 2 {
            let a = state[x * (m_pad + 1) * 2 + slot];
            slow += a * a;
        }
    }
    assert!(
        (fast - slow).abs() <= 1e-10,
        "fast {fast} vs dense oracle {slow}"
    );
}

/// Expected rewind cost formula against a Monte Carlo simulation of the
/// absorbing measurement chain.
#[test]
fn rewind_cost_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xbead);
    for &(inv_gap, inv_gap_prev, f) in &[(2.0, 3.0, 0.7), (10.0, 1.0, 0.3), (5.0, 5.0, 0.9)] {
        let samples = 100_000;
        let mut total = 0.0;
        let mut total_sq = 0.0;
        for _ in 0..samples {
            let cost = simulate_rewind(inv_gap_prev, inv_gap, f, &mut rng);
            total += cost;
            total_sq += cost * cost;
        }
        let mean = total / samples as f64;
        let var = (total_sq / samples as f64 - mean * mean).max(0.0);
        let se = (var / samples as f64).sqrt();
        let exact = rewind_level_cost(inv_gap_prev, inv_gap, f);
        assert!(
            (mean - exact).abs() <= 3.0 * se,
            "f={f}: mc {mean} vs exact {exact} (se {se})"
        );
    }
}

/// Walks the three-state absorbing chain: after outcome `Q_(j-1)` measure the
/// current level; a same-type transition succeeds, otherwise bounce through
/// the orthogonal states until the cross transition lands on `Q_j`.
fn simulate_rewind(inv_gap_prev: f64, inv_gap: f64, f: f64, rng: &mut ChaCha8Rng) -> f64 {
    #[derive(Clone, Copy)]
    enum At {
        Good,
        CurPerp,
        PrevPerp,
    }
    let mut cost = 0.0;
    let mut at = At::Good;
    loop {
        match at {
            At::Good => {
                cost += inv_gap;
                if rng.random::<f64>() < f {
                    return cost;
                }
                at = At::CurPerp;
            }
            At::CurPerp => {
                cost += inv_gap_prev;
                at = if rng.random::<f64>() < f {
                    At::PrevPerp
                } else {
                    At::Good
                };
            }
            At::PrevPerp => {
                cost += inv_gap;
                if rng.random::<f64>() < f {
                    at = At::CurPerp;
                } else {
                    return cost;
                }
            }
        }
    }
}

/// Distribution evolution against explicit dense matrix products for a
/// five-step ramp.
#[test]
fn evolve_matches_dense_ramp_products() {
    let n = 3;
    let base = padded_spec(IsingModel::chain(n).unwrap(), 0.0, AcceptanceRule::Metropolis);
    let base = WalkSpec {
        padded: false,
        ..base
    };
    let schedule: Vec<WalkSpec> = (1..=5)
        .map(|i| base.with_beta(i as f64 / 5.0 * 2.0))
        .collect();
    let p0 = walklab::walk::DistVec::uniform(1 << n);
    let fast = walklab::walk::evolve(&schedule, &p0).unwrap();
    let mut dense = DMatrix::<f64>::from_column_slice(1 << n, 1, p0.as_slice());
    for spec in &schedule {
        let w = TransitionMatrix::build(spec).unwrap().to_dense().unwrap();
        dense = w * dense;
        let total: f64 = dense.iter().sum();
        dense /= total;
    }
    for i in 0..(1 << n) {
        assert!((fast.as_slice()[i] - dense[(i, 0)]).abs() <= 1e-12);
    }
}

/// The stochastic trajectory sampler and the exact evolution agree on the
/// final-step energy distribution within Monte Carlo error.
#[test]
fn trajectory_energies_match_exact_evolution() {
    let n = 4;
    let model = Arc::new(IsingModel::chain(n).unwrap());
    let moves = Arc::new(MoveSet::single_spin_flips(n));
    let spec = WalkSpec::new(model.clone(), moves, 0.0, AcceptanceRule::Metropolis, true).unwrap();
    let steps = 60usize;
    let schedule: Vec<WalkSpec> = (1..=steps)
        .map(|i| spec.with_beta(i as f64 / steps as f64 * 1.5))
        .collect();
    let exact = walklab::walk::evolve(&schedule, &walklab::walk::DistVec::uniform(1 << n)).unwrap();
    let table = walklab::walk::energy_table(&model).unwrap();
    let exact_mean: f64 = exact
        .as_slice()
        .iter()
        .zip(&table)
        .map(|(p, e)| p * e)
        .sum();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let runs = 4000;
    let mut mean = 0.0;
    for _ in 0..runs {
        let x0 = walklab::ising::SpinConfig::from_index(n, rng.random_range(0..(1u64 << n)));
        let t = walklab::walk::sample_trajectory(&schedule, &x0, rng.random()).unwrap();
        mean += t.energies.last().unwrap() / runs as f64;
    }
    assert!(
        (mean - exact_mean).abs() < 0.15,
        "trajectory mean {mean} vs exact {exact_mean}"
    );
}
