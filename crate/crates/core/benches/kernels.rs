//! Data-parallel kernels against their sequential execution.
//!
//! With the default `parallel` feature, every kernel group runs twice: once
//! inside a one-thread rayon pool ("seq") and once in a pool using all cores
//! ("par"). Building the bench with `--no-default-features` instead measures
//! the compiled sequential fallback directly (single entries per group);
//! compare runs with `cargo bench -- --save-baseline`.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use std::sync::Arc;
use walklab::anneal::{AnnealBench, Schedule};
use walklab::ising::{IsingModel, MoveSet};
use walklab::parallel_walk::{energy_trace, TraceKind};
use walklab::spectral::spectral_iterative;
use walklab::szegedy::{QState, VCompletion, WalkOperatorHandle};
use walklab::walk::{AcceptanceRule, DistVec, Evolver, WalkSpec};

fn spec(n: usize, beta: f64, padded: bool) -> WalkSpec {
    WalkSpec::new(
        Arc::new(IsingModel::chain(n).unwrap()),
        Arc::new(MoveSet::single_spin_flips(n)),
        beta,
        AcceptanceRule::Metropolis,
        padded,
    )
    .unwrap()
}

#[cfg(feature = "parallel")]
fn run_modes(c: &mut Criterion, group: &str, mut f: impl FnMut() + Send) {
    let mut g = c.benchmark_group(group);
    let seq_pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    g.bench_function("seq(1 thread)", |b| b.iter(|| seq_pool.install(&mut f)));
    let par_pool = rayon::ThreadPoolBuilder::new().build().unwrap();
    g.bench_function(
        format!("par({} threads)", par_pool.current_num_threads()),
        |b| b.iter(|| par_pool.install(&mut f)),
    );
    g.finish();
}

#[cfg(not(feature = "parallel"))]
fn run_modes(c: &mut Criterion, group: &str, mut f: impl FnMut() + Send) {
    let mut g = c.benchmark_group(group);
    g.bench_function("seq(fallback build)", |b| b.iter(&mut f));
    g.finish();
}

fn bench_evolve(c: &mut Criterion) {
    let s = spec(12, 1.0, false);
    let schedule = Schedule::linear(2.0, 16).unwrap();
    run_modes(c, "evolve_16_steps_n12", move || {
        let mut ev = Evolver::for_spec(&s).unwrap();
        let mut p = DistVec::uniform(1 << 12);
        for &beta in &schedule.betas {
            ev.step(&mut p, beta);
        }
        black_box(p.as_slice()[0]);
    });
}

fn bench_walk_apply(c: &mut Criterion) {
    let s = spec(10, 1.5, true);
    let handle = WalkOperatorHandle::new(&s, VCompletion::Householder).unwrap();
    let pi = walklab::walk::boltzmann(&s.model, 1.5).unwrap();
    run_modes(c, "walk_apply_n10", move || {
        let mut q = QState::from_distribution(&pi, 10, handle.slot_count()).unwrap();
        for _ in 0..4 {
            q.apply_walk(&handle).unwrap();
        }
        black_box(q.norm_sqr());
    });
}

fn bench_handle_build(c: &mut Criterion) {
    let s = spec(12, 1.5, true);
    run_modes(c, "handle_build_n12", move || {
        let h = WalkOperatorHandle::new(&s, VCompletion::Householder).unwrap();
        black_box(h.rotation_norm_error());
    });
}

fn bench_spectral(c: &mut Criterion) {
    let s = spec(10, 1.0, true);
    run_modes(c, "spectral_iterative_n10", move || {
        black_box(spectral_iterative(&s).unwrap().lambda1);
    });
}

fn bench_parallel_sweeps(c: &mut Criterion) {
    let model = IsingModel::complete_binary(500, 3).unwrap();
    run_modes(c, "parallel_sweeps_n500", move || {
        let t = energy_trace(
            &model,
            TraceKind::Parallel { q: 0.25 },
            3.0,
            20 * 500,
            7,
            5_000,
        )
        .unwrap();
        black_box(t.final_energy);
    });
}

fn bench_unitary_scan_step(c: &mut Criterion) {
    run_modes(c, "unitary_prob_L8_n8", move || {
        let mut bench = AnnealBench::new(
            Arc::new(IsingModel::chain(8).unwrap()),
            Arc::new(MoveSet::single_spin_flips(8)),
            AcceptanceRule::Metropolis,
            2.0,
            0.99,
        )
        .unwrap();
        black_box(bench.unitary_success_prob(8).unwrap());
    });
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(10);
    targets = bench_evolve, bench_walk_apply, bench_handle_build, bench_spectral,
              bench_parallel_sweeps, bench_unitary_scan_step
}
criterion_main!(kernels);
