//! Experiment driver: generates instances, runs the heuristics, and writes
//! CSV/JSON results. Instances run in parallel; rows are flushed per
//! instance in deterministic order, so interrupted runs resume by skipping
//! completed instance ids and reruns are byte-identical apart from wall
//! times.

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::plot;
use crate::rows::{CurveRow, ErrorRow, Method, ResultRow, SCHEMA_VERSION};
use crate::seed::derive_seed;
use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;
use walklab::anneal::{AnnealBench, TtsCurve};
use walklab::ising::{IsingModel, MoveSet};
use walklab::parallel_walk::{energy_trace, EnergyTrace, TraceKind};
use walklab::resources::{component_costs, scenario_with_defaults};
use walklab::spectral::spectral;
use walklab::walk::WalkSpec;
use std::sync::Arc;

pub struct RunOutcome {
    pub rows: Vec<ResultRow>,
    pub errors: Vec<ErrorRow>,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("cannot create {}", config.out_dir.display()))?;
    match config.kind {
        ExperimentKind::Fig1Chain | ExperimentKind::Fig2Random => run_tts_batch(config),
        ExperimentKind::Fig3Parallel => run_fig3(config),
        ExperimentKind::SpectrumSuite => run_spectrum(config),
        ExperimentKind::CostReport => run_cost(config),
    }
}

#[derive(Clone)]
struct InstancePlan {
    order: usize,
    id: String,
    n: usize,
    _index: usize,
    seed: u64,
}

struct InstanceOutput {
    rows: Vec<ResultRow>,
    curves: Vec<CurveRow>,
    errors: Vec<ErrorRow>,
}

fn plan_instances(config: &ExperimentConfig) -> Vec<InstancePlan> {
    let mut plans = Vec::new();
    for &n in &config.sizes {
        for index in 0..config.instances_per_size {
            let seed = derive_seed(config.master_seed, n, index);
            plans.push(InstancePlan {
                order: plans.len(),
                id: format!("{}_n{:02}_i{:03}", config.kind.as_str(), n, index),
                n,
                _index: index,
                seed,
            });
        }
    }
    plans
}

fn build_model(config: &ExperimentConfig, plan: &InstancePlan) -> walklab::Result<IsingModel> {
    match config.kind {
        ExperimentKind::Fig1Chain => IsingModel::chain(plan.n),
        ExperimentKind::Fig2Random => IsingModel::random_sparse(
            plan.n,
            IsingModel::default_pair_count(plan.n),
            plan.seed,
        ),
        _ => unreachable!("only TTS batches build per-instance models"),
    }
}

fn run_instance(config: &ExperimentConfig, plan: &InstancePlan) -> InstanceOutput {
    let mut out = InstanceOutput {
        rows: Vec::new(),
        curves: Vec::new(),
        errors: Vec::new(),
    };
    let fail = |stage: &str, message: String, out: &mut InstanceOutput| {
        out.errors.push(ErrorRow {
            instance_id: plan.id.clone(),
            n: plan.n,
            seed: plan.seed,
            stage: stage.to_string(),
            message,
        });
    };
    let model = match build_model(config, plan) {
        Ok(m) => Arc::new(m),
        Err(e) => {
            fail("model", e.to_string(), &mut out);
            return out;
        }
    };
    let moves = Arc::new(MoveSet::single_spin_flips(plan.n));
    let mut bench = match AnnealBench::new(
        model,
        moves,
        config.rule,
        config.beta_final,
        config.confidence,
    ) {
        Ok(b) => b
            .with_completion(config.v_completion)
            .with_unitary_duration(config.unitary_duration)
            .with_target_mode(config.target_mode)
            .with_grid(config.grid.into()),
        Err(e) => {
            fail("bench", e.to_string(), &mut out);
            return out;
        }
    };
    for method in Method::ALL {
        let started = Instant::now();
        let curve: walklab::Result<TtsCurve> = match method {
            Method::Classical => bench.classical_min_tts(),
            Method::Zeno => bench.zeno_min_tts(false),
            Method::ZenoRewind => bench.zeno_min_tts(true),
            Method::Unitary => bench.unitary_min_tts(),
        };
        let wall = started.elapsed().as_secs_f64();
        match curve {
            Ok(curve) => {
                if curve.truncated {
                    fail(
                        method.as_str(),
                        "scan hit its hard cap before levelling off".into(),
                        &mut out,
                    );
                }
                let best = curve.min_row();
                out.rows.push(ResultRow {
                    schema_version: SCHEMA_VERSION,
                    instance_id: plan.id.clone(),
                    n: plan.n,
                    seed: plan.seed,
                    method,
                    min_tts: best.tts,
                    argmin_duration: best.duration,
                    success_prob: best.success_prob,
                    wall_time_s: wall,
                });
                for row in &curve.rows {
                    out.curves.push(CurveRow {
                        instance_id: plan.id.clone(),
                        n: plan.n,
                        seed: plan.seed,
                        method,
                        duration: row.duration,
                        success_prob: row.success_prob,
                        tts: row.tts,
                    });
                }
            }
            Err(e) => fail(method.as_str(), e.to_string(), &mut out),
        }
    }
    out
}

/// Writer that releases finished instances in plan order as they complete.
struct OrderedFlush {
    next: usize,
    pending: BTreeMap<usize, InstanceOutput>,
    results: csv::Writer<fs::File>,
    curves: csv::Writer<fs::File>,
    collected_rows: Vec<ResultRow>,
    collected_errors: Vec<ErrorRow>,
}

impl OrderedFlush {
    fn push(&mut self, order: usize, output: InstanceOutput) -> Result<()> {
        self.pending.insert(order, output);
        while let Some(output) = self.pending.remove(&self.next) {
            for row in &output.rows {
                self.results.serialize(row)?;
            }
            for row in &output.curves {
                self.curves.serialize(row)?;
            }
            self.results.flush()?;
            self.curves.flush()?;
            self.collected_rows.extend(output.rows);
            self.collected_errors.extend(output.errors);
            self.next += 1;
        }
        Ok(())
    }
}

fn completed_instances(results_path: &Path) -> Result<(HashSet<String>, Vec<ResultRow>)> {
    let mut done = HashSet::new();
    let mut rows = Vec::new();
    if results_path.exists() {
        let mut reader = csv::Reader::from_path(results_path)?;
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for record in reader.deserialize::<ResultRow>() {
            let row = record?;
            *counts.entry(row.instance_id.clone()).or_insert(0) += 1;
            rows.push(row);
        }
        for (id, count) in counts {
            if count == Method::ALL.len() {
                done.insert(id);
            }
        }
    }
    Ok((done, rows))
}

fn run_tts_batch(config: &ExperimentConfig) -> Result<RunOutcome> {
    let out_dir = config.out_dir.clone();
    let curves_dir = out_dir.join("curves");
    fs::create_dir_all(&curves_dir)?;
    let results_path = out_dir.join("results.csv");
    let (done, prior_rows) = completed_instances(&results_path)?;

    let plans: Vec<InstancePlan> = plan_instances(config)
        .into_iter()
        .filter(|p| !done.contains(&p.id))
        .collect();

    let append = !prior_rows.is_empty();
    let results_file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&results_path)?;
    let results_writer = csv::WriterBuilder::new()
        .has_headers(!append)
        .from_writer(results_file);
    let curves_path = curves_dir.join("tts_curves.csv");
    let curves_append = append && curves_path.exists();
    let curves_file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&curves_path)?;
    let curves_writer = csv::WriterBuilder::new()
        .has_headers(!curves_append)
        .from_writer(curves_file);

    let flush = Mutex::new(OrderedFlush {
        next: 0,
        pending: BTreeMap::new(),
        results: results_writer,
        curves: curves_writer,
        collected_rows: Vec::new(),
        collected_errors: Vec::new(),
    });

    let reindexed: Vec<InstancePlan> = plans
        .into_iter()
        .enumerate()
        .map(|(order, mut p)| {
            p.order = order;
            p
        })
        .collect();
    reindexed.par_iter().try_for_each(|plan| -> Result<()> {
        let output = run_instance(config, plan);
        flush.lock().unwrap().push(plan.order, output)
    })?;

    let flush = flush.into_inner().unwrap();
    let mut all_rows = prior_rows;
    all_rows.extend(flush.collected_rows.iter().cloned());
    let errors = flush.collected_errors;
    write_errors(&out_dir, &errors)?;

    let fits = plot::speedup_fits(&all_rows);
    let summary = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "code_version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "decision_flags": config.decision_flags(),
        "fits": fits,
        "instances": all_rows.len() / Method::ALL.len(),
        "errors": errors.len(),
    });
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(RunOutcome {
        rows: all_rows,
        errors,
        out_dir,
    })
}

fn write_errors(out_dir: &Path, errors: &[ErrorRow]) -> Result<()> {
    if errors.is_empty() {
        return Ok(());
    }
    let mut w = csv::Writer::from_path(out_dir.join("errors.csv"))?;
    for e in errors {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Parallel-walk benchmark: traces for the standard walk and each parallel q,
/// across seeds, rebased to the best energy seen in the whole batch.
fn run_fig3(config: &ExperimentConfig) -> Result<RunOutcome> {
    let out_dir = config.out_dir.clone();
    let traces_dir = out_dir.join("traces");
    fs::create_dir_all(&traces_dir)?;
    let f3 = &config.fig3;
    let model = Arc::new(IsingModel::complete_binary(
        f3.n,
        derive_seed(config.master_seed, f3.n, 0),
    )?);

    let mut kinds = vec![TraceKind::Standard];
    kinds.extend(f3.qs.iter().map(|&q| TraceKind::Parallel { q }));
    let jobs: Vec<(TraceKind, u64)> = kinds
        .iter()
        .flat_map(|&kind| {
            (0..f3.seeds).map(move |s| (kind, s as u64))
        })
        .collect();

    let traces: Vec<(TraceKind, u64, walklab::Result<EnergyTrace>)> = jobs
        .par_iter()
        .map(|&(kind, s)| {
            let seed = derive_seed(config.master_seed, f3.n, 1000 + s as usize);
            (kind, s, energy_trace(&model, kind, f3.beta, f3.budget, seed, f3.sample_stride))
        })
        .collect();

    let mut errors = Vec::new();
    let mut ok = Vec::new();
    for (kind, s, t) in traces {
        match t {
            Ok(t) => ok.push((kind, s, t)),
            Err(e) => errors.push(ErrorRow {
                instance_id: format!("fig3_{}", kind_label(kind)),
                n: f3.n,
                seed: s,
                stage: "trace".into(),
                message: e.to_string(),
            }),
        }
    }
    // Best energy ever observed across the batch is the common baseline.
    let baseline = ok
        .iter()
        .map(|(_, _, t)| t.min_energy)
        .fold(f64::INFINITY, f64::min);
    for (kind, s, trace) in &ok {
        let path = traces_dir.join(format!("{}_seed{}.csv", kind_label(*kind), s));
        let mut text = String::new();
        text.push_str(&format!(
            "# kind={} beta={} seed={} n={} baseline={:.9}\n",
            kind_label(*kind),
            trace.beta,
            trace.seed,
            f3.n,
            baseline
        ));
        text.push_str("normalized_step,energy_above_baseline\n");
        for (step, energy) in &trace.rows {
            text.push_str(&format!("{},{:.9}\n", step, energy - baseline));
        }
        fs::write(path, text)?;
    }
    // Median final energies per kind.
    let mut medians = Vec::new();
    for &kind in &kinds {
        let mut finals: Vec<f64> = ok
            .iter()
            .filter(|(k, _, _)| *k == kind)
            .map(|(_, _, t)| t.final_energy - baseline)
            .collect();
        finals.sort_by(f64::total_cmp);
        if !finals.is_empty() {
            medians.push(serde_json::json!({
                "kind": kind_label(kind),
                "median_final_energy_above_baseline": median(&finals),
                "seeds": finals.len(),
            }));
        }
    }
    let summary = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "code_version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "decision_flags": config.decision_flags(),
        "baseline_energy": baseline,
        "baseline_is_best_observed": true,
        "medians": medians,
        "errors": errors.len(),
    });
    write_json(&out_dir.join("fig3_summary.json"), &summary)?;
    write_errors(&out_dir, &errors)?;
    Ok(RunOutcome {
        rows: Vec::new(),
        errors,
        out_dir,
    })
}

pub fn kind_label(kind: TraceKind) -> String {
    match kind {
        TraceKind::Standard => "standard".into(),
        TraceKind::Parallel { q } => format!("parallel_q{q}"),
    }
}

fn median(sorted: &[f64]) -> f64 {
    let k = sorted.len();
    if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    }
}

fn run_spectrum(config: &ExperimentConfig) -> Result<RunOutcome> {
    let out_dir = config.out_dir.clone();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for &n in &config.spectrum.sizes {
        for &beta in &config.spectrum.betas {
            for &rule in &config.spectrum.rules {
                for &padded in &config.spectrum.padded {
                    let model = Arc::new(IsingModel::chain(n)?);
                    let moves = Arc::new(MoveSet::single_spin_flips(n));
                    let spec = WalkSpec::new(model, moves, beta, rule, padded)?;
                    match spectral(&spec) {
                        Ok(report) => rows.push(serde_json::json!({
                            "n": n,
                            "beta": beta,
                            "rule": rule,
                            "padded": padded,
                            "lambda1": report.lambda1,
                            "classical_gap": report.gap,
                            "phase_gap": report.phase_gap,
                            "method": report.method,
                            "residual": report.residual,
                        })),
                        Err(e) => errors.push(ErrorRow {
                            instance_id: format!("spectrum_n{n}_b{beta}"),
                            n,
                            seed: 0,
                            stage: "spectral".into(),
                            message: e.to_string(),
                        }),
                    }
                }
            }
        }
    }
    let doc = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "code_version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "reports": rows,
        "errors": errors.len(),
    });
    write_json(&out_dir.join("spectrum.json"), &doc)?;
    write_errors(&out_dir, &errors)?;
    Ok(RunOutcome {
        rows: Vec::new(),
        errors,
        out_dir,
    })
}

fn run_cost(config: &ExperimentConfig) -> Result<RunOutcome> {
    let out_dir = config.out_dir.clone();
    let c = &config.cost;
    let costs = component_costs(c.spins, c.moves, c.degree, c.epsilon)?;
    let scenarios: Vec<_> = c
        .alphas
        .iter()
        .map(|&a| scenario_with_defaults(a))
        .collect::<walklab::Result<_>>()?;
    let doc = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "code_version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "component_costs": costs,
        "scenarios": scenarios,
    });
    write_json(&out_dir.join("cost.json"), &doc)?;
    Ok(RunOutcome {
        rows: Vec::new(),
        errors: Vec::new(),
        out_dir,
    })
}
