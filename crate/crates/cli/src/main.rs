use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use walklab::resources::{component_costs, scenario, scenario_defaults};
use walklab_cli::config::ExperimentConfig;
use walklab_cli::{plot, runner};

#[derive(Parser)]
#[command(
    name = "walklab",
    version,
    about = "Annealing benchmarks for quantized Metropolis-Hastings walks on Ising models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run(RunArgs),
    /// Gap reports for chain walks over a size/temperature grid.
    Spectrum(SpectrumArgs),
    /// Circuit component costs of one walk application.
    Cost(CostArgs),
    /// Logical-gate-speed scenarios for given speedup exponents.
    Scenario(ScenarioArgs),
    /// Convert a results directory into plot-ready scatter and line files.
    PlotData(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the experiment config (JSON).
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for instance-level parallelism (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6")]
    sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1.0,2.0")]
    betas: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct CostArgs {
    #[arg(long, default_value_t = 512_000)]
    spins: u64,
    #[arg(long, default_value_t = 512_000)]
    moves: u64,
    #[arg(long, default_value_t = 6)]
    degree: u32,
    #[arg(long, default_value_t = 1e-16)]
    epsilon: f64,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.75,0.5,0.42")]
    alphas: Vec<f64>,
    #[arg(long, default_value_t = scenario_defaults::CLASSICAL_RATE)]
    rate: f64,
    #[arg(long, default_value_t = scenario_defaults::DURATION_S)]
    duration: f64,
    #[arg(long, default_value_t = scenario_defaults::PER_STEP_DEPTH)]
    depth: f64,
    #[arg(long, default_value_t = scenario_defaults::SYNTHESIS_FACTOR)]
    synthesis: f64,
}

#[derive(Args)]
struct PlotArgs {
    /// Directory holding results.csv (or a direct path to it).
    results: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_workers(workers: Option<usize>) {
    if let Some(w) = workers {
        // Ignore failure: the global pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global();
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let mut config = ExperimentConfig::load(&args.config)?;
            if let Some(seed) = args.seed {
                config.master_seed = seed;
            }
            if let Some(out) = args.out {
                config.out_dir = out;
            }
            if args.workers.is_some() {
                config.workers = args.workers;
            }
            configure_workers(config.workers);
            config.validate()?;
            let outcome = runner::run(&config)?;
            eprintln!(
                "wrote {} result rows to {} ({} errors)",
                outcome.rows.len(),
                outcome.out_dir.display(),
                outcome.errors.len()
            );
            if !outcome.is_clean() {
                std::process::exit(1);
            }
            Ok(())
        }
        Command::Spectrum(args) => {
            configure_workers(args.workers);
            let mut config = ExperimentConfig::from_json(&format!(
                r#"{{"kind": "spectrum_suite", "master_seed": {}}}"#,
                args.seed
            ))?;
            config.spectrum.sizes = args.sizes;
            config.spectrum.betas = args.betas;
            if let Some(out) = args.out {
                config.out_dir = out;
            } else {
                config.out_dir = PathBuf::from("results/spectrum");
            }
            config.validate()?;
            let outcome = runner::run(&config)?;
            eprintln!("wrote {}/spectrum.json", outcome.out_dir.display());
            if !outcome.is_clean() {
                std::process::exit(1);
            }
            Ok(())
        }
        Command::Cost(args) => {
            let report = component_costs(args.spins, args.moves, args.degree, args.epsilon)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Scenario(args) => {
            let reports: Vec<_> = args
                .alphas
                .iter()
                .map(|&a| scenario(a, args.rate, args.duration, args.depth, args.synthesis))
                .collect::<walklab::Result<_>>()?;
            println!("{}", serde_json::to_string_pretty(&reports)?);
            Ok(())
        }
        Command::PlotData(args) => {
            let results_csv = if args.results.is_dir() {
                args.results.join("results.csv")
            } else {
                args.results.clone()
            };
            let out = args.out.unwrap_or_else(|| {
                results_csv
                    .parent()
                    .map(|p| p.join("plot"))
                    .unwrap_or_else(|| PathBuf::from("plot"))
            });
            plot::emit_plot_data(&results_csv, &out)?;
            eprintln!("wrote plot data to {}", out.display());
            Ok(())
        }
    }
}
