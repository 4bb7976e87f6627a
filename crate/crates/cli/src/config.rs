//! Experiment configuration: a single JSON file, validated up front, with
//! every default echoed back into the outputs so runs are reproducible from
//! the summary alone.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use walklab::anneal::{GridPolicy, TargetMode, UnitaryDuration};
use walklab::szegedy::VCompletion;
use walklab::walk::AcceptanceRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Ferromagnetic chains over a size range, one instance per size.
    Fig1Chain,
    /// Random sparse pair models, several instances per size.
    Fig2Random,
    /// Parallel-walk energy traces on a complete binary-coupling graph.
    Fig3Parallel,
    /// Gap reports over a grid of sizes and temperatures.
    SpectrumSuite,
    /// Circuit component costs and gate-speed scenarios.
    CostReport,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Fig1Chain => "fig1_chain",
            ExperimentKind::Fig2Random => "fig2_random",
            ExperimentKind::Fig3Parallel => "fig3_parallel",
            ExperimentKind::SpectrumSuite => "spectrum_suite",
            ExperimentKind::CostReport => "cost_report",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub ratio: f64,
    pub stop_factor: f64,
    pub refine_frac: f64,
    pub refine_points: usize,
    pub hard_cap: u64,
    pub min_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridPolicy::default();
        GridConfig {
            ratio: g.ratio,
            stop_factor: g.stop_factor,
            refine_frac: g.refine_frac,
            refine_points: g.refine_points,
            hard_cap: g.hard_cap,
            min_points: g.min_points,
        }
    }
}

impl From<GridConfig> for GridPolicy {
    fn from(c: GridConfig) -> GridPolicy {
        GridPolicy {
            ratio: c.ratio,
            stop_factor: c.stop_factor,
            refine_frac: c.refine_frac,
            refine_points: c.refine_points,
            hard_cap: c.hard_cap,
            min_points: c.min_points,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig3Config {
    pub n: usize,
    pub beta: f64,
    pub qs: Vec<f64>,
    pub budget: u64,
    pub seeds: usize,
    pub sample_stride: u64,
}

impl Default for Fig3Config {
    fn default() -> Self {
        Fig3Config {
            n: 500,
            beta: 3.0,
            qs: vec![0.5, 0.25, 0.125],
            budget: 1_500_000,
            seeds: 5,
            sample_stride: 5_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub sizes: Vec<usize>,
    pub betas: Vec<f64>,
    pub rules: Vec<AcceptanceRule>,
    pub padded: Vec<bool>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            sizes: vec![2, 3, 4, 5, 6],
            betas: vec![0.5, 1.0, 2.0],
            rules: vec![AcceptanceRule::Metropolis, AcceptanceRule::Glauber],
            padded: vec![false, true],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    pub spins: u64,
    pub moves: u64,
    pub degree: u32,
    pub epsilon: f64,
    pub alphas: Vec<f64>,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            spins: 512_000,
            moves: 512_000,
            degree: 6,
            epsilon: 1e-16,
            alphas: vec![0.75, 0.5, 0.42],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub master_seed: u64,
    /// Spin counts; empty means the kind's default range.
    #[serde(default)]
    pub sizes: Vec<usize>,
    #[serde(default = "default_instances")]
    pub instances_per_size: usize,
    #[serde(default = "default_beta_final")]
    pub beta_final: f64,
    #[serde(default = "default_rule")]
    pub rule: AcceptanceRule,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_completion")]
    pub v_completion: VCompletion,
    #[serde(default = "default_unitary_duration")]
    pub unitary_duration: UnitaryDuration,
    #[serde(default = "default_target_mode")]
    pub target_mode: TargetMode,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub fig3: Fig3Config,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub cost: CostConfig,
}

fn default_instances() -> usize {
    1
}
fn default_beta_final() -> f64 {
    2.0
}
fn default_rule() -> AcceptanceRule {
    AcceptanceRule::Metropolis
}
fn default_confidence() -> f64 {
    0.99
}
fn default_completion() -> VCompletion {
    VCompletion::Householder
}
fn default_unitary_duration() -> UnitaryDuration {
    UnitaryDuration::Steps
}
fn default_target_mode() -> TargetMode {
    TargetMode::SingleState
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> anyhow::Result<Self> {
        let mut cfg: ExperimentConfig =
            serde_json::from_str(s).context("config does not match the schema")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_json(&text)
    }

    /// Checks every referenced parameter before any computation starts and
    /// concretizes kind-dependent defaults.
    pub fn validate(&mut self) -> anyhow::Result<()> {
        if self.sizes.is_empty() {
            self.sizes = match self.kind {
                ExperimentKind::Fig1Chain => (3..=12).collect(),
                ExperimentKind::Fig2Random => vec![4, 6, 8, 10, 12],
                _ => Vec::new(),
            };
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            bail!("confidence must lie in (0, 1)");
        }
        if !(self.beta_final.is_finite() && self.beta_final >= 0.0) {
            bail!("beta_final must be finite and non-negative");
        }
        if self.grid.ratio <= 1.0 {
            bail!("grid.ratio must exceed 1");
        }
        if self.grid.stop_factor <= 1.0 {
            bail!("grid.stop_factor must exceed 1");
        }
        match self.kind {
            ExperimentKind::Fig1Chain => {
                if self.instances_per_size != 1 {
                    bail!("chains are deterministic: instances_per_size must be 1");
                }
                if self.sizes.iter().any(|&n| n < 2) {
                    bail!("chain sizes must be at least 2");
                }
            }
            ExperimentKind::Fig2Random => {
                if self.instances_per_size == 0 {
                    bail!("instances_per_size must be positive");
                }
                if self.sizes.iter().any(|&n| n < 2) {
                    bail!("sizes must be at least 2");
                }
            }
            ExperimentKind::Fig3Parallel => {
                if self.fig3.n < 2 || self.fig3.seeds == 0 || self.fig3.budget == 0 {
                    bail!("fig3 parameters must be positive");
                }
                if self.fig3.qs.iter().any(|&q| !(0.0..=1.0).contains(&q)) {
                    bail!("fig3 proposal probabilities must lie in [0, 1]");
                }
            }
            ExperimentKind::SpectrumSuite => {
                if self.spectrum.sizes.is_empty() || self.spectrum.betas.is_empty() {
                    bail!("spectrum suite needs sizes and betas");
                }
            }
            ExperimentKind::CostReport => {
                if !(self.cost.epsilon > 0.0 && self.cost.epsilon < 1.0) {
                    bail!("cost.epsilon must lie in (0, 1)");
                }
            }
        }
        Ok(())
    }

    /// The flags that change numerical results, echoed into every output.
    pub fn decision_flags(&self) -> serde_json::Value {
        serde_json::json!({
            "v_completion": self.v_completion,
            "unitary_duration": self.unitary_duration,
            "target_mode": self.target_mode,
            "confidence": self.confidence,
            "chain_boundary": "open",
            "classical_walk_padding": "unpadded",
            "quantum_walk_padding": "padded",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg =
            ExperimentConfig::from_json(r#"{"kind": "fig1_chain", "master_seed": 7}"#).unwrap();
        assert_eq!(cfg.sizes, (3..=12).collect::<Vec<_>>());
        assert_eq!(cfg.confidence, 0.99);
        assert_eq!(cfg.beta_final, 2.0);
    }

    #[test]
    fn missing_seed_is_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"kind": "fig1_chain"}"#).is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentConfig::from_json(
            r#"{"kind": "fig1_chain", "master_seed": 1, "betaa": 2}"#
        )
        .is_err());
    }

    #[test]
    fn bad_ranges_are_rejected() {
        assert!(ExperimentConfig::from_json(
            r#"{"kind": "fig1_chain", "master_seed": 1, "confidence": 1.5}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"kind": "fig1_chain", "master_seed": 1, "instances_per_size": 3}"#
        )
        .is_err());
    }
}
