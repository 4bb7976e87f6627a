//! Result-row schema shared by the runner, the resume logic, and plot-data.

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Classical,
    Zeno,
    ZenoRewind,
    Unitary,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Classical,
        Method::Zeno,
        Method::ZenoRewind,
        Method::Unitary,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Classical => "classical",
            Method::Zeno => "zeno",
            Method::ZenoRewind => "zeno_rewind",
            Method::Unitary => "unitary",
        }
    }
}

/// One line of `results.csv`. Wall time is the only non-deterministic column
/// and stays last so diffs of reruns line up.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub schema_version: u32,
    pub instance_id: String,
    pub n: usize,
    pub seed: u64,
    pub method: Method,
    pub min_tts: f64,
    pub argmin_duration: f64,
    pub success_prob: f64,
    pub wall_time_s: f64,
}

/// One line of `errors.csv`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorRow {
    pub instance_id: String,
    pub n: usize,
    pub seed: u64,
    pub stage: String,
    pub message: String,
}

/// One line of a per-instance TTS curve file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveRow {
    pub instance_id: String,
    pub n: usize,
    pub seed: u64,
    pub method: Method,
    pub duration: f64,
    pub success_prob: f64,
    pub tts: f64,
}
