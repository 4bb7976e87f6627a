//! Plot-ready exports: log-log scatter of quantum versus classical minimum
//! TTS per method, the fitted power law, and the x = y reference line.

use crate::rows::{Method, ResultRow};
use anyhow::{bail, Context, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use walklab::anneal::{fit_speedup, SpeedupFit};

/// (classical, quantum) minimum-TTS pairs for one quantum method, keyed by
/// instance.
pub fn paired_tts(rows: &[ResultRow], method: Method) -> Vec<(String, f64, f64)> {
    let mut classical: BTreeMap<&str, f64> = BTreeMap::new();
    for row in rows {
        if row.method == Method::Classical {
            classical.insert(&row.instance_id, row.min_tts);
        }
    }
    let mut pairs = Vec::new();
    for row in rows {
        if row.method == method {
            if let Some(&c) = classical.get(row.instance_id.as_str()) {
                pairs.push((row.instance_id.clone(), c, row.min_tts));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    pairs
}

/// Power-law fits of each quantum method against the classical baseline.
pub fn speedup_fits(rows: &[ResultRow]) -> BTreeMap<String, SpeedupFit> {
    let mut fits = BTreeMap::new();
    for method in [Method::Zeno, Method::ZenoRewind, Method::Unitary] {
        let pairs: Vec<(f64, f64)> = paired_tts(rows, method)
            .into_iter()
            .map(|(_, c, q)| (c, q))
            .collect();
        if let Ok(fit) = fit_speedup(&pairs) {
            fits.insert(method.as_str().to_string(), fit);
        }
    }
    fits
}

#[derive(Serialize)]
struct ScatterRow<'a> {
    instance_id: &'a str,
    classical_min_tts: f64,
    quantum_min_tts: f64,
}

#[derive(Serialize)]
struct LineRow<'a> {
    name: &'a str,
    slope: f64,
    intercept_log: f64,
}

/// Writes scatter files per quantum method plus a `lines.csv` holding the
/// fitted slopes and the slope-1 reference.
pub fn emit_plot_data(results_csv: &Path, out_dir: &Path) -> Result<()> {
    if !results_csv.exists() {
        bail!("no results at {}", results_csv.display());
    }
    let mut reader = csv::Reader::from_path(results_csv)
        .with_context(|| format!("cannot read {}", results_csv.display()))?;
    let rows: Vec<ResultRow> = reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .context("results.csv does not match the row schema")?;
    if rows.is_empty() {
        bail!("results.csv holds no rows");
    }
    fs::create_dir_all(out_dir)?;
    let fits = speedup_fits(&rows);
    let mut lines = csv::Writer::from_path(out_dir.join("lines.csv"))?;
    lines.serialize(LineRow {
        name: "reference",
        slope: 1.0,
        intercept_log: 0.0,
    })?;
    for method in [Method::Zeno, Method::ZenoRewind, Method::Unitary] {
        let pairs = paired_tts(&rows, method);
        if pairs.is_empty() {
            continue;
        }
        let mut w =
            csv::Writer::from_path(out_dir.join(format!("scatter_{}.csv", method.as_str())))?;
        for (id, c, q) in &pairs {
            w.serialize(ScatterRow {
                instance_id: id,
                classical_min_tts: *c,
                quantum_min_tts: *q,
            })?;
        }
        w.flush()?;
        if let Some(fit) = fits.get(method.as_str()) {
            lines.serialize(LineRow {
                name: method.as_str(),
                slope: fit.exponent,
                intercept_log: fit.intercept,
            })?;
        }
    }
    lines.flush()?;
    Ok(())
}
