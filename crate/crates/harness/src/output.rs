//! CSV and manifest writers.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! runs give equal bytes.

use std::path::Path;

use dpda::metrics::MetricRow;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::experiment::{Replication, ReplicationSeeds};

pub const HEADER: [&str; 10] = [
    "rep",
    "k",
    "comms",
    "subopt_rel",
    "infeas",
    "consensus",
    "subopt_rel_erg",
    "infeas_erg",
    "consensus_erg",
    "elapsed_ms",
];

pub fn replication_file(rep: usize) -> String {
    format!("rep_{rep:04}.csv")
}

pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

fn record(rep: &str, row: &MetricRow) -> [String; 10] {
    [
        rep.to_string(),
        row.k.to_string(),
        row.comms.to_string(),
        row.subopt_rel.to_string(),
        row.infeas.to_string(),
        row.consensus.to_string(),
        row.subopt_rel_erg.to_string(),
        row.infeas_erg.to_string(),
        row.consensus_erg.to_string(),
        row.elapsed_ms.to_string(),
    ]
}

pub fn write_rows<W: std::io::Write>(out: W, rep: &str, rows: &[MetricRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for row in rows {
        w.write_record(record(rep, row))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Mean of each column over replications at every recorded `k`.
/// Replications share one cadence, so rows line up by position.
pub fn aggregate(reps: &[Replication]) -> Result<Vec<MetricRow>, HarnessError> {
    let Some(first) = reps.first() else { return Ok(Vec::new()) };
    if let Some(bad) = reps.iter().find(|r| r.rows.len() != first.rows.len()) {
        return Err(HarnessError::Numerical(format!(
            "rep {} has {} rows, rep {} has {}",
            bad.rep,
            bad.rows.len(),
            first.rep,
            first.rows.len()
        )));
    }
    let count = reps.len() as f64;
    let mean = |f: &dyn Fn(&MetricRow) -> f64, i: usize| reps.iter().map(|r| f(&r.rows[i])).sum::<f64>() / count;
    Ok((0..first.rows.len())
        .map(|i| MetricRow {
            k: first.rows[i].k,
            comms: (reps.iter().map(|r| r.rows[i].comms as f64).sum::<f64>() / count).round() as usize,
            subopt_rel: mean(&|r| r.subopt_rel, i),
            infeas: mean(&|r| r.infeas, i),
            consensus: mean(&|r| r.consensus, i),
            subopt_rel_erg: mean(&|r| r.subopt_rel_erg, i),
            infeas_erg: mean(&|r| r.infeas_erg, i),
            consensus_erg: mean(&|r| r.consensus_erg, i),
            elapsed_ms: (reps.iter().map(|r| r.rows[i].elapsed_ms as f64).sum::<f64>() / count).round() as u64,
            absolute: reps.iter().any(|r| r.rows[i].absolute),
        })
        .collect())
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: &'static str,
    config: &'a ExperimentConfig,
    replications: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    rep: usize,
    seeds: ReplicationSeeds,
    dual_bound: Option<f64>,
    reference_objective: f64,
}

/// Writes one CSV per replication, the aggregate CSV and the manifest.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, reps: &[Replication]) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let create = |name: &str| {
        let path = dir.join(name);
        std::fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))
    };
    for rep in reps {
        write_rows(create(&replication_file(rep.rep))?, &rep.rep.to_string(), &rep.rows)?;
    }
    write_rows(create(AGGREGATE_FILE)?, "mean", &aggregate(reps)?)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        replications: reps
            .iter()
            .map(|r| ManifestEntry {
                rep: r.rep,
                seeds: r.seeds,
                dual_bound: r.dual_bound,
                reference_objective: r.reference_objective,
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| HarnessError::Config(e.to_string()))?;
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, text + "\n").map_err(|e| HarnessError::io(&path, e))
}
