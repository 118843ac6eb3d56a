//! Result persistence: CSV time series, the learned-weights artifact and the
//! JSON summary.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value reads back bit-exactly.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::config_hash;
use crate::error::{Error, Result};
use crate::experiment::{ExperimentConfig, JOINTS};
use crate::log::TrajectoryLog;
use crate::metrics::Summary;
use crate::rbf::{LatticeDescriptor, WeightMatrix};

pub const WEIGHTS_SCHEMA_VERSION: u32 = 1;
pub const WEIGHTS_FILE: &str = "weights.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const NETWORK_FILE: &str = "network.csv";

/// Column order of every per-agent CSV.
pub const AGENT_COLUMNS: [&str; 10] = [
    "t",
    "e1",
    "e2",
    "r1",
    "r2",
    "tau1",
    "tau2",
    "chi_tilde_norm",
    "A_tilde_fro",
    "nn_residual",
];

pub fn agent_file_name(agent: usize) -> String {
    format!("agent_{agent}.csv")
}

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let source = match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    };
    Error::io(path, source)
}

fn write_rows(
    path: &Path,
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `agent_<i>.csv` for every follower plus `network.csv`. Returns the
/// written paths, agents first.
///
/// `network.csv` columns: `t`, the leader state `chi0_1..`, the maxima over
/// agents of `|e|`, `|chi_tilde|` and `|A_tilde|_F`, then `w_norm_<i>` per agent.
pub fn write_timeseries(log: &TrajectoryLog, dir: &Path) -> Result<Vec<PathBuf>> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let followers = log.follower_count();
    let mut written = Vec::with_capacity(followers + 1);

    let header: Vec<String> = AGENT_COLUMNS.iter().map(|s| s.to_string()).collect();
    for i in 0..followers {
        let path = dir.join(agent_file_name(i + 1));
        let rows = log.agent_series(i).map(|(t, a)| {
            [
                t,
                a.e[0],
                a.e[1],
                a.r[0],
                a.r[1],
                a.tau[0],
                a.tau[1],
                a.chi_tilde_norm,
                a.a_tilde_fro,
                a.nn_residual,
            ]
            .into_iter()
            .map(fmt)
            .collect()
        });
        write_rows(&path, &header, rows)?;
        written.push(path);
    }

    let leader_dim = log.samples[0].leader.len();
    let mut header = vec!["t".to_string()];
    header.extend((1..=leader_dim).map(|k| format!("chi0_{k}")));
    header.extend(["max_e_norm", "max_chi_tilde_norm", "max_A_tilde_fro"].map(String::from));
    header.extend((1..=followers).map(|k| format!("w_norm_{k}")));
    let path = dir.join(NETWORK_FILE);
    let rows = log.samples.iter().map(|s| {
        let max = |f: &dyn Fn(&crate::log::AgentSample) -> f64| {
            s.agents.iter().map(f).fold(0.0, f64::max)
        };
        let mut row = vec![fmt(s.t)];
        row.extend(s.leader.iter().map(|&v| fmt(v)));
        row.push(fmt(max(&|a| a.e_norm())));
        row.push(fmt(max(&|a| a.chi_tilde_norm)));
        row.push(fmt(max(&|a| a.a_tilde_fro)));
        row.extend(s.agents.iter().map(|a| fmt(a.weight_norm)));
        row
    });
    write_rows(&path, &header, rows)?;
    written.push(path);
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentWeights {
    /// 1-based agent id.
    pub agent: usize,
    pub nodes: usize,
    pub outputs: usize,
    /// Column-major, `nodes * outputs` entries.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub config_hash: String,
    pub average_window: [f64; 2],
    /// Seconds since the Unix epoch.
    pub created_unix: u64,
}

/// Persisted time-averaged weights, reusable by `replay`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsArtifact {
    pub schema_version: u32,
    pub lattice: LatticeDescriptor,
    pub input_indices: Vec<usize>,
    pub agents: Vec<AgentWeights>,
    pub provenance: Provenance,
}

impl WeightsArtifact {
    pub fn new(cfg: &ExperimentConfig, weights: &[WeightMatrix]) -> Self {
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            schema_version: WEIGHTS_SCHEMA_VERSION,
            lattice: cfg.lattice.descriptor().clone(),
            input_indices: cfg.projection.indices().to_vec(),
            agents: weights
                .iter()
                .enumerate()
                .map(|(i, w)| AgentWeights {
                    agent: i + 1,
                    nodes: w.nodes(),
                    outputs: w.outputs(),
                    values: w.0.as_slice().to_vec(),
                })
                .collect(),
            provenance: Provenance {
                config_hash: config_hash(cfg),
                average_window: [cfg.average_window.0, cfg.average_window.1],
                created_unix,
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("weights artifact always serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let artifact: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        if artifact.schema_version != WEIGHTS_SCHEMA_VERSION {
            return Err(Error::validation(
                "weights schema_version",
                format!(
                    "unsupported weights schema version {} (expected {WEIGHTS_SCHEMA_VERSION})",
                    artifact.schema_version
                ),
            ));
        }
        Ok(artifact)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Weight matrices for replay under `cfg`. The lattice descriptor, input
    /// selection and agent count must match exactly.
    pub fn weights_for(&self, cfg: &ExperimentConfig) -> Result<Vec<WeightMatrix>> {
        if &self.lattice != cfg.lattice.descriptor() {
            return Err(Error::validation(
                "weights lattice mismatch",
                format!(
                    "artifact lattice {:?} differs from configured {:?}",
                    self.lattice,
                    cfg.lattice.descriptor()
                ),
            ));
        }
        if self.input_indices != cfg.projection.indices() {
            return Err(Error::validation(
                "weights lattice mismatch",
                format!(
                    "artifact inputs {:?} differ from configured {:?}",
                    self.input_indices,
                    cfg.projection.indices()
                ),
            ));
        }
        if self.agents.len() != cfg.agents.len() {
            return Err(Error::validation(
                "weights agent count",
                format!(
                    "artifact has {} agents, config has {}",
                    self.agents.len(),
                    cfg.agents.len()
                ),
            ));
        }
        self.agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let nodes = cfg.lattice.node_count();
                if a.agent != i + 1
                    || a.nodes != nodes
                    || a.outputs != JOINTS
                    || a.values.len() != nodes * JOINTS
                {
                    return Err(Error::validation(
                        "weights lattice mismatch",
                        format!("agent entry {} has inconsistent shape", i + 1),
                    ));
                }
                Ok(WeightMatrix(DMatrix::from_column_slice(
                    a.nodes, a.outputs, &a.values,
                )))
            })
            .collect()
    }
}

pub fn write_summary(summary: &Summary, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).expect("summary always serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
