//! On-disk formats: program files, example files, the cluster archive,
//! context snapshots and the stats dump.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::DateTime;
use edge_gateway_core::context::{AttrValue, Context};
use edge_gateway_core::device::ArchivedCluster;
use edge_gateway_core::dsl::{IoExample, ProgramError};
use edge_gateway_core::stats::RunStats;
use edge_gateway_core::DslProgram;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Program { path: PathBuf, source: ProgramError },
    #[error("{path}: invalid examples: {source}")]
    Examples { path: PathBuf, source: serde_json::Error },
    #[error("archive {path} is corrupt: {reason}")]
    ArchiveCorrupt { path: PathBuf, reason: String },
}

fn read(path: &Path) -> Result<String, FileError> {
    fs::read_to_string(path).map_err(|source| FileError::Io { path: path.into(), source })
}

/// Writes through a sibling temp file and a rename so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), FileError> {
    let io_err = |source| FileError::Io { path: path.into(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn load_program(path: &Path) -> Result<DslProgram, FileError> {
    DslProgram::parse(&read(path)?).map_err(|source| FileError::Program { path: path.into(), source })
}

pub fn save_program(path: &Path, program: &DslProgram) -> Result<(), FileError> {
    write_atomic(path, program.serialize().as_bytes())
}

/// `[{"input": [...], "output": ...}, ...]`
pub fn load_examples<V: DeserializeOwned>(path: &Path) -> Result<Vec<IoExample<V>>, FileError> {
    serde_json::from_str(&read(path)?).map_err(|source| FileError::Examples { path: path.into(), source })
}

pub fn archive_path(dir: &Path, cluster_id: i64) -> PathBuf {
    dir.join(format!("cluster_{cluster_id}.json"))
}

pub fn write_cluster(dir: &Path, cluster: &ArchivedCluster) -> Result<PathBuf, FileError> {
    let path = archive_path(dir, cluster.cluster_id);
    let text = serde_json::to_vec_pretty(cluster).expect("clusters always serialize");
    write_atomic(&path, &text)?;
    Ok(path)
}

pub fn read_cluster(path: &Path) -> Result<ArchivedCluster, FileError> {
    let corrupt = |reason: String| FileError::ArchiveCorrupt { path: path.into(), reason };
    let c: ArchivedCluster = serde_json::from_str(&read(path)?).map_err(|e| corrupt(e.to_string()))?;
    if c.members.is_empty() {
        return Err(corrupt("cluster has no members".into()));
    }
    if c.members.iter().any(|m| m.attributes.is_empty()) {
        return Err(corrupt("member without attributes".into()));
    }
    Ok(c)
}

/// Cluster ids with an archive file in `dir`.
pub fn archived_ids(dir: &Path) -> Vec<i64> {
    let Ok(entries) = fs::read_dir(dir) else { return Vec::new() };
    let mut ids: Vec<i64> = entries
        .filter_map(|e| {
            let name = e.ok()?.file_name().into_string().ok()?;
            name.strip_prefix("cluster_")?.strip_suffix(".json")?.parse().ok()
        })
        .collect();
    ids.sort_unstable();
    ids
}

fn attr_json(v: &AttrValue) -> Value {
    match v {
        AttrValue::Text(s) => json!(s),
        AttrValue::Number(n) => json!(n),
        AttrValue::Time(secs) => match DateTime::from_timestamp(secs.floor() as i64, 0) {
            Some(t) => json!(t.format("%Y-%m-%d %H:%M:%S").to_string()),
            None => json!(secs),
        },
    }
}

/// `{"c1": ["loc", {"temp": [count, std, representative]}, ["sensor1", ...]]}`
pub fn context_snapshot(contexts: &[Context]) -> Value {
    let mut out = Map::new();
    for c in contexts {
        let mut attrs = Map::new();
        for (key, agg) in c.attributes() {
            attrs.insert(key, json!([agg.count, agg.std, attr_json(&agg.representative)]));
        }
        out.insert(c.id.clone(), json!([c.identifying_key, attrs, c.members]));
    }
    Value::Object(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankSummary {
    pub rank: u32,
    pub connections: usize,
    pub mean_secs: f64,
    pub total_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsDump {
    pub protocols: Value,
    pub ranks: Vec<RankSummary>,
    pub dispatch: Value,
    pub synthesis: Value,
    pub agents: usize,
    pub clusters: usize,
    pub dispatch_entries: usize,
    pub contexts: usize,
}

impl StatsDump {
    pub fn new(stats: &RunStats, agents: usize, clusters: usize, dispatch_entries: usize, contexts: usize) -> Self {
        let ranks = stats
            .rank_elapsed
            .iter()
            .map(|(rank, ds)| {
                let total: f64 = ds.iter().map(|d| d.as_secs_f64()).sum();
                RankSummary { rank: *rank, connections: ds.len(), mean_secs: total / ds.len().max(1) as f64, total_secs: total }
            })
            .collect();
        StatsDump {
            protocols: serde_json::to_value(&stats.protocols).expect("counters serialize"),
            ranks,
            dispatch: serde_json::to_value(stats.dispatch).expect("counters serialize"),
            synthesis: serde_json::to_value(stats.synthesis).expect("counters serialize"),
            agents,
            clusters,
            dispatch_entries,
            contexts,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}
