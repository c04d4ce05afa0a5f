//! Newline-delimited JSON shards, one instance per line.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Split, TaskId, TaskInstance};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::oracles::Labels;

#[derive(Serialize, Deserialize)]
struct Record {
    task: TaskId,
    seed: u64,
    n: usize,
    directed: bool,
    edges: Vec<(usize, usize, f64)>,
    node_inputs: BTreeMap<String, Vec<f64>>,
    edge_inputs: BTreeMap<String, Vec<(usize, usize, f64)>>,
    labels: Labels,
}

impl From<&TaskInstance> for Record {
    fn from(inst: &TaskInstance) -> Self {
        Record {
            task: inst.task,
            seed: inst.seed,
            n: inst.graph.n(),
            directed: inst.graph.directed(),
            edges: inst.graph.edges().iter().map(|e| (e.u, e.v, e.weight)).collect(),
            node_inputs: inst.node_inputs.clone(),
            edge_inputs: inst.edge_inputs.clone(),
            labels: inst.labels.clone(),
        }
    }
}

impl TryFrom<Record> for TaskInstance {
    type Error = Error;

    fn try_from(r: Record) -> Result<Self> {
        let graph = Graph::from_edges(r.n, r.directed, r.edges)?;
        for (name, data) in &r.node_inputs {
            if data.len() % r.n != 0 {
                return Err(Error::Input(format!(
                    "node channel `{name}` has {} values for {} nodes",
                    data.len(),
                    r.n
                )));
            }
        }
        Ok(TaskInstance {
            task: r.task,
            seed: r.seed,
            graph,
            node_inputs: r.node_inputs,
            edge_inputs: r.edge_inputs,
            labels: r.labels,
        })
    }
}

/// Serializes one instance as a single JSON line (no trailing newline).
pub fn instance_to_line(inst: &TaskInstance) -> Result<String> {
    Ok(serde_json::to_string(&Record::from(inst))?)
}

pub fn instance_from_line(line: &str) -> std::result::Result<TaskInstance, String> {
    let rec: Record = serde_json::from_str(line).map_err(|e| e.to_string())?;
    TaskInstance::try_from(rec).map_err(|e| e.to_string())
}

pub fn write_shard(instances: &[TaskInstance], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for inst in instances {
        writeln!(out, "{}", instance_to_line(inst)?).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a shard; malformed records report their 1-based line number.
pub fn read_shard(path: &Path) -> Result<Vec<TaskInstance>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let inst = instance_from_line(&line).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        })?;
        out.push(inst);
    }
    Ok(out)
}

/// `<root>/<dataset>/<task>/<split>.ndjson`
pub fn shard_path(root: &Path, dataset: &str, task: TaskId, split: Split) -> PathBuf {
    root.join(dataset)
        .join(task.name())
        .join(format!("{}.ndjson", split.name()))
}
