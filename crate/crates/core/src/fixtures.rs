//! Golden fixture shards: small oracle-labeled instances, one file per task.
//!
//! A fixture line is `{"task", "provenance", "instance"}` where `instance` is a
//! regular shard record. [`verify_fixtures`] relabels every instance with the
//! fast oracle and the brute-force checker and reports disagreements.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::{brute_force_check, OutputKind, MAX_CHECK_NODES};
use crate::rng::{derive_seed, Rng};
use crate::taskgen::shard::{instance_from_line, instance_to_line};
use crate::taskgen::{label_instance, make_instance, DatasetConfig, Preset, Split, TaskId, TaskInstance};

/// Node counts cycled through when generating fixtures.
pub const FIXTURE_SIZES: [usize; 4] = [4, 5, 6, 7];
pub const FIXTURES_PER_TASK: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenFixture {
    pub task: TaskId,
    pub provenance: String,
    pub instance: serde_json::Value,
}

impl GoldenFixture {
    pub fn from_instance(inst: &TaskInstance, provenance: String) -> Result<Self> {
        Ok(Self {
            task: inst.task,
            provenance,
            instance: serde_json::from_str(&instance_to_line(inst)?)?,
        })
    }

    pub fn to_instance(&self) -> Result<TaskInstance> {
        instance_from_line(&self.instance.to_string()).map_err(Error::Input)
    }
}

pub fn fixture_path(dir: &Path, task: TaskId) -> PathBuf {
    dir.join(format!("{}.ndjson", task.name()))
}

/// Draws `per_task` small instances per task, keeps only those the
/// brute-force checker accepts, and writes `dir/<task>.ndjson`.
pub fn generate_fixtures(dir: &Path, per_task: usize, seed: u64) -> Result<usize> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = 0;
    for task in TaskId::ALL {
        let mut lines = Vec::new();
        let mut attempt = 0u64;
        while lines.len() < per_task {
            let n = FIXTURE_SIZES[lines.len() % FIXTURE_SIZES.len()];
            let mut c = DatasetConfig::preset(Preset::Custom);
            c.train_len = n;
            c.test_len = n;
            let s = derive_seed(seed, &[task.index() as u64, attempt]);
            attempt += 1;
            let inst = make_instance(task, &c, Split::Val, &mut Rng::new(s))?;
            if !brute_force_check(task, &inst.problem(), &inst.labels)? {
                return Err(Error::Generation(format!("oracle disagrees with brute force on {task} seed {s}")));
            }
            let prov = format!("make_instance seed={s} n={n}; checked by brute force");
            lines.push(serde_json::to_string(&GoldenFixture::from_instance(&inst, prov)?)?);
        }
        let path = fixture_path(dir, task);
        fs::write(&path, lines.join("\n") + "\n").map_err(|e| Error::io(&path, e))?;
        written += lines.len();
    }
    Ok(written)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub task: TaskId,
    pub file: PathBuf,
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FixtureReport {
    pub checked: usize,
    pub mismatches: Vec<Mismatch>,
    pub per_task: BTreeMap<TaskId, usize>,
    pub per_kind: BTreeMap<OutputKind, usize>,
}

impl FixtureReport {
    pub fn tasks_covered(&self) -> usize {
        self.per_task.values().filter(|&&c| c > 0).count()
    }

    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn check_fixture(task: TaskId, line: &str) -> Result<Option<String>> {
    let fx: GoldenFixture = serde_json::from_str(line)?;
    let inst = fx.to_instance()?;
    if fx.task != task || inst.task != task {
        return Ok(Some(format!("fixture for {} in the {task} file", fx.task)));
    }
    let relabeled = label_instance(task, &inst.graph, inst.start_node(), inst.values())?;
    if relabeled != inst.labels {
        return Ok(Some(format!(
            "stored labels {:?} differ from oracle labels {:?}",
            inst.labels.values, relabeled.values
        )));
    }
    if inst.n() <= MAX_CHECK_NODES && !brute_force_check(task, &inst.problem(), &inst.labels)? {
        return Ok(Some("labels rejected by brute-force check".into()));
    }
    Ok(None)
}

/// Re-runs every oracle on every fixture under `dir`.
pub fn verify_fixtures(dir: &Path) -> Result<FixtureReport> {
    let mut report = FixtureReport::default();
    for task in TaskId::ALL {
        let path = fixture_path(dir, task);
        if !path.exists() {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            report.checked += 1;
            let reason = match check_fixture(task, line) {
                Ok(r) => r,
                Err(e) => Some(e.to_string()),
            };
            match reason {
                Some(reason) => report.mismatches.push(Mismatch {
                    task,
                    file: path.clone(),
                    line: i + 1,
                    reason,
                }),
                None => {
                    *report.per_task.entry(task).or_default() += 1;
                    *report.per_kind.entry(task.output_kind()).or_default() += 1;
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_fixtures_verify_and_corruption_is_named() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(generate_fixtures(dir.path(), 2, 3).unwrap(), 26);
        let r = verify_fixtures(dir.path()).unwrap();
        assert!(r.ok(), "{:?}", r.mismatches);
        assert_eq!(r.tasks_covered(), 13);

        let path = fixture_path(dir.path(), TaskId::Bfs);
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut fx: GoldenFixture = serde_json::from_str(&lines[1]).unwrap();
        let mut inst = fx.to_instance().unwrap();
        let n = inst.n();
        inst.labels.values[0] = (inst.labels.values[0] + 1) % n;
        fx.instance = serde_json::from_str(&instance_to_line(&inst).unwrap()).unwrap();
        lines[1] = serde_json::to_string(&fx).unwrap();
        fs::write(&path, lines.join("\n")).unwrap();
        let r = verify_fixtures(dir.path()).unwrap();
        assert_eq!(r.mismatches.len(), 1);
        assert_eq!((r.mismatches[0].task, r.mismatches[0].line), (TaskId::Bfs, 2));
    }
}
