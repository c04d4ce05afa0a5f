//! Scoring, the two-community bridge probe and weight interpolation.

mod interp;
mod probe;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use interp::{interpolate, read_interpolation_csv, uniform_grid, write_interpolation_csv, InterpPoint};
pub use probe::{
    bridge_pair_probe, bridges_instance, generate_pairs, ConstantPredictor, MaskPredictor,
    ModelPredictor, OraclePredictor, ProbeReport, RandomPredictor, PROBE_P_INTRA,
    PROBE_SIDE_NODES,
};

use crate::error::{Error, Result};
use crate::model::{make_batch, run_batch, ModelConfig, ParamSet};
use crate::oracles::{Labels, OutputKind};
use crate::taskgen::{Split, TaskId, TaskInstance};

fn check_pair(pred: &Labels, truth: &Labels) -> Result<()> {
    if pred.kind != truth.kind || pred.len() != truth.len() {
        return Err(Error::Input(format!(
            "cannot score {:?} with {} values against {:?} with {}",
            pred.kind,
            pred.len(),
            truth.kind,
            truth.len()
        )));
    }
    Ok(())
}

fn matches(pred: &Labels, truth: &Labels) -> usize {
    pred.values.iter().zip(&truth.values).filter(|(a, b)| a == b).count()
}

/// Fraction of elements (pointers, edge flags) that match exactly.
pub fn node_level_score(pred: &Labels, truth: &Labels) -> Result<f64> {
    check_pair(pred, truth)?;
    if truth.is_empty() {
        return Ok(1.0);
    }
    Ok(matches(pred, truth) as f64 / truth.len() as f64)
}

/// 1 when every element matches, else 0.
pub fn graph_level_score(pred: &Labels, truth: &Labels) -> Result<f64> {
    check_pair(pred, truth)?;
    Ok(if pred.values == truth.values { 1.0 } else { 0.0 })
}

/// Running totals over a set of graphs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tally {
    pub elements: usize,
    pub correct: usize,
    pub graphs: usize,
    pub perfect: usize,
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub loss_sum: f64,
    pub loss_weight: usize,
}

impl Tally {
    pub fn add(&mut self, pred: &Labels, truth: &Labels) -> Result<()> {
        check_pair(pred, truth)?;
        self.elements += truth.len();
        self.correct += matches(pred, truth);
        self.graphs += 1;
        self.perfect += usize::from(pred.values == truth.values);
        if truth.kind == OutputKind::EdgeMask {
            for (&p, &t) in pred.values.iter().zip(&truth.values) {
                match (p > 0, t > 0) {
                    (true, true) => self.true_pos += 1,
                    (true, false) => self.false_pos += 1,
                    (false, true) => self.false_neg += 1,
                    (false, false) => {}
                }
            }
        }
        Ok(())
    }

    pub fn merge(mut self, o: Tally) -> Tally {
        self.elements += o.elements;
        self.correct += o.correct;
        self.graphs += o.graphs;
        self.perfect += o.perfect;
        self.true_pos += o.true_pos;
        self.false_pos += o.false_pos;
        self.false_neg += o.false_neg;
        self.loss_sum += o.loss_sum;
        self.loss_weight += o.loss_weight;
        self
    }

    pub fn scores(&self) -> Scores {
        let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
        let f1_denom = 2 * self.true_pos + self.false_pos + self.false_neg;
        Scores {
            node_acc: ratio(self.correct, self.elements),
            graph_acc: ratio(self.perfect, self.graphs),
            mask_f1: ratio(2 * self.true_pos, f1_denom),
            loss: if self.loss_weight == 0 {
                0.0
            } else {
                self.loss_sum / self.loss_weight as f64
            },
            graphs: self.graphs,
        }
    }
}

/// Aggregate scores over a shard (element-level micro averages).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub node_acc: f64,
    pub graph_acc: f64,
    /// Micro-F1 of the positive class; only meaningful for edge masks.
    pub mask_f1: f64,
    pub loss: f64,
    pub graphs: usize,
}

/// Scores predictions against ground truth.
pub fn score_all(preds: &[Labels], truths: &[Labels]) -> Result<Scores> {
    if preds.len() != truths.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} instances",
            preds.len(),
            truths.len()
        )));
    }
    let mut t = Tally::default();
    for (p, y) in preds.iter().zip(truths) {
        t.add(p, y)?;
    }
    Ok(t.scores())
}

/// Evaluation batch size used when none is given.
pub const EVAL_BATCH: usize = 32;

/// Predictions of a model for every instance, batched and parallel over batches.
pub fn predict_all(config: &ModelConfig, params: &ParamSet, instances: &[TaskInstance], batch_size: usize) -> Result<(Vec<Labels>, f64)> {
    let chunks: Vec<&[TaskInstance]> = instances.chunks(batch_size.max(1)).collect();
    let results = chunks
        .par_iter()
        .map(|chunk| {
            let refs: Vec<&TaskInstance> = chunk.iter().collect();
            let batch = make_batch(config, &refs)?;
            let r = run_batch(config, params, &batch, false)?;
            Ok((r.predictions, r.loss * chunk.len() as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut preds = Vec::with_capacity(instances.len());
    let mut loss = 0.0;
    for (p, l) in results {
        preds.extend(p);
        loss += l;
    }
    Ok((preds, loss / instances.len().max(1) as f64))
}

/// Scores a model on a set of instances.
pub fn evaluate(config: &ModelConfig, params: &ParamSet, instances: &[TaskInstance], batch_size: usize) -> Result<Scores> {
    let (preds, loss) = predict_all(config, params, instances, batch_size)?;
    let truths: Vec<Labels> = instances.iter().map(|i| i.labels.clone()).collect();
    let mut s = score_all(&preds, &truths)?;
    s.loss = loss;
    Ok(s)
}

/// Scores the oracle labels recomputed from each instance's inputs; 1.0 unless a
/// stored label is stale.
pub fn evaluate_oracle(instances: &[TaskInstance]) -> Result<Scores> {
    let preds = instances
        .iter()
        .map(|i| crate::taskgen::label_instance(i.task, &i.graph, i.start_node(), i.values()))
        .collect::<Result<Vec<_>>>()?;
    let truths: Vec<Labels> = instances.iter().map(|i| i.labels.clone()).collect();
    score_all(&preds, &truths)
}

/// One row of `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub step: u64,
    pub split: Split,
    pub task: TaskId,
    pub node_acc: f64,
    pub graph_acc: f64,
    pub loss: f64,
}

pub const METRICS_HEADER: [&str; 6] = ["step", "split", "task", "node_acc", "graph_acc", "loss"];

/// Appends records to a CSV writer with the fixed column order.
pub fn write_metric<W: std::io::Write>(w: &mut csv::Writer<W>, r: &MetricRecord) -> Result<()> {
    w.write_record([
        r.step.to_string(),
        r.split.name().to_string(),
        r.task.name().to_string(),
        format!("{:.6}", r.node_acc),
        format!("{:.6}", r.graph_acc),
        format!("{:.6}", r.loss),
    ])?;
    Ok(())
}

pub fn write_metrics_csv(path: &Path, records: &[MetricRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for r in records {
        write_metric(&mut w, r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ptr(v: &[usize]) -> Labels {
        Labels::new(OutputKind::NodePointer, v.to_vec())
    }

    #[test]
    fn node_and_graph_scores() {
        assert_eq!(node_level_score(&ptr(&[0, 1, 2, 3]), &ptr(&[0, 1, 2, 0])).unwrap(), 0.75);
        assert_eq!(node_level_score(&ptr(&[1, 2]), &ptr(&[1, 2])).unwrap(), 1.0);
        assert_eq!(node_level_score(&ptr(&[1, 2]), &ptr(&[0, 0])).unwrap(), 0.0);
        let mut truth: Vec<usize> = (0..32).collect();
        let pred = ptr(&truth);
        truth[7] = 0;
        assert_eq!(graph_level_score(&pred, &ptr(&truth)).unwrap(), 0.0);
        assert_eq!(graph_level_score(&pred, &pred).unwrap(), 1.0);
    }

    #[test]
    fn kind_mismatch_is_an_error() {
        let m = Labels::new(OutputKind::EdgeMask, vec![1, 0]);
        assert!(node_level_score(&m, &ptr(&[1, 0])).is_err());
        assert!(node_level_score(&ptr(&[1]), &ptr(&[1, 0])).is_err());
    }

    #[test]
    fn shard_graph_accuracy_is_fraction_perfect() {
        let truths = vec![ptr(&[0, 1]), ptr(&[1, 1]), ptr(&[0, 0]), ptr(&[1, 0])];
        let preds = vec![ptr(&[0, 1]), ptr(&[1, 0]), ptr(&[0, 0]), ptr(&[0, 0])];
        let s = score_all(&preds, &truths).unwrap();
        assert_eq!(s.graph_acc, 0.5);
        assert_eq!(s.node_acc, 6.0 / 8.0);
    }

    #[test]
    fn mask_f1() {
        let t = Labels::new(OutputKind::EdgeMask, vec![1, 1, 0, 0]);
        let p = Labels::new(OutputKind::EdgeMask, vec![1, 0, 1, 0]);
        let s = score_all(&[p], &[t]).unwrap();
        assert_eq!(s.mask_f1, 0.5);
        assert_eq!(s.node_acc, 0.5);
    }

    #[test]
    fn metrics_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let r = MetricRecord {
            step: 500,
            split: Split::Val,
            task: TaskId::Bfs,
            node_acc: 0.5,
            graph_acc: 0.25,
            loss: 1.0,
        };
        write_metrics_csv(&path, &[r]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "step,split,task,node_acc,graph_acc,loss\n500,val,bfs,0.500000,0.250000,1.000000\n");
    }
}
