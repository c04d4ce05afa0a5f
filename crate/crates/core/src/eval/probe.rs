use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{sample_two_community_pair, Graph, ProbePair};
use crate::model::{ModelConfig, ParamSet};
use crate::oracles::{Labels, OutputKind};
use crate::rng::{derive_seed, Rng};
use crate::taskgen::{label_instance, PositionEncoding, TaskId, TaskInstance};

/// Nodes in each community of a generated probe pair.
pub const PROBE_SIDE_NODES: usize = 8;
/// Edge probability inside each community.
pub const PROBE_P_INTRA: f64 = 0.5;

/// Anything that outputs an edge mask per instance.
pub trait MaskPredictor {
    fn predict(&mut self, instances: &[TaskInstance]) -> Result<Vec<Labels>>;
}

/// Recomputes labels with the bridges oracle.
pub struct OraclePredictor;

impl MaskPredictor for OraclePredictor {
    fn predict(&mut self, instances: &[TaskInstance]) -> Result<Vec<Labels>> {
        instances
            .iter()
            .map(|i| label_instance(TaskId::Bridges, &i.graph, 0, None))
            .collect()
    }
}

/// Independent fair coin per edge.
pub struct RandomPredictor(pub Rng);

impl MaskPredictor for RandomPredictor {
    fn predict(&mut self, instances: &[TaskInstance]) -> Result<Vec<Labels>> {
        Ok(instances
            .iter()
            .map(|i| {
                let v = (0..i.graph.num_edges()).map(|_| usize::from(self.0.bernoulli(0.5))).collect();
                Labels::new(OutputKind::EdgeMask, v)
            })
            .collect())
    }
}

/// Same flag on every edge.
pub struct ConstantPredictor(pub usize);

impl MaskPredictor for ConstantPredictor {
    fn predict(&mut self, instances: &[TaskInstance]) -> Result<Vec<Labels>> {
        Ok(instances
            .iter()
            .map(|i| Labels::new(OutputKind::EdgeMask, vec![self.0; i.graph.num_edges()]))
            .collect())
    }
}

/// A trained bridges model.
pub struct ModelPredictor<'a> {
    pub config: &'a ModelConfig,
    pub params: &'a ParamSet,
    pub batch_size: usize,
}

impl MaskPredictor for ModelPredictor<'_> {
    fn predict(&mut self, instances: &[TaskInstance]) -> Result<Vec<Labels>> {
        if self.config.task != TaskId::Bridges {
            return Err(Error::Input(format!(
                "bridge probe needs a bridges model, got {}",
                self.config.task
            )));
        }
        Ok(super::predict_all(self.config, self.params, instances, self.batch_size)?.0)
    }
}

/// Bridges instance on `graph` with deterministic position features.
pub fn bridges_instance(graph: &Graph, encoding: PositionEncoding, seed: u64) -> Result<TaskInstance> {
    let labels = label_instance(TaskId::Bridges, graph, 0, None)?;
    let mut inst = TaskInstance {
        task: TaskId::Bridges,
        seed,
        graph: graph.clone(),
        node_inputs: BTreeMap::new(),
        edge_inputs: BTreeMap::new(),
        labels,
    };
    let enc = match encoding {
        PositionEncoding::RandomScalar => PositionEncoding::Scalar,
        e => e,
    };
    inst.set_positions(enc, &mut Rng::new(seed));
    Ok(inst)
}

/// `count` probe pairs, pair `i` drawn from its own seed stream.
pub fn generate_pairs(count: usize, seed: u64) -> Result<Vec<ProbePair>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::new(derive_seed(seed, &[0x70, i as u64]));
            sample_two_community_pair(PROBE_SIDE_NODES, PROBE_P_INTRA, &mut rng)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub pairs: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// A pair is correct when the probe edge is flagged in the single-bridge graph
/// and not flagged in the double graph. Other edges are ignored.
pub fn bridge_pair_probe(predictor: &mut dyn MaskPredictor, pairs: &[ProbePair], encoding: PositionEncoding) -> Result<ProbeReport> {
    let mut singles = Vec::with_capacity(pairs.len());
    let mut doubles = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        singles.push(bridges_instance(&p.single, encoding, i as u64)?);
        doubles.push(bridges_instance(&p.double, encoding, i as u64)?);
    }
    let ps = predictor.predict(&singles)?;
    let pd = predictor.predict(&doubles)?;
    if ps.len() != pairs.len() || pd.len() != pairs.len() {
        return Err(Error::Input("predictor returned the wrong number of masks".into()));
    }
    let mut correct = 0;
    for ((p, s), d) in pairs.iter().zip(&ps).zip(&pd) {
        let hit = s.values.get(p.probe_index_single()) == Some(&1)
            && d.values.get(p.probe_index_double()) == Some(&0);
        correct += usize::from(hit);
    }
    Ok(ProbeReport {
        pairs: pairs.len(),
        correct,
        accuracy: if pairs.is_empty() { 0.0 } else { correct as f64 / pairs.len() as f64 },
    })
}
