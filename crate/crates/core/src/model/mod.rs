//! Encode-process-decode assembly.
//!
//! Inputs are linearly encoded to `d` dimensions, the processor runs `T`
//! times from a zero state with the encodings re-injected every step, and a
//! task-specific decoder turns the final state into logits.

mod batch;
pub mod decode;
mod params;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use batch::{Batch, Connectivity, FeatureSchema, STRUCTURAL_ARC_COLUMNS};
pub use decode::{Logits, argmax};
pub use params::{Bound, ParamSet};

use crate::autodiff::{Tape, Tensor};
use crate::error::{Error, Result};
use crate::oracles::Labels;
use crate::processors::{self, Encoded, ProcessorConfig, State};
use crate::rng::Rng;
use crate::taskgen::{PositionEncoding, TaskId, TaskInstance};

pub const DEFAULT_HIDDEN: usize = 128;
pub const DESK_HIDDEN: usize = 64;
pub const DEFAULT_STEPS: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub task: TaskId,
    pub processor: ProcessorConfig,
    #[serde(default)]
    pub encoding: PositionEncoding,
    /// Hidden width `d_h`.
    pub hidden: usize,
    /// Processor applications `T`.
    pub steps: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(task: TaskId, processor: ProcessorConfig) -> Self {
        Self {
            task,
            processor,
            encoding: PositionEncoding::Scalar,
            hidden: DEFAULT_HIDDEN,
            steps: DEFAULT_STEPS,
            seed: 0,
        }
    }

    pub fn schema(&self) -> FeatureSchema {
        FeatureSchema::new(self.task, self.encoding)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.steps == 0 {
            return Err(Error::Parameter("hidden size and steps must be positive".into()));
        }
        if self.processor.needs_line_graph() && self.hidden % processors::TWL_HEADS != 0 {
            return Err(Error::Parameter(format!(
                "hidden size {} is not divisible by {} attention heads",
                self.hidden,
                processors::TWL_HEADS
            )));
        }
        Ok(())
    }

    /// SHA-256 over everything but the seed: two configs with the same hash
    /// produce parameter sets of identical layout and meaning.
    pub fn architecture_hash(&self) -> String {
        let mut c = self.clone();
        c.seed = 0;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Configuration plus parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamSet,
}

impl Model {
    /// Fresh parameters drawn from `config.seed`.
    pub fn init(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let d = config.hidden;
        let schema = config.schema();
        let mut rng = Rng::new(config.seed);
        let mut p = ParamSet::new();
        p.weight("enc.node.w", schema.node_dim(), d, schema.node_dim(), &mut rng)?;
        p.bias("enc.node.b", d)?;
        p.weight("enc.arc.w", schema.arc_dim(), d, schema.arc_dim(), &mut rng)?;
        p.bias("enc.arc.b", d)?;
        processors::register(config.processor, &mut p, d, &mut rng)?;
        decode::register(config.task, &mut p, d, &mut rng)?;
        Ok(Self { config, params: p })
    }

    /// Wraps existing parameters after checking they fit `config`.
    pub fn from_params(config: ModelConfig, params: ParamSet) -> Result<Self> {
        let fresh = Self::init(config.clone())?;
        if fresh.params.names() != params.names() || fresh.params.shapes() != params.shapes() {
            return Err(Error::Checkpoint(
                "parameter layout does not match the model configuration".into(),
            ));
        }
        Ok(Self { config, params })
    }

    pub fn batch(&self, instances: &[&TaskInstance]) -> Result<Batch> {
        make_batch(&self.config, instances)
    }
}

pub fn make_batch(config: &ModelConfig, instances: &[&TaskInstance]) -> Result<Batch> {
    Batch::new(
        instances,
        &config.schema(),
        config.processor.connectivity(),
        config.processor.needs_line_graph(),
    )
}

/// Linear encoders for node and arc inputs.
pub fn encode(tape: &mut Tape, p: &Bound, batch: &Batch) -> Result<Encoded> {
    let xn = tape.constant(batch.node_x.clone());
    let xa = tape.constant(batch.arc_x.clone());
    let zn = tape.matmul(xn, p.var("enc.node.w")?)?;
    let za = tape.matmul(xa, p.var("enc.arc.w")?)?;
    Ok(Encoded {
        nodes: tape.add_row(zn, p.var("enc.node.b")?)?,
        arcs: tape.add_row(za, p.var("enc.arc.b")?)?,
    })
}

/// `T` processor steps from the zero state.
pub fn process(config: &ModelConfig, tape: &mut Tape, p: &Bound, batch: &Batch, z: Encoded) -> Result<State> {
    let prep = processors::prepare(config.processor, tape, p, z, batch)?;
    let mut s = processors::initial_state(tape, batch, config.hidden);
    for _ in 0..config.steps {
        s = processors::step(config.processor, tape, p, &prep, batch, s)?;
    }
    Ok(s)
}

/// Full forward pass on `tape` with the given bound parameters.
pub fn forward_bound(config: &ModelConfig, tape: &mut Tape, p: &Bound, batch: &Batch) -> Result<Logits> {
    if batch.task != config.task {
        return Err(Error::Input(format!(
            "model for {} given a {} batch",
            config.task, batch.task
        )));
    }
    let z = encode(tape, p, batch)?;
    let s = process(config, tape, p, batch, z)?;
    decode::decode(config.task, tape, p, batch, s)
}

/// Result of one batch: mean loss, predictions and, if requested, gradients.
#[derive(Clone, Debug)]
pub struct BatchResult {
    pub loss: f64,
    pub predictions: Vec<Labels>,
    /// One tensor per parameter, in registration order.
    pub grads: Option<Vec<Tensor>>,
}

pub fn run_batch(config: &ModelConfig, params: &ParamSet, batch: &Batch, with_grads: bool) -> Result<BatchResult> {
    let mut tape = Tape::new();
    let p = params.bind(&mut tape);
    let logits = forward_bound(config, &mut tape, &p, batch)?;
    let l = decode::loss(&mut tape, &logits, &batch.labels)?;
    let predictions = decode::predict(tape.value(logits.scores), &logits);
    let grads = if with_grads {
        let mut g = tape.backward(l)?;
        Some(
            p.vars()
                .iter()
                .zip(params.tensors())
                .map(|(&v, t)| g.take(v).unwrap_or_else(|| Tensor::zeros(t.rows(), t.cols())))
                .collect(),
        )
    } else {
        None
    };
    Ok(BatchResult {
        loss: tape.value(l).item(),
        predictions,
        grads,
    })
}

/// Logit values of a forward pass, for inspection.
pub fn logits_values(config: &ModelConfig, params: &ParamSet, batch: &Batch) -> Result<(Tensor, Logits)> {
    let mut tape = Tape::new();
    let p = params.bind(&mut tape);
    let logits = forward_bound(config, &mut tape, &p, batch)?;
    Ok((tape.value(logits.scores).clone(), logits))
}

/// Final node and arc states, for inspection.
pub fn final_state(config: &ModelConfig, params: &ParamSet, batch: &Batch) -> Result<(Tensor, Tensor)> {
    let mut tape = Tape::new();
    let p = params.bind(&mut tape);
    let z = encode(&mut tape, &p, batch)?;
    let s = process(config, &mut tape, &p, batch, z)?;
    Ok((tape.value(s.nodes).clone(), tape.value(s.arcs).clone()))
}
