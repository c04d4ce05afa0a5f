//! Training loop: Adam with global-norm clipping and a cosine schedule,
//! periodic validation (in-distribution) and test (out-of-distribution)
//! evaluation, checkpoints, and last-of-the-best model selection.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use crate::autodiff::{adam_step, clip_global_norm, cosine_lr, AdamState, Checkpoint};
use crate::error::{Error, Result};
use crate::eval::{evaluate, write_metric, MetricRecord, Scores, EVAL_BATCH, METRICS_HEADER};
use crate::model::{make_batch, run_batch, Model, ModelConfig, ParamSet, DEFAULT_HIDDEN, DEFAULT_STEPS, DESK_HIDDEN};
use crate::processors::ProcessorConfig;
use crate::rng::{derive_seed, Rng};
use crate::taskgen::{
    generate_split, read_shard, shard_path, DatasetConfig, GraphGenerator, PositionEncoding, Preset, Split,
    TaskId, TaskInstance,
};

pub const FULL_TRAIN_STEPS: u64 = 20_000;
pub const FULL_LR: f64 = 1e-4;
pub const FULL_CLIP: f64 = 1.0;
pub const DEFAULT_EVAL_EVERY: u64 = 500;
pub const DESK_TRAIN_STEPS: u64 = 3000;
pub const DESK_PROCESSOR_STEPS: usize = 16;
pub const DESK_TRAIN_SIZE: usize = 2000;
pub const DESK_VALTEST_SIZE: usize = 64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    Cosine,
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: TaskId,
    pub dataset: DatasetConfig,
    pub processor: ProcessorConfig,
    pub encoding: PositionEncoding,
    /// Optimizer steps.
    pub steps: u64,
    pub batch_size: usize,
    pub lr: f64,
    pub clip: f64,
    pub schedule: Schedule,
    pub hidden: usize,
    /// Processor applications per forward pass.
    pub processor_steps: usize,
    pub eval_every: u64,
    pub seed: u64,
    pub desk_scale: bool,
}

impl TrainConfig {
    /// Full-scale hyperparameters on the CLRS preset.
    pub fn full_scale(task: TaskId, processor: ProcessorConfig) -> Self {
        Self {
            task,
            dataset: DatasetConfig::preset(Preset::Clrs),
            processor,
            encoding: PositionEncoding::Scalar,
            steps: FULL_TRAIN_STEPS,
            batch_size: processor.default_batch_size(),
            lr: FULL_LR,
            clip: FULL_CLIP,
            schedule: Schedule::Cosine,
            hidden: DEFAULT_HIDDEN,
            processor_steps: DEFAULT_STEPS,
            eval_every: DEFAULT_EVAL_EVERY,
            seed: 0,
            desk_scale: false,
        }
    }

    /// The single-core acceptance configuration: 16-node 4-regular training
    /// graphs (2000 of them), 32-node 4-regular test graphs, `d = 64`, `T = 16`,
    /// 3000 steps.
    pub fn desk(task: TaskId, processor: ProcessorConfig) -> Self {
        let mut c = Self::full_scale(task, processor);
        c.apply_desk_scale();
        c
    }

    pub fn apply_desk_scale(&mut self) {
        let mut d = DatasetConfig::preset(Preset::LClrsLen);
        d.name = Preset::Custom;
        d.train_size = DESK_TRAIN_SIZE;
        d.valtest_size = DESK_VALTEST_SIZE;
        d.tasks = vec![self.task];
        d.encoding = self.encoding;
        self.dataset = d;
        self.hidden = DESK_HIDDEN;
        self.processor_steps = DESK_PROCESSOR_STEPS;
        self.steps = DESK_TRAIN_STEPS;
        self.desk_scale = true;
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            task: self.task,
            processor: self.processor,
            encoding: self.encoding,
            hidden: self.hidden,
            steps: self.processor_steps,
            seed: derive_seed(self.seed, &[0x6d6f64656c]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.model_config().validate()?;
        if self.steps == 0 || self.batch_size == 0 || self.eval_every == 0 {
            return Err(Error::Parameter("steps, batch size and eval interval must be positive".into()));
        }
        if !(self.lr > 0.0 && self.clip > 0.0) {
            return Err(Error::Parameter("learning rate and clip norm must be positive".into()));
        }
        if self.dataset.generator == GraphGenerator::KRegular && self.dataset.k_train.is_none() {
            return Err(Error::Parameter("k-regular dataset without K".into()));
        }
        Ok(())
    }

    pub fn lr_at(&self, step: u64) -> f64 {
        match self.schedule {
            Schedule::Cosine => cosine_lr(step, self.steps, self.lr),
            Schedule::Constant => self.lr,
        }
    }
}

/// Train, validation (in-distribution) and test (out-of-distribution) splits.
#[derive(Clone, Debug, Default)]
pub struct TrainData {
    pub train: Vec<TaskInstance>,
    pub val: Vec<TaskInstance>,
    pub test: Vec<TaskInstance>,
}

impl TrainData {
    pub fn generate(config: &TrainConfig) -> Result<Self> {
        let mut d = config.dataset.clone();
        d.encoding = config.encoding;
        let seed = derive_seed(config.seed, &[0x64617461]);
        Ok(Self {
            train: generate_split(&d, config.task, Split::Train, seed)?,
            val: generate_split(&d, config.task, Split::Val, seed)?,
            test: generate_split(&d, config.task, Split::Test, seed)?,
        })
    }

    /// Reads `root/<dataset>/<task>/{train,val,test}.ndjson`.
    pub fn load(root: &Path, dataset: &str, task: TaskId) -> Result<Self> {
        Ok(Self {
            train: read_shard(&shard_path(root, dataset, task, Split::Train))?,
            val: read_shard(&shard_path(root, dataset, task, Split::Val))?,
            test: read_shard(&shard_path(root, dataset, task, Split::Test))?,
        })
    }
}

/// Index of the last maximum of `history`.
pub fn select_model(history: &[f64]) -> Result<usize> {
    if history.is_empty() {
        return Err(Error::Input("cannot select from an empty validation history".into()));
    }
    let best = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(history.iter().rposition(|&v| v == best).expect("maximum present"))
}

/// A saved evaluation point.
#[derive(Clone, Debug)]
pub struct EvalPoint {
    pub step: u64,
    pub val: Scores,
    pub test: Scores,
    pub params: ParamSet,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// The selected model (last of the best validation node accuracies).
    pub model: Model,
    pub selected: usize,
    pub final_params: ParamSet,
    pub optimizer: AdamState,
    pub records: Vec<MetricRecord>,
    pub evals: Vec<EvalPoint>,
}

impl TrainOutcome {
    pub fn selected_point(&self) -> &EvalPoint {
        &self.evals[self.selected]
    }
}

/// Where a run writes its artifacts and where it starts from.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// `metrics.csv`, `config.json` and `ckpt_<step>.bin` go here when set.
    pub run_dir: Option<PathBuf>,
    /// Continue from this checkpoint (parameters, optimizer state and step).
    pub resume: Option<Checkpoint>,
    /// Stop after this many total steps instead of `config.steps`; the
    /// schedule still spans `config.steps`.
    pub stop_at: Option<u64>,
}

pub fn checkpoint_path(run_dir: &Path, step: u64) -> PathBuf {
    run_dir.join(format!("ckpt_{step}.bin"))
}

fn batch_indices(config: &TrainConfig, step: u64, n: usize) -> (Vec<usize>, Rng) {
    let mut rng = Rng::new(derive_seed(config.seed, &[0x6261746368, step]));
    let idx = (0..config.batch_size).map(|_| rng.below(n)).collect();
    (idx, rng)
}

fn record(step: u64, split: Split, task: TaskId, s: &Scores) -> MetricRecord {
    MetricRecord {
        step,
        split,
        task,
        node_acc: s.node_acc,
        graph_acc: s.graph_acc,
        loss: s.loss,
    }
}

/// Runs the training loop.
pub fn train(config: &TrainConfig, data: &TrainData, opts: &RunOptions) -> Result<TrainOutcome> {
    config.validate()?;
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::Input("training needs nonempty train and validation splits".into()));
    }
    let mcfg = config.model_config();
    let hash = mcfg.architecture_hash();
    let (mut params, mut opt, start) = match &opts.resume {
        Some(ck) => {
            if ck.config_hash != hash {
                return Err(Error::Checkpoint("checkpoint belongs to a different architecture".into()));
            }
            let p = ParamSet::from_parts(ck.names.clone(), ck.params.clone())?;
            let model = Model::from_params(mcfg.clone(), p)?;
            let opt = ck
                .optimizer
                .clone()
                .ok_or_else(|| Error::Checkpoint("checkpoint has no optimizer state".into()))?;
            (model.params, opt, ck.step)
        }
        None => {
            let m = Model::init(mcfg.clone())?;
            let opt = AdamState::new(m.params.tensors());
            (m.params, opt, 0)
        }
    };
    let mut csv = None;
    if let Some(dir) = &opts.run_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let cfg_path = dir.join("config.json");
        fs::write(&cfg_path, serde_json::to_string_pretty(config)?).map_err(|e| Error::io(&cfg_path, e))?;
        let model_path = dir.join("model.json");
        fs::write(&model_path, serde_json::to_string_pretty(&mcfg)?).map_err(|e| Error::io(&model_path, e))?;
        let mpath = dir.join("metrics.csv");
        let append = start > 0 && mpath.exists();
        let file = fs::OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(&mpath)
            .map_err(|e| Error::io(&mpath, e))?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        if !append {
            w.write_record(METRICS_HEADER)?;
        }
        csv = Some(w);
    }
    let stop = opts.stop_at.unwrap_or(config.steps).min(config.steps);
    let mut records = Vec::new();
    let mut evals = Vec::new();
    let mut emit = |r: MetricRecord, csv: &mut Option<csv::Writer<fs::File>>| -> Result<()> {
        if let Some(w) = csv.as_mut() {
            write_metric(w, &r)?;
        }
        records.push(r);
        Ok(())
    };
    for step in start..stop {
        let (idx, mut rng) = batch_indices(config, step, data.train.len());
        let mut insts: Vec<TaskInstance> = idx.iter().map(|&i| data.train[i].clone()).collect();
        if config.encoding == PositionEncoding::RandomScalar {
            for inst in &mut insts {
                inst.mix_random_scalar(&mut rng);
            }
        }
        let refs: Vec<&TaskInstance> = insts.iter().collect();
        let batch = make_batch(&mcfg, &refs)?;
        let res = run_batch(&mcfg, &params, &batch, true)?;
        let mut grads = res.grads.expect("gradients requested");
        clip_global_norm(&mut grads, config.clip);
        adam_step(params.tensors_mut(), &grads, &mut opt, config.lr_at(step))?;
        let done = step + 1;
        let mut train_scores = crate::eval::score_all(&res.predictions, &batch.labels)?;
        train_scores.loss = res.loss;
        emit(record(done, Split::Train, config.task, &train_scores), &mut csv)?;

        if done % config.eval_every == 0 || done == stop {
            let val = evaluate(&mcfg, &params, &data.val, EVAL_BATCH)?;
            let test = if data.test.is_empty() {
                val
            } else {
                evaluate(&mcfg, &params, &data.test, EVAL_BATCH)?
            };
            emit(record(done, Split::Val, config.task, &val), &mut csv)?;
            emit(record(done, Split::Test, config.task, &test), &mut csv)?;
            info!(
                "{} step {done}: loss {:.4} val {:.4} test {:.4}",
                config.task, res.loss, val.node_acc, test.node_acc
            );
            let checkpoint = match &opts.run_dir {
                Some(dir) => {
                    let path = checkpoint_path(dir, done);
                    Checkpoint {
                        names: params.names().to_vec(),
                        params: params.tensors().to_vec(),
                        step: done,
                        config_hash: hash.clone(),
                        optimizer: Some(opt.clone()),
                    }
                    .save(&path)?;
                    Some(path)
                }
                None => None,
            };
            evals.push(EvalPoint {
                step: done,
                val,
                test,
                params: params.clone(),
                checkpoint,
            });
        }
        if let Some(w) = csv.as_mut() {
            w.flush().map_err(|e| Error::Io {
                path: PathBuf::from("metrics.csv"),
                source: e,
            })?;
        }
    }
    if evals.is_empty() {
        let val = evaluate(&mcfg, &params, &data.val, EVAL_BATCH)?;
        let test = evaluate(&mcfg, &params, &data.test, EVAL_BATCH)?;
        evals.push(EvalPoint {
            step: start,
            val,
            test,
            params: params.clone(),
            checkpoint: None,
        });
    }
    let history: Vec<f64> = evals.iter().map(|e| e.val.node_acc).collect();
    let selected = select_model(&history)?;
    Ok(TrainOutcome {
        model: Model {
            config: mcfg,
            params: evals[selected].params.clone(),
        },
        selected,
        final_params: params,
        optimizer: opt,
        records,
        evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_is_last_of_the_best() {
        assert_eq!(select_model(&[0.9, 1.0, 1.0, 0.98]).unwrap(), 2);
        assert_eq!(select_model(&[0.1, 0.2, 0.3]).unwrap(), 2);
        assert_eq!(select_model(&[0.5, 0.5, 0.5]).unwrap(), 2);
        assert!(select_model(&[]).is_err());
    }

    #[test]
    fn full_scale_defaults() {
        let c = TrainConfig::full_scale(TaskId::Bfs, ProcessorConfig::Mpnn);
        assert_eq!((c.lr, c.clip, c.steps, c.processor_steps), (1e-4, 1.0, 20_000, 32));
        assert_eq!(c.batch_size, 32);
        assert_eq!(TrainConfig::full_scale(TaskId::Bfs, ProcessorConfig::Twl).batch_size, 16);
        assert_eq!(c.lr_at(20_000), 0.0);
        let d = TrainConfig::desk(TaskId::Bfs, ProcessorConfig::Mpnn);
        assert_eq!((d.hidden, d.processor_steps, d.steps), (64, 16, 3000));
        assert_eq!((d.dataset.train_len, d.dataset.test_len, d.dataset.train_size), (16, 32, 2000));
    }

    fn tiny() -> (TrainConfig, TrainData) {
        let mut c = TrainConfig::desk(TaskId::Bfs, ProcessorConfig::Mpnn);
        c.dataset.train_size = 8;
        c.dataset.valtest_size = 4;
        c.dataset.train_len = 5;
        c.dataset.test_len = 6;
        c.steps = 6;
        c.batch_size = 4;
        c.hidden = 8;
        c.processor_steps = 2;
        c.eval_every = 2;
        c.lr = 1e-2;
        c.seed = 3;
        let data = TrainData::generate(&c).unwrap();
        (c, data)
    }

    #[test]
    fn same_seed_same_run() {
        let (c, data) = tiny();
        let a = train(&c, &data, &RunOptions::default()).unwrap();
        let b = train(&c, &data, &RunOptions::default()).unwrap();
        assert_eq!(a.final_params, b.final_params);
        assert_eq!(a.records, b.records);
        assert_eq!(a.evals.len(), 3);
        let mut other = c.clone();
        other.seed = 4;
        let d = TrainData::generate(&other).unwrap();
        let o = train(&other, &d, &RunOptions::default()).unwrap();
        assert_ne!(a.final_params, o.final_params);
    }

    #[test]
    fn training_moves_parameters_and_selects_last_best() {
        let (c, data) = tiny();
        let out = train(&c, &data, &RunOptions::default()).unwrap();
        let init = Model::init(c.model_config()).unwrap();
        assert_ne!(init.params, out.final_params);
        let history: Vec<f64> = out.evals.iter().map(|e| e.val.node_acc).collect();
        assert_eq!(out.selected, select_model(&history).unwrap());
        assert_eq!(out.model.params, out.evals[out.selected].params);
        assert_eq!(out.optimizer.t, 6);
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let (c, data) = tiny();
        let full = train(&c, &data, &RunOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let first = RunOptions {
            run_dir: Some(dir.path().to_path_buf()),
            stop_at: Some(4),
            ..Default::default()
        };
        train(&c, &data, &first).unwrap();
        let ck = Checkpoint::load(&checkpoint_path(dir.path(), 4)).unwrap();
        assert_eq!(ck.step, 4);
        let second = RunOptions {
            run_dir: Some(dir.path().to_path_buf()),
            resume: Some(ck),
            stop_at: None,
        };
        let resumed = train(&c, &data, &second).unwrap();
        assert_eq!(resumed.final_params, full.final_params);
        let text = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(text.lines().count(), 1 + 6 + 2 * 3);
        assert!(dir.path().join("model.json").exists());
        assert!(dir.path().join("config.json").exists());
    }

    #[test]
    fn resume_rejects_other_architecture() {
        let (c, data) = tiny();
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            run_dir: Some(dir.path().to_path_buf()),
            stop_at: Some(2),
            ..Default::default()
        };
        train(&c, &data, &opts).unwrap();
        let ck = Checkpoint::load(&checkpoint_path(dir.path(), 2)).unwrap();
        let mut other = c.clone();
        other.hidden = 12;
        let err = train(&other, &data, &RunOptions {
            resume: Some(ck),
            ..Default::default()
        });
        assert!(matches!(err, Err(Error::Checkpoint(_))));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let (c, _) = tiny();
        let mut bad = c.clone();
        bad.lr = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = c.clone();
        bad.batch_size = 0;
        assert!(bad.validate().is_err());
        assert!(train(&c, &TrainData::default(), &RunOptions::default()).is_err());
    }
}
