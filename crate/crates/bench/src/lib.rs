//! Shared workloads for the criterion benchmarks under `benches/`.

use narlab_core::model::{make_batch, Batch};
use narlab_core::taskgen::make_instance;
use narlab_core::{DatasetConfig, Model, ModelConfig, Preset, ProcessorConfig, Result, Rng, Split, TaskId, TaskInstance};

/// A model together with one batch it can run on.
pub struct Workload {
    pub model: Model,
    pub instances: Vec<TaskInstance>,
    pub batch: Batch,
}

/// Instances of `task` on `n`-node 4-regular graphs.
pub fn instances(task: TaskId, n: usize, count: usize, seed: u64) -> Result<Vec<TaskInstance>> {
    let mut c = DatasetConfig::preset(Preset::LClrsLen);
    c.train_len = n;
    (0..count)
        .map(|i| make_instance(task, &c, Split::Train, &mut Rng::new(seed + i as u64)))
        .collect()
}

impl Workload {
    pub fn new(task: TaskId, processor: ProcessorConfig, n: usize, graphs: usize, hidden: usize, steps: usize) -> Result<Self> {
        let mut config = ModelConfig::new(task, processor);
        config.hidden = hidden;
        config.steps = steps;
        let model = Model::init(config)?;
        let instances = instances(task, n, graphs, 1)?;
        let refs: Vec<&TaskInstance> = instances.iter().collect();
        let batch = make_batch(&model.config, &refs)?;
        Ok(Self { model, instances, batch })
    }
}
