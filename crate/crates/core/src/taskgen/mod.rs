//! Labeled dataset generation: tasks, position encodings, presets and shards.

mod config;
pub mod encoding;
mod instance;
pub mod shard;
mod task;

pub use config::{DatasetConfig, GraphGenerator, Preset, Split};
pub use encoding::{encode_positions, PositionEncoding, PositionFeatures};
pub use instance::{
    generate_split, instance_seed, label_instance, make_instance, prefix_instance, TaskInstance,
    START_CHANNEL, VALUE_CHANNEL, WEIGHT_CHANNEL,
};
pub use shard::{read_shard, shard_path, write_shard};
pub use task::{GraphShape, TaskId};
