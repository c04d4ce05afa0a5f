//! Laboratory for out-of-distribution generalization of neural algorithmic
//! reasoners: algorithm-labeled graph datasets, a small reverse-mode
//! autodiff core, recurrent encode-process-decode graph networks and the
//! evaluation tools around them.

pub mod autodiff;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod graph;
pub mod model;
pub mod oracles;
pub mod processors;
pub mod rng;
pub mod taskgen;
pub mod trainer;

pub use autodiff::{Tape, Tensor, Var};
pub use error::{Error, Result};
pub use graph::{Graph, LineGraph, ProbePair};
pub use model::{Model, ModelConfig, ParamSet};
pub use processors::ProcessorConfig;
pub use oracles::{Labels, OutputKind};
pub use rng::Rng;
pub use taskgen::{DatasetConfig, PositionEncoding, Preset, Split, TaskId, TaskInstance};
