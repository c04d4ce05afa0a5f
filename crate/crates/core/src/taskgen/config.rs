use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{PositionEncoding, TaskId};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "CLRS")]
    Clrs,
    #[serde(rename = "L-CLRS")]
    LClrs,
    #[serde(rename = "L-CLRS-Len")]
    LClrsLen,
    #[serde(rename = "L-CLRS-Deg")]
    LClrsDeg,
    #[serde(rename = "L-CLRS-Len-Deg")]
    LClrsLenDeg,
    #[serde(rename = "custom")]
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Clrs,
        Preset::LClrs,
        Preset::LClrsLen,
        Preset::LClrsDeg,
        Preset::LClrsLenDeg,
        Preset::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Clrs => "CLRS",
            Preset::LClrs => "L-CLRS",
            Preset::LClrsLen => "L-CLRS-Len",
            Preset::LClrsDeg => "L-CLRS-Deg",
            Preset::LClrsLenDeg => "L-CLRS-Len-Deg",
            Preset::Custom => "custom",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parameter(format!("unknown preset `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphGenerator {
    ErFixedP,
    KRegular,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn index(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sizes and graph generator of one dataset configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: Preset,
    pub train_len: usize,
    pub test_len: usize,
    pub train_size: usize,
    /// Instances in each of the validation and test splits.
    pub valtest_size: usize,
    pub generator: GraphGenerator,
    /// Edge probability for [`GraphGenerator::ErFixedP`].
    pub er_p: f64,
    pub k_train: Option<usize>,
    pub k_test: Option<usize>,
    pub tasks: Vec<TaskId>,
    #[serde(default)]
    pub encoding: PositionEncoding,
}

impl DatasetConfig {
    pub fn preset(name: Preset) -> Self {
        let er = |train_size, valtest_size| DatasetConfig {
            name,
            train_len: 16,
            test_len: 64,
            train_size,
            valtest_size,
            generator: GraphGenerator::ErFixedP,
            er_p: 0.5,
            k_train: None,
            k_test: None,
            tasks: TaskId::ALL.to_vec(),
            encoding: PositionEncoding::Scalar,
        };
        let kreg = |train_len, k_test| DatasetConfig {
            name,
            train_len,
            test_len: 32,
            train_size: 100_000,
            valtest_size: 1000,
            generator: GraphGenerator::KRegular,
            er_p: 0.5,
            k_train: Some(4),
            k_test: Some(k_test),
            tasks: TaskId::ALL.to_vec(),
            encoding: PositionEncoding::Scalar,
        };
        match name {
            Preset::Clrs => er(1000, 32),
            Preset::LClrs => er(100_000, 32),
            Preset::LClrsLen => kreg(16, 4),
            Preset::LClrsDeg => kreg(32, 8),
            Preset::LClrsLenDeg => kreg(16, 8),
            // starts from the CLRS sizes; callers override fields
            Preset::Custom => DatasetConfig {
                name: Preset::Custom,
                ..er(1000, 32)
            },
        }
    }

    pub fn split_size(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train_size,
            Split::Val | Split::Test => self.valtest_size,
        }
    }

    pub fn split_len(&self, split: Split) -> usize {
        match split {
            Split::Train | Split::Val => self.train_len,
            Split::Test => self.test_len,
        }
    }

    pub fn split_degree(&self, split: Split) -> Option<usize> {
        match split {
            Split::Train | Split::Val => self.k_train,
            Split::Test => self.k_test,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_len == 0 || self.test_len == 0 {
            return Err(Error::Parameter("graph sizes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.er_p) {
            return Err(Error::Parameter(format!("er_p {} not in [0, 1]", self.er_p)));
        }
        if self.generator == GraphGenerator::KRegular {
            for split in Split::ALL {
                let (n, k) = (self.split_len(split), self.split_degree(split));
                match k {
                    Some(k) if k < n && (n * k) % 2 == 0 => {}
                    _ => {
                        return Err(Error::Parameter(format!(
                            "{split} split: no {k:?}-regular graph on {n} nodes"
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}
