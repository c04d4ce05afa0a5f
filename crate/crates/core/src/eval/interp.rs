use std::path::Path;

use serde::{Deserialize, Serialize};

use super::evaluate;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ParamSet};
use crate::taskgen::TaskInstance;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpPoint {
    pub lambda: f64,
    pub id_acc: f64,
    pub ood_acc: f64,
}

/// Node accuracy of `(1 - lambda) * a + lambda * b` on both sets, per grid point.
pub fn interpolate(
    config: &ModelConfig,
    a: &ParamSet,
    b: &ParamSet,
    grid: &[f64],
    id_set: &[TaskInstance],
    ood_set: &[TaskInstance],
    batch_size: usize,
) -> Result<Vec<InterpPoint>> {
    grid.iter()
        .map(|&lambda| {
            let p = ParamSet::interpolate(a, b, lambda)?;
            Ok(InterpPoint {
                lambda,
                id_acc: evaluate(config, &p, id_set, batch_size)?.node_acc,
                ood_acc: evaluate(config, &p, ood_set, batch_size)?.node_acc,
            })
        })
        .collect()
}

/// `points` evenly spaced values from 0 to 1 inclusive.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|i| i as f64 / (points - 1) as f64).collect(),
    }
}

pub fn write_interpolation_csv(path: &Path, points: &[InterpPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["lambda", "id_acc", "ood_acc"])?;
    for p in points {
        // Shortest round-trip formatting keeps endpoint values exact.
        w.write_record([p.lambda.to_string(), p.id_acc.to_string(), p.ood_acc.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_interpolation_csv(path: &Path) -> Result<Vec<InterpPoint>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
