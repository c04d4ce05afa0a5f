use std::collections::BTreeMap;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Named parameter tensors in registration order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(names: Vec<String>, tensors: Vec<Tensor>) -> Result<Self> {
        if names.len() != tensors.len() {
            return Err(Error::Parameter(format!(
                "{} names for {} tensors",
                names.len(),
                tensors.len()
            )));
        }
        let mut set = Self::new();
        for (n, t) in names.into_iter().zip(tensors) {
            set.insert(n, t)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(Error::Parameter(format!("duplicate parameter `{name}`")));
        }
        self.names.push(name);
        self.tensors.push(value);
        Ok(())
    }

    /// Glorot-uniform weight; `fan_in` is the width of the full concatenated
    /// input when the weight is one block of a larger linear layer.
    pub fn weight(&mut self, name: &str, rows: usize, cols: usize, fan_in: usize, rng: &mut Rng) -> Result<()> {
        let a = (6.0 / (fan_in + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.uniform_range(-a, a)).collect();
        self.insert(name, Tensor::new(rows, cols, data)?)
    }

    pub fn bias(&mut self, name: &str, cols: usize) -> Result<()> {
        self.insert(name, Tensor::zeros(1, cols))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn into_parts(self) -> (Vec<String>, Vec<Tensor>) {
        (self.names, self.tensors)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &mut self.tensors[i])
    }

    pub fn shapes(&self) -> Vec<[usize; 2]> {
        self.tensors.iter().map(Tensor::shape).collect()
    }

    /// Total number of scalars.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    /// A copy of `self` with values taken from `flat`.
    pub fn unflatten(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.num_scalars() {
            return Err(Error::Shape {
                op: "unflatten",
                lhs: vec![self.num_scalars()],
                rhs: vec![flat.len()],
            });
        }
        let mut off = 0;
        let tensors = self
            .tensors
            .iter()
            .map(|t| {
                let out = Tensor::new(t.rows(), t.cols(), flat[off..off + t.len()].to_vec());
                off += t.len();
                out
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            names: self.names.clone(),
            tensors,
        })
    }

    /// `(1 - lambda) * a + lambda * b`, elementwise over the flat vectors.
    pub fn interpolate(a: &ParamSet, b: &ParamSet, lambda: f64) -> Result<Self> {
        if a.names != b.names || a.shapes() != b.shapes() {
            return Err(Error::Parameter(
                "cannot interpolate parameter sets of different layout".into(),
            ));
        }
        let flat: Vec<f64> = a
            .flatten()
            .iter()
            .zip(b.flatten())
            .map(|(x, y)| (1.0 - lambda) * x + lambda * y)
            .collect();
        a.unflatten(&flat)
    }

    /// Places every tensor on `tape` as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        let vars = self.tensors.iter().map(|t| tape.param(t.clone())).collect();
        Bound::new(&self.names, vars)
    }
}

/// Parameter vars of one forward pass, looked up by name.
#[derive(Clone, Debug)]
pub struct Bound {
    map: BTreeMap<String, Var>,
    order: Vec<Var>,
}

impl Bound {
    pub fn new(names: &[String], vars: Vec<Var>) -> Self {
        let map = names.iter().cloned().zip(vars.iter().copied()).collect();
        Self { map, order: vars }
    }

    pub fn var(&self, name: &str) -> Result<Var> {
        self.map
            .get(name)
            .copied()
            .ok_or_else(|| Error::Parameter(format!("missing parameter `{name}`")))
    }

    pub fn has(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    /// Vars in registration order.
    pub fn vars(&self) -> &[Var] {
        &self.order
    }
}
