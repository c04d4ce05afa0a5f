//! Node-position encodings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rng::Rng;

/// Width of the sinusoidal position table; fixed so it does not depend on n.
pub const SINUSOIDAL_DIM: usize = 16;
/// Width of the per-node random feature vector used with edge positions.
pub const RANDOM_FEATURE_DIM: usize = 4;

pub const POS_CHANNEL: &str = "pos";
pub const RANDOM_FEATURE_CHANNEL: &str = "rand";
pub const EDGE_POS_CHANNEL: &str = "pos_edge";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionEncoding {
    /// Node `i` gets `i / n`.
    #[default]
    Scalar,
    /// Sorted Uniform[0, 1] draws during training, [`Self::Scalar`] otherwise.
    RandomScalar,
    /// Transformer-style sin/cos table over the index.
    Sinusoidal,
    /// `1[i < j]` on every ordered pair plus random node features.
    EdgePosition,
}

impl PositionEncoding {
    pub const ALL: [PositionEncoding; 4] = [
        PositionEncoding::Scalar,
        PositionEncoding::RandomScalar,
        PositionEncoding::Sinusoidal,
        PositionEncoding::EdgePosition,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PositionEncoding::Scalar => "scalar",
            PositionEncoding::RandomScalar => "random_scalar",
            PositionEncoding::Sinusoidal => "sinusoidal",
            PositionEncoding::EdgePosition => "edge_position",
        }
    }

    /// Node channel written by this encoding and its width.
    pub fn node_channel(self) -> (&'static str, usize) {
        match self {
            PositionEncoding::Scalar | PositionEncoding::RandomScalar => (POS_CHANNEL, 1),
            PositionEncoding::Sinusoidal => (POS_CHANNEL, SINUSOIDAL_DIM),
            PositionEncoding::EdgePosition => (RANDOM_FEATURE_CHANNEL, RANDOM_FEATURE_DIM),
        }
    }

    pub fn has_edge_channel(self) -> bool {
        self == PositionEncoding::EdgePosition
    }
}

impl fmt::Display for PositionEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PositionEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PositionEncoding::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown position encoding `{s}`")))
    }
}

/// Output of [`encode_positions`].
#[derive(Clone, Debug, PartialEq)]
pub struct PositionFeatures {
    pub channel: &'static str,
    pub dim: usize,
    /// Row-major `n x dim`.
    pub node: Vec<f64>,
    /// `(i, j, 1[i < j])` for every ordered pair, edge-position encoding only.
    pub edge: Option<Vec<(usize, usize, f64)>>,
}

pub fn scalar_positions(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / n as f64).collect()
}

pub fn random_scalar_positions(n: usize, rng: &mut Rng) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    xs.sort_by(f64::total_cmp);
    xs
}

pub fn sinusoidal_positions(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n * SINUSOIDAL_DIM);
    for i in 0..n {
        for k in 0..SINUSOIDAL_DIM / 2 {
            let freq = 10_000f64.powf(-((2 * k) as f64) / SINUSOIDAL_DIM as f64);
            table.push((i as f64 * freq).sin());
            table.push((i as f64 * freq).cos());
        }
    }
    table
}

/// Encodes node positions `0..n` with `strategy`.
///
/// `RandomScalar` always draws here; mixing with the deterministic index is
/// left to the caller.
pub fn encode_positions(n: usize, strategy: PositionEncoding, rng: &mut Rng) -> PositionFeatures {
    let (channel, dim) = strategy.node_channel();
    match strategy {
        PositionEncoding::Scalar => PositionFeatures {
            channel,
            dim,
            node: scalar_positions(n),
            edge: None,
        },
        PositionEncoding::RandomScalar => PositionFeatures {
            channel,
            dim,
            node: random_scalar_positions(n, rng),
            edge: None,
        },
        PositionEncoding::Sinusoidal => PositionFeatures {
            channel,
            dim,
            node: sinusoidal_positions(n),
            edge: None,
        },
        PositionEncoding::EdgePosition => {
            let node = (0..n * dim).map(|_| rng.uniform()).collect();
            let edge = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| (i, j, if i < j { 1.0 } else { 0.0 }))
                .collect();
            PositionFeatures {
                channel,
                dim,
                node,
                edge: Some(edge),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_of_four() {
        let f = encode_positions(4, PositionEncoding::Scalar, &mut Rng::new(0));
        assert_eq!(f.node, vec![0.0, 0.25, 0.5, 0.75]);
        assert!(f.edge.is_none());
    }

    #[test]
    fn random_scalar_sorted_in_unit_interval() {
        for seed in 0..20 {
            let f = encode_positions(33, PositionEncoding::RandomScalar, &mut Rng::new(seed));
            assert!(f.node.windows(2).all(|w| w[0] <= w[1]));
            assert!(f.node.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn edge_position_flags() {
        let f = encode_positions(3, PositionEncoding::EdgePosition, &mut Rng::new(0));
        let mut flags = f.edge.unwrap();
        flags.sort_by_key(|&(i, j, _)| (i, j));
        assert_eq!(
            flags,
            vec![
                (0, 1, 1.0),
                (0, 2, 1.0),
                (1, 0, 0.0),
                (1, 2, 1.0),
                (2, 0, 0.0),
                (2, 1, 0.0)
            ]
        );
        assert_eq!(f.node.len(), 3 * RANDOM_FEATURE_DIM);
    }

    #[test]
    fn sinusoidal_width_is_size_independent() {
        assert_eq!(sinusoidal_positions(5).len(), 5 * SINUSOIDAL_DIM);
        assert_eq!(&sinusoidal_positions(5)[..2], &[0.0, 1.0]);
        assert_eq!(&sinusoidal_positions(64)[..5 * SINUSOIDAL_DIM], &sinusoidal_positions(5)[..]);
    }
}
