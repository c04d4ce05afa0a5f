//! Checkpoint files: a flat little-endian `f64` buffer plus a JSON sidecar.
//!
//! `ckpt_100.bin` holds the parameters back to back in sidecar order,
//! `ckpt_100.json` names and shapes them. When optimizer state is saved, the
//! Adam moments go to `ckpt_100.opt.bin` in the same layout (all `m`, then all `v`).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::optim::AdamState;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub names: Vec<String>,
    pub shapes: Vec<[usize; 2]>,
    pub step: u64,
    pub config_hash: String,
    /// Adam step count when the optimizer file is present.
    #[serde(default)]
    pub optimizer_t: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub names: Vec<String>,
    pub params: Vec<Tensor>,
    pub step: u64,
    pub config_hash: String,
    pub optimizer: Option<AdamState>,
}

pub fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

pub fn optimizer_path(bin: &Path) -> PathBuf {
    bin.with_extension("opt.bin")
}

fn encode(bufs: impl Iterator<Item = f64>) -> Vec<u8> {
    bufs.flat_map(f64::to_le_bytes).collect()
}

fn decode(bytes: &[u8], path: &Path) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::Checkpoint(format!(
            "{}: length {} is not a multiple of 8",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

impl Checkpoint {
    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            names: self.names.clone(),
            shapes: self.params.iter().map(Tensor::shape).collect(),
            step: self.step,
            config_hash: self.config_hash.clone(),
            optimizer_t: self.optimizer.as_ref().map(|o| o.t),
        }
    }

    pub fn save(&self, bin: &Path) -> Result<()> {
        if self.names.len() != self.params.len() {
            return Err(Error::Checkpoint("names and params differ in length".into()));
        }
        if let Some(dir) = bin.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let bytes = encode(self.params.iter().flat_map(|p| p.data().iter().copied()));
        fs::write(bin, bytes).map_err(|e| Error::io(bin, e))?;
        if let Some(opt) = &self.optimizer {
            let p = optimizer_path(bin);
            let all = opt.m.iter().chain(&opt.v).flat_map(|b| b.iter().copied());
            fs::write(&p, encode(all)).map_err(|e| Error::io(&p, e))?;
        }
        let side = sidecar_path(bin);
        let json = serde_json::to_string_pretty(&self.sidecar())?;
        fs::write(&side, json).map_err(|e| Error::io(&side, e))?;
        Ok(())
    }

    pub fn read_sidecar(bin: &Path) -> Result<Sidecar> {
        let side = sidecar_path(bin);
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn load(bin: &Path) -> Result<Self> {
        let side = Self::read_sidecar(bin)?;
        if side.names.len() != side.shapes.len() {
            return Err(Error::Checkpoint("sidecar names and shapes differ in length".into()));
        }
        let bytes = fs::read(bin).map_err(|e| Error::io(bin, e))?;
        let flat = decode(&bytes, bin)?;
        let sizes: Vec<usize> = side.shapes.iter().map(|s| s[0] * s[1]).collect();
        let total: usize = sizes.iter().sum();
        if flat.len() != total {
            return Err(Error::Checkpoint(format!(
                "{}: holds {} values, sidecar expects {total}",
                bin.display(),
                flat.len()
            )));
        }
        let mut params = Vec::with_capacity(sizes.len());
        let mut off = 0;
        for (s, &len) in side.shapes.iter().zip(&sizes) {
            params.push(Tensor::new(s[0], s[1], flat[off..off + len].to_vec())?);
            off += len;
        }
        let optimizer = match side.optimizer_t {
            None => None,
            Some(t) => {
                let p = optimizer_path(bin);
                let flat = decode(&fs::read(&p).map_err(|e| Error::io(&p, e))?, &p)?;
                if flat.len() != 2 * total {
                    return Err(Error::Checkpoint(format!(
                        "{}: holds {} values, expected {}",
                        p.display(),
                        flat.len(),
                        2 * total
                    )));
                }
                let split = |base: usize| {
                    let mut out = Vec::with_capacity(sizes.len());
                    let mut off = base;
                    for &len in &sizes {
                        out.push(flat[off..off + len].to_vec());
                        off += len;
                    }
                    out
                };
                Some(AdamState {
                    t,
                    m: split(0),
                    v: split(total),
                })
            }
        };
        Ok(Self {
            names: side.names,
            params,
            step: side.step,
            config_hash: side.config_hash,
            optimizer,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let params = vec![
            Tensor::new(2, 3, vec![1.0, -2.5, 3.25, f64::MIN_POSITIVE, 0.1, 1e300]).unwrap(),
            Tensor::row_vector(vec![7.0]),
        ];
        let mut opt = AdamState::new(&params);
        opt.t = 4;
        opt.m[0][2] = 0.5;
        opt.v[1][0] = 0.25;
        Checkpoint {
            names: vec!["w".into(), "b".into()],
            params,
            step: 40,
            config_hash: "abc".into(),
            optimizer: Some(opt),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run/ckpt_40.bin");
        let ck = sample();
        ck.save(&path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 7 * 8);
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
    }

    #[test]
    fn without_optimizer() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt_1.bin");
        let mut ck = sample();
        ck.optimizer = None;
        ck.save(&path).unwrap();
        assert!(!optimizer_path(&path).exists());
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
    }

    #[test]
    fn truncated_buffer_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt_2.bin");
        sample().save(&path).unwrap();
        fs::write(&path, [0u8; 16]).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Checkpoint(_))));
    }
}
