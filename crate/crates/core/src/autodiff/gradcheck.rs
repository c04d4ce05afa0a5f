//! Central finite-difference checks of tape gradients.

use super::{Tape, Tensor, Var};
use crate::error::Result;
use crate::rng::Rng;

/// Outcome of [`check`].
#[derive(Clone, Debug)]
pub struct GradCheck {
    /// Largest relative error over all checked coordinates.
    pub max_rel_error: f64,
    pub checked: usize,
}

/// Step size for central differences.
pub const FD_STEP: f64 = 1e-6;

fn rel_error(a: f64, b: f64) -> f64 {
    let diff = (a - b).abs();
    if diff < 1e-9 {
        return 0.0;
    }
    diff / a.abs().max(b.abs())
}

/// Compares the tape gradient of `build` with central differences.
///
/// `build` receives the inputs as trainable leaves and may return any shape;
/// the output is contracted with a fixed random tensor to get a scalar loss.
pub fn check<F>(inputs: &[Tensor], seed: u64, build: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut probe: Option<Tensor> = None;
    let mut eval = |xs: &[Tensor], want_grad: bool| -> Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.param(x.clone())).collect();
        let out = build(&mut tape, &vars)?;
        let shape = tape.value(out).shape();
        let w = probe.get_or_insert_with(|| {
            let mut rng = Rng::new(seed);
            let data = (0..shape[0] * shape[1]).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            Tensor::new(shape[0], shape[1], data).expect("shape")
        });
        let wv = tape.constant(w.clone());
        let prod = tape.mul(out, wv)?;
        let loss = tape.mean_reduce(prod, None);
        let value = tape.value(loss).item();
        if !want_grad {
            return Ok((value, Vec::new()));
        }
        let grads = tape.backward(loss)?;
        let gs = vars
            .iter()
            .zip(xs)
            .map(|(v, x)| grads.get(*v).cloned().unwrap_or_else(|| Tensor::zeros(x.rows(), x.cols())))
            .collect();
        Ok((value, gs))
    };
    let (_, analytic) = eval(inputs, true)?;
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut xs = inputs.to_vec();
    for i in 0..xs.len() {
        for j in 0..xs[i].len() {
            let orig = xs[i].data()[j];
            xs[i].data_mut()[j] = orig + FD_STEP;
            let (up, _) = eval(&xs, false)?;
            xs[i].data_mut()[j] = orig - FD_STEP;
            let (down, _) = eval(&xs, false)?;
            xs[i].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(rel_error(analytic[i].data()[j], numeric));
            checked += 1;
        }
    }
    Ok(GradCheck {
        max_rel_error: worst,
        checked,
    })
}

/// Random `rows x cols` tensor with entries in `[-1, 1)`.
pub fn random_tensor(rows: usize, cols: usize, rng: &mut Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    Tensor::new(rows, cols, data).expect("shape")
}
