//! Adam, global-norm clipping and the cosine learning-rate schedule.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates, one flat buffer per parameter tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &[Tensor]) -> Self {
        Self {
            t: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    fn check(&self, params: &[Tensor], grads: &[Tensor]) -> Result<()> {
        let ok = params.len() == self.m.len()
            && params.len() == grads.len()
            && params
                .iter()
                .zip(grads)
                .zip(&self.m)
                .all(|((p, g), m)| p.shape() == g.shape() && p.len() == m.len());
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(
                "optimizer state does not match the parameter set".into(),
            ))
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState, lr: f64) -> Result<()> {
    state.check(params, grads)?;
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for (((x, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *mi = BETA1 * *mi + (1.0 - BETA1) * gi;
            *vi = BETA2 * *vi + (1.0 - BETA2) * gi * gi;
            let mhat = *mi / c1;
            let vhat = *vi / c2;
            *x -= lr * mhat / (vhat.sqrt() + EPSILON);
        }
    }
    Ok(())
}

pub fn global_norm(grads: &[Tensor]) -> f64 {
    grads.iter().map(Tensor::squared_norm).sum::<f64>().sqrt()
}

/// Rescales `grads` so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|x| *x *= s);
        }
    }
    norm
}

pub fn cosine_lr(step: u64, total_steps: u64, base_lr: f64) -> f64 {
    if total_steps == 0 {
        return base_lr;
    }
    let frac = step.min(total_steps) as f64 / total_steps as f64;
    base_lr * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipping_halves_norm_two() {
        let mut g = vec![Tensor::row_vector(vec![2.0, 0.0]), Tensor::scalar(0.0)];
        let pre = clip_global_norm(&mut g, 1.0);
        assert_eq!(pre, 2.0);
        assert_eq!(g[0].data(), &[1.0, 0.0]);
    }

    #[test]
    fn clipping_leaves_small_gradients() {
        let mut g = vec![Tensor::row_vector(vec![0.3, 0.4])];
        clip_global_norm(&mut g, 1.0);
        assert_eq!(g[0].data(), &[0.3, 0.4]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [1e-3, 5.0, -7.0] {
            let mut p = vec![Tensor::scalar(1.0)];
            let mut st = AdamState::new(&p);
            adam_step(&mut p, &[Tensor::scalar(g)], &mut st, 0.01).unwrap();
            assert!(((1.0 - p[0].item()).abs() - 0.01).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = vec![Tensor::scalar(1.0)];
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &[Tensor::scalar(2.0)], &mut st, 0.01).unwrap();
        let after = p[0].item();
        let m = st.m[0][0];
        adam_step(&mut p, &[Tensor::scalar(0.0)], &mut st, 0.01).unwrap();
        assert!(st.m[0][0].abs() < m.abs());
        // The bias-corrected momentum still pushes, but the raw moments decay.
        assert!(p[0].item() <= after);
        let mut q = vec![Tensor::scalar(3.0)];
        let mut fresh = AdamState::new(&q);
        adam_step(&mut q, &[Tensor::scalar(0.0)], &mut fresh, 0.01).unwrap();
        assert_eq!(q[0].item(), 3.0);
    }

    #[test]
    fn minimizes_square() {
        let mut p = vec![Tensor::scalar(1.0)];
        let mut st = AdamState::new(&p);
        for _ in 0..100 {
            let g = Tensor::scalar(2.0 * p[0].item());
            adam_step(&mut p, &[g], &mut st, 0.1).unwrap();
        }
        assert!(p[0].item().abs() < 0.05, "{}", p[0].item());
    }

    #[test]
    fn cosine_endpoints() {
        assert_eq!(cosine_lr(0, 100, 0.1), 0.1);
        assert!(cosine_lr(100, 100, 0.1).abs() < 1e-18);
        assert!((cosine_lr(50, 100, 0.1) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn mismatched_state_errors() {
        let mut p = vec![Tensor::scalar(1.0)];
        let mut st = AdamState::new(&[Tensor::zeros(2, 2)]);
        assert!(adam_step(&mut p, &[Tensor::scalar(1.0)], &mut st, 0.1).is_err());
    }
}
