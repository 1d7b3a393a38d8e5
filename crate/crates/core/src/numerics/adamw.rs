//! AdamW with bias-corrected moments and decoupled weight decay.
//!
//! ```text
//! θ ← θ − lr·wd·θ
//! m ← β₁m + (1 − β₁)g
//! v ← β₂v + (1 − β₂)g²
//! θ ← θ − lr · (m / (1 − β₁ᵗ)) / (√(v / (1 − β₂ᵗ)) + ε)
//! ```

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::tensor::Scalar;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub eps: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.95,
            beta2: 0.999,
            weight_decay: 1e-2,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdamW<T> {
    pub config: AdamWConfig,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamW<T> {
    /// Zero moments shaped like `params`.
    pub fn new(config: AdamWConfig, params: &ParamStore<T>) -> Self {
        let zeros = |_| -> Vec<Vec<T>> {
            params
                .iter()
                .map(|(_, t)| vec![T::zero(); t.len()])
                .collect()
        };
        Self {
            config,
            step: 0,
            m: zeros(()),
            v: zeros(()),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &[Vec<T>]) -> Result<()> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::shape(
                "adamw_step",
                format!("{} grads for {} params", grads.len(), params.len()),
            ));
        }
        for (i, g) in grads.iter().enumerate() {
            if g.len() != params.get(i).len() || self.m[i].len() != g.len() {
                return Err(Error::shape(
                    "adamw_step",
                    format!("gradient {i} has {} values, parameter {}", g.len(), params.get(i).len()),
                ));
            }
        }
        self.step += 1;
        let c = &self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let lr = T::from_f64_lossy(c.lr);
        let decay = T::from_f64_lossy(1.0 - c.lr * c.weight_decay);
        let b1 = T::from_f64_lossy(c.beta1);
        let b2 = T::from_f64_lossy(c.beta2);
        let one = T::one();
        let inv_bc1 = T::from_f64_lossy(1.0 / bc1);
        let inv_bc2 = T::from_f64_lossy(1.0 / bc2);
        let eps = T::from_f64_lossy(c.eps);

        for (i, g) in grads.iter().enumerate() {
            let theta = params.get_mut(i).data_mut();
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for j in 0..g.len() {
                m[j] = b1 * m[j] + (one - b1) * g[j];
                v[j] = b2 * v[j] + (one - b2) * g[j] * g[j];
                let m_hat = m[j] * inv_bc1;
                let v_hat = v[j] * inv_bc2;
                theta[j] = theta[j] * decay - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn store(values: &[f64]) -> ParamStore<f64> {
        let mut p = ParamStore::new();
        p.add("w", Tensor::from_f64(&[values.len()], values).unwrap())
            .unwrap();
        p
    }

    #[test]
    fn first_step_moves_each_coordinate_by_about_lr() {
        let cfg = AdamWConfig::default();
        let mut p = store(&[0.5, -2.0, 3.0]);
        let mut opt = AdamW::new(cfg, &p);
        let g = vec![vec![0.3, -7.0, 1e-3]];
        opt.step(&mut p, &g).unwrap();
        let before = [0.5, -2.0, 3.0];
        for (j, (&b, &a)) in before.iter().zip(p.get(0).data()).enumerate() {
            // step 1: m̂ = g, v̂ = g², so the update is lr·g/(|g| + eps)
            let expected =
                b * (1.0 - cfg.lr * cfg.weight_decay) - cfg.lr * g[0][j] / (g[0][j].abs() + cfg.eps);
            assert!((a - expected).abs() < 1e-15, "{a} vs {expected}");
            assert!(((b - a).abs() - cfg.lr).abs() < cfg.lr * cfg.weight_decay * 3.1 + 1e-9);
        }
    }

    #[test]
    fn zero_gradient_is_pure_decay() {
        let cfg = AdamWConfig::default();
        let mut p = store(&[2.0]);
        let mut opt = AdamW::new(cfg, &p);
        for _ in 0..10 {
            opt.step(&mut p, &[vec![0.0]]).unwrap();
        }
        let expected = 2.0 * (1.0 - cfg.lr * cfg.weight_decay).powi(10);
        assert!((p.get(0).data()[0] - expected).abs() < 1e-14);
    }

    #[test]
    fn rejects_mismatched_gradients() {
        let mut p = store(&[1.0, 2.0]);
        let mut opt = AdamW::new(AdamWConfig::default(), &p);
        assert!(opt.step(&mut p, &[vec![1.0]]).is_err());
        assert!(opt.step(&mut p, &[]).is_err());
    }

    #[test]
    fn convex_quadratic_descends() {
        // f(θ) = Σ aᵢ(θᵢ − bᵢ)²
        let a = [1.0, 3.0, 0.5, 2.0];
        let b = [3.0, -2.5, 2.0, 4.0];
        let f = |t: &[f64]| -> f64 { t.iter().zip(&a).zip(&b).map(|((t, a), b)| a * (t - b).powi(2)).sum() };
        let cfg = AdamWConfig {
            lr: 1e-2,
            ..AdamWConfig::default()
        };
        let mut p = store(&[0.0; 4]);
        let mut opt = AdamW::new(cfg, &p);
        let mut losses = Vec::new();
        for _ in 0..100 {
            let th = p.get(0).data().to_vec();
            losses.push(f(&th));
            let g: Vec<f64> = th.iter().zip(&a).zip(&b).map(|((t, a), b)| 2.0 * a * (t - b)).collect();
            opt.step(&mut p, &[g]).unwrap();
        }
        for w in losses[5..].windows(2) {
            assert!(w[1] < w[0], "loss rose: {} -> {}", w[0], w[1]);
        }
    }
}
