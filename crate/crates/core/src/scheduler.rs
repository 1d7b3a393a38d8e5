//! DDPM noise schedule with linear betas.
//!
//! Forward corruption is `x_t = √ᾱ_t·x₀ + √(1−ᾱ_t)·ε`. Sampling walks a
//! strided subsequence of timesteps and recomputes the DDPM posterior for
//! each consecutive pair `(t, t_prev)` of that subsequence.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Bound applied to the predicted clean sample at every reverse step.
pub const X0_CLIP: f64 = 1.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    #[serde(rename = "T")]
    pub num_train_timesteps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub inference_steps: usize,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            num_train_timesteps: 1000,
            beta_start: 1e-4,
            beta_end: 2e-2,
            inference_steps: 50,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DdpmScheduler {
    pub config: SchedulerConfig,
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
}

impl DdpmScheduler {
    pub fn new(config: SchedulerConfig) -> Result<Self> {
        let t = config.num_train_timesteps;
        if t < 2 {
            return Err(Error::Config("scheduler needs at least 2 training timesteps".into()));
        }
        if !(0.0 < config.beta_start && config.beta_start < config.beta_end && config.beta_end < 1.0) {
            return Err(Error::Config(format!(
                "betas must satisfy 0 < start < end < 1, got {} and {}",
                config.beta_start, config.beta_end
            )));
        }
        let betas: Vec<f64> = (0..t)
            .map(|i| config.beta_start + (config.beta_end - config.beta_start) * i as f64 / (t - 1) as f64)
            .collect();
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let alpha_bars = alphas
            .iter()
            .scan(1.0, |acc, &a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            config,
            betas,
            alphas,
            alpha_bars,
        })
    }

    pub fn num_train_timesteps(&self) -> usize {
        self.config.num_train_timesteps
    }

    /// Evenly strided descending timesteps ending `T/n − 1` steps above zero:
    /// `t_i = ⌊T·(n − i)/n⌋ − 1` for `i = 0..n`. For `T = 1000, n = 50` this is
    /// `999, 979, …, 19`.
    pub fn inference_timesteps(&self, n: usize) -> Result<Vec<usize>> {
        let t = self.num_train_timesteps();
        if n == 0 || n > t {
            return Err(Error::InvalidArgument(format!("inference steps must be in 1..={t}, got {n}")));
        }
        Ok((0..n).map(|i| t * (n - i) / n - 1).collect())
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t >= self.num_train_timesteps() {
            return Err(Error::InvalidArgument(format!(
                "timestep {t} outside [0, {})",
                self.num_train_timesteps()
            )));
        }
        Ok(())
    }

    /// `√ᾱ_t·x₀ + √(1−ᾱ_t)·ε`.
    pub fn add_noise(&self, x0: &[f64], eps: &[f64], t: usize) -> Result<Vec<f64>> {
        self.check_t(t)?;
        if x0.len() != eps.len() {
            return Err(Error::shape("add_noise", format!("{} vs {}", x0.len(), eps.len())));
        }
        let ab = self.alpha_bars[t];
        let (s, n) = (ab.sqrt(), (1.0 - ab).sqrt());
        Ok(x0.iter().zip(eps).map(|(&x, &e)| s * x + n * e).collect())
    }

    /// Clean-sample estimate `(x_t − √(1−ᾱ_t)·ε̂)/√ᾱ_t`, clipped.
    pub fn predict_x0(&self, model_eps: &[f64], t: usize, x_t: &[f64]) -> Result<Vec<f64>> {
        self.check_t(t)?;
        let ab = self.alpha_bars[t];
        let (s, n) = (ab.sqrt(), (1.0 - ab).sqrt());
        Ok(x_t
            .iter()
            .zip(model_eps)
            .map(|(&x, &e)| ((x - n * e) / s).clamp(-X0_CLIP, X0_CLIP))
            .collect())
    }

    /// One reverse step from `t` to `t_prev` (`None` after the last step,
    /// which returns the clipped clean estimate). With `rng = None` the
    /// posterior mean is returned without sampling.
    pub fn step<R: Rng + ?Sized>(
        &self,
        model_eps: &[f64],
        t: usize,
        t_prev: Option<usize>,
        x_t: &[f64],
        rng: Option<&mut R>,
    ) -> Result<Vec<f64>> {
        if model_eps.len() != x_t.len() {
            return Err(Error::shape("step", format!("{} vs {}", model_eps.len(), x_t.len())));
        }
        if model_eps.iter().chain(x_t).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("scheduler step at t={t}")));
        }
        let x0 = self.predict_x0(model_eps, t, x_t)?;
        let Some(tp) = t_prev else {
            return Ok(x0);
        };
        self.check_t(tp)?;
        if tp >= t {
            return Err(Error::InvalidArgument(format!("t_prev {tp} must precede t {t}")));
        }
        let ab_t = self.alpha_bars[t];
        let ab_p = self.alpha_bars[tp];
        let beta = 1.0 - ab_t / ab_p;
        let c0 = ab_p.sqrt() * beta / (1.0 - ab_t);
        let ct = (1.0 - beta).sqrt() * (1.0 - ab_p) / (1.0 - ab_t);
        let var = beta * (1.0 - ab_p) / (1.0 - ab_t);
        let mut out: Vec<f64> = x0.iter().zip(x_t).map(|(&a, &b)| c0 * a + ct * b).collect();
        if let Some(rng) = rng {
            let sigma = var.max(0.0).sqrt();
            for v in &mut out {
                let z: f64 = rng.sample(StandardNormal);
                *v += sigma * z;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn standard() -> DdpmScheduler {
        DdpmScheduler::new(SchedulerConfig::default()).unwrap()
    }

    #[test]
    fn zero_noise_scales_signal() {
        let s = standard();
        let x0 = [0.3, -0.7, 1.0];
        let out = s.add_noise(&x0, &[0.0; 3], 400).unwrap();
        for (o, x) in out.iter().zip(x0) {
            assert_eq!(*o, s.alpha_bars[400].sqrt() * x);
        }
    }

    #[test]
    fn first_alpha_bar() {
        let s = standard();
        assert!((s.alpha_bars[0] - 0.9999).abs() < 1e-15);
        let out = s.add_noise(&[1.0], &[1.0], 0).unwrap();
        assert!((out[0] - (0.9999f64.sqrt() + 0.0001f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn cumulative_product_oracle() {
        let s = standard();
        for t in [0, 1, 17, 500, 999] {
            let mut prod = 1.0;
            for i in 0..=t {
                prod *= 1.0 - (1e-4 + (2e-2 - 1e-4) * i as f64 / 999.0);
            }
            assert!((s.alpha_bars[t] - prod).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn out_of_range_t_is_rejected() {
        let s = standard();
        assert!(s.add_noise(&[0.0], &[0.0], 1000).is_err());
        assert!(s.add_noise(&[0.0], &[0.0, 1.0], 3).is_err());
    }

    #[test]
    fn fifty_step_spacing() {
        let ts = standard().inference_timesteps(50).unwrap();
        assert_eq!(ts.len(), 50);
        assert_eq!(ts[0], 999);
        assert_eq!(ts[1], 979);
        assert_eq!(*ts.last().unwrap(), 19);
        assert!(ts.windows(2).all(|w| w[0] - w[1] == 20));
        assert_eq!(standard().inference_timesteps(1).unwrap(), vec![999]);
        assert_eq!(standard().inference_timesteps(1000).unwrap().last(), Some(&0));
        assert!(standard().inference_timesteps(0).is_err());
        assert!(standard().inference_timesteps(1001).is_err());
    }

    #[test]
    fn final_step_inverts_with_zero_eps() {
        let s = standard();
        let x = [0.5, -0.2, 3.0];
        let out = s.step::<ChaCha8Rng>(&[0.0; 3], 19, None, &x, None).unwrap();
        let r = s.alpha_bars[19].sqrt();
        assert_eq!(out[0], (0.5 / r).clamp(-X0_CLIP, X0_CLIP));
        assert_eq!(out[2], X0_CLIP);
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let s = standard();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            s.step(&[f64::NAN], 10, Some(5), &[0.0], Some(&mut rng)),
            Err(Error::NonFinite(_))
        ));
    }
}
