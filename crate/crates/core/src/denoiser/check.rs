use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Denoiser, DenoiserConfig};
use crate::conditioning::{ConditionBundle, SketchEncoder, Sketch, TextEncoder, SKETCH_SIZE};
use crate::numerics::gradcheck::{check_coordinates, sample_coordinates, GradCheckReport};
use crate::Result;

/// Finite-difference step used by [`gradcheck`].
pub const GRADCHECK_STEP: f64 = 1e-5;

/// Checks analytic loss gradients of a 64-bit model against central
/// differences at `coordinates` parameter scalars.
///
/// The model gets a random head so every upstream parameter receives
/// gradient, and both text and image conditions are present. One coordinate
/// is drawn from every tensor before the rest are drawn uniformly.
pub fn gradcheck(config: DenoiserConfig, seed: u64, coordinates: usize) -> Result<GradCheckReport> {
    let mut model = Denoiser::<f64>::new(config, seed)?;
    model.randomize_head(seed.wrapping_add(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);

    let len = config.seq_len() * config.token_width;
    let x_t: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    let eps: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    let t = rng.random_range(0..1000);
    let mut sketch = Sketch::blank(SKETCH_SIZE);
    for _ in 0..200 {
        sketch.set(rng.random_range(0..SKETCH_SIZE), rng.random_range(0..SKETCH_SIZE), 1.0);
    }
    let cond = ConditionBundle::both(
        TextEncoder::new(config.cond_dim, seed).encode("a knee length skirt with a wide waistband")?,
        SketchEncoder::new(config.cond_dim, seed).encode(&sketch)?,
    );

    let (_, analytic) = model.loss_and_grads(&x_t, t, &cond, &eps)?;
    let mut coords: Vec<(usize, usize)> = (0..model.params.len())
        .map(|id| (id, rng.random_range(0..model.params.get(id).len())))
        .collect();
    let rest = coordinates.saturating_sub(coords.len());
    coords.extend(sample_coordinates(&model.params, rest, &mut rng));
    coords.truncate(coordinates.max(1));

    check_coordinates(&model.params, &analytic, &coords, GRADCHECK_STEP, |p| {
        let probe = Denoiser { config, params: p.clone() };
        probe.loss(&x_t, t, &cond, &eps)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_model_passes() {
        let cfg = DenoiserConfig {
            embed_dim: 8,
            ffn_dim: 12,
            n_blocks: 2,
            n_heads: 2,
            token_width: 5,
            max_panels: 2,
            max_edges: 3,
            cond_dim: 6,
        };
        let report = gradcheck(cfg, 4, 120).unwrap();
        assert_eq!(report.checks.len(), 120);
        assert!(report.max_rel_error() < 1e-4, "{:?}", report.worst());
    }
}
