use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::Model;
use crate::conditioning::ConditionBundle;
use crate::pattern::Pattern;
use crate::tokenizer::{decode, encode, DecodeOptions, Decoded, TokenGrid};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct SampleOutput {
    /// Final normalized values. Masks mark rows above the padding threshold.
    pub grid: TokenGrid,
    pub decoded: Decoded,
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn finish(model: &Model, values: Vec<f64>) -> Result<SampleOutput> {
    let opts = DecodeOptions::default();
    let layout = model.layout;
    let decoded = decode(&values, &layout, &model.stats, &opts)?;
    let mut grid = TokenGrid::zeros(layout);
    let d = layout.token_width();
    for r in 0..layout.seq_len() {
        let row = &values[r * d..(r + 1) * d];
        grid.edge_mask[r] = row.iter().fold(0.0f64, |m, v| m.max(v.abs())) > opts.pad_threshold;
    }
    for (b, m) in grid.panel_mask.iter_mut().enumerate() {
        *m = grid.edge_mask[b * layout.max_edges..(b + 1) * layout.max_edges].iter().any(|&e| e);
    }
    grid.values = values;
    Ok(SampleOutput { grid, decoded })
}

/// Runs the reverse process, calling `inject` on the current values before
/// every denoiser evaluation.
fn denoise(
    model: &Model,
    cond: &ConditionBundle,
    n_steps: usize,
    seed: u64,
    mut inject: impl FnMut(&mut [f64], usize) -> Result<()>,
) -> Result<Vec<f64>> {
    let ts = model.scheduler.inference_timesteps(n_steps)?;
    let len = model.layout.seq_len() * model.layout.token_width();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = gaussian(&mut rng, len);
    for (i, &t) in ts.iter().enumerate() {
        inject(&mut x, t)?;
        let eps = model.predict_noise(&x, t, cond)?;
        let t_prev = ts.get(i + 1).copied();
        x = model.scheduler.step(&eps, t, t_prev, &x, Some(&mut rng))?;
    }
    Ok(x)
}

/// Generates one pattern from Gaussian noise in `n_steps` reverse steps.
pub fn sample(model: &Model, cond: &ConditionBundle, n_steps: usize, seed: u64) -> Result<SampleOutput> {
    let x = denoise(model, cond, n_steps, seed, |_, _| Ok(()))?;
    finish(model, x)
}

/// One sample per seed, evaluated in parallel.
pub fn sample_many(model: &Model, cond: &ConditionBundle, n_steps: usize, seeds: &[u64]) -> Result<Vec<SampleOutput>> {
    seeds.par_iter().map(|&s| sample(model, cond, n_steps, s)).collect()
}

/// Generates the panels missing from `fragment`, whose panels fill the first
/// blocks of the grid in order.
///
/// Before every denoiser call the known blocks are replaced by the clean
/// known tokens noised to the current timestep with fresh noise, and after
/// the last step by the clean tokens themselves, so they survive verbatim.
/// The re-injection noise comes from a separate stream of `seed`; with an
/// empty fragment the result equals [`sample`] with the same seed.
pub fn complete(
    model: &Model,
    fragment: &Pattern,
    cond: &ConditionBundle,
    n_steps: usize,
    seed: u64,
) -> Result<SampleOutput> {
    let layout = model.layout;
    if fragment.panels.len() > layout.max_panels {
        return Err(Error::Capacity(format!(
            "fragment has {} panels, layout holds {}",
            fragment.panels.len(),
            layout.max_panels
        )));
    }
    let known = encode(fragment, &layout, &model.stats, None)?;
    let known_len = fragment.panels.len() * layout.max_edges * layout.token_width();
    let x0_known = &known.values[..known_len];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut x = denoise(model, cond, n_steps, seed, |x, t| {
        if known_len > 0 {
            let eps = gaussian(&mut rng, known_len);
            let noised = model.scheduler.add_noise(x0_known, &eps, t)?;
            x[..known_len].copy_from_slice(&noised);
        }
        Ok(())
    })?;
    x[..known_len].copy_from_slice(x0_known);
    finish(model, x)
}
