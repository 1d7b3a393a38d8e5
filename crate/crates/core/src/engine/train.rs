use std::collections::VecDeque;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{EncodedConditions, Modality, Model, RunConfig};
use crate::numerics::{AdamW, ParamStore};
use crate::synthgen::CorpusEntry;
use crate::tokenizer::{encode, NormStats, TokenGrid};
use crate::{Error, Result};

/// Loss of one optimizer step, measured before the update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    pub step: usize,
    pub loss: f64,
    pub modality: Modality,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// Ran every configured epoch.
    Epochs,
    MaxSteps,
    TargetLoss,
    EarlyStop,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Weights with the best moving-average loss.
    pub model: Model,
    pub trace: Vec<LossRecord>,
    pub best_step: usize,
    pub best_loss: f64,
    pub stop: StopReason,
}

pub fn write_loss_csv(path: &Path, trace: &[LossRecord]) -> Result<()> {
    let mut out = String::from("step,loss,modality\n");
    for r in trace {
        out.push_str(&format!("{},{:.9e},{}\n", r.step, r.loss, r.modality.name()));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_loss_csv(path: &Path) -> Result<Vec<LossRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize| Error::Parse(format!("{}: malformed line {line}", path.display()));
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let mut f = l.split(',');
            let (Some(s), Some(v), Some(m), None) = (f.next(), f.next(), f.next(), f.next()) else {
                return Err(bad(i + 1));
            };
            Ok(LossRecord {
                step: s.parse().map_err(|_| bad(i + 1))?,
                loss: v.parse().map_err(|_| bad(i + 1))?,
                modality: Modality::parse(m)?,
            })
        })
        .collect()
}

struct Job {
    x_t: Vec<f32>,
    eps: Vec<f32>,
    t: usize,
    example: usize,
}

fn noised_sample(
    model: &Model,
    grid: &TokenGrid,
    t: usize,
    eps: &[f64],
) -> Result<Vec<f32>> {
    Ok(model
        .scheduler
        .add_noise(&grid.values, eps, t)?
        .into_iter()
        .map(|v| v as f32)
        .collect())
}

/// Trains a fresh model initialized from `config.seed`.
pub fn train(
    dataset: &[CorpusEntry],
    stats: NormStats,
    config: RunConfig,
    out_dir: Option<&Path>,
    progress: Option<&mut dyn FnMut(&LossRecord)>,
) -> Result<TrainOutcome> {
    let model = Model::init(config, stats)?;
    train_model(model, dataset, out_dir, progress)
}

/// Continues training `model` on `dataset` with its run configuration.
///
/// Each step draws, for every example in the batch and in batch order, a
/// panel-shuffle seed, a timestep and a noise grid from one seeded stream.
/// Per-example gradients may be computed in parallel but are summed in
/// batch order, so runs are bit-reproducible.
pub fn train_model(
    mut model: Model,
    dataset: &[CorpusEntry],
    out_dir: Option<&Path>,
    mut progress: Option<&mut dyn FnMut(&LossRecord)>,
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("training dataset is empty".into()));
    }
    let cfg = model.config.clone();
    let conds: Vec<EncodedConditions> = dataset
        .iter()
        .map(|e| {
            Ok(EncodedConditions {
                text: model.encode_text(cfg.caption.pick(e))?,
                image: model.encode_sketch(&e.sketch)?,
            })
        })
        .collect::<Result<_>>()?;
    for e in dataset {
        encode(&e.pattern, &model.layout, &model.stats, None)?;
    }
    if let Some(dir) = out_dir {
        model.save(dir)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let n = dataset.len();
    let bs = cfg.batch_size;
    // a batch larger than the dataset covers it whole, so an epoch is one step
    let steps_per_epoch = n.div_ceil(bs.min(n));
    let mut total = cfg.epochs.saturating_mul(steps_per_epoch);
    let mut stop = StopReason::Epochs;
    if let Some(m) = cfg.max_steps {
        if m < total {
            total = m;
            stop = StopReason::MaxSteps;
        }
    }
    let t_max = model.scheduler.num_train_timesteps();
    let grid_len = model.layout.seq_len() * model.layout.token_width();

    let mut opt = AdamW::new(cfg.optimizer, &model.denoiser.params);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(total);
    let mut window: VecDeque<f64> = VecDeque::with_capacity(cfg.loss_window);
    let mut window_sum = 0.0;
    let mut best_loss = f64::INFINITY;
    let mut best_step = 0;
    let mut best_params: Option<ParamStore<f32>> = None;
    let mut last_write: Option<usize> = None;
    let mut unsaved_best = false;

    for step in 0..total {
        if step % steps_per_epoch == 0 {
            order.shuffle(&mut rng);
        }
        let batch: Vec<usize> = if bs <= n {
            let start = (step % steps_per_epoch) * bs;
            order[start..(start + bs).min(n)].to_vec()
        } else {
            let mut b = order.clone();
            while b.len() < bs {
                order.shuffle(&mut rng);
                b.extend(order.iter().take(bs - b.len()));
            }
            b
        };
        let modality = cfg.modality_schedule[step % cfg.modality_schedule.len()];

        let mut jobs = Vec::with_capacity(batch.len());
        for &i in &batch {
            let shuffle_seed: u64 = rng.random();
            let t = rng.random_range(0..t_max);
            let eps: Vec<f64> = (0..grid_len).map(|_| rng.sample(StandardNormal)).collect();
            let grid = encode(
                &dataset[i].pattern,
                &model.layout,
                &model.stats,
                cfg.shuffle_panels.then_some(shuffle_seed),
            )?;
            jobs.push(Job {
                x_t: noised_sample(&model, &grid, t, &eps)?,
                eps: eps.iter().map(|&v| v as f32).collect(),
                t,
                example: i,
            });
        }

        let den = &model.denoiser;
        let results: Vec<(f32, Vec<Vec<f32>>)> = jobs
            .par_iter()
            .map(|j| den.loss_and_grads(&j.x_t, j.t, &conds[j.example].bundle(modality), &j.eps))
            .collect::<Result<_>>()?;

        let inv = 1.0 / results.len() as f32;
        let mut loss = 0.0f64;
        let mut grads: Vec<Vec<f32>> = results[0].1.iter().map(|g| vec![0.0; g.len()]).collect();
        for (l, g) in &results {
            loss += f64::from(*l);
            for (acc, gi) in grads.iter_mut().zip(g) {
                for (a, &v) in acc.iter_mut().zip(gi) {
                    *a += v * inv;
                }
            }
        }
        loss /= results.len() as f64;
        if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "training diverged at step {step} (loss {loss}); try a smaller learning rate"
            )));
        }
        opt.config.lr = cfg.optimizer.lr * cfg.lr_schedule.factor(step, total);
        opt.step(&mut model.denoiser.params, &grads)?;

        let rec = LossRecord { step, loss, modality };
        trace.push(rec);
        if let Some(cb) = progress.as_deref_mut() {
            cb(&rec);
        }

        window.push_back(loss);
        window_sum += loss;
        if window.len() > cfg.loss_window {
            window_sum -= window.pop_front().expect("non-empty");
        }
        let avg = window_sum / window.len() as f64;
        // the pre-update loss measures the weights before this step
        if avg < best_loss {
            best_loss = avg;
            best_step = step;
            best_params = Some(model.denoiser.params.clone());
            unsaved_best = true;
        }
        if let Some(dir) = out_dir {
            let due = last_write.is_none_or(|w| step >= w + cfg.checkpoint_every);
            if unsaved_best && due {
                save_best(&model, best_params.as_ref(), dir, &trace)?;
                last_write = Some(step);
                unsaved_best = false;
            }
        }
        let full = window.len() == cfg.loss_window;
        if full && cfg.target_loss.is_some_and(|target| avg < target) {
            stop = StopReason::TargetLoss;
            break;
        }
        if cfg.early_stop_patience.is_some_and(|p| step >= best_step + p) {
            stop = StopReason::EarlyStop;
            break;
        }
    }

    if let Some(p) = best_params {
        model.denoiser.params = p;
    }
    if let Some(dir) = out_dir {
        model.save_weights(dir)?;
        write_loss_csv(&dir.join("loss.csv"), &trace)?;
    }
    Ok(TrainOutcome {
        model,
        trace,
        best_step,
        best_loss,
        stop,
    })
}

fn save_best(model: &Model, best: Option<&ParamStore<f32>>, dir: &Path, trace: &[LossRecord]) -> Result<()> {
    if let Some(p) = best {
        crate::numerics::save_checkpoint(p, &dir.join(super::CHECKPOINT_FILE))?;
    } else {
        model.save_weights(dir)?;
    }
    write_loss_csv(&dir.join("loss.csv"), trace)
}
