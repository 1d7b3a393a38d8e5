//! Training, sampling and completion on top of the denoiser and scheduler.

mod model;
mod sample;
mod train;

pub use model::{Model, CHECKPOINT_FILE, CONFIG_FILE, STATS_FILE};
pub use sample::{complete, sample, sample_many, SampleOutput};
pub use train::{read_loss_csv, train, train_model, write_loss_csv, LossRecord, StopReason, TrainOutcome};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conditioning::{ConditionBundle, SketchEncoder, TextEncoder};
use crate::denoiser::DenoiserConfig;
use crate::numerics::AdamWConfig;
use crate::scheduler::SchedulerConfig;
use crate::synthgen::CorpusEntry;
use crate::tokenizer::TokenLayout;
use crate::{Error, Result};

/// Which conditions a training batch sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Image,
    Text,
    Both,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::Image => "image",
            Modality::Text => "text",
            Modality::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "image" => Ok(Modality::Image),
            "text" => Ok(Modality::Text),
            "both" => Ok(Modality::Both),
            other => Err(Error::Parse(format!("unknown modality {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaptionLevel {
    Brief,
    #[default]
    Detailed,
}

impl CaptionLevel {
    pub fn pick(self, entry: &CorpusEntry) -> &str {
        match self {
            CaptionLevel::Brief => &entry.brief,
            CaptionLevel::Detailed => &entry.detailed,
        }
    }
}

/// Learning-rate multiplier over the course of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Linear warmup, then cosine decay to `final_ratio` of the base rate
    /// at the last step.
    Cosine { warmup_steps: usize, final_ratio: f64 },
}

impl LrSchedule {
    pub fn factor(&self, step: usize, total_steps: usize) -> f64 {
        match *self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine { warmup_steps, final_ratio } => {
                if step < warmup_steps {
                    return (step + 1) as f64 / warmup_steps as f64;
                }
                let span = total_steps.saturating_sub(warmup_steps).max(1);
                let p = ((step - warmup_steps) as f64 / span as f64).min(1.0);
                final_ratio + (1.0 - final_ratio) * 0.5 * (1.0 + (std::f64::consts::PI * p).cos())
            }
        }
    }
}

fn default_layout() -> String {
    "dresscode".into()
}
fn default_batch() -> usize {
    8
}
fn default_epochs() -> usize {
    1000
}
fn default_schedule() -> Vec<Modality> {
    vec![Modality::Image, Modality::Text, Modality::Both]
}
fn default_true() -> bool {
    true
}
fn default_window() -> usize {
    50
}
fn default_checkpoint_every() -> usize {
    100
}

/// Everything that defines a training run. Missing JSON fields take the
/// defaults below; `denoiser` defaults to the desk preset for the layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_layout")]
    pub layout: String,
    #[serde(default)]
    pub denoiser: Option<DenoiserConfig>,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub optimizer: AdamWConfig,
    #[serde(default)]
    pub lr_schedule: LrSchedule,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Hard cap on optimizer steps, applied after `epochs`.
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Seed of the fixed text and sketch feature tables.
    #[serde(default)]
    pub cond_seed: u64,
    #[serde(default = "default_schedule")]
    pub modality_schedule: Vec<Modality>,
    #[serde(default)]
    pub caption: CaptionLevel,
    #[serde(default = "default_true")]
    pub shuffle_panels: bool,
    /// Stop after this many steps without a new best moving-average loss.
    #[serde(default)]
    pub early_stop_patience: Option<usize>,
    /// Stop once the moving-average loss falls below this.
    #[serde(default)]
    pub target_loss: Option<f64>,
    /// Window of the moving-average loss.
    #[serde(default = "default_window")]
    pub loss_window: usize,
    /// Minimum steps between checkpoint writes.
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl RunConfig {
    pub fn layout(&self) -> Result<TokenLayout> {
        TokenLayout::preset(&self.layout)
    }

    pub fn denoiser_config(&self) -> Result<DenoiserConfig> {
        let layout = self.layout()?;
        let cfg = self.denoiser.unwrap_or_else(|| DenoiserConfig::desk(&layout));
        cfg.validate()?;
        cfg.check_layout(&layout)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.denoiser_config()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.modality_schedule.is_empty() {
            return Err(Error::Config("modality_schedule is empty".into()));
        }
        if self.loss_window == 0 {
            return Err(Error::Config("loss_window must be positive".into()));
        }
        if let LrSchedule::Cosine { final_ratio, .. } = self.lr_schedule {
            if !(0.0..=1.0).contains(&final_ratio) {
                return Err(Error::Config("lr_schedule.final_ratio must be in [0, 1]".into()));
            }
        }
        let s = self.scheduler;
        if s.inference_steps == 0 || s.inference_steps > s.num_train_timesteps {
            return Err(Error::Config(format!(
                "inference_steps must be in 1..={}",
                s.num_train_timesteps
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn text_encoder(&self) -> Result<TextEncoder> {
        Ok(TextEncoder::new(self.denoiser_config()?.cond_dim, self.cond_seed))
    }

    pub fn sketch_encoder(&self) -> Result<SketchEncoder> {
        Ok(SketchEncoder::new(self.denoiser_config()?.cond_dim, self.cond_seed))
    }
}

/// Pre-encoded text and image conditions of one training example.
#[derive(Clone, Debug)]
pub struct EncodedConditions {
    pub text: crate::conditioning::Features,
    pub image: crate::conditioning::Features,
}

impl EncodedConditions {
    pub fn bundle(&self, m: Modality) -> ConditionBundle {
        match m {
            Modality::Image => ConditionBundle::image(self.image.clone()),
            Modality::Text => ConditionBundle::text(self.text.clone()),
            Modality::Both => ConditionBundle::both(self.text.clone(), self.image.clone()),
        }
    }
}
