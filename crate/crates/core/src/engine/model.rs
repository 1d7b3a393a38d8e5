use std::path::Path;

use super::RunConfig;
use crate::conditioning::{ConditionBundle, Features, Sketch, SketchEncoder, TextEncoder};
use crate::denoiser::Denoiser;
use crate::numerics::{load_checkpoint, save_checkpoint};
use crate::scheduler::DdpmScheduler;
use crate::tokenizer::{NormStats, TokenLayout};
use crate::{Error, Result};

pub const CONFIG_FILE: &str = "config.json";
pub const STATS_FILE: &str = "stats.json";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

/// A trained (or freshly initialized) denoiser together with everything
/// needed to sample from it. Stored on disk as a directory holding
/// `config.json`, `stats.json` and `model.ckpt`.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: RunConfig,
    pub layout: TokenLayout,
    pub stats: NormStats,
    pub denoiser: Denoiser<f32>,
    pub scheduler: DdpmScheduler,
    text: TextEncoder,
    sketch: SketchEncoder,
}

impl Model {
    pub fn new(mut config: RunConfig, stats: NormStats, denoiser: Denoiser<f32>) -> Result<Self> {
        config.validate()?;
        let layout = config.layout()?;
        if stats.layout != layout {
            return Err(Error::Config(format!(
                "stats layout {:?} does not match run layout {}",
                stats.layout, config.layout
            )));
        }
        stats.validate()?;
        if denoiser.config != config.denoiser_config()? {
            return Err(Error::Config("denoiser weights do not match the run's denoiser config".into()));
        }
        config.denoiser = Some(denoiser.config);
        Ok(Self {
            layout,
            scheduler: DdpmScheduler::new(config.scheduler)?,
            text: config.text_encoder()?,
            sketch: config.sketch_encoder()?,
            config,
            stats,
            denoiser,
        })
    }

    /// Fresh weights drawn from `config.seed`.
    pub fn init(config: RunConfig, stats: NormStats) -> Result<Self> {
        let denoiser = Denoiser::new(config.denoiser_config()?, config.seed)?;
        Self::new(config, stats, denoiser)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.config.save(&dir.join(CONFIG_FILE))?;
        self.stats.save(&dir.join(STATS_FILE))?;
        self.save_weights(dir)
    }

    pub fn save_weights(&self, dir: &Path) -> Result<()> {
        save_checkpoint(&self.denoiser.params, &dir.join(CHECKPOINT_FILE))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let config = RunConfig::load(&dir.join(CONFIG_FILE))?;
        let stats = NormStats::load(&dir.join(STATS_FILE))?;
        let params = load_checkpoint(&dir.join(CHECKPOINT_FILE))?;
        let denoiser = Denoiser::from_params(config.denoiser_config()?, params)?;
        Self::new(config, stats, denoiser)
    }

    pub fn encode_text(&self, text: &str) -> Result<Features> {
        self.text.encode(text)
    }

    pub fn encode_sketch(&self, sketch: &Sketch) -> Result<Features> {
        self.sketch.encode(sketch)
    }

    /// Conditions for sampling. Absent inputs fall back to the learned null
    /// tokens; with neither given the model samples unconditionally.
    pub fn conditions(&self, text: Option<&str>, sketch: Option<&Sketch>) -> Result<ConditionBundle> {
        Ok(ConditionBundle {
            text: text.map(|t| self.encode_text(t)).transpose()?,
            image: sketch.map(|s| self.encode_sketch(s)).transpose()?,
        })
    }

    /// Predicted noise for a normalized grid at timestep `t`.
    pub fn predict_noise(&self, x: &[f64], t: usize, cond: &ConditionBundle) -> Result<Vec<f64>> {
        let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        let eps = self.denoiser.forward(&x32, t, cond)?;
        Ok(eps.into_iter().map(f64::from).collect())
    }
}
