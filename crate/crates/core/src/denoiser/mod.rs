//! Diffusion transformer that predicts the noise added to a token grid.
//!
//! Rows are embedded with a two-layer projection plus panel, edge and time
//! embeddings, then pass through pre-norm blocks of self-attention,
//! decoupled text/image cross-attention and a feed-forward layer. A final
//! norm and linear head map back to token width.

mod check;
mod forward;

pub use check::{gradcheck, GRADCHECK_STEP};
pub use forward::{time_embedding, Graph};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::numerics::{ParamStore, Scalar, Tensor};
use crate::tokenizer::TokenLayout;
use crate::{Error, Result};

pub const INIT_STD: f64 = 0.02;
pub const LN_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub embed_dim: usize,
    pub ffn_dim: usize,
    pub n_blocks: usize,
    pub n_heads: usize,
    pub token_width: usize,
    pub max_panels: usize,
    pub max_edges: usize,
    pub cond_dim: usize,
}

impl DenoiserConfig {
    /// C=64, ffn 96, 2 blocks, 4 heads, cond 64.
    pub fn desk(layout: &TokenLayout) -> Self {
        Self {
            embed_dim: 64,
            ffn_dim: 96,
            n_blocks: 2,
            n_heads: 4,
            token_width: layout.token_width(),
            max_panels: layout.max_panels,
            max_edges: layout.max_edges,
            cond_dim: 64,
        }
    }

    /// C=768, ffn 1024, 12 blocks, 8 heads, cond 768.
    pub fn full(layout: &TokenLayout) -> Self {
        Self {
            embed_dim: 768,
            ffn_dim: 1024,
            n_blocks: 12,
            n_heads: 8,
            token_width: layout.token_width(),
            max_panels: layout.max_panels,
            max_edges: layout.max_edges,
            cond_dim: 768,
        }
    }

    pub fn preset(name: &str, layout: &TokenLayout) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk(layout)),
            "full" => Ok(Self::full(layout)),
            other => Err(Error::Config(format!("unknown denoiser preset {other:?} (desk, full)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.embed_dim,
            self.ffn_dim,
            self.n_heads,
            self.token_width,
            self.max_panels,
            self.max_edges,
            self.cond_dim,
        ];
        if dims.contains(&0) {
            return Err(Error::Config("denoiser dimensions must be positive".into()));
        }
        if self.embed_dim % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "embed_dim {} is not divisible by n_heads {}",
                self.embed_dim, self.n_heads
            )));
        }
        if self.embed_dim % 2 != 0 {
            return Err(Error::Config("embed_dim must be even for the sinusoidal time encoding".into()));
        }
        Ok(())
    }

    pub fn seq_len(&self) -> usize {
        self.max_panels * self.max_edges
    }

    pub fn check_layout(&self, layout: &TokenLayout) -> Result<()> {
        if layout.token_width() != self.token_width
            || layout.max_panels != self.max_panels
            || layout.max_edges != self.max_edges
        {
            return Err(Error::Config(format!(
                "denoiser expects {}×{} rows of width {}, layout has {}×{} of width {}",
                self.max_panels,
                self.max_edges,
                self.token_width,
                layout.max_panels,
                layout.max_edges,
                layout.token_width()
            )));
        }
        Ok(())
    }
}

/// Parameters of one model, stored as `in × out` weight matrices and
/// `1 × out` biases under stable names.
#[derive(Clone, Debug)]
pub struct Denoiser<T> {
    pub config: DenoiserConfig,
    pub params: ParamStore<T>,
}

fn trunc_normal(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    (0..n)
        .map(|_| loop {
            let v: f64 = normal.sample(rng);
            if v.abs() <= 2.0 * INIT_STD {
                break v;
            }
        })
        .collect()
}

/// Every parameter name in registration order together with its shape.
pub fn param_shapes(c: &DenoiserConfig) -> Vec<(String, [usize; 2])> {
    let (e, d, f, k) = (c.embed_dim, c.token_width, c.ffn_dim, c.cond_dim);
    let mut out: Vec<(String, [usize; 2])> = vec![
        ("phi.0.weight".into(), [d, e]),
        ("phi.0.bias".into(), [1, e]),
        ("phi.2.weight".into(), [e, e]),
        ("phi.2.bias".into(), [1, e]),
        ("time.0.weight".into(), [e, e]),
        ("time.0.bias".into(), [1, e]),
        ("time.2.weight".into(), [e, e]),
        ("time.2.bias".into(), [1, e]),
        ("emb_panel".into(), [c.max_panels, e]),
        ("emb_edge".into(), [c.max_edges, e]),
        ("null_text".into(), [1, k]),
        ("null_image".into(), [1, k]),
    ];
    for b in 0..c.n_blocks {
        let p = |s: &str| format!("blocks.{b}.{s}");
        for norm in ["norm1", "norm2", "norm3"] {
            out.push((p(&format!("{norm}.gain")), [1, e]));
            out.push((p(&format!("{norm}.bias")), [1, e]));
        }
        for proj in ["q", "k", "v", "o"] {
            out.push((p(&format!("self_attn.{proj}.weight")), [e, e]));
            out.push((p(&format!("self_attn.{proj}.bias")), [1, e]));
        }
        for (proj, rows) in [
            ("q", e),
            ("text_k", k),
            ("text_v", k),
            ("image_k", k),
            ("image_v", k),
            ("o", e),
        ] {
            out.push((p(&format!("cross_attn.{proj}.weight")), [rows, e]));
            out.push((p(&format!("cross_attn.{proj}.bias")), [1, e]));
        }
        out.push((p("ffn.0.weight"), [e, f]));
        out.push((p("ffn.0.bias"), [1, f]));
        out.push((p("ffn.2.weight"), [f, e]));
        out.push((p("ffn.2.bias"), [1, e]));
    }
    out.push(("head.norm.gain".into(), [1, e]));
    out.push(("head.norm.bias".into(), [1, e]));
    out.push(("head.proj.weight".into(), [e, d]));
    out.push(("head.proj.bias".into(), [1, d]));
    out
}

impl<T: Scalar> Denoiser<T> {
    /// Truncated-normal weights, unit norm gains, zero biases and a zero head
    /// projection, so the untrained model predicts zero noise.
    pub fn new(config: DenoiserConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for (name, shape) in param_shapes(&config) {
            let n = shape[0] * shape[1];
            let values = if name.ends_with(".gain") {
                vec![1.0; n]
            } else if name.ends_with(".bias") || name == "head.proj.weight" {
                vec![0.0; n]
            } else {
                trunc_normal(&mut rng, n)
            };
            params.add(name, Tensor::from_f64(&shape, &values)?)?;
        }
        Ok(Self { config, params })
    }

    /// Builds a model around existing parameters, checking names and shapes.
    pub fn from_params(config: DenoiserConfig, params: ParamStore<T>) -> Result<Self> {
        config.validate()?;
        let expected = param_shapes(&config);
        if expected.len() != params.len() {
            return Err(Error::Config(format!(
                "checkpoint has {} tensors, config needs {}",
                params.len(),
                expected.len()
            )));
        }
        for (name, shape) in expected {
            let t = params
                .by_name(&name)
                .ok_or_else(|| Error::Config(format!("checkpoint is missing {name}")))?;
            if t.len() != shape[0] * shape[1] {
                return Err(Error::Config(format!(
                    "{name}: checkpoint shape {:?}, config needs {shape:?}",
                    t.shape()
                )));
            }
        }
        Ok(Self { config, params })
    }

    /// Fills the head projection with random values; used where a zero head
    /// would hide gradients of everything upstream.
    pub fn randomize_head(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let id = self.params.id("head.proj.weight").expect("head exists");
        let t = self.params.get_mut(id);
        let vals = trunc_normal(&mut rng, t.len());
        for (d, v) in t.data_mut().iter_mut().zip(vals) {
            *d = T::from_f64_lossy(v * 10.0);
        }
    }

    pub fn cast<U: Scalar>(&self) -> Denoiser<U> {
        Denoiser {
            config: self.config,
            params: self.params.cast(),
        }
    }
}
