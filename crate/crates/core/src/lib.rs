//! Diffusion-transformer generation of vectorized, 3D-placed sewing patterns.
//!
//! A garment is a set of closed 2D panels, each placed in 3D, plus stitches
//! pairing edges. Every edge becomes one fixed-width token
//! (`start ⊕ controls ⊕ arc ⊕ stitch tag ⊕ stitch flag`), panels are padded to
//! a fixed `M × N` grid, and a DDPM with a small diffusion transformer learns
//! to denoise the whole grid in parallel, conditioned on text and sketch
//! features through decoupled cross-attention.
//!
//! Module map:
//!
//! * [`pattern`]: patterns, panels, edges, stitches, 3D placement.
//! * [`tokenizer`]: pattern ⇄ token grid, normalization, padding, shuffling.
//! * [`scheduler`]: linear-beta DDPM forward noising and reverse steps.
//! * [`numerics`]: dense tensors with a reverse-mode tape, AdamW, checkpoints.
//! * [`denoiser`]: the diffusion transformer.
//! * [`conditioning`]: deterministic text and sketch feature encoders.
//! * [`engine`]: training, sampling, and pattern completion.
//! * [`metrics`]: panel matching and the evaluation suite.
//! * [`synthgen`]: a seeded synthetic garment corpus and SVG rendering.
//! * [`cli`]: the `sewdiff` command-line front end.

pub mod cli;
pub mod conditioning;
pub mod denoiser;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod pattern;
pub mod scheduler;
pub mod synthgen;
pub mod tokenizer;

pub use error::{Error, Result};
