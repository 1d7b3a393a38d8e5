//! Deterministic text and sketch feature encoders.
//!
//! Both produce a pooled vector plus a feature sequence of width `cond_dim`.
//! The denoiser attends over `[pooled; sequence]`. Any real encoder can be
//! dropped in behind [`ConditionBundle`] as long as it keeps that shape.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// Maximum number of text tokens kept.
pub const MAX_TEXT_TOKENS: usize = 77;
/// Rows in the hashed token table.
pub const TEXT_VOCAB: usize = 4096;
/// Side of a sketch image in pixels.
pub const SKETCH_SIZE: usize = 64;
/// Side of a sketch patch in pixels.
pub const PATCH_SIZE: usize = 8;

/// A pooled vector plus a row-major `len × dim` feature sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    pub dim: usize,
    pub pooled: Vec<f64>,
    pub sequence: Vec<f64>,
}

impl Features {
    pub fn len(&self) -> usize {
        self.sequence.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    /// `[pooled; sequence]`, the rows attended to by cross-attention.
    pub fn attention_rows(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.pooled.len() + self.sequence.len());
        out.extend_from_slice(&self.pooled);
        out.extend_from_slice(&self.sequence);
        out
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.sequence[i * self.dim..(i + 1) * self.dim]
    }
}

/// Per-modality conditions. An absent modality is replaced by a learned null
/// token inside the denoiser.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConditionBundle {
    pub text: Option<Features>,
    pub image: Option<Features>,
}

impl ConditionBundle {
    pub fn text(text: Features) -> Self {
        Self {
            text: Some(text),
            image: None,
        }
    }

    pub fn image(image: Features) -> Self {
        Self {
            text: None,
            image: Some(image),
        }
    }

    pub fn both(text: Features, image: Features) -> Self {
        Self {
            text: Some(text),
            image: Some(image),
        }
    }
}

fn l2_normalized(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n <= 1e-12 {
        return vec![0.0; v.len()];
    }
    v.into_iter().map(|x| x / n).collect()
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Lowercases and splits on anything that is not alphanumeric, `-` or `'`;
/// keeps at most [`MAX_TEXT_TOKENS`] tokens.
pub fn tokenize_text(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '\''))
        .map(|t| t.trim_matches(|c| c == '-' || c == '\''))
        .filter(|t| !t.is_empty())
        .take(MAX_TEXT_TOKENS)
        .map(str::to_string)
        .collect()
}

fn gaussian_table(rows: usize, cols: usize, seed: u64, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        })
        .collect()
}

/// Hashed bag-of-token text encoder.
#[derive(Clone, Debug)]
pub struct TextEncoder {
    dim: usize,
    table: Vec<f64>,
}

impl TextEncoder {
    pub fn new(cond_dim: usize, seed: u64) -> Self {
        Self {
            dim: cond_dim,
            table: gaussian_table(TEXT_VOCAB, cond_dim, seed, 1.0),
        }
    }

    pub fn encode(&self, text: &str) -> Result<Features> {
        let tokens = tokenize_text(text);
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("text condition is empty".into()));
        }
        let mut sequence = Vec::with_capacity(tokens.len() * self.dim);
        let mut mean = vec![0.0; self.dim];
        for tok in &tokens {
            let idx = (fnv1a64(tok.as_bytes()) % TEXT_VOCAB as u64) as usize;
            let row = &self.table[idx * self.dim..(idx + 1) * self.dim];
            sequence.extend_from_slice(row);
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / tokens.len() as f64;
            }
        }
        Ok(Features {
            dim: self.dim,
            pooled: l2_normalized(mean),
            sequence,
        })
    }
}

pub fn encode_text(text: &str, cond_dim: usize, seed: u64) -> Result<Features> {
    TextEncoder::new(cond_dim, seed).encode(text)
}

/// A square grayscale image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sketch {
    pub size: usize,
    pub pixels: Vec<f64>,
}

impl Sketch {
    pub fn blank(size: usize) -> Self {
        Self {
            size,
            pixels: vec![0.0; size * size],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.size + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.pixels[y * self.size + x] = v;
    }

    /// Binary PGM (P5), 8-bit.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.size, self.size).into_bytes();
        out.extend(self.pixels.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("PGM: {m}"));
        // header: magic, width, height, maxval separated by whitespace, with optional comments
        let mut fields = Vec::new();
        let mut i = 0;
        while fields.len() < 4 {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            let start = i;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if start == i {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..i]).map_err(|_| bad("header is not ASCII"))?);
        }
        if fields[0] != "P5" {
            return Err(bad("only binary P5 images are supported"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("invalid number"));
        let (w, h, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
        if w != h {
            return Err(bad("sketch must be square"));
        }
        if maxval == 0 || maxval > 255 {
            return Err(bad("only 8-bit images are supported"));
        }
        let data = &bytes[i + 1..];
        if data.len() < w * h {
            return Err(bad("truncated pixel data"));
        }
        Ok(Self {
            size: w,
            pixels: data[..w * h].iter().map(|&b| f64::from(b) / maxval as f64).collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_pgm(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

/// Patch-projection sketch encoder: 64 patches of 8×8 pixels, each flattened
/// and multiplied by a fixed random `64 × cond_dim` matrix.
#[derive(Clone, Debug)]
pub struct SketchEncoder {
    dim: usize,
    projection: Vec<f64>,
}

impl SketchEncoder {
    pub fn new(cond_dim: usize, seed: u64) -> Self {
        let k = PATCH_SIZE * PATCH_SIZE;
        Self {
            dim: cond_dim,
            projection: gaussian_table(k, cond_dim, seed ^ 0x5eed_0f_5e7c_u64, 1.0 / (k as f64).sqrt()),
        }
    }

    pub fn encode(&self, sketch: &Sketch) -> Result<Features> {
        if sketch.size != SKETCH_SIZE || sketch.pixels.len() != SKETCH_SIZE * SKETCH_SIZE {
            return Err(Error::InvalidArgument(format!(
                "sketch must be {SKETCH_SIZE}×{SKETCH_SIZE}, got side {}",
                sketch.size
            )));
        }
        let per_side = SKETCH_SIZE / PATCH_SIZE;
        let n_patches = per_side * per_side;
        let mut sequence = vec![0.0; n_patches * self.dim];
        let mut mean = vec![0.0; self.dim];
        for py in 0..per_side {
            for px in 0..per_side {
                let p = py * per_side + px;
                let out = &mut sequence[p * self.dim..(p + 1) * self.dim];
                for dy in 0..PATCH_SIZE {
                    for dx in 0..PATCH_SIZE {
                        let v = sketch.get(px * PATCH_SIZE + dx, py * PATCH_SIZE + dy);
                        if v == 0.0 {
                            continue;
                        }
                        let k = dy * PATCH_SIZE + dx;
                        let row = &self.projection[k * self.dim..(k + 1) * self.dim];
                        for (o, w) in out.iter_mut().zip(row) {
                            *o += v * w;
                        }
                    }
                }
                for (m, o) in mean.iter_mut().zip(out.iter()) {
                    *m += o / n_patches as f64;
                }
            }
        }
        Ok(Features {
            dim: self.dim,
            pooled: l2_normalized(mean),
            sequence,
        })
    }
}

pub fn encode_sketch(sketch: &Sketch, cond_dim: usize, seed: u64) -> Result<Features> {
    SketchEncoder::new(cond_dim, seed).encode(sketch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn text_is_deterministic() {
        let a = encode_text("Knee length A-line skirt", 64, 3).unwrap();
        let b = encode_text("Knee length A-line skirt", 64, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_texts_differ() {
        let enc = TextEncoder::new(64, 0);
        let a = enc.encode("a-line skirt").unwrap();
        let b = enc.encode("pencil skirt").unwrap();
        assert!(cosine(&a.pooled, &b.pooled) < 1.0 - 1e-9);
    }

    #[test]
    fn token_rule_keeps_hyphenated_words() {
        let f = encode_text("knee length a-line skirt with two panels", 64, 0).unwrap();
        assert_eq!(f.len(), 7);
        assert_eq!(f.attention_rows().len(), 8 * 64);
        assert_eq!(tokenize_text("Waist: 72 cm, hem 96cm."), vec!["waist", "72", "cm", "hem", "96cm"]);
    }

    #[test]
    fn text_truncates_and_rejects_empty() {
        let long = vec!["word"; 200].join(" ");
        assert_eq!(encode_text(&long, 16, 0).unwrap().len(), MAX_TEXT_TOKENS);
        assert!(encode_text("   ,.;  ", 16, 0).is_err());
    }

    #[test]
    fn zero_sketch_has_zero_features() {
        let f = encode_sketch(&Sketch::blank(64), 32, 1).unwrap();
        assert_eq!(f.len(), 64);
        assert!(f.sequence.iter().all(|&v| v == 0.0));
        assert!(f.pooled.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_patch_change_touches_one_row() {
        let enc = SketchEncoder::new(32, 9);
        let a = Sketch::blank(64);
        let mut b = a.clone();
        b.set(17, 42, 1.0);
        let (fa, fb) = (enc.encode(&a).unwrap(), enc.encode(&b).unwrap());
        let changed: Vec<usize> = (0..64).filter(|&p| fa.row(p) != fb.row(p)).collect();
        assert_eq!(changed, vec![(42 / 8) * 8 + 17 / 8]);
    }

    #[test]
    fn wrong_sketch_size_is_rejected() {
        assert!(encode_sketch(&Sketch::blank(32), 8, 0).is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let mut s = Sketch::blank(64);
        s.set(3, 4, 1.0);
        s.set(63, 63, 1.0);
        let bytes = s.to_pgm();
        assert!(bytes.starts_with(b"P5\n64 64\n255\n"));
        assert_eq!(Sketch::from_pgm(&bytes).unwrap(), s);
        assert!(Sketch::from_pgm(b"P2\n1 1\n255\n0").is_err());
    }
}
