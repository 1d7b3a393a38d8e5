//! Text and sketch condition features, as consumed by the denoiser's
//! cross-attention.
//!
//! ```text
//! cargo run --release --example conditioning
//! ```

use sewdiff::conditioning::{tokenize_text, SketchEncoder, TextEncoder};
use sewdiff::synthgen::{generate_corpus, render_sketch};

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (n(a) * n(b))
}

fn main() -> sewdiff::Result<()> {
    let text = TextEncoder::new(64, 0);
    let sketch = SketchEncoder::new(64, 0);
    let corpus = generate_corpus(3, 5);

    for e in &corpus {
        println!("{}", e.detailed);
        println!("  tokens: {:?}", tokenize_text(&e.brief));
        let f = text.encode(&e.detailed)?;
        println!("  text features: {} rows × {}", f.len() + 1, f.dim);
    }
    let a = text.encode(&corpus[0].detailed)?;
    let b = text.encode(&corpus[1].detailed)?;
    println!("pooled text cosine, garment 0 vs 1: {:.3}", cosine(&a.pooled, &b.pooled));

    let img = render_sketch(&corpus[0].pattern);
    let inked = img.pixels.iter().filter(|&&v| v > 0.5).count();
    let f = sketch.encode(&img)?;
    println!("sketch: {inked} inked pixels → {} patch rows × {}", f.len(), f.dim);
    img.save(std::path::Path::new("target/sketch0.pgm"))?;
    println!("wrote target/sketch0.pgm");
    Ok(())
}
