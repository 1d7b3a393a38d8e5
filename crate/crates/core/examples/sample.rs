//! Samples a pattern from a trained model given a caption and writes it as
//! JSON and SVG. Run `train_overfit` first.
//!
//! ```text
//! cargo run --release --example sample -- [model_dir] [caption] [steps] [seed]
//! ```

use std::path::PathBuf;

use sewdiff::engine::{sample, Model};
use sewdiff::metrics::evaluate_pair;
use sewdiff::pattern::save_pattern;
use sewdiff::synthgen::{generate_corpus, render_svg};

fn main() -> sewdiff::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "target/demo-model".into()));
    let caption = args.next();
    let steps: usize = args.next().map_or(50, |s| s.parse().expect("step count"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));

    let model = Model::load(&dir)?;
    // without a caption, use the first garment the demo model was trained on
    let gt = generate_corpus(1, 7).remove(0);
    let text = caption.unwrap_or_else(|| model.config.caption.pick(&gt).to_string());
    println!("caption: {text}");

    let cond = model.conditions(Some(&text), None)?;
    let out = sample(&model, &cond, steps, seed)?;
    let p = &out.decoded.pattern;
    for panel in &p.panels {
        println!("  {:<10} {} edges at {:?}", panel.name, panel.edges.len(), panel.translation.map(|v| v.round()));
    }
    println!("{} panels, {} stitches, {} dropped", p.panels.len(), p.stitches.len(), out.decoded.dropped_panels);

    let m = evaluate_pair(p, &gt.pattern);
    println!("against the first training garment: {m:?}");

    save_pattern(p, &dir.join("sample.json"))?;
    std::fs::write(dir.join("sample.svg"), render_svg(p)).expect("write svg");
    println!("wrote {0}/sample.json and {0}/sample.svg", dir.display());
    Ok(())
}
