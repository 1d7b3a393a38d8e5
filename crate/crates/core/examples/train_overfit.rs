//! Overfits a desk-size model on a handful of synthetic garments and saves
//! it for the `sample` and `complete` examples.
//!
//! ```text
//! cargo run --release --example train_overfit -- [model_dir] [patterns] [steps]
//! ```

use std::path::PathBuf;

use sewdiff::engine::{train, LossRecord, LrSchedule, RunConfig};
use sewdiff::synthgen::generate_corpus;
use sewdiff::tokenizer::compute_stats;

/// Corpus seed shared with the `sample` and `complete` examples.
const DEMO_SEED: u64 = 7;

fn main() -> sewdiff::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "target/demo-model".into()));
    let n: usize = args.next().map_or(4, |s| s.parse().expect("pattern count"));
    let steps: usize = args.next().map_or(2000, |s| s.parse().expect("step count"));

    let corpus = generate_corpus(n, DEMO_SEED);
    let mut config = RunConfig {
        batch_size: n.min(8),
        max_steps: Some(steps),
        epochs: usize::MAX,
        seed: 1,
        lr_schedule: LrSchedule::Cosine { warmup_steps: 100, final_ratio: 0.01 },
        ..RunConfig::default()
    };
    config.optimizer.lr = 1e-3;
    let patterns: Vec<_> = corpus.iter().map(|e| e.pattern.clone()).collect();
    let stats = compute_stats(&patterns, &config.layout()?)?;

    let mut window = Vec::new();
    let mut log = |r: &LossRecord| {
        window.push(r.loss);
        if (r.step + 1) % 100 == 0 {
            let avg = window.iter().sum::<f64>() / window.len() as f64;
            println!("step {:>5}  mean loss over last 100 steps {avg:.5}", r.step + 1);
            window.clear();
        }
    };
    let out = train(&corpus, stats, config, Some(&dir), Some(&mut log))?;
    println!(
        "stopped ({:?}); best moving-average loss {:.5} at step {}; saved to {}",
        out.stop,
        out.best_loss,
        out.best_step,
        dir.display()
    );
    Ok(())
}
