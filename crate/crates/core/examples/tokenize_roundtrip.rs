//! Encodes patterns into padded token grids and decodes them back.
//!
//! ```text
//! cargo run --release --example tokenize_roundtrip
//! ```

use sewdiff::pattern::to_world;
use sewdiff::synthgen::generate_corpus;
use sewdiff::tokenizer::{compute_stats, decode, encode, DecodeOptions, TokenLayout};

fn main() -> sewdiff::Result<()> {
    for name in ["dresscode", "sewfactory", "garmentcode"] {
        let l = TokenLayout::preset(name)?;
        println!(
            "{name:<12} {:>2} panels × {:>2} edges = {:>4} tokens of width {}",
            l.max_panels,
            l.max_edges,
            l.seq_len(),
            l.token_width()
        );
    }

    let layout = TokenLayout::DRESSCODE;
    let corpus = generate_corpus(30, 1);
    let patterns: Vec<_> = corpus.iter().map(|e| e.pattern.clone()).collect();
    let stats = compute_stats(&patterns, &layout)?;

    let mut worst = 0.0f64;
    for (i, p) in patterns.iter().enumerate() {
        // shuffled panel order; decode reports which block each panel came from
        let grid = encode(p, &layout, &stats, Some(i as u64))?;
        let back = decode(&grid.values, &layout, &stats, &DecodeOptions::default())?;
        assert_eq!(back.pattern.panels.len(), p.panels.len());
        assert_eq!(back.pattern.stitches.len(), p.stitches.len());
        for panel in &back.pattern.panels {
            let orig = p.panels.iter().find(|q| q.edges.len() == panel.edges.len() && {
                let a = to_world(q, q.edges[0].start);
                let b = to_world(panel, panel.edges[0].start);
                a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-3)
            });
            let orig = orig.expect("every decoded panel has a source");
            for (e, f) in panel.edges.iter().zip(&orig.edges) {
                let a = to_world(panel, e.start);
                let b = to_world(orig, f.start);
                worst = a.iter().zip(&b).fold(worst, |m, (x, y)| m.max((x - y).abs()));
            }
        }
    }
    println!("{} patterns round-tripped; max world-space vertex error {worst:.2e} cm", patterns.len());
    Ok(())
}
