//! Writes a small synthetic corpus and prints what it contains.
//!
//! ```text
//! cargo run --release --example gen_dataset -- [out_dir] [count] [seed]
//! ```

use std::path::PathBuf;

use sewdiff::synthgen::{generate_corpus, read_corpus, write_corpus};

fn main() -> sewdiff::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/demo-corpus".into()));
    let n: usize = args.next().map_or(12, |s| s.parse().expect("count"));
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed"));

    let entries = generate_corpus(n, seed);
    write_corpus(&out, &entries, seed)?;
    let (manifest, back) = read_corpus(&out)?;
    assert_eq!(back.len(), manifest.count);

    for (m, e) in manifest.entries.iter().zip(&back) {
        let edges: usize = e.pattern.panels.iter().map(|p| p.edges.len()).sum();
        println!(
            "{}  {:<12} {} panels, {edges} edges, {} stitches  \"{}\"",
            m.id,
            m.name,
            e.pattern.panels.len(),
            e.pattern.stitches.len(),
            e.brief
        );
    }
    println!("wrote {} entries to {}", manifest.count, out.display());
    Ok(())
}
