//! Renders synthetic garments (or a pattern JSON file) as SVG, with stitched
//! edge pairs sharing a color.
//!
//! ```text
//! cargo run --release --example render_svg -- [pattern.json] [out.svg]
//! ```

use std::path::PathBuf;

use sewdiff::pattern::load_pattern;
use sewdiff::synthgen::{generate_corpus, render_svg};

fn main() -> sewdiff::Result<()> {
    let mut args = std::env::args().skip(1);
    match args.next() {
        Some(input) => {
            let p = load_pattern(&PathBuf::from(&input))?;
            let out = args.next().unwrap_or_else(|| "pattern.svg".into());
            std::fs::write(&out, render_svg(&p)).expect("write svg");
            println!("wrote {out}");
        }
        None => {
            std::fs::create_dir_all("target/svg").expect("create target/svg");
            for e in generate_corpus(3, 11) {
                let out = format!("target/svg/{}.svg", e.pattern.name);
                std::fs::write(&out, render_svg(&e.pattern)).expect("write svg");
                println!("{out}: {}", e.brief);
            }
        }
    }
    Ok(())
}
