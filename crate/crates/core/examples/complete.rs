//! Pattern completion: keeps the first panel of a training garment and lets
//! the model generate the rest. Run `train_overfit` first.
//!
//! ```text
//! cargo run --release --example complete -- [model_dir] [garment_index] [known_panels]
//! ```

use std::path::PathBuf;

use sewdiff::engine::{complete, Model};
use sewdiff::metrics::evaluate;
use sewdiff::synthgen::generate_corpus;
use sewdiff::tokenizer::encode;

fn main() -> sewdiff::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "target/demo-model".into()));
    let index: usize = args.next().map_or(0, |s| s.parse().expect("garment index"));
    let k: usize = args.next().map_or(1, |s| s.parse().expect("known panel count"));

    let model = Model::load(&dir)?;
    let gt = generate_corpus(index + 1, 7).remove(index);
    let fragment = gt.pattern.prefix(k);
    println!("known: {:?}", fragment.panels.iter().map(|p| &p.name).collect::<Vec<_>>());

    let cond = model.conditions(Some(model.config.caption.pick(&gt)), None)?;
    let out = complete(&model, &fragment, &cond, 50, 0)?;

    let known = encode(&fragment, &model.layout, &model.stats, None)?;
    let rows = k * model.layout.max_edges * model.layout.token_width();
    assert_eq!(out.grid.values[..rows], known.values[..rows], "known rows changed");
    println!("known token rows preserved exactly");
    println!(
        "generated: {:?}",
        out.decoded.pattern.panels.iter().map(|p| p.edges.len()).collect::<Vec<_>>()
    );
    print!("{}", evaluate(&[(out.decoded.pattern, gt.pattern)]).to_table());
    Ok(())
}
