//! Checks the hand-written backward pass of the full desk-size denoiser
//! against central finite differences in 64-bit.
//!
//! ```text
//! cargo run --release --example gradcheck -- [coordinates]
//! ```

use sewdiff::denoiser::{gradcheck, DenoiserConfig};
use sewdiff::tokenizer::TokenLayout;

fn main() -> sewdiff::Result<()> {
    let coords: usize = std::env::args().nth(1).map_or(200, |s| s.parse().expect("coordinate count"));
    let config = DenoiserConfig::desk(&TokenLayout::DRESSCODE);
    let report = gradcheck(config, 0, coords)?;

    let mut by_param: Vec<(&str, f64)> = Vec::new();
    for c in &report.checks {
        match by_param.iter_mut().find(|(p, _)| *p == c.param) {
            Some(entry) => entry.1 = entry.1.max(c.rel_error),
            None => by_param.push((&c.param, c.rel_error)),
        }
    }
    for (p, e) in &by_param {
        println!("{p:<32} {e:.2e}");
    }
    let w = report.worst().expect("checked at least one coordinate");
    println!(
        "{} coordinates, max relative error {:.3e} ({}[{}])",
        report.checks.len(),
        report.max_rel_error(),
        w.param,
        w.offset
    );
    Ok(())
}
