//! The evaluation suite on controlled perturbations of ground truth.
//!
//! ```text
//! cargo run --release --example evaluate
//! ```

use sewdiff::metrics::evaluate;
use sewdiff::pattern::Pattern;
use sewdiff::synthgen::generate_corpus;

fn jitter(p: &Pattern, cm: f64) -> Pattern {
    let mut q = p.clone();
    for (i, panel) in q.panels.iter_mut().enumerate() {
        for (j, e) in panel.edges.iter_mut().enumerate() {
            // deterministic, zero-mean per panel
            let s = if (i + j) % 2 == 0 { cm } else { -cm };
            e.start[0] += s;
        }
    }
    q
}

fn main() {
    let gts: Vec<Pattern> = generate_corpus(24, 3).into_iter().map(|e| e.pattern).collect();

    let cases: Vec<(&str, Vec<(Pattern, Pattern)>)> = vec![
        ("identity", gts.iter().map(|g| (g.clone(), g.clone())).collect()),
        ("reversed panel order", gts.iter().map(|g| {
            let mut p = g.clone();
            p.panels.reverse();
            let n = p.panels.len();
            for s in &mut p.stitches {
                s.0.panel = n - 1 - s.0.panel;
                s.1.panel = n - 1 - s.1.panel;
            }
            (p, g.clone())
        }).collect()),
        ("vertices jittered by 0.5 cm", gts.iter().map(|g| (jitter(g, 0.5), g.clone())).collect()),
        ("last panel missing", gts.iter().map(|g| (g.prefix(g.panels.len() - 1), g.clone())).collect()),
        ("stitches removed", gts.iter().map(|g| (Pattern { stitches: vec![], ..g.clone() }, g.clone())).collect()),
    ];
    for (name, pairs) in cases {
        println!("{name}\n{}", evaluate(&pairs).to_table());
    }
}
