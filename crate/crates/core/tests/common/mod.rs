//! Random pattern generators shared by the integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use sewdiff::pattern::{Edge, EdgeRef, Panel, Pattern, Stitch};

/// Star-shaped counter-clockwise polygon with `n` vertices around the origin.
pub fn random_loop(rng: &mut impl Rng, n: usize) -> Vec<[f64; 2]> {
    let mut angles: Vec<f64> = (0..n)
        .map(|i| (i as f64 + rng.random_range(0.1..0.9)) * std::f64::consts::TAU / n as f64)
        .collect();
    angles.sort_by(f64::total_cmp);
    angles
        .into_iter()
        .map(|a| {
            let r = rng.random_range(10.0..40.0);
            [r * a.cos(), r * a.sin()]
        })
        .collect()
}

pub fn random_panel(rng: &mut impl Rng, name: String) -> Panel {
    let n = rng.random_range(3..=6);
    Panel {
        name,
        rotation: [
            rng.random_range(-60.0..60.0),
            rng.random_range(-60.0..60.0),
            rng.random_range(-60.0..60.0),
        ],
        translation: [
            rng.random_range(-50.0..50.0),
            rng.random_range(-50.0..50.0),
            rng.random_range(-50.0..50.0),
        ],
        edges: random_loop(rng, n).into_iter().map(Edge::line).collect(),
    }
}

/// Disjoint random stitches over the pattern's edges.
pub fn random_stitches(rng: &mut impl Rng, panels: &[Panel], max: usize) -> Vec<Stitch> {
    let mut refs: Vec<EdgeRef> = panels
        .iter()
        .enumerate()
        .flat_map(|(p, panel)| (0..panel.edges.len()).map(move |e| EdgeRef::new(p, e)))
        .collect();
    refs.shuffle(rng);
    let count = rng.random_range(0..=max.min(refs.len() / 2));
    (0..count).map(|i| Stitch(refs[2 * i], refs[2 * i + 1])).collect()
}

pub fn random_pattern(rng: &mut impl Rng, panels: usize) -> Pattern {
    let panels: Vec<Panel> = (0..panels).map(|i| random_panel(rng, format!("p{i}"))).collect();
    let stitches = random_stitches(rng, &panels, 6);
    let p = Pattern { name: "random".into(), panels, stitches };
    p.validate().expect("generated pattern is valid");
    p
}

/// A noisy copy: vertices jittered, panel order shuffled, optionally one
/// panel dropped or added, and stitches re-drawn in part.
pub fn perturb(rng: &mut impl Rng, gt: &Pattern) -> Pattern {
    let mut panels = gt.panels.clone();
    for p in &mut panels {
        for e in &mut p.edges {
            e.start[0] += rng.random_range(-2.0..2.0);
            e.start[1] += rng.random_range(-2.0..2.0);
        }
        for v in &mut p.translation {
            *v += rng.random_range(-3.0..3.0);
        }
    }
    let mut stitches = gt.stitches.clone();
    match rng.random_range(0..3) {
        0 if panels.len() > 1 => {
            let drop = panels.len() - 1;
            panels.pop();
            stitches.retain(|s| s.0.panel != drop && s.1.panel != drop);
        }
        1 if panels.len() < 5 => panels.push(random_panel(rng, "extra".into())),
        _ => {}
    }
    if rng.random_bool(0.3) {
        stitches = random_stitches(rng, &panels, 6);
    }
    let mut order: Vec<usize> = (0..panels.len()).collect();
    order.shuffle(rng);
    let mut inverse = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        inverse[old] = new;
    }
    let panels = order.iter().map(|&o| panels[o].clone()).collect();
    for s in &mut stitches {
        s.0.panel = inverse[s.0.panel];
        s.1.panel = inverse[s.1.panel];
    }
    Pattern { name: "pred".into(), panels, stitches }
}

/// Every injective assignment of `min(n, m)` rows of `0..n` to `0..m`.
pub fn assignments(n: usize, m: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(i: usize, n: usize, m: usize, k: usize, used: &mut Vec<bool>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        if i == n || n - i < k - cur.len() {
            return;
        }
        // row i unmatched
        rec(i + 1, n, m, k, used, cur, out);
        for j in 0..m {
            if !used[j] {
                used[j] = true;
                cur.push((i, j));
                rec(i + 1, n, m, k, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(0, n, m, n.min(m), &mut vec![false; m], &mut Vec::new(), &mut out);
    out
}

use sewdiff::pattern::{edge_point, to_world};
use sewdiff::tokenizer::{decode, encode_with_order, DecodeOptions, NormStats, TokenLayout};

/// Encodes (optionally shuffled), decodes, and returns the largest
/// world-space distance between corresponding curve points, or an error
/// string describing a structural mismatch.
pub fn round_trip_error(p: &Pattern, layout: &TokenLayout, stats: &NormStats, shuffle: Option<u64>) -> Result<f64, String> {
    let (grid, order) = encode_with_order(p, layout, stats, shuffle).map_err(|e| e.to_string())?;
    let d = decode(&grid.values, layout, stats, &DecodeOptions::default()).map_err(|e| e.to_string())?;
    if d.pattern.panels.len() != p.panels.len() || d.dropped_panels != 0 {
        return Err(format!("{} panels back from {}", d.pattern.panels.len(), p.panels.len()));
    }
    // decoded panel i came from block d.blocks[i], which holds pattern panel order[..]
    let source: Vec<usize> = d.blocks.iter().map(|&b| order[b]).collect();
    let mut worst = 0.0f64;
    for (i, back) in d.pattern.panels.iter().enumerate() {
        let orig = &p.panels[source[i]];
        if back.edges.len() != orig.edges.len() {
            return Err(format!("panel {i}: {} edges vs {}", back.edges.len(), orig.edges.len()));
        }
        for (j, (e, f)) in back.edges.iter().zip(&orig.edges).enumerate() {
            let end_b = back.edge_end(j);
            let end_o = orig.edge_end(j);
            for u in [0.0, 0.25, 0.5, 0.75] {
                let a = to_world(back, edge_point(e, end_b, u));
                let b = to_world(orig, edge_point(f, end_o, u));
                worst = a.iter().zip(&b).fold(worst, |m, (x, y)| m.max((x - y).abs()));
            }
        }
    }
    let remap = |s: &Stitch| Stitch(EdgeRef::new(source[s.0.panel], s.0.edge), EdgeRef::new(source[s.1.panel], s.1.edge)).normalized();
    let mut got: Vec<Stitch> = d.pattern.stitches.iter().map(remap).collect();
    let mut want: Vec<Stitch> = p.stitches.iter().map(|s| s.normalized()).collect();
    got.sort();
    want.sort();
    if got != want {
        return Err(format!("stitch sets differ: {got:?} vs {want:?}"));
    }
    Ok(worst)
}
