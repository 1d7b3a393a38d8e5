//! Tokenizer and corpus invariants over generated garments.

mod common;

use proptest::prelude::*;
use sewdiff::pattern::{parse_pattern, to_canonical_json, Pattern};
use sewdiff::synthgen::{generate_corpus, read_corpus, write_corpus};
use sewdiff::tokenizer::{compute_stats, encode, read_grid, write_grid, TokenLayout};

fn patterns(n: usize, seed: u64) -> Vec<Pattern> {
    generate_corpus(n, seed).into_iter().map(|e| e.pattern).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decode_inverts_encode(seed in 0u64..10_000, shuffle in proptest::option::of(0u64..1000)) {
        let layout = TokenLayout::DRESSCODE;
        let pats = patterns(6, seed);
        let stats = compute_stats(&pats, &layout).unwrap();
        for p in &pats {
            let err = common::round_trip_error(p, &layout, &stats, shuffle).map_err(TestCaseError::fail)?;
            prop_assert!(err <= 1e-5, "world error {}", err);
        }
    }

    #[test]
    fn padding_is_exactly_zero(seed in 0u64..10_000, shuffle in 0u64..1000) {
        let layout = TokenLayout::DRESSCODE;
        let pats = patterns(4, seed);
        let stats = compute_stats(&pats, &layout).unwrap();
        let d = layout.token_width();
        for p in &pats {
            let g = encode(p, &layout, &stats, Some(shuffle)).unwrap();
            prop_assert_eq!(g.panel_mask.iter().filter(|&&m| m).count(), p.panels.len());
            prop_assert_eq!(g.edge_mask.iter().filter(|&&m| m).count(), p.edge_count());
            for r in 0..g.rows() {
                let row = &g.values[r * d..(r + 1) * d];
                if g.edge_mask[r] {
                    prop_assert!(row.iter().all(|v| (-1.0..=1.0).contains(v)));
                } else {
                    prop_assert!(row.iter().all(|&v| v == 0.0));
                }
            }
            // panel blocks are filled from the front
            let k = p.panels.len();
            prop_assert!(g.panel_mask[..k].iter().all(|&m| m));
        }
    }

    /// Shuffling only permutes whole panel blocks.
    #[test]
    fn shuffle_permutes_blocks(seed in 0u64..10_000, shuffle in 0u64..1000) {
        let layout = TokenLayout::DRESSCODE;
        let pats = patterns(3, seed);
        let stats = compute_stats(&pats, &layout).unwrap();
        let block = layout.max_edges * layout.token_width();
        for p in &pats {
            let a = encode(p, &layout, &stats, None).unwrap();
            let b = encode(p, &layout, &stats, Some(shuffle)).unwrap();
            let mut ba: Vec<&[f64]> = a.values.chunks(block).collect();
            let mut bb: Vec<&[f64]> = b.values.chunks(block).collect();
            let key = |x: &&[f64], y: &&[f64]| x.iter().zip(y.iter()).map(|(u, v)| u.total_cmp(v)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal);
            ba.sort_by(key);
            bb.sort_by(key);
            prop_assert_eq!(ba, bb);
        }
    }

    #[test]
    fn grid_binary_round_trip(seed in 0u64..10_000) {
        let layout = TokenLayout::SEWFACTORY;
        let pats = patterns(2, seed);
        let stats = compute_stats(&pats, &layout).unwrap();
        let g = encode(&pats[0], &layout, &stats, Some(seed)).unwrap();
        let mut buf = Vec::new();
        write_grid(&g, &mut buf).unwrap();
        let back = read_grid(buf.as_slice()).unwrap();
        prop_assert_eq!(back.layout, g.layout);
        prop_assert_eq!(&back.panel_mask, &g.panel_mask);
        prop_assert_eq!(&back.edge_mask, &g.edge_mask);
        // values are stored as f32
        for (a, b) in back.values.iter().zip(&g.values) {
            prop_assert!((a - b).abs() <= 1e-7 * b.abs().max(1.0));
        }
    }

    /// Canonical JSON rounds to 9 significant digits, so a second pass is
    /// exact and the first stays within rounding.
    #[test]
    fn pattern_json_round_trip(seed in 0u64..10_000) {
        for p in patterns(3, seed) {
            let text = to_canonical_json(&p);
            let back = parse_pattern(&text).unwrap();
            prop_assert_eq!(&to_canonical_json(&back), &text);
            prop_assert_eq!(back.edge_count(), p.edge_count());
            prop_assert_eq!(&back.stitches, &p.stitches);
            for (a, b) in back.panels.iter().zip(&p.panels) {
                for (e, f) in a.edges.iter().zip(&b.edges) {
                    for k in 0..2 {
                        prop_assert!((e.start[k] - f.start[k]).abs() <= 1e-8 * f.start[k].abs().max(1.0));
                    }
                }
            }
        }
    }
}

#[test]
fn corpus_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let entries = generate_corpus(9, 21);
    let written = write_corpus(dir.path(), &entries, 21).unwrap();
    let (manifest, back) = read_corpus(dir.path()).unwrap();
    assert_eq!(manifest, written);
    assert_eq!(manifest.seed, 21);
    assert_eq!(back.len(), 9);
    for (a, b) in entries.iter().zip(&back) {
        assert_eq!(to_canonical_json(&a.pattern), to_canonical_json(&b.pattern));
        assert_eq!((&a.brief, &a.detailed, a.family), (&b.brief, &b.detailed, b.family));
        assert_eq!(a.sketch, b.sketch);
    }
}

#[test]
fn corpus_is_seed_deterministic() {
    let a = generate_corpus(20, 5);
    let b = generate_corpus(20, 5);
    let c = generate_corpus(20, 6);
    assert!(a.iter().zip(&b).all(|(x, y)| x.pattern == y.pattern && x.detailed == y.detailed && x.sketch == y.sketch));
    assert!(a.iter().zip(&c).any(|(x, y)| x.pattern != y.pattern));
}
