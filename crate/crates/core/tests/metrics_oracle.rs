//! Hungarian-matched metrics against exhaustive assignment search.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sewdiff::metrics::{
    canonicalize, evaluate, evaluate_pair, evaluate_with_matching, match_canonical, matching_from_pairs, pair_cost,
};
use sewdiff::synthgen::generate_corpus;

#[test]
fn assignment_enumeration_counts() {
    // k-permutations: n!/(n-k)! choices of rows times columns
    assert_eq!(common::assignments(3, 3).len(), 6);
    assert_eq!(common::assignments(2, 4).len(), 12);
    assert_eq!(common::assignments(4, 2).len(), 12);
    assert_eq!(common::assignments(5, 5).len(), 120);
}

#[test]
fn hungarian_metrics_equal_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..60 {
        let n = rng.random_range(1..=5);
        let gt = common::random_pattern(&mut rng, n);
        let pred = if rng.random_bool(0.7) {
            common::perturb(&mut rng, &gt)
        } else {
            let n = rng.random_range(1..=5);
            common::random_pattern(&mut rng, n)
        };
        let (pc, gc) = (canonicalize(&pred), canonicalize(&gt));
        let best = common::assignments(pc.len(), gc.len())
            .into_iter()
            .map(|a| {
                let cost: f64 = a.iter().map(|&(p, g)| pair_cost(&pc[p], &gc[g])).sum();
                (cost, a)
            })
            .min_by(|x, y| x.0.total_cmp(&y.0))
            .unwrap();
        let brute = matching_from_pairs(&pc, &gc, best.1);
        let hung = match_canonical(&pc, &gc);
        assert_eq!(hung.pairs, brute.pairs);
        assert_eq!(
            evaluate_pair(&pred, &gt),
            evaluate_with_matching(&pred, &gt, &pc, &gc, &brute)
        );
    }
}

#[test]
fn ground_truth_scores_perfectly() {
    let pairs: Vec<_> = generate_corpus(30, 4).into_iter().map(|e| (e.pattern.clone(), e.pattern)).collect();
    let r = evaluate(&pairs);
    assert_eq!(r.panel_l2, 0.0);
    assert_eq!((r.num_panel_acc, r.num_edge_acc), (1.0, 1.0));
    assert_eq!((r.rot_l2, r.trans_l2), (0.0, 0.0));
    assert_eq!((r.stitch_precision, r.stitch_recall, r.stitch_f1), (1.0, 1.0, 1.0));
}
