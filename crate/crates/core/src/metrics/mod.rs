//! Generated-versus-ground-truth comparison: panel shape error, panel and
//! edge count accuracy, placement error, and stitch precision/recall.
//!
//! Both sides are first canonicalized the same way: every panel's 3D vertex
//! loop goes through [`recover_placement`], giving an in-plane 2D outline and
//! a rotation/translation. Panels are then paired by minimum-cost assignment.

mod hungarian;

pub use hungarian::hungarian;

use std::collections::HashSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::pattern::{place_panel, recover_placement, EdgeRef, Pattern, Point2, Point3, Stitch};

/// Added to a pair's cost per differing edge.
pub const EDGE_COUNT_PENALTY: f64 = 1000.0;
/// Weight of the 3D translation distance in the pair cost. It only separates
/// panels of identical shape, such as mirrored front and back pieces.
pub const TIE_BREAK_WEIGHT: f64 = 1e-6;

/// One panel in the shared canonical frame.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalPanel {
    pub points: Vec<Point2>,
    /// XYZ Euler angles in radians.
    pub euler: Point3,
    pub translation: Point3,
    pub degenerate: bool,
}

impl CanonicalPanel {
    pub fn edge_count(&self) -> usize {
        self.points.len()
    }
}

pub fn canonicalize(pattern: &Pattern) -> Vec<CanonicalPanel> {
    pattern
        .panels
        .iter()
        .map(|p| {
            let starts: Vec<Point3> = place_panel(p).iter().map(|e| e.start).collect();
            let f = recover_placement(&starts);
            CanonicalPanel {
                points: f.points2d,
                euler: f.euler_deg.map(f64::to_radians),
                translation: f.translation,
                degenerate: f.degenerate,
            }
        })
        .collect()
}

fn centered(points: &[Point2]) -> Vec<Point2> {
    let n = points.len().max(1) as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
    points.iter().map(|p| [p[0] - cx, p[1] - cy]).collect()
}

fn bbox_diagonal(points: &[Point2]) -> f64 {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    if points.is_empty() {
        return 0.0;
    }
    ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
}

/// Best cyclic alignment of two vertex loops.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopAlignment {
    /// Summed vertex distance plus missing-vertex penalties, in cm.
    pub distance: f64,
    /// Predicted vertex `(i + offset) mod n_pred` pairs with GT vertex `i`.
    pub offset: usize,
}

/// Sum of vertex distances after shifting each loop's vertex centroid to the
/// origin, minimized over cyclic shifts of the predicted loop. With unequal
/// counts only the first `min` GT vertices are compared and every missing or
/// extra vertex costs the GT bounding-box diagonal.
pub fn loop_distance(pred: &[Point2], gt: &[Point2]) -> LoopAlignment {
    let (p, g) = (centered(pred), centered(gt));
    let m = p.len().min(g.len());
    let penalty = p.len().abs_diff(g.len()) as f64 * bbox_diagonal(gt);
    let mut best = LoopAlignment {
        distance: f64::INFINITY,
        offset: 0,
    };
    for k in 0..p.len().max(1) {
        let d: f64 = (0..m)
            .map(|i| {
                let a = p[(i + k) % p.len()];
                let b = g[i];
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
            })
            .sum();
        if d < best.distance {
            best = LoopAlignment { distance: d, offset: k };
        }
    }
    best.distance += penalty;
    best
}

/// Matching cost of a predicted/GT panel pair.
pub fn pair_cost(pred: &CanonicalPanel, gt: &CanonicalPanel) -> f64 {
    loop_distance(&pred.points, &gt.points).distance
        + EDGE_COUNT_PENALTY * pred.edge_count().abs_diff(gt.edge_count()) as f64
        + TIE_BREAK_WEIGHT * placement_pair(pred, gt).1
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    /// `(pred panel, gt panel)` pairs in ascending pred order.
    pub pairs: Vec<(usize, usize)>,
    /// Cyclic offset of each pair's loop alignment.
    pub offsets: Vec<usize>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gt: Vec<usize>,
    pub total_cost: f64,
}

/// Builds a matching from explicit pairs.
pub fn matching_from_pairs(pred: &[CanonicalPanel], gt: &[CanonicalPanel], mut pairs: Vec<(usize, usize)>) -> Matching {
    pairs.sort_unstable();
    let offsets = pairs
        .iter()
        .map(|&(p, g)| loop_distance(&pred[p].points, &gt[g].points).offset)
        .collect();
    let total_cost = pairs.iter().map(|&(p, g)| pair_cost(&pred[p], &gt[g])).sum();
    let mp: HashSet<usize> = pairs.iter().map(|x| x.0).collect();
    let mg: HashSet<usize> = pairs.iter().map(|x| x.1).collect();
    Matching {
        unmatched_pred: (0..pred.len()).filter(|i| !mp.contains(i)).collect(),
        unmatched_gt: (0..gt.len()).filter(|i| !mg.contains(i)).collect(),
        pairs,
        offsets,
        total_cost,
    }
}

/// Minimum-cost assignment of canonical panels.
pub fn match_canonical(pred: &[CanonicalPanel], gt: &[CanonicalPanel]) -> Matching {
    let cost: Vec<Vec<f64>> = pred
        .iter()
        .map(|p| gt.iter().map(|g| pair_cost(p, g)).collect())
        .collect();
    let pairs = hungarian(&cost)
        .into_iter()
        .enumerate()
        .filter_map(|(p, g)| g.map(|g| (p, g)))
        .collect();
    matching_from_pairs(pred, gt, pairs)
}

pub fn match_panels(pred: &Pattern, gt: &Pattern) -> Matching {
    match_canonical(&canonicalize(pred), &canonicalize(gt))
}

/// Mean per-pair loop distance over matched pairs; zero without pairs.
pub fn panel_l2(pred: &[CanonicalPanel], gt: &[CanonicalPanel], m: &Matching) -> f64 {
    if m.pairs.is_empty() {
        return 0.0;
    }
    let total: f64 = m
        .pairs
        .iter()
        .map(|&(p, g)| loop_distance(&pred[p].points, &gt[g].points).distance)
        .sum();
    total / m.pairs.len() as f64
}

/// Whether panel counts agree, and how many matched pairs agree in edge count.
pub fn count_acc(pred: &[CanonicalPanel], gt: &[CanonicalPanel], m: &Matching) -> (bool, usize) {
    let edges_ok = m
        .pairs
        .iter()
        .filter(|&&(p, g)| pred[p].edge_count() == gt[g].edge_count())
        .count();
    (pred.len() == gt.len(), edges_ok)
}

fn wrapped(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

/// Placement error of one pair: Euler-angle L2 with wrap-around (radians)
/// and translation L2 (cm).
pub fn placement_pair(pred: &CanonicalPanel, gt: &CanonicalPanel) -> (f64, f64) {
    let rot = (0..3)
        .map(|k| wrapped(pred.euler[k], gt.euler[k]).powi(2))
        .sum::<f64>()
        .sqrt();
    let trans = (0..3)
        .map(|k| (pred.translation[k] - gt.translation[k]).powi(2))
        .sum::<f64>()
        .sqrt();
    (rot, trans)
}

/// Sums of rotation and translation error over matched pairs where neither
/// side is degenerate, with the number of such pairs and of skipped pairs.
pub fn placement_l2(pred: &[CanonicalPanel], gt: &[CanonicalPanel], m: &Matching) -> (f64, f64, usize, usize) {
    let (mut rot, mut trans, mut n, mut skipped) = (0.0, 0.0, 0, 0);
    for &(p, g) in &m.pairs {
        if pred[p].degenerate || gt[g].degenerate {
            skipped += 1;
            continue;
        }
        let (r, t) = placement_pair(&pred[p], &gt[g]);
        rot += r;
        trans += t;
        n += 1;
    }
    (rot, trans, n, skipped)
}

fn translate_ref(r: EdgeRef, pred: &[CanonicalPanel], gt: &[CanonicalPanel], m: &Matching) -> Option<EdgeRef> {
    let idx = m.pairs.iter().position(|&(p, _)| p == r.panel)?;
    let (p, g) = m.pairs[idx];
    let n = pred[p].edge_count();
    if n == 0 || r.edge >= n {
        return None;
    }
    // pred edge e starts at pred vertex e, aligned with GT vertex e − offset
    let e = (r.edge + n - m.offsets[idx] % n) % n;
    (e < gt[g].edge_count()).then_some(EdgeRef::new(g, e))
}

fn unordered(s: Stitch) -> (EdgeRef, EdgeRef) {
    let s = s.normalized();
    (s.0, s.1)
}

/// Precision, recall and F1 of predicted stitches mapped through the matching.
pub fn stitch_prf(
    pred: &Pattern,
    gt: &Pattern,
    pc: &[CanonicalPanel],
    gc: &[CanonicalPanel],
    m: &Matching,
) -> (f64, f64, f64) {
    let truth: HashSet<(EdgeRef, EdgeRef)> = gt.stitches.iter().map(|&s| unordered(s)).collect();
    let mut seen = HashSet::new();
    let mut tp = 0usize;
    for s in &pred.stitches {
        let mapped = translate_ref(s.0, pc, gc, m).zip(translate_ref(s.1, pc, gc, m));
        if let Some((a, b)) = mapped {
            let key = unordered(Stitch(a, b));
            if truth.contains(&key) && seen.insert(key) {
                tp += 1;
            }
        }
    }
    let (np, ng) = (pred.stitches.len(), truth.len());
    let precision = match (np, ng) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        _ => tp as f64 / np as f64,
    };
    let recall = if ng == 0 { 1.0 } else { tp as f64 / ng as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Raw per-sample quantities; [`EvalReport`] pools them.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMetrics {
    pub panel_l2_sum: f64,
    pub matched: usize,
    pub panel_count_ok: bool,
    pub edge_count_ok: usize,
    pub rot_sum: f64,
    pub trans_sum: f64,
    pub placed: usize,
    pub degenerate: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn evaluate_with_matching(
    pred: &Pattern,
    gt: &Pattern,
    pc: &[CanonicalPanel],
    gc: &[CanonicalPanel],
    m: &Matching,
) -> SampleMetrics {
    let (panel_count_ok, edge_count_ok) = count_acc(pc, gc, m);
    let (rot_sum, trans_sum, placed, degenerate) = placement_l2(pc, gc, m);
    let (precision, recall, f1) = stitch_prf(pred, gt, pc, gc, m);
    SampleMetrics {
        panel_l2_sum: panel_l2(pc, gc, m) * m.pairs.len() as f64,
        matched: m.pairs.len(),
        panel_count_ok,
        edge_count_ok,
        rot_sum,
        trans_sum,
        placed,
        degenerate,
        precision,
        recall,
        f1,
    }
}

pub fn evaluate_pair(pred: &Pattern, gt: &Pattern) -> SampleMetrics {
    let (pc, gc) = (canonicalize(pred), canonicalize(gt));
    let m = match_canonical(&pc, &gc);
    evaluate_with_matching(pred, gt, &pc, &gc, &m)
}

/// Aggregate metrics over a set of `(prediction, ground truth)` pairs.
/// Shape, edge and placement terms are pooled over matched panel pairs;
/// panel-count accuracy and stitch scores are averaged over samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub panel_l2: f64,
    pub num_panel_acc: f64,
    pub num_edge_acc: f64,
    pub rot_l2: f64,
    pub trans_l2: f64,
    pub stitch_precision: f64,
    pub stitch_recall: f64,
    pub stitch_f1: f64,
    pub n_samples: usize,
    pub degenerate_panels: usize,
}

fn ratio(num: f64, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num / den as f64
    }
}

impl EvalReport {
    pub fn from_samples(samples: &[SampleMetrics]) -> Self {
        let n = samples.len();
        let matched: usize = samples.iter().map(|s| s.matched).sum();
        let placed: usize = samples.iter().map(|s| s.placed).sum();
        let sum = |f: fn(&SampleMetrics) -> f64| samples.iter().map(f).sum::<f64>();
        Self {
            panel_l2: ratio(sum(|s| s.panel_l2_sum), matched),
            num_panel_acc: ratio(sum(|s| f64::from(u8::from(s.panel_count_ok))), n),
            num_edge_acc: ratio(sum(|s| s.edge_count_ok as f64), matched),
            rot_l2: ratio(sum(|s| s.rot_sum), placed),
            trans_l2: ratio(sum(|s| s.trans_sum), placed),
            stitch_precision: ratio(sum(|s| s.precision), n),
            stitch_recall: ratio(sum(|s| s.recall), n),
            stitch_f1: ratio(sum(|s| s.f1), n),
            n_samples: n,
            degenerate_panels: samples.iter().map(|s| s.degenerate).sum(),
        }
    }

    /// Aligned two-row text table.
    pub fn to_table(&self) -> String {
        let cols = [
            ("Panel L2", self.panel_l2),
            ("#Panel Acc", self.num_panel_acc),
            ("#Edge Acc", self.num_edge_acc),
            ("Rot L2", self.rot_l2),
            ("Trans L2", self.trans_l2),
            ("Stitch Prec", self.stitch_precision),
            ("Stitch Rec", self.stitch_recall),
            ("Stitch F1", self.stitch_f1),
        ];
        let mut head = String::new();
        let mut vals = String::new();
        for (name, v) in cols {
            let cell = format!("{v:.4}");
            let w = name.len().max(cell.len());
            let _ = write!(head, "{name:>w$}  ");
            let _ = write!(vals, "{cell:>w$}  ");
        }
        format!("{}\n{}\n(n = {})\n", head.trim_end(), vals.trim_end(), self.n_samples)
    }
}

/// Evaluates every `(prediction, ground truth)` pair.
pub fn evaluate(pairs: &[(Pattern, Pattern)]) -> EvalReport {
    let samples: Vec<SampleMetrics> = pairs.iter().map(|(p, g)| evaluate_pair(p, g)).collect();
    EvalReport::from_samples(&samples)
}
