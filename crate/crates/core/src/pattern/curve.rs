//! Evaluation of edge curves in a panel's 2D frame.

use super::{Arc, Edge, Point2};

/// Center of the circle through `a` and `b` selected by the arc flags.
/// Radii shorter than half the chord are treated as exactly half the chord.
pub fn arc_center(a: Point2, b: Point2, arc: &Arc) -> (Point2, f64) {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let chord = (dx * dx + dy * dy).sqrt();
    let half = chord / 2.0;
    let r = arc.radius.max(half);
    let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    if chord == 0.0 {
        return (mid, r);
    }
    let d = (r * r - half * half).max(0.0).sqrt();
    // left normal of the travel direction
    let n = [-dy / chord, dx / chord];
    // a counter-clockwise minor arc keeps its center on the left
    let side = if arc.ccw != arc.large_arc { 1.0 } else { -1.0 };
    ([mid[0] + side * d * n[0], mid[1] + side * d * n[1]], r)
}

/// Point at parameter `u ∈ [0, 1]` along the edge from `edge.start` to `end`.
pub fn edge_point(edge: &Edge, end: Point2, u: f64) -> Point2 {
    let a = edge.start;
    if let Some(arc) = &edge.arc {
        let (c, r) = arc_center(a, end, arc);
        let t0 = (a[1] - c[1]).atan2(a[0] - c[0]);
        let t1 = (end[1] - c[1]).atan2(end[0] - c[0]);
        let tau = std::f64::consts::TAU;
        let sweep = if arc.ccw {
            (t1 - t0).rem_euclid(tau)
        } else {
            -(t0 - t1).rem_euclid(tau)
        };
        let t = t0 + sweep * u;
        return [c[0] + r * t.cos(), c[1] + r * t.sin()];
    }
    let v = 1.0 - u;
    match edge.control_points.as_slice() {
        [] => [v * a[0] + u * end[0], v * a[1] + u * end[1]],
        [c] => [
            v * v * a[0] + 2.0 * v * u * c[0] + u * u * end[0],
            v * v * a[1] + 2.0 * v * u * c[1] + u * u * end[1],
        ],
        [c1, c2, ..] => [
            v * v * v * a[0] + 3.0 * v * v * u * c1[0] + 3.0 * v * u * u * c2[0] + u * u * u * end[0],
            v * v * v * a[1] + 3.0 * v * v * u * c1[1] + 3.0 * v * u * u * c2[1] + u * u * u * end[1],
        ],
    }
}

/// `segments + 1` points from start to end inclusive; straight edges always
/// give just the two endpoints.
pub fn edge_polyline(edge: &Edge, end: Point2, segments: usize) -> Vec<Point2> {
    let segments = if edge.is_linear() { 1 } else { segments.max(1) };
    (0..=segments)
        .map(|i| edge_point(edge, end, i as f64 / segments as f64))
        .collect()
}
