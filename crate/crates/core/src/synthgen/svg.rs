use std::collections::HashMap;
use std::fmt::Write;

use crate::pattern::{edge_polyline, EdgeRef, Pattern, Point2};

const MARGIN: f64 = 10.0;
const PALETTE: [&str; 10] = [
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6", "#9a6324", "#800000",
    "#008080",
];
const UNSTITCHED: &str = "#222222";

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Stroke color of every stitched edge; the two edges of a stitch share one.
pub fn stitch_colors(pattern: &Pattern) -> HashMap<EdgeRef, &'static str> {
    let mut colors = HashMap::new();
    for (i, s) in pattern.stitches.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        colors.insert(s.0, c);
        colors.insert(s.1, c);
    }
    colors
}

/// Flat drawing of the panels in a grid, one `<g>` per panel and one
/// `<path>` per edge. Stitched edge pairs share a stroke color.
pub fn render_svg(pattern: &Pattern) -> String {
    let colors = stitch_colors(pattern);
    // bounding boxes in each panel's own frame
    let boxes: Vec<(Point2, Point2)> = pattern
        .panels
        .iter()
        .map(|p| {
            let mut lo = [f64::INFINITY; 2];
            let mut hi = [f64::NEG_INFINITY; 2];
            for (j, e) in p.edges.iter().enumerate() {
                for q in edge_polyline(e, p.edge_end(j), 16) {
                    for k in 0..2 {
                        lo[k] = lo[k].min(q[k]);
                        hi[k] = hi[k].max(q[k]);
                    }
                }
            }
            (lo, hi)
        })
        .collect();
    let cell_w = boxes.iter().map(|(l, h)| h[0] - l[0]).fold(0.0, f64::max) + 2.0 * MARGIN;
    let cell_h = boxes.iter().map(|(l, h)| h[1] - l[1]).fold(0.0, f64::max) + 2.0 * MARGIN;
    let n = pattern.panels.len().max(1);
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let (width, height) = (cell_w * cols as f64, cell_h * rows as f64);

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1}cm" height="{height:.1}cm" viewBox="0 0 {width:.3} {height:.3}">"#
    );
    let _ = writeln!(out, "  <title>{}</title>", escape(&pattern.name));
    for (pi, (panel, (lo, hi))) in pattern.panels.iter().zip(&boxes).enumerate() {
        let (cx, cy) = ((pi % cols) as f64 * cell_w, (pi / cols) as f64 * cell_h);
        // local (x, y) ↦ svg (x − lo_x + cx + m, hi_y − y + cy + m), y pointing down
        let tx = cx + MARGIN - lo[0];
        let ty = cy + MARGIN + hi[1];
        let _ = writeln!(
            out,
            r#"  <g id="panel-{pi}" data-name="{}" transform="translate({tx:.3} {ty:.3}) scale(1 -1)">"#,
            escape(&panel.name)
        );
        for (j, e) in panel.edges.iter().enumerate() {
            let end = panel.edge_end(j);
            let a = e.start;
            let mut d = format!("M {:.3} {:.3} ", a[0], a[1]);
            if let Some(arc) = &e.arc {
                // the y flip turns counter-clockwise into the positive sweep direction
                let _ = write!(
                    d,
                    "A {r:.3} {r:.3} 0 {} {} {:.3} {:.3}",
                    u8::from(arc.large_arc),
                    u8::from(arc.ccw),
                    end[0],
                    end[1],
                    r = arc.radius
                );
            } else {
                match e.control_points.as_slice() {
                    [] => {
                        let _ = write!(d, "L {:.3} {:.3}", end[0], end[1]);
                    }
                    [c] => {
                        let _ = write!(d, "Q {:.3} {:.3} {:.3} {:.3}", c[0], c[1], end[0], end[1]);
                    }
                    [c1, c2, ..] => {
                        let _ = write!(
                            d,
                            "C {:.3} {:.3} {:.3} {:.3} {:.3} {:.3}",
                            c1[0], c1[1], c2[0], c2[1], end[0], end[1]
                        );
                    }
                }
            }
            let color = colors.get(&EdgeRef::new(pi, j)).copied().unwrap_or(UNSTITCHED);
            let _ = writeln!(
                out,
                r#"    <path data-edge="{j}" d="{d}" fill="none" stroke="{color}" stroke-width="0.5"/>"#
            );
        }
        out.push_str("  </g>\n");
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::fixtures::{two_rects, unit_square};

    #[test]
    fn square_has_four_paths() {
        let svg = render_svg(&unit_square());
        assert_eq!(svg.matches("<path").count(), 4);
        assert_eq!(svg.matches("<g ").count(), 1);
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn stitched_pairs_share_colors() {
        let mut p = two_rects();
        p.stitches.truncate(1);
        let colors = stitch_colors(&p);
        assert_eq!(colors.len(), 2);
        let svg = render_svg(&p);
        let stitched: Vec<_> = svg.lines().filter(|l| l.contains("<path") && !l.contains(UNSTITCHED)).collect();
        assert_eq!(stitched.len(), 2);
    }
}
