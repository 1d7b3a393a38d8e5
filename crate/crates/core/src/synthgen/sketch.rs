use crate::conditioning::{Sketch, SKETCH_SIZE};
use crate::pattern::{edge_polyline, to_world, Pattern};

/// World window of the front view: `(min x, min y, side)` in centimeters.
pub const SKETCH_WINDOW: (f64, f64, f64) = (-115.0, -45.0, 230.0);

const CURVE_SEGMENTS: usize = 16;

fn plot(img: &mut Sketch, x: f64, y: f64) {
    let (x0, y0, side) = SKETCH_WINDOW;
    let n = SKETCH_SIZE as f64;
    let col = ((x - x0) / side * n).floor();
    let row = ((y0 + side - y) / side * n).floor();
    if (0.0..n).contains(&col) && (0.0..n).contains(&row) {
        img.set(col as usize, row as usize, 1.0);
    }
}

fn draw_segment(img: &mut Sketch, a: [f64; 2], b: [f64; 2]) {
    let px = SKETCH_WINDOW.2 / SKETCH_SIZE as f64;
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let steps = ((len / px) * 4.0).ceil().max(1.0) as usize;
    for i in 0..=steps {
        let u = i as f64 / steps as f64;
        plot(img, a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1]));
    }
}

/// Orthographic front view (world x right, y up) of every panel outline,
/// drawn as one-pixel polylines on a binary 64×64 image.
pub fn render_sketch(pattern: &Pattern) -> Sketch {
    let mut img = Sketch::blank(SKETCH_SIZE);
    for panel in &pattern.panels {
        for (j, e) in panel.edges.iter().enumerate() {
            let pts = edge_polyline(e, panel.edge_end(j), CURVE_SEGMENTS);
            for w in pts.windows(2) {
                let a = to_world(panel, w[0]);
                let b = to_world(panel, w[1]);
                draw_segment(&mut img, [a[0], a[1]], [b[0], b[1]]);
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::generate_corpus;

    #[test]
    fn sketches_are_binary_and_non_empty() {
        for e in generate_corpus(9, 2) {
            let s = &e.sketch;
            assert!(s.pixels.iter().all(|&v| v == 0.0 || v == 1.0));
            let on = s.pixels.iter().filter(|&&v| v == 1.0).count();
            assert!(on > 40, "{} has {on} pixels", e.pattern.name);
            assert_eq!(*s, render_sketch(&e.pattern));
        }
    }
}
