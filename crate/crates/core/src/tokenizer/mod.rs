//! Pattern ⇄ fixed-size token grid.
//!
//! Each edge becomes one row `start ⊕ controls ⊕ arc ⊕ stitch tag ⊕ flag`
//! in 3D, after placement. Panel `i`, edge `j` lands on row `i·N + j`; the
//! remaining rows are zero padding. Every dimension is shifted and scaled by
//! corpus min/max statistics into `[-1, 1]`.

mod grid_io;

pub use grid_io::{load_grid, read_grid, save_grid, write_grid};

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::pattern::{
    place_pattern, recover_placement, signed_area, Arc, Edge, EdgeRef, Panel, Pattern, Point3,
    Stitch,
};
use crate::{Error, Result};

/// Grid capacity and token width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLayout {
    /// `M`: panels per pattern.
    pub max_panels: usize,
    /// `N`: edges per panel.
    pub max_edges: usize,
    /// `K`: Bézier control-point slots per edge (1 or 2).
    pub n_control: usize,
}

impl TokenLayout {
    pub const DRESSCODE: Self = Self {
        max_panels: 10,
        max_edges: 10,
        n_control: 1,
    };
    pub const GARMENTCODE: Self = Self {
        max_panels: 37,
        max_edges: 39,
        n_control: 2,
    };
    pub const SEWFACTORY: Self = Self {
        max_panels: 14,
        max_edges: 12,
        n_control: 1,
    };

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "dresscode" => Ok(Self::DRESSCODE),
            "garmentcode" => Ok(Self::GARMENTCODE),
            "sewfactory" => Ok(Self::SEWFACTORY),
            other => Err(Error::Config(format!(
                "unknown layout preset {other:?} (expected dresscode, garmentcode or sewfactory)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_panels == 0 || self.max_edges < 3 || !(1..=2).contains(&self.n_control) {
            return Err(Error::Config(format!("invalid token layout {self:?}")));
        }
        Ok(())
    }

    /// `D = 3 + 3K + 3 + 3 + 1`.
    pub fn token_width(&self) -> usize {
        10 + 3 * self.n_control
    }

    /// `M·N`.
    pub fn seq_len(&self) -> usize {
        self.max_panels * self.max_edges
    }

    pub fn control_offset(&self, slot: usize) -> usize {
        3 + 3 * slot
    }

    pub fn arc_offset(&self) -> usize {
        3 + 3 * self.n_control
    }

    pub fn tag_offset(&self) -> usize {
        self.arc_offset() + 3
    }

    pub fn flag_offset(&self) -> usize {
        self.token_width() - 1
    }
}

/// Per-dimension affine normalization `(v − shift) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub layout: TokenLayout,
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Smallest allowed scale, for dimensions that are constant over the corpus.
pub const SCALE_FLOOR: f64 = 1e-6;

impl NormStats {
    pub fn normalize(&self, raw: &[f64], out: &mut [f64]) {
        for (k, (o, &v)) in out.iter_mut().zip(raw).enumerate() {
            *o = (v - self.shift[k]) / self.scale[k];
        }
    }

    pub fn denormalize(&self, norm: &[f64]) -> Vec<f64> {
        norm.iter()
            .enumerate()
            .map(|(k, &v)| v * self.scale[k] + self.shift[k])
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        let d = self.layout.token_width();
        if self.shift.len() != d || self.scale.len() != d {
            return Err(Error::Config(format!(
                "stats carry {}/{} dims for token width {d}",
                self.shift.len(),
                self.scale.len()
            )));
        }
        if self.scale.iter().any(|&s| !(s > 0.0 && s.is_finite())) || self.shift.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("stats scale must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: Self = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("stats serialize");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Raw (unnormalized) token rows, one list per panel in pattern order.
pub fn raw_tokens(pattern: &Pattern, layout: &TokenLayout) -> Result<Vec<Vec<Vec<f64>>>> {
    let d = layout.token_width();
    let placed = place_pattern(pattern);
    let mut out = Vec::with_capacity(pattern.panels.len());
    for (panel, edges) in pattern.panels.iter().zip(&placed) {
        // arc sweep flags are stored relative to the counter-clockwise winding
        let mirrored = signed_area(&panel.vertices()) < 0.0;
        let mut rows = Vec::with_capacity(edges.len());
        for (j, e) in edges.iter().enumerate() {
            if e.controls.len() > layout.n_control {
                return Err(Error::Capacity(format!(
                    "panel {} edge {j} has {} control points; layout holds {}",
                    panel.name,
                    e.controls.len(),
                    layout.n_control
                )));
            }
            let mut row = vec![0.0; d];
            row[..3].copy_from_slice(&e.start);
            for slot in 0..layout.n_control {
                let c = e.controls.get(slot).copied().unwrap_or(e.start);
                let o = layout.control_offset(slot);
                row[o..o + 3].copy_from_slice(&c);
            }
            let a = layout.arc_offset();
            row[a..a + 3].copy_from_slice(&e.arc);
            if mirrored && e.arc[0] > 0.0 {
                row[a + 2] = 1.0 - row[a + 2];
            }
            let t = layout.tag_offset();
            row[t..t + 3].copy_from_slice(&e.stitch_tag);
            row[layout.flag_offset()] = f64::from(u8::from(e.stitch_flag));
            rows.push(row);
        }
        out.push(rows);
    }
    Ok(out)
}

fn check_capacity(pattern: &Pattern, layout: &TokenLayout) -> Result<()> {
    if pattern.panels.len() > layout.max_panels {
        return Err(Error::Capacity(format!(
            "{} panels exceed the layout's {}",
            pattern.panels.len(),
            layout.max_panels
        )));
    }
    if let Some(p) = pattern.panels.iter().find(|p| p.edges.len() > layout.max_edges) {
        return Err(Error::Capacity(format!(
            "panel {} has {} edges; the layout holds {}",
            p.name,
            p.edges.len(),
            layout.max_edges
        )));
    }
    Ok(())
}

/// Min/max statistics over every real edge token of `patterns`.
pub fn compute_stats(patterns: &[Pattern], layout: &TokenLayout) -> Result<NormStats> {
    layout.validate()?;
    if patterns.is_empty() {
        return Err(Error::InvalidArgument("cannot compute statistics of an empty corpus".into()));
    }
    let d = layout.token_width();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in patterns {
        check_capacity(p, layout)?;
        for row in raw_tokens(p, layout)?.iter().flatten() {
            for k in 0..d {
                lo[k] = lo[k].min(row[k]);
                hi[k] = hi[k].max(row[k]);
            }
        }
    }
    Ok(NormStats {
        layout: *layout,
        shift: lo.iter().zip(&hi).map(|(l, h)| (h + l) / 2.0).collect(),
        scale: lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| ((h - l) / 2.0).max(SCALE_FLOOR))
            .collect(),
    })
}

/// Dense normalized token grid plus validity masks.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenGrid {
    pub layout: TokenLayout,
    /// Row-major `(M·N) × D`.
    pub values: Vec<f64>,
    pub panel_mask: Vec<bool>,
    pub edge_mask: Vec<bool>,
}

impl TokenGrid {
    pub fn zeros(layout: TokenLayout) -> Self {
        Self {
            layout,
            values: vec![0.0; layout.seq_len() * layout.token_width()],
            panel_mask: vec![false; layout.max_panels],
            edge_mask: vec![false; layout.seq_len()],
        }
    }

    pub fn rows(&self) -> usize {
        self.layout.seq_len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let d = self.layout.token_width();
        &self.values[r * d..(r + 1) * d]
    }
}

/// Encodes a pattern, optionally shuffling panel order with a seeded RNG.
pub fn encode(pattern: &Pattern, layout: &TokenLayout, stats: &NormStats, shuffle_seed: Option<u64>) -> Result<TokenGrid> {
    encode_with_order(pattern, layout, stats, shuffle_seed).map(|(g, _)| g)
}

/// Like [`encode`], also returning which pattern panel fills each block.
pub fn encode_with_order(
    pattern: &Pattern,
    layout: &TokenLayout,
    stats: &NormStats,
    shuffle_seed: Option<u64>,
) -> Result<(TokenGrid, Vec<usize>)> {
    layout.validate()?;
    if stats.layout != *layout {
        return Err(Error::Config(format!(
            "stats were computed for {:?}, not {layout:?}",
            stats.layout
        )));
    }
    stats.validate()?;
    check_capacity(pattern, layout)?;
    let raw = raw_tokens(pattern, layout)?;
    let mut order: Vec<usize> = (0..pattern.panels.len()).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let d = layout.token_width();
    let mut grid = TokenGrid::zeros(*layout);
    for (block, &src) in order.iter().enumerate() {
        grid.panel_mask[block] = true;
        for (j, row) in raw[src].iter().enumerate() {
            let r = block * layout.max_edges + j;
            grid.edge_mask[r] = true;
            stats.normalize(row, &mut grid.values[r * d..(r + 1) * d]);
        }
    }
    Ok((grid, order))
}

/// Thresholds used when turning (possibly generated) values back into a pattern.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeOptions {
    /// A row is real when its normalized L∞ norm exceeds this.
    pub pad_threshold: f64,
    /// Maximum stitch-tag distance (cm) between paired edges.
    pub stitch_radius: f64,
    /// Control slots closer than this (cm) to the start point are unused.
    pub control_tolerance: f64,
    /// Arc radius (cm) below which an edge is not an arc.
    pub min_arc_radius: f64,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            pad_threshold: 0.02,
            stitch_radius: 3.0,
            control_tolerance: 0.5,
            min_arc_radius: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub pattern: Pattern,
    /// Grid block each decoded panel came from.
    pub blocks: Vec<usize>,
    /// Panels detected but dropped as geometrically degenerate.
    pub dropped_panels: usize,
}

fn dist3(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn p3(v: &[f64]) -> Point3 {
    [v[0], v[1], v[2]]
}

/// Decodes normalized grid values into a pattern. Total: degenerate panels
/// are dropped and counted rather than reported as errors.
pub fn decode(values: &[f64], layout: &TokenLayout, stats: &NormStats, opts: &DecodeOptions) -> Result<Decoded> {
    let d = layout.token_width();
    if values.len() != layout.seq_len() * d {
        return Err(Error::shape(
            "decode",
            format!("{} values for a {}×{d} grid", values.len(), layout.seq_len()),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("decode input".into()));
    }
    let mut panels = Vec::new();
    let mut blocks = Vec::new();
    let mut flagged: Vec<(EdgeRef, Point3)> = Vec::new();
    let mut dropped = 0;

    for block in 0..layout.max_panels {
        let rows: Vec<Vec<f64>> = (0..layout.max_edges)
            .map(|j| &values[(block * layout.max_edges + j) * d..][..d])
            .filter(|row| row.iter().fold(0.0f64, |m, v| m.max(v.abs())) > opts.pad_threshold)
            .map(|row| stats.denormalize(row))
            .collect();
        if rows.is_empty() {
            continue;
        }
        match decode_panel(block, &rows, layout, opts) {
            Some(panel) => {
                let pi = panels.len();
                for (j, row) in rows.iter().enumerate() {
                    if row[layout.flag_offset()] > 0.5 {
                        let t = layout.tag_offset();
                        flagged.push((EdgeRef::new(pi, j), p3(&row[t..t + 3])));
                    }
                }
                panels.push(panel);
                blocks.push(block);
            }
            None => dropped += 1,
        }
    }

    let stitches = pair_stitches(&flagged, opts.stitch_radius);
    Ok(Decoded {
        pattern: Pattern {
            name: "decoded".into(),
            panels,
            stitches,
        },
        blocks,
        dropped_panels: dropped,
    })
}

fn decode_panel(block: usize, rows: &[Vec<f64>], layout: &TokenLayout, opts: &DecodeOptions) -> Option<Panel> {
    if rows.len() < 3 {
        return None;
    }
    let starts: Vec<Point3> = rows.iter().map(|r| p3(&r[..3])).collect();
    let frame = recover_placement(&starts);
    if frame.degenerate {
        return None;
    }
    let n = rows.len();
    let mut edges = Vec::with_capacity(n);
    for (j, row) in rows.iter().enumerate() {
        let start = frame.points2d[j];
        let end = frame.points2d[(j + 1) % n];
        let chord = ((end[0] - start[0]).powi(2) + (end[1] - start[1]).powi(2)).sqrt();
        if chord <= 1e-9 {
            return None;
        }
        let a = layout.arc_offset();
        let edge = if row[a] > opts.min_arc_radius {
            Edge {
                start,
                control_points: Vec::new(),
                arc: Some(Arc {
                    radius: row[a].max(chord / 2.0),
                    large_arc: row[a + 1] > 0.5,
                    ccw: row[a + 2] > 0.5,
                }),
            }
        } else {
            let control_points = (0..layout.n_control)
                .map(|s| &row[layout.control_offset(s)..layout.control_offset(s) + 3])
                .filter(|c| dist3(c, &row[..3]) > opts.control_tolerance)
                .map(|c| frame.project(p3(c)))
                .collect();
            Edge {
                start,
                control_points,
                arc: None,
            }
        };
        edges.push(edge);
    }
    Some(Panel {
        name: format!("panel_{block}"),
        rotation: frame.euler_deg,
        translation: frame.translation,
        edges,
    })
}

/// Greedy mutual-nearest pairing of flagged edges by ascending tag distance.
fn pair_stitches(flagged: &[(EdgeRef, Point3)], radius: f64) -> Vec<Stitch> {
    let mut candidates = Vec::new();
    for i in 0..flagged.len() {
        for j in i + 1..flagged.len() {
            let dd = dist3(&flagged[i].1, &flagged[j].1);
            if dd <= radius {
                candidates.push((dd, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used = vec![false; flagged.len()];
    let mut stitches = Vec::new();
    for (_, i, j) in candidates {
        if used[i] || used[j] {
            continue;
        }
        used[i] = true;
        used[j] = true;
        stitches.push(Stitch(flagged[i].0, flagged[j].0));
    }
    stitches
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::fixtures::*;
    use crate::pattern::place_panel;

    fn stats_for(patterns: &[Pattern], layout: TokenLayout) -> NormStats {
        compute_stats(patterns, &layout).unwrap()
    }

    #[test]
    fn preset_sequence_lengths_and_widths() {
        assert_eq!(TokenLayout::GARMENTCODE.seq_len(), 1443);
        assert_eq!(TokenLayout::DRESSCODE.seq_len(), 100);
        assert_eq!(TokenLayout::SEWFACTORY.seq_len(), 168);
        assert_eq!(TokenLayout::DRESSCODE.token_width(), 13);
        assert_eq!(TokenLayout::GARMENTCODE.token_width(), 16);
        assert!(TokenLayout::preset("nope").is_err());
    }

    #[test]
    fn symmetric_and_constant_dimensions() {
        // x-coordinates of starts span [-50, 50]; arc slots are constant zero
        let mut p = unit_square();
        p.panels[0] = rect("wide", 100.0, 10.0, [0.0; 3], [-50.0, 0.0, 0.0]);
        let s = stats_for(&[p], TokenLayout::DRESSCODE);
        assert_eq!(s.shift[0], 0.0);
        assert_eq!(s.scale[0], 50.0);
        let a = TokenLayout::DRESSCODE.arc_offset();
        assert_eq!(s.shift[a], 0.0);
        assert_eq!(s.scale[a], SCALE_FLOOR);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(compute_stats(&[], &TokenLayout::DRESSCODE).is_err());
    }

    #[test]
    fn single_square_padding_structure() {
        let p = unit_square();
        let layout = TokenLayout::DRESSCODE;
        let s = stats_for(&[p.clone()], layout);
        let g = encode(&p, &layout, &s, None).unwrap();
        assert_eq!(g.rows(), 100);
        for r in 0..g.rows() {
            let nonzero = g.row(r).iter().any(|&v| v != 0.0);
            assert_eq!(nonzero, r < 4, "row {r}");
            assert_eq!(g.edge_mask[r], r < 4);
        }
        assert_eq!(g.panel_mask.iter().filter(|&&m| m).count(), 1);
    }

    #[test]
    fn capacity_and_stats_mismatch() {
        let p = two_rects();
        let small = TokenLayout {
            max_panels: 1,
            max_edges: 10,
            n_control: 1,
        };
        let s = stats_for(&[unit_square()], TokenLayout::DRESSCODE);
        assert!(matches!(encode(&p, &small, &s, None), Err(Error::Capacity(_)) | Err(Error::Config(_))));
        let s_small = NormStats {
            layout: small,
            ..s.clone()
        };
        assert!(matches!(encode(&p, &small, &s_small, None), Err(Error::Capacity(_))));
        assert!(encode(&p, &TokenLayout::SEWFACTORY, &s, None).is_err());

        let mut cubic = unit_square();
        cubic.panels[0].edges[0] = Edge::cubic([0.0, 0.0], [0.3, -0.2], [0.7, -0.2]);
        assert!(matches!(compute_stats(&[cubic.clone()], &TokenLayout::DRESSCODE), Err(Error::Capacity(_))));
        compute_stats(&[cubic], &TokenLayout::GARMENTCODE).unwrap();
    }

    #[test]
    fn two_rect_round_trip() {
        let p = two_rects();
        let layout = TokenLayout::DRESSCODE;
        let s = stats_for(&[p.clone()], layout);
        let g = encode(&p, &layout, &s, None).unwrap();
        let dec = decode(&g.values, &layout, &s, &DecodeOptions::default()).unwrap();
        assert_eq!(dec.pattern.panels.len(), 2);
        assert_eq!(dec.dropped_panels, 0);
        for (a, b) in p.panels.iter().zip(&dec.pattern.panels) {
            for (ea, eb) in place_panel(a).iter().zip(place_panel(b).iter()) {
                assert!(dist3(&ea.start, &eb.start) < 1e-9);
            }
        }
        let mut got: Vec<_> = dec.pattern.stitches.iter().map(|s| s.normalized()).collect();
        let mut want: Vec<_> = p.stitches.iter().map(|s| s.normalized()).collect();
        got.sort_by_key(|s| (s.0, s.1));
        want.sort_by_key(|s| (s.0, s.1));
        assert_eq!(got, want);
    }

    #[test]
    fn all_zero_grid_decodes_to_nothing() {
        let layout = TokenLayout::DRESSCODE;
        let s = stats_for(&[two_rects()], layout);
        let g = TokenGrid::zeros(layout);
        let dec = decode(&g.values, &layout, &s, &DecodeOptions::default()).unwrap();
        assert!(dec.pattern.panels.is_empty());
        assert!(dec.pattern.stitches.is_empty());
    }

    #[test]
    fn arcs_and_curves_survive_round_trip_in_both_windings() {
        let mut p = unit_square();
        p.panels[0] = Panel {
            name: "shaped".into(),
            rotation: [20.0, -35.0, 5.0],
            translation: [3.0, 90.0, -4.0],
            edges: vec![
                Edge::quadratic([0.0, 0.0], [10.0, -3.0]),
                Edge::line([20.0, 0.0]),
                Edge::arc([20.0, 15.0], 12.0, false, false),
                Edge::line([0.0, 15.0]),
            ],
        };
        let mut mirrored = p.clone();
        mirrored.panels[0].edges = vec![
            Edge::line([0.0, 0.0]),
            Edge::arc([0.0, 15.0], 12.0, false, true),
            Edge::line([20.0, 15.0]),
            Edge::quadratic([20.0, 0.0], [10.0, -3.0]),
        ];
        for pat in [p, mirrored] {
            let layout = TokenLayout::DRESSCODE;
            let s = stats_for(&[pat.clone(), two_rects()], layout);
            let g = encode(&pat, &layout, &s, None).unwrap();
            let dec = decode(&g.values, &layout, &s, &DecodeOptions::default()).unwrap();
            let orig = place_panel(&pat.panels[0]);
            let back = place_panel(&dec.pattern.panels[0]);
            for (a, b) in orig.iter().zip(&back) {
                assert!(dist3(&a.start, &b.start) < 1e-9);
                assert_eq!(a.controls.len(), b.controls.len());
                for (ca, cb) in a.controls.iter().zip(&b.controls) {
                    assert!(dist3(ca, cb) < 1e-9);
                }
                assert_eq!(a.arc[0] > 0.0, b.arc[0] > 0.0);
            }
            // the decoded frame always winds counter-clockwise; the arc keeps
            // the same 3D sweep, so the flag agrees with the original winding
            let orig_ccw = signed_area(&pat.panels[0].vertices()) > 0.0;
            let arc_idx = pat.panels[0].edges.iter().position(|e| e.arc.is_some()).unwrap();
            let flag = pat.panels[0].edges[arc_idx].arc.unwrap().ccw;
            let back_arc = dec.pattern.panels[0].edges.iter().find_map(|e| e.arc).unwrap();
            assert_eq!(back_arc.ccw, if orig_ccw { flag } else { !flag });
        }
    }

    #[test]
    fn stitch_pairing_prefers_closest_mutual_pairs() {
        let e = |p, j| EdgeRef::new(p, j);
        let flagged = vec![
            (e(0, 0), [0.0, 0.0, 0.0]),
            (e(1, 0), [0.5, 0.0, 0.0]),
            (e(2, 0), [0.7, 0.0, 0.0]),
            (e(3, 0), [10.0, 0.0, 0.0]),
        ];
        let s = pair_stitches(&flagged, 3.0);
        assert_eq!(s, vec![Stitch(e(1, 0), e(2, 0))]);
    }
}
