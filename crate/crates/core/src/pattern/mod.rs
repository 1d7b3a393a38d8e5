//! Sewing patterns: panels of connected 2D edges, their 3D placement, and
//! the stitches that pair edges.

mod curve;
mod geometry;
mod io;

pub use curve::{arc_center, edge_point, edge_polyline};

pub use geometry::{
    compute_stitch_tags, euler_from_matrix, place_panel, place_pattern, recover_placement,
    rotation_matrix, signed_area, to_world, Mat3, PlacedEdge, RecoveredFrame,
};
pub use io::{load_pattern, parse_pattern, save_pattern, to_canonical_json};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Point2 = [f64; 2];
pub type Point3 = [f64; 3];

/// Circular arc parameters: radius plus the two SVG-style flags.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub radius: f64,
    pub large_arc: bool,
    pub ccw: bool,
}

/// One panel boundary segment. The end point is the next edge's start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub start: Point2,
    #[serde(default)]
    pub control_points: Vec<Point2>,
    #[serde(default)]
    pub arc: Option<Arc>,
}

impl Edge {
    pub fn line(start: Point2) -> Self {
        Self {
            start,
            control_points: Vec::new(),
            arc: None,
        }
    }

    pub fn quadratic(start: Point2, control: Point2) -> Self {
        Self {
            start,
            control_points: vec![control],
            arc: None,
        }
    }

    pub fn cubic(start: Point2, c1: Point2, c2: Point2) -> Self {
        Self {
            start,
            control_points: vec![c1, c2],
            arc: None,
        }
    }

    pub fn arc(start: Point2, radius: f64, large_arc: bool, ccw: bool) -> Self {
        Self {
            start,
            control_points: Vec::new(),
            arc: Some(Arc {
                radius,
                large_arc,
                ccw,
            }),
        }
    }

    pub fn is_linear(&self) -> bool {
        self.control_points.is_empty() && self.arc.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub name: String,
    /// XYZ Euler angles in degrees, applied as `R = Rx·Ry·Rz`.
    pub rotation: Point3,
    /// Centimeters.
    pub translation: Point3,
    pub edges: Vec<Edge>,
}

impl Panel {
    /// Vertex loop: the start point of every edge.
    pub fn vertices(&self) -> Vec<Point2> {
        self.edges.iter().map(|e| e.start).collect()
    }

    /// End point of edge `j`.
    pub fn edge_end(&self, j: usize) -> Point2 {
        self.edges[(j + 1) % self.edges.len()].start
    }
}

/// Reference to edge `edge` of panel `panel`; serialized as `[panel, edge]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct EdgeRef {
    pub panel: usize,
    pub edge: usize,
}

impl EdgeRef {
    pub fn new(panel: usize, edge: usize) -> Self {
        Self { panel, edge }
    }
}

impl From<[usize; 2]> for EdgeRef {
    fn from([panel, edge]: [usize; 2]) -> Self {
        Self { panel, edge }
    }
}

impl From<EdgeRef> for [usize; 2] {
    fn from(r: EdgeRef) -> Self {
        [r.panel, r.edge]
    }
}

/// Two edges sewn together.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Stitch(pub EdgeRef, pub EdgeRef);

impl Stitch {
    /// The pair with the smaller reference first.
    pub fn normalized(self) -> Self {
        if self.1 < self.0 {
            Stitch(self.1, self.0)
        } else {
            self
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub name: String,
    pub panels: Vec<Panel>,
    #[serde(default)]
    pub stitches: Vec<Stitch>,
}

fn finite2(p: &Point2) -> bool {
    p.iter().all(|v| v.is_finite())
}

fn dist2(a: Point2, b: Point2) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl Pattern {
    /// Checks every structural invariant of a pattern.
    pub fn validate(&self) -> Result<()> {
        if self.panels.is_empty() {
            return Err(Error::Validation(format!("pattern {:?} has no panels", self.name)));
        }
        for (pi, panel) in self.panels.iter().enumerate() {
            validate_panel(pi, panel)?;
        }
        let mut used = std::collections::HashSet::new();
        for (si, s) in self.stitches.iter().enumerate() {
            for r in [s.0, s.1] {
                let ok = self
                    .panels
                    .get(r.panel)
                    .map(|p| r.edge < p.edges.len())
                    .unwrap_or(false);
                if !ok {
                    return Err(Error::Validation(format!(
                        "stitch {si} references missing edge [{}, {}]",
                        r.panel, r.edge
                    )));
                }
            }
            if s.0 == s.1 {
                return Err(Error::Validation(format!("stitch {si} pairs an edge with itself")));
            }
            for r in [s.0, s.1] {
                if !used.insert(r) {
                    return Err(Error::Validation(format!(
                        "edge [{}, {}] appears in more than one stitch",
                        r.panel, r.edge
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn edge_count(&self) -> usize {
        self.panels.iter().map(|p| p.edges.len()).sum()
    }

    /// The first `k` panels and the stitches between them.
    pub fn prefix(&self, k: usize) -> Pattern {
        let k = k.min(self.panels.len());
        Pattern {
            name: self.name.clone(),
            panels: self.panels[..k].to_vec(),
            stitches: self
                .stitches
                .iter()
                .filter(|s| s.0.panel < k && s.1.panel < k)
                .copied()
                .collect(),
        }
    }
}

fn validate_panel(pi: usize, panel: &Panel) -> Result<()> {
    let n = panel.edges.len();
    if n < 3 {
        return Err(Error::Validation(format!(
            "panel {pi} ({}) has {n} edges; a closed loop needs at least 3",
            panel.name
        )));
    }
    if !panel.rotation.iter().chain(&panel.translation).all(|v| v.is_finite()) {
        return Err(Error::Validation(format!("panel {pi} has a non-finite placement")));
    }
    for (j, e) in panel.edges.iter().enumerate() {
        if !finite2(&e.start) || !e.control_points.iter().all(finite2) {
            return Err(Error::Validation(format!("panel {pi} edge {j} has non-finite coordinates")));
        }
        if e.control_points.len() > 2 {
            return Err(Error::Validation(format!(
                "panel {pi} edge {j} has {} control points (max 2)",
                e.control_points.len()
            )));
        }
        let end = panel.edge_end(j);
        let chord = dist2(e.start, end);
        if chord <= 1e-9 {
            return Err(Error::Validation(format!(
                "panel {pi} edge {j} has zero length; the loop is not a proper closed outline"
            )));
        }
        if let Some(arc) = e.arc {
            if !e.control_points.is_empty() {
                return Err(Error::Validation(format!(
                    "panel {pi} edge {j} is an arc with control points"
                )));
            }
            if !(arc.radius.is_finite() && arc.radius > 0.0) {
                return Err(Error::Validation(format!("panel {pi} edge {j} arc radius must be > 0")));
            }
            if arc.radius < chord / 2.0 * (1.0 - 1e-9) {
                return Err(Error::Validation(format!(
                    "panel {pi} edge {j} arc radius {} is shorter than half its chord {}",
                    arc.radius,
                    chord / 2.0
                )));
            }
        }
    }
    Ok(())
}
