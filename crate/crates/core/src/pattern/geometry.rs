use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::{Panel, Pattern, Point2, Point3};

/// Row-major 3×3 matrix.
pub type Mat3 = [[f64; 3]; 3];

/// An edge lifted into 3D by its panel placement.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacedEdge {
    pub start: Point3,
    pub end: Point3,
    pub controls: Vec<Point3>,
    /// `[radius, large_arc, ccw]` with the flags as 0/1.
    pub arc: [f64; 3],
    pub stitch_tag: Point3,
    pub stitch_flag: bool,
}

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn apply(m: &Mat3, p: Point3) -> Point3 {
    [
        m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
        m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
        m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
    ]
}

/// `Rx(x)·Ry(y)·Rz(z)` for Euler angles in degrees.
pub fn rotation_matrix(euler_deg: Point3) -> Mat3 {
    let [a, b, c] = euler_deg.map(f64::to_radians);
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let (sc, cc) = c.sin_cos();
    let rx = [[1.0, 0.0, 0.0], [0.0, ca, -sa], [0.0, sa, ca]];
    let ry = [[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]];
    let rz = [[cc, -sc, 0.0], [sc, cc, 0.0], [0.0, 0.0, 1.0]];
    mat_mul(&rx, &mat_mul(&ry, &rz))
}

/// Inverse of [`rotation_matrix`], in degrees. At gimbal lock the z angle is
/// reported as zero.
pub fn euler_from_matrix(r: &Mat3) -> Point3 {
    let sb = r[0][2].clamp(-1.0, 1.0);
    let b = sb.asin();
    let (a, c) = if b.cos() > 1e-9 {
        ((-r[1][2]).atan2(r[2][2]), (-r[0][1]).atan2(r[0][0]))
    } else {
        (r[2][1].atan2(r[1][1]), 0.0)
    };
    [a.to_degrees(), b.to_degrees(), c.to_degrees()]
}

fn lift(m: &Mat3, t: Point3, p: Point2) -> Point3 {
    let q = apply(m, [p[0], p[1], 0.0]);
    [q[0] + t[0], q[1] + t[1], q[2] + t[2]]
}

/// World position of a point given in `panel`'s 2D frame.
pub fn to_world(panel: &Panel, p: Point2) -> Point3 {
    lift(&rotation_matrix(panel.rotation), panel.translation, p)
}

/// Lifts a panel into 3D: `(x, y) ↦ R·(x, y, 0) + t`. Stitch fields are
/// left empty; see [`compute_stitch_tags`].
pub fn place_panel(panel: &Panel) -> Vec<PlacedEdge> {
    let r = rotation_matrix(panel.rotation);
    let t = panel.translation;
    let n = panel.edges.len();
    panel
        .edges
        .iter()
        .enumerate()
        .map(|(j, e)| PlacedEdge {
            start: lift(&r, t, e.start),
            end: lift(&r, t, panel.edges[(j + 1) % n].start),
            controls: e.control_points.iter().map(|&c| lift(&r, t, c)).collect(),
            arc: match e.arc {
                Some(a) => [a.radius, f64::from(u8::from(a.large_arc)), f64::from(u8::from(a.ccw))],
                None => [0.0; 3],
            },
            stitch_tag: [0.0; 3],
            stitch_flag: false,
        })
        .collect()
}

/// Sets the tag of both edges of every stitch to the mean of their four
/// endpoints and raises their flags.
pub fn compute_stitch_tags(pattern: &Pattern, placed: &mut [Vec<PlacedEdge>]) {
    for s in &pattern.stitches {
        let a = &placed[s.0.panel][s.0.edge];
        let b = &placed[s.1.panel][s.1.edge];
        let mut tag = [0.0; 3];
        for (k, v) in tag.iter_mut().enumerate() {
            *v = (a.start[k] + a.end[k] + b.start[k] + b.end[k]) / 4.0;
        }
        for r in [s.0, s.1] {
            let e = &mut placed[r.panel][r.edge];
            e.stitch_tag = tag;
            e.stitch_flag = true;
        }
    }
}

/// Places every panel and fills in stitch tags.
pub fn place_pattern(pattern: &Pattern) -> Vec<Vec<PlacedEdge>> {
    let mut placed: Vec<_> = pattern.panels.iter().map(place_panel).collect();
    compute_stitch_tags(pattern, &mut placed);
    placed
}

/// Shoelace signed area; positive for counter-clockwise loops.
pub fn signed_area(points: &[Point2]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|i| {
            let (p, q) = (points[i], points[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Canonical in-plane frame of a 3D panel outline.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveredFrame {
    /// Columns are the in-plane x axis, in-plane y axis, and normal.
    pub rotation: Mat3,
    pub euler_deg: Point3,
    /// Centroid of the input points.
    pub translation: Point3,
    pub points2d: Vec<Point2>,
    pub degenerate: bool,
}

impl RecoveredFrame {
    /// Expresses a 3D point in the frame's 2D coordinates (dropping the
    /// out-of-plane component).
    pub fn project(&self, p: Point3) -> Point2 {
        let d = [
            p[0] - self.translation[0],
            p[1] - self.translation[1],
            p[2] - self.translation[2],
        ];
        let r = &self.rotation;
        [
            r[0][0] * d[0] + r[1][0] * d[1] + r[2][0] * d[2],
            r[0][1] * d[0] + r[1][1] * d[1] + r[2][1] * d[2],
        ]
    }

    pub fn lift(&self, p: Point2) -> Point3 {
        lift(&self.rotation, self.translation, p)
    }
}

fn identity() -> Mat3 {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

/// Recovers a rigid placement and 2D outline from a panel's 3D vertices.
///
/// The translation is the centroid and the normal is the least-variance
/// principal axis, oriented so the outline winds counter-clockwise. The
/// in-plane x axis follows the first edge's chord. Collinear input yields an
/// identity rotation and `degenerate = true`.
pub fn recover_placement(points: &[Point3]) -> RecoveredFrame {
    let n = points.len().max(1) as f64;
    let mut c = [0.0; 3];
    for p in points {
        for k in 0..3 {
            c[k] += p[k] / n;
        }
    }
    let centered: Vec<Vector3<f64>> = points
        .iter()
        .map(|p| Vector3::new(p[0] - c[0], p[1] - c[1], p[2] - c[2]))
        .collect();

    let fallback = |centered: &[Vector3<f64>]| RecoveredFrame {
        rotation: identity(),
        euler_deg: [0.0; 3],
        translation: c,
        points2d: centered.iter().map(|v| [v.x, v.y]).collect(),
        degenerate: true,
    };
    if points.len() < 3 {
        return fallback(&centered);
    }

    let mut cov = Matrix3::zeros();
    for v in &centered {
        cov += v * v.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let (lo, mid, hi) = (
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    );
    if hi <= 1e-18 || mid <= 1e-10 * hi {
        return fallback(&centered);
    }
    debug_assert!(lo <= mid);
    let mut normal: Vector3<f64> = eig.eigenvectors.column(order[0]).into_owned().normalize();

    let chord = centered[1] - centered[0];
    let mut x = chord - normal * chord.dot(&normal);
    if x.norm() <= 1e-12 * hi.sqrt().max(1.0) {
        x = eig.eigenvectors.column(order[2]).into_owned();
    }
    let x = x.normalize();
    let mut y = normal.cross(&x);

    let project = |v: &Vector3<f64>, y: &Vector3<f64>| [v.dot(&x), v.dot(y)];
    let pts: Vec<Point2> = centered.iter().map(|v| project(v, &y)).collect();
    let pts = if signed_area(&pts) < 0.0 {
        normal = -normal;
        y = -y;
        centered.iter().map(|v| project(v, &y)).collect()
    } else {
        pts
    };

    let rotation = [
        [x.x, y.x, normal.x],
        [x.y, y.y, normal.y],
        [x.z, y.z, normal.z],
    ];
    RecoveredFrame {
        euler_deg: euler_from_matrix(&rotation),
        rotation,
        translation: c,
        points2d: pts,
        degenerate: false,
    }
}
