//! Seeded synthetic garments with captions and front-view sketches.
//!
//! Three families are generated round-robin: skirts (front and back
//! trapezoids with an optional waistband), tops (eight-edge bodices with an
//! optional pair of sleeves) and dresses (bodice sewn to a skirt). All
//! measurements are whole centimeters so the detailed caption describes the
//! pattern exactly.

mod corpus;
mod sketch;
mod svg;

pub use corpus::{read_corpus, read_manifest, write_corpus, Manifest, ManifestEntry, MANIFEST_FILE};
pub use sketch::{render_sketch, SKETCH_WINDOW};
pub use svg::{render_svg, stitch_colors};

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conditioning::Sketch;
use crate::pattern::{Edge, EdgeRef, Panel, Pattern, Point3, Stitch};

/// Depth of front panels in front of the body plane, and of back panels behind it.
const BODY_DEPTH: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Skirt,
    Top,
    Dress,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Skirt, Family::Top, Family::Dress];

    pub fn name(self) -> &'static str {
        match self {
            Family::Skirt => "skirt",
            Family::Top => "top",
            Family::Dress => "dress",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Inclusive integer ranges, in centimeters, for each sampled measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GarmentTemplate {
    pub waist: (u32, u32),
    pub hem_flare: (u32, u32),
    pub skirt_length: (u32, u32),
    pub waistband_height: (u32, u32),
    pub chest: (u32, u32),
    pub bodice_length: (u32, u32),
    pub armhole_depth: (u32, u32),
    pub neck_width: (u32, u32),
    pub short_sleeve: (u32, u32),
    pub long_sleeve: (u32, u32),
}

impl Default for GarmentTemplate {
    fn default() -> Self {
        Self {
            waist: (60, 90),
            hem_flare: (4, 60),
            skirt_length: (40, 90),
            waistband_height: (3, 6),
            chest: (80, 110),
            bodice_length: (40, 60),
            armhole_depth: (18, 24),
            neck_width: (14, 20),
            short_sleeve: (15, 25),
            long_sleeve: (50, 60),
        }
    }
}

fn pick(rng: &mut impl Rng, (lo, hi): (u32, u32)) -> f64 {
    f64::from(rng.random_range(lo..=hi))
}

/// A generated garment with its two captions and sketch.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusEntry {
    pub family: Family,
    pub pattern: Pattern,
    pub brief: String,
    pub detailed: String,
    pub sketch: Sketch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sleeves {
    None,
    Short,
    Long,
}

struct SkirtSpec {
    waist: f64,
    hem: f64,
    length: f64,
    curved_hem: bool,
    waistband: Option<f64>,
}

struct BodiceSpec {
    chest: f64,
    length: f64,
    armhole: f64,
    neck: f64,
    sleeves: Sleeves,
    sleeve_length: f64,
}

fn skirt_spec(rng: &mut impl Rng, t: &GarmentTemplate, waist: Option<f64>) -> SkirtSpec {
    let waist = waist.unwrap_or_else(|| pick(rng, t.waist));
    let flare = pick(rng, t.hem_flare);
    SkirtSpec {
        waist,
        hem: waist + flare,
        length: pick(rng, t.skirt_length),
        curved_hem: flare >= 20.0,
        waistband: None,
    }
}

fn bodice_spec(rng: &mut impl Rng, t: &GarmentTemplate) -> BodiceSpec {
    let sleeves = match rng.random_range(0..3) {
        0 => Sleeves::None,
        1 => Sleeves::Short,
        _ => Sleeves::Long,
    };
    let sleeve_length = match sleeves {
        Sleeves::None => 0.0,
        Sleeves::Short => pick(rng, t.short_sleeve),
        Sleeves::Long => pick(rng, t.long_sleeve),
    };
    BodiceSpec {
        chest: pick(rng, t.chest),
        length: pick(rng, t.bodice_length),
        armhole: pick(rng, t.armhole_depth),
        neck: pick(rng, t.neck_width),
        sleeves,
        sleeve_length,
    }
}

fn length_word(length: f64) -> &'static str {
    match length as u32 {
        0..=49 => "mini",
        50..=69 => "knee length",
        70..=84 => "midi",
        _ => "maxi",
    }
}

fn front_back(front: bool) -> &'static str {
    if front {
        "front"
    } else {
        "back"
    }
}

/// Panel placed facing the viewer (`front`) or mirrored behind the body.
/// A panel of local width `width` ends up centered on world x = 0.
fn placed(name: String, edges: Vec<Edge>, width: f64, y: f64, front: bool) -> Panel {
    let (rotation, translation): (Point3, Point3) = if front {
        ([0.0, 0.0, 0.0], [-width / 2.0, y, BODY_DEPTH])
    } else {
        ([0.0, 180.0, 0.0], [width / 2.0, y, -BODY_DEPTH])
    };
    Panel {
        name,
        rotation,
        translation,
        edges,
    }
}

/// Front and back skirt trapezoids with edges hem, right side, waist, left side.
fn skirt_panels(s: &SkirtSpec, y: f64) -> Vec<Panel> {
    let hw = s.hem / 2.0;
    let ww = s.waist / 2.0;
    let inset = (hw - ww) / 2.0;
    let mut out = Vec::new();
    for front in [true, false] {
        let hem = if s.curved_hem {
            let sag = ((hw - ww) / 8.0).round();
            Edge::quadratic([0.0, 0.0], [hw / 2.0, -sag])
        } else {
            Edge::line([0.0, 0.0])
        };
        let edges = vec![
            hem,
            Edge::line([hw, 0.0]),
            Edge::line([hw - inset, s.length]),
            Edge::line([inset, s.length]),
        ];
        out.push(placed(format!("skirt_{}", front_back(front)), edges, hw, y, front));
    }
    out
}

fn waistband_panels(width: f64, height: f64, y: f64) -> Vec<Panel> {
    [true, false]
        .into_iter()
        .map(|front| {
            let edges = vec![
                Edge::line([0.0, 0.0]),
                Edge::line([width, 0.0]),
                Edge::line([width, height]),
                Edge::line([0.0, height]),
            ];
            placed(format!("waistband_{}", front_back(front)), edges, width, y, front)
        })
        .collect()
}

/// Eight edges: hem, right side, right armhole, right shoulder, neckline,
/// left shoulder, left armhole, left side.
fn bodice_panels(b: &BodiceSpec, y: f64) -> Vec<Panel> {
    let w = b.chest / 2.0;
    let h = b.length;
    let ha = h - b.armhole;
    let inset = (w / 8.0).round();
    let nl = w / 2.0 - b.neck / 2.0;
    let nr = w / 2.0 + b.neck / 2.0;
    let mut out = Vec::new();
    for front in [true, false] {
        // deeper front neckline: smaller radius over the same chord
        let radius = if front { b.neck * 0.6 } else { b.neck * 1.5 };
        let edges = vec![
            Edge::line([0.0, 0.0]),
            Edge::line([w, 0.0]),
            Edge::quadratic([w, ha], [w - inset, ha + (h - ha) * 0.3]),
            Edge::line([w - inset, h]),
            Edge::arc([nr, h], radius, false, false),
            Edge::line([nl, h]),
            Edge::quadratic([inset, h], [inset, ha + (h - ha) * 0.3]),
            Edge::line([0.0, ha]),
        ];
        out.push(placed(format!("bodice_{}", front_back(front)), edges, w, y, front));
    }
    out
}

/// Sleeve with edges cuff, right underarm, back cap, front cap, left underarm,
/// hung sideways from the armhole in the body plane.
fn sleeve_panel(b: &BodiceSpec, y_bodice: f64, right: bool) -> Panel {
    let w = b.chest / 2.0;
    let cap_width = b.armhole * 1.6;
    let cuff = if b.sleeves == Sleeves::Long { cap_width * 0.55 } else { cap_width * 0.85 };
    let cuff = cuff.round();
    let d = ((cap_width - cuff) / 2.0).round();
    let len = b.sleeve_length;
    // cap halves span the same chord as the armholes they are sewn to
    let inset = (w / 8.0).round();
    let armhole_chord = (inset * inset + b.armhole * b.armhole).sqrt();
    let half = cuff / 2.0 + d;
    let cap_h = (armhole_chord * armhole_chord - half * half).sqrt();
    let edges = vec![
        Edge::line([0.0, 0.0]),
        Edge::line([cuff, 0.0]),
        Edge::line([cuff + d, len]),
        Edge::line([cuff / 2.0, len + cap_h]),
        Edge::line([-d, len]),
    ];
    let top = len + cap_h;
    let y_mid = y_bodice + b.length - b.armhole / 2.0;
    let (rotation, translation) = if right {
        // local +y points toward the body (world −x)
        ([0.0, 0.0, 90.0], [w / 2.0 + top, y_mid - cuff / 2.0, 0.0])
    } else {
        ([0.0, 0.0, -90.0], [-w / 2.0 - top, y_mid + cuff / 2.0, 0.0])
    };
    Panel {
        name: format!("sleeve_{}", if right { "right" } else { "left" }),
        rotation,
        translation,
        edges,
    }
}

fn s(a: (usize, usize), b: (usize, usize)) -> Stitch {
    Stitch(EdgeRef::new(a.0, a.1), EdgeRef::new(b.0, b.1))
}

/// Side seams of a front/back pair whose right side is edge `right` and
/// left side is edge `left`.
fn side_seams(front: usize, back: usize, right: usize, left: usize) -> [Stitch; 2] {
    [s((front, right), (back, left)), s((front, left), (back, right))]
}

/// Bodice seams, plus sleeve seams when sleeve panels are given as
/// `(right, left)` indices.
fn bodice_stitches(front: usize, back: usize, sleeves: Option<(usize, usize)>) -> Vec<Stitch> {
    let mut out = side_seams(front, back, 1, 7).to_vec();
    out.extend(side_seams(front, back, 3, 5));
    if let Some((r, l)) = sleeves {
        for sl in [r, l] {
            out.push(s((sl, 1), (sl, 4)));
        }
        // world-right armholes are front edge 2 and back edge 6
        out.push(s((front, 2), (r, 3)));
        out.push(s((back, 6), (r, 2)));
        out.push(s((front, 6), (l, 3)));
        out.push(s((back, 2), (l, 2)));
    }
    out
}

fn skirt_phrase(sk: &SkirtSpec) -> String {
    format!(
        "waist {} cm, hem {} cm, length {} cm, {} hem",
        sk.waist as u32,
        sk.hem as u32,
        sk.length as u32,
        if sk.curved_hem { "curved" } else { "straight" }
    )
}

fn bodice_phrase(b: &BodiceSpec) -> String {
    format!(
        "chest {} cm, length {} cm, armhole {} cm, neck width {} cm",
        b.chest as u32, b.length as u32, b.armhole as u32, b.neck as u32
    )
}

fn sleeve_word(s: Sleeves) -> &'static str {
    match s {
        Sleeves::None => "sleeveless",
        Sleeves::Short => "short sleeve",
        Sleeves::Long => "long sleeve",
    }
}

fn skirt_style(sk: &SkirtSpec) -> &'static str {
    if sk.hem - sk.waist < 20.0 {
        "straight"
    } else {
        "a-line"
    }
}

fn generate_skirt(rng: &mut impl Rng, t: &GarmentTemplate) -> (Pattern, String, String) {
    let mut sk = skirt_spec(rng, t, None);
    if rng.random_bool(0.5) {
        sk.waistband = Some(pick(rng, t.waistband_height));
    }
    let mut panels = skirt_panels(&sk, 0.0);
    let mut stitches = side_seams(0, 1, 1, 3).to_vec();
    let mut brief = format!("{} {} skirt", length_word(sk.length), skirt_style(&sk));
    let mut detailed = format!(
        "{} {} skirt with {} panels. front and back panels: {}.",
        length_word(sk.length),
        skirt_style(&sk),
        if sk.waistband.is_some() { 4 } else { 2 },
        skirt_phrase(&sk)
    );
    if let Some(h) = sk.waistband {
        panels.extend(waistband_panels(sk.waist / 2.0, h, sk.length));
        stitches.push(s((0, 2), (2, 0)));
        stitches.push(s((1, 2), (3, 0)));
        stitches.extend(side_seams(2, 3, 1, 3));
        brief.push_str(" with waistband");
        detailed.push_str(&format!(" waistband: height {} cm.", h as u32));
    }
    let pattern = Pattern {
        name: String::new(),
        panels,
        stitches,
    };
    (pattern, brief, detailed)
}

fn sleeve_phrase(b: &BodiceSpec) -> String {
    match b.sleeves {
        Sleeves::None => "no sleeves.".into(),
        _ => format!("two {}s: length {} cm.", sleeve_word(b.sleeves), b.sleeve_length as u32),
    }
}

fn generate_top(rng: &mut impl Rng, t: &GarmentTemplate) -> (Pattern, String, String) {
    let b = bodice_spec(rng, t);
    let mut panels = bodice_panels(&b, 0.0);
    let sleeves = if b.sleeves == Sleeves::None {
        None
    } else {
        panels.push(sleeve_panel(&b, 0.0, true));
        panels.push(sleeve_panel(&b, 0.0, false));
        Some((2, 3))
    };
    let stitches = bodice_stitches(0, 1, sleeves);
    let brief = format!("{} top", sleeve_word(b.sleeves));
    let detailed = format!(
        "{} top with {} panels. front and back bodice: {}. {}",
        sleeve_word(b.sleeves),
        panels.len(),
        bodice_phrase(&b),
        sleeve_phrase(&b)
    );
    let pattern = Pattern {
        name: String::new(),
        panels,
        stitches,
    };
    (pattern, brief, detailed)
}

fn generate_dress(rng: &mut impl Rng, t: &GarmentTemplate) -> (Pattern, String, String) {
    let mut b = bodice_spec(rng, t);
    // a dress bodice ends at the waist
    b.length = (b.length * 0.75).round().max(b.armhole + 10.0);
    let sk = skirt_spec(rng, t, Some(b.chest));
    let mut panels = bodice_panels(&b, sk.length);
    panels.extend(skirt_panels(&sk, 0.0));
    let sleeves = if b.sleeves == Sleeves::None {
        None
    } else {
        panels.push(sleeve_panel(&b, sk.length, true));
        panels.push(sleeve_panel(&b, sk.length, false));
        Some((4, 5))
    };
    let mut stitches = bodice_stitches(0, 1, sleeves);
    stitches.extend(side_seams(2, 3, 1, 3));
    stitches.push(s((0, 0), (2, 2)));
    stitches.push(s((1, 0), (3, 2)));
    let brief = format!("{} {} dress", length_word(sk.length), sleeve_word(b.sleeves));
    let detailed = format!(
        "{} {} dress with {} panels. bodice: {}. skirt: {}. {}",
        length_word(sk.length),
        sleeve_word(b.sleeves),
        panels.len(),
        bodice_phrase(&b),
        skirt_phrase(&sk),
        sleeve_phrase(&b)
    );
    let pattern = Pattern {
        name: String::new(),
        panels,
        stitches,
    };
    (pattern, brief, detailed)
}

/// One garment of `family` drawn from `template`.
pub fn generate_entry(family: Family, template: &GarmentTemplate, rng: &mut impl Rng, name: String) -> CorpusEntry {
    let (mut pattern, brief, detailed) = match family {
        Family::Skirt => generate_skirt(rng, template),
        Family::Top => generate_top(rng, template),
        Family::Dress => generate_dress(rng, template),
    };
    pattern.name = name;
    let sketch = render_sketch(&pattern);
    CorpusEntry {
        family,
        pattern,
        brief,
        detailed,
        sketch,
    }
}

/// `n` garments cycling skirt, top, dress, all drawn from one seeded stream.
pub fn generate_corpus(n: usize, seed: u64) -> Vec<CorpusEntry> {
    generate_corpus_with(n, seed, &GarmentTemplate::default())
}

pub fn generate_corpus_with(n: usize, seed: u64, template: &GarmentTemplate) -> Vec<CorpusEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let family = Family::ALL[i % Family::ALL.len()];
            generate_entry(family, template, &mut rng, format!("{family}_{i:04}"))
        })
        .collect()
}
