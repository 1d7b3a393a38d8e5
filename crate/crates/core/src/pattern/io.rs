//! Canonical JSON pattern files.
//!
//! Keys are written in declaration order and numbers are rounded to nine
//! significant digits, so `save ∘ load ∘ save` is byte-stable.

use std::path::Path;

use super::{Pattern, Point2, Point3};
use crate::{Error, Result};

fn round_sig9(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { 0.0 } else { v };
    }
    format!("{v:.8e}").parse().unwrap_or(v)
}

fn round2(p: &mut Point2) {
    p.iter_mut().for_each(|v| *v = round_sig9(*v));
}

fn round3(p: &mut Point3) {
    p.iter_mut().for_each(|v| *v = round_sig9(*v));
}

fn rounded(pattern: &Pattern) -> Pattern {
    let mut p = pattern.clone();
    for panel in &mut p.panels {
        round3(&mut panel.rotation);
        round3(&mut panel.translation);
        for e in &mut panel.edges {
            round2(&mut e.start);
            e.control_points.iter_mut().for_each(round2);
            if let Some(a) = &mut e.arc {
                a.radius = round_sig9(a.radius);
            }
        }
    }
    p
}

/// Serializes a pattern to the canonical pretty-printed JSON text.
pub fn to_canonical_json(pattern: &Pattern) -> String {
    let mut s = serde_json::to_string_pretty(&rounded(pattern)).expect("patterns always serialize");
    s.push('\n');
    s
}

/// Parses and validates pattern JSON.
pub fn parse_pattern(text: &str) -> Result<Pattern> {
    let p: Pattern = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    p.validate()?;
    Ok(p)
}

pub fn load_pattern(path: &Path) -> Result<Pattern> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pattern(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn save_pattern(pattern: &Pattern, path: &Path) -> Result<()> {
    std::fs::write(path, to_canonical_json(pattern)).map_err(|e| Error::io(path, e))
}
