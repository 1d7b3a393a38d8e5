use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusEntry, Family};
use crate::conditioning::Sketch;
use crate::pattern::{load_pattern, save_pattern};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub name: String,
    pub family: Family,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub count: usize,
    pub entries: Vec<ManifestEntry>,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, format!("{text}\n")).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map(|s| s.trim_end().to_string())
        .map_err(|e| Error::io(path, e))
}

/// Writes `NNNN/{pattern.json, brief.txt, detailed.txt, sketch.pgm}` per entry
/// plus `manifest.json`.
pub fn write_corpus(dir: &Path, entries: &[CorpusEntry], seed: u64) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = Manifest {
        seed,
        count: entries.len(),
        entries: Vec::with_capacity(entries.len()),
    };
    for (i, e) in entries.iter().enumerate() {
        let id = format!("{i:04}");
        let sub = dir.join(&id);
        std::fs::create_dir_all(&sub).map_err(|err| Error::io(&sub, err))?;
        save_pattern(&e.pattern, &sub.join("pattern.json"))?;
        write_text(&sub.join("brief.txt"), &e.brief)?;
        write_text(&sub.join("detailed.txt"), &e.detailed)?;
        e.sketch.save(&sub.join("sketch.pgm"))?;
        manifest.entries.push(ManifestEntry {
            id,
            name: e.pattern.name.clone(),
            family: e.family,
        });
    }
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    write_text(&path, &json)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = read_text(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Reads a corpus written by [`write_corpus`].
pub fn read_corpus(dir: &Path) -> Result<(Manifest, Vec<CorpusEntry>)> {
    let manifest = read_manifest(dir)?;
    let mut entries = Vec::with_capacity(manifest.entries.len());
    for m in &manifest.entries {
        let sub = dir.join(&m.id);
        entries.push(CorpusEntry {
            family: m.family,
            pattern: load_pattern(&sub.join("pattern.json"))?,
            brief: read_text(&sub.join("brief.txt"))?,
            detailed: read_text(&sub.join("detailed.txt"))?,
            sketch: Sketch::load(&sub.join("sketch.pgm"))?,
        });
    }
    if entries.len() != manifest.count {
        return Err(Error::Validation(format!(
            "manifest lists {} entries but claims {}",
            entries.len(),
            manifest.count
        )));
    }
    Ok((manifest, entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::generate_corpus;

    #[test]
    fn corpus_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate_corpus(4, 11);
        let m = write_corpus(dir.path(), &corpus, 11).unwrap();
        assert_eq!(m.count, 4);
        assert!(dir.path().join("0003/sketch.pgm").exists());
        let (m2, back) = read_corpus(dir.path()).unwrap();
        assert_eq!(m, m2);
        for (a, b) in corpus.iter().zip(&back) {
            assert_eq!(a.brief, b.brief);
            assert_eq!(a.detailed, b.detailed);
            assert_eq!(a.sketch, b.sketch);
            assert_eq!(a.pattern.stitches, b.pattern.stitches);
        }
    }
}
