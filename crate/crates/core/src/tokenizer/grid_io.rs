//! Binary token-grid files (little-endian):
//!
//! ```text
//! magic b"SDTOKGRD"  8 bytes
//! version u32        1
//! reserved u32       0
//! M, N, D u32 × 3
//! values f32 × (M·N·D), row-major
//! panel_mask  ⌈M/8⌉ bytes, LSB-first
//! edge_mask   ⌈M·N/8⌉ bytes, LSB-first
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{TokenGrid, TokenLayout};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"SDTOKGRD";
const VERSION: u32 = 1;

fn pack(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

fn unpack(bytes: &[u8], n: usize) -> Vec<bool> {
    (0..n).map(|i| bytes[i / 8] & (1 << (i % 8)) != 0).collect()
}

pub fn write_grid<W: Write>(grid: &TokenGrid, mut w: W) -> std::io::Result<()> {
    let l = grid.layout;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for v in [l.max_panels, l.max_edges, l.token_width()] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(grid.values.len() * 4);
    for &v in &grid.values {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    w.write_all(&pack(&grid.panel_mask))?;
    w.write_all(&pack(&grid.edge_mask))
}

fn read_exact(r: &mut impl Read, n: usize, what: &str) -> Result<Vec<u8>> {
    let mut b = vec![0u8; n];
    r.read_exact(&mut b)
        .map_err(|e| Error::Parse(format!("truncated token grid ({what}): {e}")))?;
    Ok(b)
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
}

pub fn read_grid<R: Read>(mut r: R) -> Result<TokenGrid> {
    let header = read_exact(&mut r, 28, "header")?;
    if &header[..8] != MAGIC {
        return Err(Error::Parse("not a token grid file (bad magic)".into()));
    }
    if u32_at(&header, 8) != VERSION {
        return Err(Error::Parse(format!("unsupported token grid version {}", u32_at(&header, 8))));
    }
    let (m, n, d) = (
        u32_at(&header, 16) as usize,
        u32_at(&header, 20) as usize,
        u32_at(&header, 24) as usize,
    );
    if d < 13 || (d - 10) % 3 != 0 {
        return Err(Error::Parse(format!("token width {d} matches no layout")));
    }
    let layout = TokenLayout {
        max_panels: m,
        max_edges: n,
        n_control: (d - 10) / 3,
    };
    layout
        .validate()
        .map_err(|e| Error::Parse(format!("bad grid layout: {e}")))?;
    let raw = read_exact(&mut r, m * n * d * 4, "values")?;
    let values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let pm = read_exact(&mut r, m.div_ceil(8), "panel mask")?;
    let em = read_exact(&mut r, (m * n).div_ceil(8), "edge mask")?;
    Ok(TokenGrid {
        layout,
        values,
        panel_mask: unpack(&pm, m),
        edge_mask: unpack(&em, m * n),
    })
}

pub fn save_grid(grid: &TokenGrid, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_grid(grid, &mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_grid(path: &Path) -> Result<TokenGrid> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_grid(bytes.as_slice())
}
