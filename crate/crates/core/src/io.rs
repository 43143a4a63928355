//! Raster file formats.
//!
//! Binary rasters are plain PBM (`P1`) with a `# t=<t> epsilon=<ε>` comment
//! directly after the magic. Rows are written top row first, so row `r` of
//! the file holds grid row `j = M - 1 - r`.
//!
//! Scalar fields use a small binary format: one ASCII header line
//! `GRF1 rows=<M> cols=<M> t=<t> epsilon=<ε>` then `M·M` little-endian `f64`
//! values in storage order (`j = 0` first, `i` fastest).

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::grid::{BinaryField, GridSpec, ScalarField};

pub fn write_pbm<W: Write>(bin: &BinaryField, mut w: W) -> Result<()> {
    let spec = bin.spec();
    let m = spec.size();
    writeln!(w, "P1")?;
    writeln!(w, "# t={} epsilon={}", spec.half_width(), spec.epsilon())?;
    writeln!(w, "{m} {m}")?;
    let mut line = String::with_capacity(2 * m);
    for j in (0..m).rev() {
        line.clear();
        for i in 0..m {
            if i > 0 {
                line.push(' ');
            }
            line.push(if bin.get(i, j) == 1 { '1' } else { '0' });
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Reads a plain PBM. Without the `t=/epsilon=` comment the grid defaults
/// to unit pixels, `ε = 1` and `t = (M - 1) / 2`.
pub fn read_pbm<R: Read>(mut r: R) -> Result<BinaryField> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;

    let mut geometry: Option<(f64, f64)> = None;
    let mut tokens: Vec<&str> = Vec::new();
    let mut body_start = None;
    // Header: magic, width, height, with comments allowed anywhere.
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let content = line.trim_end_matches(['\r', '\n']);
        let (data, comment) = match content.find('#') {
            Some(k) => (&content[..k], Some(&content[k + 1..])),
            None => (content, None),
        };
        if let Some(c) = comment {
            if geometry.is_none() {
                geometry = parse_geometry_comment(c)?;
            }
        }
        for tok in data.split_whitespace() {
            if tokens.len() < 3 {
                tokens.push(tok);
            }
        }
        offset += line.len();
        if tokens.len() == 3 {
            body_start = Some(offset);
            break;
        }
    }
    let body_start = body_start.ok_or_else(|| Error::Parse("truncated PBM header".into()))?;
    if tokens[0] != "P1" {
        return Err(Error::Parse(format!("expected plain PBM magic P1, found {:?}", tokens[0])));
    }
    let width: usize = tokens[1].parse().map_err(|_| Error::Parse("bad PBM width".into()))?;
    let height: usize = tokens[2].parse().map_err(|_| Error::Parse("bad PBM height".into()))?;
    if width != height {
        return Err(Error::Parse(format!("raster must be square, got {width}x{height}")));
    }
    let m = width;
    let spec = match geometry {
        Some((t, eps)) => GridSpec::with_pixel_width(t, m, eps)?,
        None => GridSpec::with_pixel_width((m as f64 - 1.0) / 2.0, m, 1.0)?,
    };

    let mut digits = Vec::with_capacity(m * m);
    for line in text[body_start..].lines() {
        let data = line.split('#').next().unwrap_or("");
        for c in data.chars().filter(|c| !c.is_whitespace()) {
            match c {
                '0' => digits.push(0u8),
                '1' => digits.push(1u8),
                other => return Err(Error::Parse(format!("unexpected PBM character {other:?}"))),
            }
        }
    }
    if digits.len() != m * m {
        return Err(Error::Parse(format!("expected {} pixels, found {}", m * m, digits.len())));
    }
    let mut values = vec![0u8; m * m];
    for (r, row) in digits.chunks(m).enumerate() {
        let j = m - 1 - r;
        values[j * m..(j + 1) * m].copy_from_slice(row);
    }
    BinaryField::from_vec(spec, values)
}

fn parse_geometry_comment(comment: &str) -> Result<Option<(f64, f64)>> {
    let mut t = None;
    let mut eps = None;
    for part in comment.split_whitespace() {
        if let Some(v) = part.strip_prefix("t=") {
            t = Some(parse_f64(v, "t")?);
        } else if let Some(v) = part.strip_prefix("epsilon=") {
            eps = Some(parse_f64(v, "epsilon")?);
        }
    }
    Ok(t.zip(eps))
}

fn parse_f64(v: &str, what: &str) -> Result<f64> {
    v.parse().map_err(|_| Error::Parse(format!("bad {what} value {v:?}")))
}

pub fn write_grf1<W: Write>(field: &ScalarField, mut w: W) -> Result<()> {
    let spec = field.spec();
    let m = spec.size();
    writeln!(w, "GRF1 rows={m} cols={m} t={} epsilon={}", spec.half_width(), spec.epsilon())?;
    let mut buf = Vec::with_capacity(8 * spec.len());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_grf1<R: BufRead>(mut r: R) -> Result<ScalarField> {
    let mut header = Vec::new();
    r.read_until(b'\n', &mut header)?;
    let header = String::from_utf8(header).map_err(|_| Error::Parse("GRF1 header is not UTF-8".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("GRF1") {
        return Err(Error::Parse("missing GRF1 magic".into()));
    }
    let (mut rows, mut cols, mut t, mut eps) = (None, None, None, None);
    for part in parts {
        let (key, value) =
            part.split_once('=').ok_or_else(|| Error::Parse(format!("malformed header field {part:?}")))?;
        match key {
            "rows" => rows = value.parse::<usize>().ok(),
            "cols" => cols = value.parse::<usize>().ok(),
            "t" => t = Some(parse_f64(value, "t")?),
            "epsilon" => eps = Some(parse_f64(value, "epsilon")?),
            _ => return Err(Error::Parse(format!("unknown header field {key:?}"))),
        }
    }
    let (rows, cols, t, eps) = match (rows, cols, t, eps) {
        (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
        _ => return Err(Error::Parse("GRF1 header needs rows, cols, t and epsilon".into())),
    };
    if rows != cols {
        return Err(Error::Parse(format!("field must be square, got {rows}x{cols}")));
    }
    let spec = GridSpec::with_pixel_width(t, rows, eps)?;
    let mut bytes = vec![0u8; 8 * spec.len()];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::Parse(format!("GRF1 payload shorter than {} values: {e}", spec.len())))?;
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    ScalarField::from_vec(spec, values)
}
