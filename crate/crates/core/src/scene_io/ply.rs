//! Reader and writer for the standard 3DGS point file (binary little-endian PLY).
//!
//! A trained scene stores 62 float properties per point. Loading decodes them
//! into [`Gaussian`] records: normals are dropped, opacity goes through a
//! sigmoid, log-scales are exponentiated, the quaternion is normalized and
//! the spherical harmonics are regrouped coefficient-major.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::gaussian::{Gaussian, SH_COEFFS, SH_LEN};

/// Properties per point in a 3DGS file.
pub const PLY_PROPERTIES: usize = 62;
const PLY_RECORD_BYTES: usize = PLY_PROPERTIES * 4;
const MAX_HEADER_BYTES: usize = 64 * 1024;

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("malformed header (line {line}): {reason}")]
    Header { line: usize, reason: String },
    #[error("expected {PLY_PROPERTIES} vertex properties, found {found}")]
    PropertyCount { found: usize },
    #[error("missing vertex property `{0}`")]
    MissingProperty(String),
    #[error("record {record}: data truncated ({available} of {needed} bytes present)")]
    Truncated { record: usize, needed: usize, available: usize },
    #[error("record {record}: non-finite value in `{property}`")]
    NonFinite { record: usize, property: String },
    #[error("record {record}: zero-length rotation quaternion")]
    DegenerateRotation { record: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Canonical property order written by the reference trainer.
pub fn property_names() -> Vec<String> {
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..45).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names
}

/// Column of each canonical property inside a file record.
struct Layout {
    columns: [usize; PLY_PROPERTIES],
}

struct Header {
    vertex_count: usize,
    layout: Layout,
    body_offset: usize,
}

fn header_err(line: usize, reason: impl Into<String>) -> PlyError {
    PlyError::Header { line, reason: reason.into() }
}

fn parse_header(data: &[u8]) -> Result<Header, PlyError> {
    let scan = &data[..data.len().min(MAX_HEADER_BYTES)];
    let mut lines = Vec::new();
    let mut start = 0;
    let mut body_offset = None;
    for (i, &b) in scan.iter().enumerate() {
        if b == b'\n' {
            let raw = &scan[start..i];
            let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
            let text = std::str::from_utf8(raw)
                .map_err(|_| header_err(lines.len() + 1, "header is not valid UTF-8"))?;
            let done = text.trim() == "end_header";
            lines.push(text.to_string());
            start = i + 1;
            if done {
                body_offset = Some(start);
                break;
            }
        }
    }
    let body_offset = body_offset.ok_or_else(|| header_err(lines.len() + 1, "no `end_header` line"))?;

    let mut it = lines.iter().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match it.next() {
        Some((_, "ply")) => {}
        _ => return Err(header_err(1, "missing `ply` magic")),
    }
    let mut format_seen = false;
    let mut vertex_count = None;
    let mut names: Vec<String> = Vec::new();
    for (line, text) in it {
        let mut words = text.split_whitespace();
        match words.next() {
            Some("format") => {
                let kind = words.next().unwrap_or_default();
                if kind != "binary_little_endian" {
                    return Err(header_err(line, format!("unsupported format `{kind}`")));
                }
                if words.next() != Some("1.0") {
                    return Err(header_err(line, "unsupported format version"));
                }
                format_seen = true;
            }
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                let name = words.next().unwrap_or_default();
                if name != "vertex" || vertex_count.is_some() {
                    return Err(header_err(line, format!("unexpected element `{name}`")));
                }
                let count = words
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| header_err(line, "bad vertex count"))?;
                vertex_count = Some(count);
            }
            Some("property") => {
                if vertex_count.is_none() {
                    return Err(header_err(line, "property before element"));
                }
                let ty = words.next().unwrap_or_default();
                if ty != "float" && ty != "float32" {
                    return Err(header_err(line, format!("property type `{ty}` is not float")));
                }
                let name = words.next().ok_or_else(|| header_err(line, "property without name"))?;
                if names.iter().any(|n| n == name) {
                    return Err(header_err(line, format!("duplicate property `{name}`")));
                }
                names.push(name.to_string());
            }
            Some("end_header") => {}
            Some(other) => return Err(header_err(line, format!("unknown keyword `{other}`"))),
            None => return Err(header_err(line, "empty line")),
        }
    }
    if !format_seen {
        return Err(header_err(lines.len(), "missing `format` line"));
    }
    let vertex_count = vertex_count.ok_or_else(|| header_err(lines.len(), "missing vertex element"))?;
    if names.len() != PLY_PROPERTIES {
        return Err(PlyError::PropertyCount { found: names.len() });
    }
    let mut columns = [0usize; PLY_PROPERTIES];
    for (slot, wanted) in property_names().iter().enumerate() {
        columns[slot] = names
            .iter()
            .position(|n| n == wanted)
            .ok_or_else(|| PlyError::MissingProperty(wanted.clone()))?;
    }
    Ok(Header { vertex_count, layout: Layout { columns }, body_offset })
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Parses a 3DGS point file held in memory.
///
/// Gaussians whose mean lies outside the origin-centered cube of the given
/// half-extent are discarded; pass `f32::INFINITY` to keep everything.
pub fn parse_ply(data: &[u8], half_extent: f32) -> Result<Vec<Gaussian>, PlyError> {
    let header = parse_header(data)?;
    let body = &data[header.body_offset..];
    let needed = header
        .vertex_count
        .checked_mul(PLY_RECORD_BYTES)
        .ok_or(PlyError::Truncated { record: 0, needed: usize::MAX, available: body.len() })?;
    if body.len() < needed {
        return Err(PlyError::Truncated {
            record: body.len() / PLY_RECORD_BYTES,
            needed,
            available: body.len(),
        });
    }
    let names = property_names();
    let mut out = Vec::with_capacity(header.vertex_count);
    for (record, chunk) in body[..needed].chunks_exact(PLY_RECORD_BYTES).enumerate() {
        let mut raw = [0f32; PLY_PROPERTIES];
        for (slot, &col) in header.layout.columns.iter().enumerate() {
            let b = &chunk[col * 4..col * 4 + 4];
            let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
            if !v.is_finite() {
                return Err(PlyError::NonFinite { record, property: names[slot].clone() });
            }
            raw[slot] = v;
        }
        let g = decode_record(&raw, record)?;
        if g.position.iter().all(|c| c.abs() <= half_extent) {
            out.push(g);
        }
    }
    Ok(out)
}

fn decode_record(raw: &[f32; PLY_PROPERTIES], record: usize) -> Result<Gaussian, PlyError> {
    let non_finite = |property: &str| PlyError::NonFinite { record, property: property.to_string() };
    let mut sh = [0f32; SH_LEN];
    sh[..3].copy_from_slice(&raw[6..9]);
    // f_rest is channel-major: 15 coefficients of red, then green, then blue.
    for channel in 0..3 {
        for coeff in 1..SH_COEFFS {
            sh[3 * coeff + channel] = raw[9 + channel * (SH_COEFFS - 1) + coeff - 1];
        }
    }
    let opacity = sigmoid(raw[54] as f64) as f32;
    let mut scale = [0f32; 3];
    for (i, s) in scale.iter_mut().enumerate() {
        *s = (raw[55 + i] as f64).exp() as f32;
        if !s.is_finite() {
            return Err(non_finite(&format!("scale_{i}")));
        }
    }
    let q = &raw[58..62];
    let norm = q.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
    if norm < 1e-12 || !norm.is_finite() {
        return Err(PlyError::DegenerateRotation { record });
    }
    let rotation = [
        (q[0] as f64 / norm) as f32,
        (q[1] as f64 / norm) as f32,
        (q[2] as f64 / norm) as f32,
        (q[3] as f64 / norm) as f32,
    ];
    Ok(Gaussian {
        position: [raw[0], raw[1], raw[2]],
        rotation,
        scale,
        opacity,
        sh,
    })
}

/// Reads and decodes a 3DGS point file.
pub fn load_input_scene(path: impl AsRef<Path>, half_extent: f32) -> Result<Vec<Gaussian>, PlyError> {
    let data = fs::read(path)?;
    parse_ply(&data, half_extent)
}

/// Encodes Gaussians back into the trainer's raw property layout.
///
/// Opacity is stored as a logit and scale as a logarithm, so values at the
/// domain boundary (opacity 0 or 1, zero scale) become infinite.
pub fn encode_ply(gaussians: &[Gaussian]) -> Vec<u8> {
    let mut out = Vec::with_capacity(1024 + gaussians.len() * PLY_RECORD_BYTES);
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", gaussians.len()));
    for name in property_names() {
        header.push_str(&format!("property float {name}\n"));
    }
    header.push_str("end_header\n");
    out.extend_from_slice(header.as_bytes());
    for g in gaussians {
        let mut raw = [0f32; PLY_PROPERTIES];
        raw[..3].copy_from_slice(&g.position);
        raw[6..9].copy_from_slice(&g.sh[..3]);
        for channel in 0..3 {
            for coeff in 1..SH_COEFFS {
                raw[9 + channel * (SH_COEFFS - 1) + coeff - 1] = g.sh[3 * coeff + channel];
            }
        }
        let o = g.opacity as f64;
        raw[54] = (o / (1.0 - o)).ln() as f32;
        for i in 0..3 {
            raw[55 + i] = (g.scale[i] as f64).ln() as f32;
        }
        raw[58..62].copy_from_slice(&g.rotation);
        for v in raw {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_ply(path: impl AsRef<Path>, gaussians: &[Gaussian]) -> Result<(), PlyError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_ply(gaussians))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_file(records: &[[f32; PLY_PROPERTIES]]) -> Vec<u8> {
        let mut out = Vec::new();
        let mut header = format!("ply\nformat binary_little_endian 1.0\ncomment test\nelement vertex {}\n", records.len());
        for name in property_names() {
            header.push_str(&format!("property float {name}\n"));
        }
        header.push_str("end_header\n");
        out.extend_from_slice(header.as_bytes());
        for r in records {
            for v in r {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    fn raw_point(pos: [f32; 3]) -> [f32; PLY_PROPERTIES] {
        let mut r = [0f32; PLY_PROPERTIES];
        r[..3].copy_from_slice(&pos);
        r[58] = 1.0;
        r
    }

    #[test]
    fn sigmoid_and_exp_decoding() {
        let data = raw_file(&[raw_point([0.0; 3])]);
        let g = &parse_ply(&data, f32::INFINITY).unwrap()[0];
        assert_eq!(g.opacity, 0.5);
        assert_eq!(g.scale, [1.0, 1.0, 1.0]);
        assert_eq!(g.rotation, [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn crop_discards_points_outside_cube() {
        let pts = [[0.0, 0.0, 0.0], [0.5, -0.5, 0.2], [10.0, 0.0, 0.0], [-0.9, 0.9, 0.9], [0.1, 0.1, -1.0]];
        let data = raw_file(&pts.map(raw_point));
        assert_eq!(parse_ply(&data, 1.0).unwrap().len(), 4);
        assert_eq!(parse_ply(&data, f32::INFINITY).unwrap().len(), 5);
    }

    #[test]
    fn quaternion_is_normalized_and_sh_regrouped() {
        let mut r = raw_point([0.0; 3]);
        r[58..62].copy_from_slice(&[2.0, 0.0, 2.0, 1.0]);
        r[6..9].copy_from_slice(&[0.1, 0.2, 0.3]);
        for i in 0..45 {
            r[9 + i] = i as f32;
        }
        let g = parse_ply(&raw_file(&[r]), f32::INFINITY).unwrap()[0];
        let n: f32 = g.rotation.iter().map(|v| v * v).sum::<f32>().sqrt();
        assert!((n - 1.0).abs() < 1e-6);
        assert_eq!(&g.sh[..3], &[0.1, 0.2, 0.3]);
        // Coefficient 1: red f_rest_0, green f_rest_15, blue f_rest_30.
        assert_eq!(&g.sh[3..6], &[0.0, 15.0, 30.0]);
        assert_eq!(&g.sh[45..48], &[14.0, 29.0, 44.0]);
    }

    #[test]
    fn encode_then_parse_recovers_values() {
        let mut g = Gaussian::new([1.0, 2.0, 3.0], [0.5, 0.25, 2.0], 0.3, [0.1, -0.2, 0.3]);
        g.sh[47] = 0.7;
        let back = parse_ply(&encode_ply(&[g]), f32::INFINITY).unwrap()[0];
        assert_eq!(back.position, g.position);
        assert_eq!(back.sh, g.sh);
        assert!((back.opacity - 0.3).abs() < 1e-6);
        for i in 0..3 {
            assert!((back.scale[i] - g.scale[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn wrong_property_count_is_rejected() {
        let text = "ply\nformat binary_little_endian 1.0\nelement vertex 0\nproperty float x\nend_header\n";
        assert!(matches!(parse_ply(text.as_bytes(), 1.0), Err(PlyError::PropertyCount { found: 1 })));
    }

    #[test]
    fn ascii_format_is_rejected() {
        let text = "ply\nformat ascii 1.0\nelement vertex 0\nend_header\n";
        assert!(matches!(parse_ply(text.as_bytes(), 1.0), Err(PlyError::Header { line: 2, .. })));
    }

    #[test]
    fn non_finite_value_names_record() {
        let mut bad = raw_point([0.0; 3]);
        bad[1] = f32::NAN;
        let data = raw_file(&[raw_point([0.0; 3]), bad]);
        match parse_ply(&data, 1.0) {
            Err(PlyError::NonFinite { record, property }) => {
                assert_eq!(record, 1);
                assert_eq!(property, "y");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_body_is_reported() {
        let mut data = raw_file(&[raw_point([0.0; 3]), raw_point([0.0; 3])]);
        data.truncate(data.len() - 10);
        assert!(matches!(parse_ply(&data, 1.0), Err(PlyError::Truncated { record: 1, .. })));
    }

    #[test]
    fn huge_vertex_count_does_not_allocate() {
        let mut text = String::from("ply\nformat binary_little_endian 1.0\nelement vertex 18446744073709551615\n");
        for name in property_names() {
            text.push_str(&format!("property float {name}\n"));
        }
        text.push_str("end_header\n");
        assert!(matches!(parse_ply(text.as_bytes(), 1.0), Err(PlyError::Truncated { .. })));
    }
}
