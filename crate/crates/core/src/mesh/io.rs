//! STL (binary and ASCII) and OBJ reading, binary STL writing.

use std::io::Write;
use std::path::Path;

use nalgebra::Point3;

use super::{MeshError, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    StlBinary,
    StlAscii,
    Obj,
}

impl MeshFormat {
    /// Picks a format from the file extension, telling ASCII from binary
    /// STL by content.
    pub fn detect(path: &Path, bytes: &[u8]) -> Result<Self, MeshError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "obj" => Ok(Self::Obj),
            "stl" => Ok(if looks_like_ascii_stl(bytes) {
                Self::StlAscii
            } else {
                Self::StlBinary
            }),
            other => Err(MeshError::Parse(format!("unsupported file extension {other:?}"))),
        }
    }
}

fn looks_like_ascii_stl(bytes: &[u8]) -> bool {
    let head = &bytes[..bytes.len().min(512)];
    if !head.trim_ascii_start().starts_with(b"solid") {
        return false;
    }
    // Some binary exporters also start the header with "solid"; a size
    // matching the facet count settles it.
    if bytes.len() >= 84 {
        let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
        if 84 + n * 50 == bytes.len() {
            return false;
        }
    }
    true
}

pub fn load_mesh(bytes: &[u8], format: MeshFormat) -> Result<TriMesh, MeshError> {
    let facets = match format {
        MeshFormat::StlBinary => parse_stl_binary(bytes)?,
        MeshFormat::StlAscii => parse_stl_ascii(bytes)?,
        MeshFormat::Obj => return parse_obj(bytes),
    };
    TriMesh::from_facets(&facets)
}

pub fn load_path(path: &Path) -> Result<TriMesh, MeshError> {
    let bytes = std::fs::read(path)?;
    load_mesh(&bytes, MeshFormat::detect(path, &bytes)?)
}

fn parse_stl_binary(bytes: &[u8]) -> Result<Vec<[Point3<f64>; 3]>, MeshError> {
    if bytes.len() < 84 {
        return Err(MeshError::Parse("binary STL shorter than its header".into()));
    }
    let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let need = n
        .checked_mul(50)
        .and_then(|b| b.checked_add(84))
        .ok_or_else(|| MeshError::Parse("facet count overflow".into()))?;
    if bytes.len() < need {
        return Err(MeshError::Parse(format!(
            "binary STL declares {n} facets but holds {} bytes",
            bytes.len()
        )));
    }
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64;
    let mut facets = Vec::with_capacity(n);
    for i in 0..n {
        let base = 84 + i * 50 + 12;
        let mut tri = [Point3::origin(); 3];
        for (k, p) in tri.iter_mut().enumerate() {
            let o = base + k * 12;
            *p = Point3::new(f32_at(o), f32_at(o + 4), f32_at(o + 8));
        }
        if tri.iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(MeshError::Parse(format!("non-finite coordinate in facet {i}")));
        }
        facets.push(tri);
    }
    Ok(facets)
}

fn parse_stl_ascii(bytes: &[u8]) -> Result<Vec<[Point3<f64>; 3]>, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|_| MeshError::Parse("ASCII STL is not UTF-8".into()))?;
    let mut facets = Vec::new();
    let mut current: Vec<Point3<f64>> = Vec::with_capacity(3);
    for (lineno, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("vertex") => {
                let p = parse_xyz(&mut tok).ok_or_else(|| MeshError::Parse(format!("bad vertex on line {}", lineno + 1)))?;
                current.push(p);
            }
            Some("endloop") => {
                if current.len() != 3 {
                    return Err(MeshError::Parse(format!(
                        "facet ending on line {} has {} vertices",
                        lineno + 1,
                        current.len()
                    )));
                }
                facets.push([current[0], current[1], current[2]]);
                current.clear();
            }
            _ => {}
        }
    }
    if facets.is_empty() {
        return Err(MeshError::Parse("ASCII STL contains no facets".into()));
    }
    Ok(facets)
}

fn parse_xyz<'a>(tok: &mut impl Iterator<Item = &'a str>) -> Option<Point3<f64>> {
    let x: f64 = tok.next()?.parse().ok()?;
    let y: f64 = tok.next()?.parse().ok()?;
    let z: f64 = tok.next()?.parse().ok()?;
    (x.is_finite() && y.is_finite() && z.is_finite()).then(|| Point3::new(x, y, z))
}

/// OBJ `v`/`f` records. Polygonal faces are fanned; `v/vt/vn` references
/// and negative indices are accepted.
fn parse_obj(bytes: &[u8]) -> Result<TriMesh, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|_| MeshError::Parse("OBJ is not UTF-8".into()))?;
    let mut vertices = Vec::new();
    let mut facets = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let p = parse_xyz(&mut tok).ok_or_else(|| MeshError::Parse(format!("bad vertex on line {}", lineno + 1)))?;
                vertices.push(p);
            }
            Some("f") => {
                let mut ids = Vec::new();
                for t in tok {
                    let head = t.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| MeshError::Parse(format!("bad face index {t:?} on line {}", lineno + 1)))?;
                    let idx = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                    if idx < 0 || idx as usize >= vertices.len() {
                        return Err(MeshError::Parse(format!("face index {i} out of range on line {}", lineno + 1)));
                    }
                    ids.push(idx as usize);
                }
                if ids.len() < 3 {
                    return Err(MeshError::Parse(format!("face with fewer than 3 vertices on line {}", lineno + 1)));
                }
                for k in 1..ids.len() - 1 {
                    facets.push([vertices[ids[0]], vertices[ids[k]], vertices[ids[k + 1]]]);
                }
            }
            _ => {}
        }
    }
    if facets.is_empty() {
        return Err(MeshError::Parse("OBJ contains no faces".into()));
    }
    TriMesh::from_facets(&facets)
}

/// Binary STL with facet normals recomputed from the geometry.
pub fn write_stl_binary(mesh: &TriMesh, mut out: impl Write) -> std::io::Result<()> {
    let mut header = [0u8; 80];
    let tag = b"binary STL";
    header[..tag.len()].copy_from_slice(tag);
    out.write_all(&header)?;
    out.write_all(&(mesh.triangle_count() as u32).to_le_bytes())?;
    let mut rec = [0u8; 50];
    for i in 0..mesh.triangle_count() {
        let n = mesh.face_normal(i);
        let c = mesh.corners(i);
        let vals = [
            n.x, n.y, n.z, c[0].x, c[0].y, c[0].z, c[1].x, c[1].y, c[1].z, c[2].x, c[2].y, c[2].z,
        ];
        for (k, v) in vals.iter().enumerate() {
            rec[k * 4..k * 4 + 4].copy_from_slice(&(*v as f32).to_le_bytes());
        }
        out.write_all(&rec)?;
    }
    Ok(())
}

pub fn stl_bytes(mesh: &TriMesh) -> Vec<u8> {
    let mut buf = Vec::with_capacity(84 + 50 * mesh.triangle_count());
    write_stl_binary(mesh, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

pub fn ascii_stl(mesh: &TriMesh) -> String {
    use std::fmt::Write as _;
    let mut s = String::from("solid mesh\n");
    for i in 0..mesh.triangle_count() {
        let n = mesh.face_normal(i);
        let _ = writeln!(s, "  facet normal {} {} {}\n    outer loop", n.x, n.y, n.z);
        for p in mesh.corners(i) {
            let _ = writeln!(s, "      vertex {} {} {}", p.x, p.y, p.z);
        }
        s.push_str("    endloop\n  endfacet\n");
    }
    s.push_str("endsolid mesh\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn binary_cube_round_trip() {
        let cube = fixtures::cube(1.0);
        let bytes = stl_bytes(&cube);
        assert_eq!(bytes.len(), 84 + 12 * 50);
        let back = load_mesh(&bytes, MeshFormat::StlBinary).unwrap();
        assert_eq!(back.vertices().len(), 8);
        assert_eq!(back.triangle_count(), 12);
        assert!((back.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ascii_cube_round_trip() {
        let cube = fixtures::cube(2.0);
        let text = ascii_stl(&cube);
        let back = load_mesh(text.as_bytes(), MeshFormat::StlAscii).unwrap();
        assert!((back.volume() - 8.0).abs() < 1e-9);
        assert!(looks_like_ascii_stl(text.as_bytes()));
        assert!(!looks_like_ascii_stl(&stl_bytes(&cube)));
    }

    #[test]
    fn obj_open_strip_is_non_watertight() {
        let obj = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 2 0 0\nv 2 1 0\nf 1 2 3 4\nf 2 5 6 3\n";
        let err = load_mesh(obj.as_bytes(), MeshFormat::Obj).unwrap_err();
        assert!(err.to_string().starts_with("non-watertight"), "{err}");
    }

    #[test]
    fn obj_tetrahedron_with_slash_indices() {
        let obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1/1 3/1 2/1\nf 1 2 4\nf 2 3 4\nf -4 -1 -2\n";
        let m = load_mesh(obj.as_bytes(), MeshFormat::Obj).unwrap();
        assert!((m.volume() - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_binary_is_a_parse_error() {
        let mut bytes = stl_bytes(&fixtures::cube(1.0));
        bytes.truncate(300);
        assert!(matches!(load_mesh(&bytes, MeshFormat::StlBinary), Err(MeshError::Parse(_))));
    }

    #[test]
    fn icosphere_stl_volume() {
        let s = fixtures::icosphere(1.0, 5);
        let back = load_mesh(&stl_bytes(&s), MeshFormat::StlBinary).unwrap();
        assert_eq!(back.triangle_count(), 20480);
        let exact = 4.0 / 3.0 * std::f64::consts::PI;
        assert!((back.volume() - exact).abs() / exact < 1e-3);
    }
}
