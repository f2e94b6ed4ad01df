//! Plane clipping of closed meshes into capped upper and lower solids.

use std::collections::{HashMap, HashSet};

use nalgebra::Point3;
use thiserror::Error;

use super::cap::{group_loops, trace_loops, triangulate_polygon, CapError};
use super::{Plane, TriMesh};

/// Vertices within this distance of the plane are snapped onto it, so no
/// cut leaves a face smaller than single-precision STL can carry.
pub const ON_PLANE_EPS: f64 = 1e-4;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ClipError {
    #[error("degenerate clip: plane coincides with a mesh face")]
    CoplanarFace,
    #[error("degenerate clip: {0}")]
    Cap(#[from] CapError),
}

/// One side of a clip. Triangles from `cap_start` on are cap faces lying
/// on the clipping plane.
#[derive(Debug, Clone)]
pub struct ClipPart {
    pub mesh: TriMesh,
    pub cap_start: usize,
}

impl ClipPart {
    pub fn cap_faces(&self) -> std::ops::Range<usize> {
        self.cap_start..self.mesh.triangle_count()
    }

    pub fn is_cap(&self, face: usize) -> bool {
        face >= self.cap_start
    }
}

#[derive(Debug, Clone)]
pub struct ClipOutput {
    pub upper: Option<ClipPart>,
    pub lower: Option<ClipPart>,
}

/// Splits `mesh` into `mesh ∩ Γ⁺` and `mesh ∩ Γ⁻`, both closed by caps.
pub fn clip(mesh: &TriMesh, plane: &Plane) -> Result<(Option<TriMesh>, Option<TriMesh>), ClipError> {
    let out = clip_with_caps(mesh, plane)?;
    Ok((out.upper.map(|p| p.mesh), out.lower.map(|p| p.mesh)))
}

#[derive(Clone, Copy)]
enum VRef {
    Orig(u32),
    Plane(u32),
}

struct PlanePoints {
    points: Vec<Point3<f64>>,
    orig: HashMap<u32, u32>,
    edge: HashMap<(u32, u32), u32>,
}

impl PlanePoints {
    fn on_plane(&mut self, v: u32, p: Point3<f64>) -> u32 {
        let next = self.points.len() as u32;
        *self.orig.entry(v).or_insert_with(|| {
            self.points.push(p);
            next
        })
    }

    fn crossing(&mut self, a: u32, b: u32, pa: Point3<f64>, pb: Point3<f64>, da: f64, db: f64) -> u32 {
        // Keyed on the ordered pair and computed from it so both incident
        // triangles get a bit-identical point.
        let (a, b, pa, pb, da, db) = if a < b { (a, b, pa, pb, da, db) } else { (b, a, pb, pa, db, da) };
        let next = self.points.len() as u32;
        *self.edge.entry((a, b)).or_insert_with(|| {
            let t = da / (da - db);
            self.points.push(pa + (pb - pa) * t);
            next
        })
    }
}

struct SideBuilder {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[u32; 3]>,
    orig_map: Vec<u32>,
    plane_map: Vec<u32>,
    plane_edges: Vec<(u32, u32)>,
}

impl SideBuilder {
    fn new(num_vertices: usize) -> Self {
        Self {
            vertices: Vec::new(),
            triangles: Vec::new(),
            orig_map: vec![u32::MAX; num_vertices],
            plane_map: Vec::new(),
            plane_edges: Vec::new(),
        }
    }

    fn index(&mut self, r: VRef, mesh: &TriMesh, pp: &PlanePoints) -> u32 {
        match r {
            VRef::Orig(v) => {
                let slot = &mut self.orig_map[v as usize];
                if *slot == u32::MAX {
                    *slot = self.vertices.len() as u32;
                    self.vertices.push(mesh.vertices[v as usize]);
                }
                *slot
            }
            VRef::Plane(p) => self.plane_index(p, pp),
        }
    }

    fn plane_index(&mut self, p: u32, pp: &PlanePoints) -> u32 {
        if self.plane_map.len() <= p as usize {
            self.plane_map.resize(p as usize + 1, u32::MAX);
        }
        let slot = &mut self.plane_map[p as usize];
        if *slot == u32::MAX {
            *slot = self.vertices.len() as u32;
            self.vertices.push(pp.points[p as usize]);
        }
        *slot
    }

    /// Emits a convex polygon as a fan and records its on-plane edges.
    fn polygon(&mut self, poly: &[VRef], mesh: &TriMesh, pp: &PlanePoints) {
        let n = poly.len();
        for k in 0..n {
            if let (VRef::Plane(a), VRef::Plane(b)) = (poly[k], poly[(k + 1) % n]) {
                self.plane_edges.push((a, b));
            }
        }
        let ids: Vec<u32> = poly.iter().map(|r| self.index(*r, mesh, pp)).collect();
        match n {
            3 => self.triangles.push([ids[0], ids[1], ids[2]]),
            4 => {
                let d02 = (self.vertices[ids[0] as usize] - self.vertices[ids[2] as usize]).norm_squared();
                let d13 = (self.vertices[ids[1] as usize] - self.vertices[ids[3] as usize]).norm_squared();
                if d02 <= d13 {
                    self.triangles.push([ids[0], ids[1], ids[2]]);
                    self.triangles.push([ids[0], ids[2], ids[3]]);
                } else {
                    self.triangles.push([ids[1], ids[2], ids[3]]);
                    self.triangles.push([ids[1], ids[3], ids[0]]);
                }
            }
            _ => unreachable!("a plane cuts a triangle into at most a quad"),
        }
    }
}

pub fn clip_with_caps(mesh: &TriMesh, plane: &Plane) -> Result<ClipOutput, ClipError> {
    let dist: Vec<f64> = mesh.vertices.iter().map(|p| plane.signed_distance(p)).collect();
    let side: Vec<i8> = dist
        .iter()
        .map(|&d| {
            if d > ON_PLANE_EPS {
                1
            } else if d < -ON_PLANE_EPS {
                -1
            } else {
                0
            }
        })
        .collect();
    let whole = |m: &TriMesh| ClipPart {
        mesh: m.clone(),
        cap_start: m.triangle_count(),
    };
    if !side.iter().any(|&s| s > 0) {
        return Ok(ClipOutput {
            upper: None,
            lower: Some(whole(mesh)),
        });
    }
    if !side.iter().any(|&s| s < 0) {
        return Ok(ClipOutput {
            upper: Some(whole(mesh)),
            lower: None,
        });
    }

    let mut pp = PlanePoints {
        points: Vec::new(),
        orig: HashMap::new(),
        edge: HashMap::new(),
    };
    let mut upper = SideBuilder::new(mesh.vertices.len());
    let mut lower = SideBuilder::new(mesh.vertices.len());
    let mut up_poly: Vec<VRef> = Vec::with_capacity(4);
    let mut lo_poly: Vec<VRef> = Vec::with_capacity(4);

    for t in &mesh.triangles {
        let s = [side[t[0] as usize], side[t[1] as usize], side[t[2] as usize]];
        if s == [0, 0, 0] {
            return Err(ClipError::CoplanarFace);
        }
        let has_up = s.iter().any(|&x| x > 0);
        let has_lo = s.iter().any(|&x| x < 0);
        up_poly.clear();
        lo_poly.clear();
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            let (sa, sb) = (s[k], s[(k + 1) % 3]);
            let ra = if sa == 0 {
                VRef::Plane(pp.on_plane(a, mesh.vertices[a as usize] - plane.normal * dist[a as usize]))
            } else {
                VRef::Orig(a)
            };
            if sa >= 0 && has_up {
                up_poly.push(ra);
            }
            if sa <= 0 && has_lo {
                lo_poly.push(ra);
            }
            if sa * sb < 0 {
                let x = pp.crossing(
                    a,
                    b,
                    mesh.vertices[a as usize],
                    mesh.vertices[b as usize],
                    dist[a as usize],
                    dist[b as usize],
                );
                up_poly.push(VRef::Plane(x));
                lo_poly.push(VRef::Plane(x));
            }
        }
        if has_up {
            upper.polygon(&up_poly, mesh, &pp);
        }
        if has_lo {
            lower.polygon(&lo_poly, mesh, &pp);
        }
    }

    let cap = cap_triangles(plane, &pp.points, &upper.plane_edges)?;
    let upper_caps = upper.triangles.len();
    for t in &cap {
        let ids = [
            upper.plane_index(t[0], &pp),
            upper.plane_index(t[1], &pp),
            upper.plane_index(t[2], &pp),
        ];
        upper.triangles.push(ids);
    }
    let lower_caps = lower.triangles.len();
    for t in &cap {
        let ids = [
            lower.plane_index(t[0], &pp),
            lower.plane_index(t[2], &pp),
            lower.plane_index(t[1], &pp),
        ];
        lower.triangles.push(ids);
    }
    Ok(ClipOutput {
        upper: Some(ClipPart {
            mesh: TriMesh::from_raw(upper.vertices, upper.triangles),
            cap_start: upper_caps,
        }),
        lower: Some(ClipPart {
            mesh: TriMesh::from_raw(lower.vertices, lower.triangles),
            cap_start: lower_caps,
        }),
    })
}

/// Cap directed edges for the upper solid: the reversed on-plane boundary
/// of its clipped surface.
pub(crate) fn cap_edges(upper_plane_edges: &[(u32, u32)]) -> Vec<(u32, u32)> {
    let set: HashSet<(u32, u32)> = upper_plane_edges.iter().copied().collect();
    let mut out: Vec<(u32, u32)> = upper_plane_edges
        .iter()
        .filter(|&&(a, b)| !set.contains(&(b, a)))
        .map(|&(a, b)| (b, a))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// 2D coordinates on the plane in a frame where the upper cap (outward
/// normal `-n`) is counter-clockwise.
pub(crate) fn cap_frame(plane: &Plane, points: &[Point3<f64>]) -> Vec<[f64; 2]> {
    let (u, v) = plane.basis();
    points
        .iter()
        .map(|p| {
            let r = p - plane.anchor;
            [r.dot(&v), r.dot(&u)]
        })
        .collect()
}

/// Triangulated upper cap in plane-point ids (outward normal `-n`).
fn cap_triangles(plane: &Plane, points: &[Point3<f64>], upper_plane_edges: &[(u32, u32)]) -> Result<Vec<[u32; 3]>, CapError> {
    let edges = cap_edges(upper_plane_edges);
    if edges.is_empty() {
        return Ok(Vec::new());
    }
    let pts = cap_frame(plane, points);
    let loops = trace_loops(points.len(), &pts, &edges)?;
    let polys = group_loops(&pts, &loops)?;
    let mut tris = Vec::new();
    for poly in &polys {
        let holes: Vec<&[u32]> = poly.holes.iter().map(|&h| loops[h].as_slice()).collect();
        tris.extend(triangulate_polygon(&pts, &loops[poly.outer], &holes)?);
    }
    Ok(tris)
}
