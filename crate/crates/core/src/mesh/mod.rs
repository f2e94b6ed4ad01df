//! Triangle mesh kernel: representation, validation, measures, plane
//! clipping with capped cross-sections, and connectivity.

mod cap;
mod clip;
mod components;
pub mod io;
mod plane;

use std::collections::HashMap;

use nalgebra::{Matrix3, Point3, Vector3};
use thiserror::Error;

pub use clip::{clip, clip_with_caps, ClipError, ClipOutput, ClipPart, ON_PLANE_EPS};
pub use components::{connected_components, shell_labels, solid_labels};
pub use plane::{cell_contains, orthonormal_basis, Aabb, HalfSpaceCell, Plane, Side};

pub use cap::CapError;
pub(crate) use cap::triangulate_polygon;

/// Vertices closer than this are merged when building a mesh from facets.
pub const WELD_TOLERANCE: f64 = 1e-6;
/// Triangles at or below this area are rejected as degenerate on load.
pub const MIN_TRIANGLE_AREA: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("non-watertight: {0} boundary edge(s)")]
    NonWatertight(usize),
    #[error("non-manifold: {0} edge(s) shared by more than two triangles")]
    NonManifold(usize),
    #[error("inconsistent orientation: {0} edge(s) traversed twice in the same direction")]
    InconsistentOrientation(usize),
    #[error("degenerate triangle {index} (area {area:e} mm²)")]
    DegenerateTriangle { index: usize, area: f64 },
    #[error("vertex index out of range in triangle {0}")]
    IndexOutOfRange(usize),
    #[error("zero volume")]
    ZeroVolume,
    #[error("negative volume (inward-facing orientation)")]
    NegativeVolume,
    #[error("mesh has no triangles")]
    Empty,
    #[error("invalid plane: normal must be non-zero")]
    InvalidPlane,
}

/// Closed, consistently oriented triangle mesh in millimetres.
///
/// Outward faces are counter-clockwise. A mesh may contain several shells;
/// inner shells with inward orientation describe cavities.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[u32; 3]>,
}

impl TriMesh {
    /// Builds a mesh and checks every invariant.
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        let mesh = Self {
            vertices,
            triangles,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// The empty mesh. Only produced by operations that may legitimately
    /// yield nothing (an empty support tree, for example).
    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            triangles: Vec::new(),
        }
    }

    pub(crate) fn from_raw(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Self {
        Self {
            vertices,
            triangles,
        }
    }

    /// Builds a mesh from a facet soup, welding vertices within
    /// [`WELD_TOLERANCE`]. Collapsed facets are dropped and an inward
    /// orientation is flipped.
    pub fn from_facets(facets: &[[Point3<f64>; 3]]) -> Result<Self, MeshError> {
        let mut welder = Welder::new(WELD_TOLERANCE);
        let mut triangles = Vec::with_capacity(facets.len());
        for f in facets {
            let t = [welder.insert(f[0]), welder.insert(f[1]), welder.insert(f[2])];
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                continue;
            }
            triangles.push(t);
        }
        let mut mesh = Self {
            vertices: welder.into_points(),
            triangles,
        };
        mesh.check_topology()?;
        if mesh.volume() < 0.0 {
            mesh.flip();
        }
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    #[inline]
    pub fn corners(&self, index: usize) -> [Point3<f64>; 3] {
        let t = self.triangles[index];
        [
            self.vertices[t[0] as usize],
            self.vertices[t[1] as usize],
            self.vertices[t[2] as usize],
        ]
    }

    /// `(b - a) × (c - a)`: twice the area times the unit normal.
    #[inline]
    pub fn area_vector(&self, index: usize) -> Vector3<f64> {
        let [a, b, c] = self.corners(index);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, index: usize) -> f64 {
        0.5 * self.area_vector(index).norm()
    }

    /// Unit outward normal (zero for a zero-area face).
    pub fn face_normal(&self, index: usize) -> Vector3<f64> {
        let n = self.area_vector(index);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vector3::zeros()
        }
    }

    pub fn face_centroid(&self, index: usize) -> Point3<f64> {
        let [a, b, c] = self.corners(index);
        Point3::from((a.coords + b.coords + c.coords) / 3.0)
    }

    /// Signed volume by the divergence theorem.
    pub fn volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let a = self.vertices[t[0] as usize].coords;
                let b = self.vertices[t[1] as usize].coords;
                let c = self.vertices[t[2] as usize].coords;
                a.dot(&b.cross(&c))
            })
            .sum::<f64>()
            / 6.0
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).fold(0.0, |acc, i| acc + self.face_area(i))
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter())
    }

    /// Checks closure, manifoldness, orientation, face areas and volume.
    pub fn validate(&self) -> Result<(), MeshError> {
        self.check_topology()?;
        for i in 0..self.triangles.len() {
            let area = self.face_area(i);
            if !(area > MIN_TRIANGLE_AREA) {
                return Err(MeshError::DegenerateTriangle { index: i, area });
            }
        }
        self.check_volume()
    }

    /// Validation for meshes produced by clipping: closure, orientation,
    /// non-zero faces and positive volume. The load-time area floor is not
    /// applied since cuts close to a vertex legitimately produce tiny faces.
    pub fn validate_closed(&self) -> Result<(), MeshError> {
        self.check_topology()?;
        for i in 0..self.triangles.len() {
            let area = self.face_area(i);
            if !(area > 0.0) {
                return Err(MeshError::DegenerateTriangle { index: i, area });
            }
        }
        self.check_volume()
    }

    fn check_volume(&self) -> Result<(), MeshError> {
        let v = self.volume();
        let scale = self.aabb().diagonal().max(1e-12);
        if v.abs() <= 1e-12 * scale.powi(3) {
            return Err(MeshError::ZeroVolume);
        }
        if v < 0.0 {
            return Err(MeshError::NegativeVolume);
        }
        Ok(())
    }

    /// Every undirected edge must be used exactly twice, once per direction.
    pub fn check_topology(&self) -> Result<(), MeshError> {
        if self.triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        let n = self.vertices.len() as u32;
        let mut edges: Vec<(u64, bool)> = Vec::with_capacity(self.triangles.len() * 3);
        for (i, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) || t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(MeshError::IndexOutOfRange(i));
            }
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.push((edge_key(a, b), a < b));
            }
        }
        edges.sort_unstable();
        let (mut open, mut nonmanifold, mut flipped) = (0, 0, 0);
        let mut i = 0;
        while i < edges.len() {
            let mut j = i + 1;
            while j < edges.len() && edges[j].0 == edges[i].0 {
                j += 1;
            }
            match j - i {
                1 => open += 1,
                2 => {
                    if edges[i].1 == edges[i + 1].1 {
                        flipped += 1;
                    }
                }
                _ => nonmanifold += 1,
            }
            i = j;
        }
        if nonmanifold > 0 {
            Err(MeshError::NonManifold(nonmanifold))
        } else if open > 0 {
            Err(MeshError::NonWatertight(open))
        } else if flipped > 0 {
            Err(MeshError::InconsistentOrientation(flipped))
        } else {
            Ok(())
        }
    }

    fn flip(&mut self) {
        for t in &mut self.triangles {
            t.swap(1, 2);
        }
    }

    /// Same surface with every face reversed.
    pub fn inverted(&self) -> Self {
        let mut m = self.clone();
        m.flip();
        m
    }

    /// Applies `p ↦ m p + t` to every vertex. `m` must have a positive
    /// determinant.
    pub fn transformed(&self, m: &Matrix3<f64>, t: &Vector3<f64>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|p| Point3::from(m * p.coords + t)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn translated(&self, t: &Vector3<f64>) -> Self {
        self.transformed(&Matrix3::identity(), t)
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.transformed(&Matrix3::from_diagonal_element(s), &Vector3::zeros())
    }

    /// Disjoint union; vertices are not shared between inputs.
    pub fn merged<'a>(meshes: impl IntoIterator<Item = &'a TriMesh>) -> Self {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for m in meshes {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&m.vertices);
            triangles.extend(m.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        }
        Self {
            vertices,
            triangles,
        }
    }

    /// Sub-mesh of the given triangles, with vertices renumbered in order of
    /// first use.
    pub fn submesh(&self, triangle_ids: impl IntoIterator<Item = usize>) -> Self {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for i in triangle_ids {
            let mut t = self.triangles[i];
            for v in &mut t {
                let r = &mut remap[*v as usize];
                if *r == u32::MAX {
                    *r = vertices.len() as u32;
                    vertices.push(self.vertices[*v as usize]);
                }
                *v = *r;
            }
            triangles.push(t);
        }
        Self {
            vertices,
            triangles,
        }
    }

    /// Generalized winding number of `p` (≈1 inside, ≈0 outside).
    pub fn winding_number(&self, p: &Point3<f64>) -> f64 {
        let mut total = 0.0;
        for t in &self.triangles {
            let a = self.vertices[t[0] as usize] - p;
            let b = self.vertices[t[1] as usize] - p;
            let c = self.vertices[t[2] as usize] - p;
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            total += 2.0 * num.atan2(den);
        }
        total / (4.0 * std::f64::consts::PI)
    }
}

pub fn volume(mesh: &TriMesh) -> f64 {
    mesh.volume()
}

pub fn surface_area(mesh: &TriMesh) -> f64 {
    mesh.surface_area()
}

#[inline]
pub(crate) fn edge_key(a: u32, b: u32) -> u64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    ((lo as u64) << 32) | hi as u64
}

/// Grid-hashed vertex welding.
struct Welder {
    tol: f64,
    cells: HashMap<[i64; 3], Vec<u32>>,
    points: Vec<Point3<f64>>,
}

impl Welder {
    fn new(tol: f64) -> Self {
        Self {
            tol,
            cells: HashMap::new(),
            points: Vec::new(),
        }
    }

    fn key(&self, p: &Point3<f64>) -> [i64; 3] {
        [
            (p.x / self.tol).floor() as i64,
            (p.y / self.tol).floor() as i64,
            (p.z / self.tol).floor() as i64,
        ]
    }

    fn insert(&mut self, p: Point3<f64>) -> u32 {
        let k = self.key(&p);
        let tol2 = self.tol * self.tol;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &id in ids {
                            if (self.points[id as usize] - p).norm_squared() <= tol2 {
                                return id;
                            }
                        }
                    }
                }
            }
        }
        let id = self.points.len() as u32;
        self.points.push(p);
        self.cells.entry(k).or_default().push(id);
        id
    }

    fn into_points(self) -> Vec<Point3<f64>> {
        self.points
    }
}
