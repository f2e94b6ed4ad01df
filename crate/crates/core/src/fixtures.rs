//! Procedural test solids.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Matrix3, Point3, Vector3};

use crate::mesh::{clip, triangulate_polygon, Plane, TriMesh};

fn build(vertices: Vec<Point3<f64>>, mut triangles: Vec<[u32; 3]>) -> TriMesh {
    let probe = TriMesh::from_raw(vertices.clone(), triangles.clone());
    if probe.volume() < 0.0 {
        for t in &mut triangles {
            t.swap(1, 2);
        }
    }
    TriMesh::new(vertices, triangles).expect("fixture must be a valid solid")
}

/// Axis-aligned cube `[0, size]³`.
pub fn cube(size: f64) -> TriMesh {
    box_mesh(Point3::origin(), Point3::new(size, size, size))
}

pub fn box_mesh(min: Point3<f64>, max: Point3<f64>) -> TriMesh {
    let v = |i: usize| {
        Point3::new(
            if i & 1 == 0 { min.x } else { max.x },
            if i & 2 == 0 { min.y } else { max.y },
            if i & 4 == 0 { min.z } else { max.z },
        )
    };
    let vertices = (0..8).map(v).collect();
    let triangles = vec![
        [0, 2, 3], [0, 3, 1], // z = min
        [4, 5, 7], [4, 7, 6], // z = max
        [0, 1, 5], [0, 5, 4], // y = min
        [2, 6, 7], [2, 7, 3], // y = max
        [0, 4, 6], [0, 6, 2], // x = min
        [1, 3, 7], [1, 7, 5], // x = max
    ];
    build(vertices, triangles)
}

/// Two unit cubes separated by `gap` along x.
pub fn two_cubes(gap: f64) -> TriMesh {
    let a = cube(1.0);
    let b = cube(1.0).translated(&Vector3::new(1.0 + gap, 0.0, 0.0));
    TriMesh::merged([&a, &b])
}

/// Subdivided icosahedron centred at the origin; `20·4^level` faces.
pub fn icosphere(radius: f64, level: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
        (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
        (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vector3<f64>>| {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) / 2.0).normalize());
                verts.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let ab = midpoint(f[0], f[1], &mut verts);
            let bc = midpoint(f[1], f[2], &mut verts);
            let ca = midpoint(f[2], f[0], &mut verts);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    build(verts.iter().map(|v| Point3::from(v * radius)).collect(), faces)
}

/// Solid of revolution about the z axis. `profile` runs bottom to top as
/// `(radius, z)` pairs and must start and end on the axis (radius 0).
pub fn lathe(profile: &[(f64, f64)], segments: usize) -> TriMesh {
    assert!(profile.len() >= 3 && segments >= 3);
    assert!(profile[0].0 == 0.0 && profile[profile.len() - 1].0 == 0.0);
    let mut vertices = Vec::new();
    let mut rows: Vec<Vec<u32>> = Vec::new();
    for &(r, z) in profile {
        if r == 0.0 {
            vertices.push(Point3::new(0.0, 0.0, z));
            rows.push(vec![vertices.len() as u32 - 1; segments]);
        } else {
            let start = vertices.len() as u32;
            for s in 0..segments {
                let phi = 2.0 * PI * s as f64 / segments as f64;
                vertices.push(Point3::new(r * phi.cos(), r * phi.sin(), z));
            }
            rows.push((start..start + segments as u32).collect());
        }
    }
    let mut triangles = Vec::new();
    for w in rows.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        for s in 0..segments {
            let s1 = (s + 1) % segments;
            let (a, b, c, d) = (lo[s], lo[s1], hi[s1], hi[s]);
            if a != b {
                triangles.push([a, b, c]);
            }
            if c != d {
                triangles.push([a, c, d]);
            }
        }
    }
    build(vertices, triangles)
}

pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriMesh {
    lathe(&[(0.0, 0.0), (radius, 0.0), (radius, height), (0.0, height)], segments)
}

/// Stem of radius 3 mm and height 10 mm under a 4 mm thick cap of radius 8 mm.
pub fn mushroom(segments: usize) -> TriMesh {
    lathe(
        &[(0.0, 0.0), (3.0, 0.0), (3.0, 10.0), (8.0, 10.0), (8.0, 14.0), (0.0, 14.0)],
        segments,
    )
}

/// Two fused spheres. The body (radius `10·scale`) is truncated 50° from
/// its lowest point to give a flat footing on z = 0; the head (radius
/// `8·scale`) overlaps it by `2·scale`.
pub fn snowman(scale: f64, segments: usize) -> TriMesh {
    let (r1, r2) = (10.0 * scale, 8.0 * scale);
    let base = 50f64.to_radians();
    let c1 = r1 * base.cos();
    let c2 = c1 + r1 + r2 - 2.0 * scale;
    let neck_z = 0.5 * (c1 + c2 + (r1 * r1 - r2 * r2) / (c2 - c1));
    // polar angles measured from each sphere's lowest point
    let body_top = ((c1 - neck_z) / r1).acos();
    let head_bottom = ((c2 - neck_z) / r2).acos();
    let rings = (segments / 2).max(4);
    let mut profile = vec![(0.0, 0.0)];
    let n_body = ((body_top - base) / PI * rings as f64).ceil().max(2.0) as usize;
    for i in 0..n_body {
        let a = base + (body_top - base) * i as f64 / n_body as f64;
        profile.push((r1 * a.sin(), c1 - r1 * a.cos()));
    }
    let n_head = ((PI - head_bottom) / PI * rings as f64).ceil().max(2.0) as usize;
    for i in 0..n_head {
        let a = head_bottom + (PI - head_bottom) * i as f64 / n_head as f64;
        profile.push((r2 * a.sin(), c2 - r2 * a.cos()));
    }
    profile.push((0.0, c2 + r2));
    lathe(&profile, segments)
}

/// Torus around the z axis centred at the origin.
pub fn torus(major: f64, minor: f64, major_segments: usize, minor_segments: usize) -> TriMesh {
    let mut vertices = Vec::with_capacity(major_segments * minor_segments);
    for i in 0..major_segments {
        let u = 2.0 * PI * i as f64 / major_segments as f64;
        for j in 0..minor_segments {
            let v = 2.0 * PI * j as f64 / minor_segments as f64;
            let r = major + minor * v.cos();
            vertices.push(Point3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: usize, j: usize| ((i % major_segments) * minor_segments + j % minor_segments) as u32;
    let mut triangles = Vec::new();
    for i in 0..major_segments {
        for j in 0..minor_segments {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    build(vertices, triangles)
}

/// Torus standing on its rim (axis along y) with the bottom sliced flat by
/// `flat` mm so it rests on z = 0.
pub fn upright_torus(major: f64, minor: f64, major_segments: usize, minor_segments: usize, flat: f64) -> TriMesh {
    let rot = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
    let t = torus(major, minor, major_segments, minor_segments)
        .transformed(&rot, &Vector3::new(0.0, 0.0, major + minor - flat));
    let (upper, _) = clip(&t, &Plane::horizontal(0.0)).expect("flat cut of torus");
    upper.expect("torus above the cut")
}

/// Prism over a counter-clockwise polygon in the xz plane, extruded from
/// y = 0 to y = depth.
pub fn extrude_xz(polygon: &[(f64, f64)], depth: f64) -> TriMesh {
    let n = polygon.len();
    let mut vertices = Vec::with_capacity(2 * n);
    for &(x, z) in polygon {
        vertices.push(Point3::new(x, 0.0, z));
    }
    for &(x, z) in polygon {
        vertices.push(Point3::new(x, depth, z));
    }
    let pts: Vec<[f64; 2]> = polygon.iter().map(|&(x, z)| [x, z]).collect();
    let ring: Vec<u32> = (0..n as u32).collect();
    let cap = triangulate_polygon(&pts, &ring, &[]).expect("simple polygon");
    let mut triangles = Vec::new();
    for t in &cap {
        triangles.push(*t);
        triangles.push([t[0] + n as u32, t[2] + n as u32, t[1] + n as u32]);
    }
    for i in 0..n as u32 {
        let j = (i + 1) % n as u32;
        triangles.push([i, i + n as u32, j + n as u32]);
        triangles.push([i, j + n as u32, j]);
    }
    build(vertices, triangles)
}

/// L-shaped prism: a column `[0, column_width]` rising to `height`, with an
/// arm of thickness `arm_thickness` at the top reaching out to `arm_length`.
pub fn l_prism(column_width: f64, arm_length: f64, height: f64, arm_thickness: f64, depth: f64) -> TriMesh {
    extrude_xz(
        &[
            (0.0, 0.0),
            (column_width, 0.0),
            (column_width, height - arm_thickness),
            (arm_length, height - arm_thickness),
            (arm_length, height),
            (0.0, height),
        ],
        depth,
    )
}

/// U-shaped prism lying on its side: a spine along x = 0..`bar` joining a
/// bottom leg on the platform and a top leg overhanging it. Legs reach out
/// to `length`.
pub fn u_prism(length: f64, height: f64, bar: f64, depth: f64) -> TriMesh {
    extrude_xz(
        &[
            (0.0, 0.0),
            (length, 0.0),
            (length, bar),
            (bar, bar),
            (bar, height - bar),
            (length, height - bar),
            (length, height),
            (0.0, height),
        ],
        depth,
    )
}

/// Inverted square pyramid standing on its apex at `(0, 0, apex_z)`.
pub fn spike(half_width: f64, apex_z: f64, top_z: f64) -> TriMesh {
    let h = half_width;
    let vertices = vec![
        Point3::new(0.0, 0.0, apex_z),
        Point3::new(-h, -h, top_z),
        Point3::new(h, -h, top_z),
        Point3::new(h, h, top_z),
        Point3::new(-h, h, top_z),
    ];
    let triangles = vec![[0, 2, 1], [0, 3, 2], [0, 4, 3], [0, 1, 4], [1, 2, 3], [1, 3, 4]];
    build(vertices, triangles)
}

/// Horizontal slab `[0, size]² × [z, z + thickness]`.
pub fn slab(size: f64, z: f64, thickness: f64) -> TriMesh {
    box_mesh(Point3::new(0.0, 0.0, z), Point3::new(size, size, z + thickness))
}

/// Translates `mesh` along z so its lowest vertex lies on z = 0.
pub fn rest_on_platform(mesh: &TriMesh) -> TriMesh {
    mesh.translated(&Vector3::new(0.0, 0.0, -mesh.aabb().min.z))
}

/// The shared fixture suite: cube, icosphere, upright torus, L-prism and
/// snowman, sized so default sampling yields a few thousand candidates.
pub fn suite() -> Vec<(&'static str, TriMesh)> {
    let sphere = icosphere(10.0, 3);
    let sphere = rest_on_platform(&sphere);
    vec![
        ("cube", cube(20.0)),
        ("icosphere", sphere),
        ("torus", upright_torus(10.0, 4.0, 36, 16, 1.0)),
        ("l_prism", l_prism(8.0, 24.0, 20.0, 5.0, 8.0)),
        ("snowman", snowman(1.0, 32)),
    ]
}
