use std::collections::HashMap;

use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SupportConfig;
use crate::manufacturability::{RiskTest, SelfSupportParams};
use crate::mesh::{edge_key, Plane, TriMesh};

/// Hits on one lattice ray closer than this along the ray are the same sample.
const SAME_HIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverhangKind {
    PointOverhang,
    EdgeOverhang,
    FaceOverhang,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverhangSample {
    pub position: Point3<f64>,
    pub kind: OverhangKind,
}

/// Samples the overhangs of `component` printed on `base`: a lattice of
/// rays along the build direction picks points on risky faces, strict local
/// minima give point overhangs and downward creases give edge overhangs.
pub fn detect_overhangs(
    component: &TriMesh,
    base: &Plane,
    params: &SelfSupportParams,
    config: &SupportConfig,
) -> Vec<OverhangSample> {
    let test = RiskTest::new(params);
    let risky: Vec<bool> = (0..component.triangle_count())
        .map(|i| {
            let av = component.area_vector(i);
            let twice = av.norm();
            twice > 0.0 && test.risky(av.dot(&base.normal) / twice, base.signed_distance(&component.face_centroid(i)))
        })
        .collect();
    let mut samples = face_samples(component, base, &risky, config.sample_interval);
    samples.extend(point_samples(component, base, params.base_contact_eps));
    let edges = edge_samples(component, base, &risky, config.sample_interval);
    // creases next to an existing sample add nothing but merge work
    let spacing = 0.5 * config.sample_interval;
    for e in edges {
        if samples.iter().all(|s| (s.position - e.position).norm() >= spacing) {
            samples.push(e);
        }
    }
    samples
}

fn face_samples(mesh: &TriMesh, base: &Plane, risky: &[bool], r: f64) -> Vec<OverhangSample> {
    let (u, v) = base.basis();
    let mut hits: Vec<(i64, i64, f64, Point3<f64>)> = (0..mesh.triangle_count())
        .into_par_iter()
        .filter(|&t| risky[t])
        .flat_map_iter(|t| {
            let c = mesh.corners(t);
            let uv: Vec<[f64; 2]> = c.iter().map(|p| [p.coords.dot(&u), p.coords.dot(&v)]).collect();
            let lo = |k: usize| uv.iter().map(|q| q[k]).fold(f64::INFINITY, f64::min);
            let hi = |k: usize| uv.iter().map(|q| q[k]).fold(f64::NEG_INFINITY, f64::max);
            let (i0, i1) = ((lo(0) / r - 0.5).ceil() as i64, (hi(0) / r - 0.5).floor() as i64);
            let (j0, j1) = ((lo(1) / r - 0.5).ceil() as i64, (hi(1) / r - 0.5).floor() as i64);
            let det = (uv[1][0] - uv[0][0]) * (uv[2][1] - uv[0][1]) - (uv[2][0] - uv[0][0]) * (uv[1][1] - uv[0][1]);
            let mut out = Vec::new();
            if det.abs() < 1e-300 {
                return out.into_iter();
            }
            for i in i0..=i1 {
                for j in j0..=j1 {
                    let (pu, pv) = ((i as f64 + 0.5) * r, (j as f64 + 0.5) * r);
                    let b1 = ((pu - uv[0][0]) * (uv[2][1] - uv[0][1]) - (uv[2][0] - uv[0][0]) * (pv - uv[0][1])) / det;
                    let b2 = ((uv[1][0] - uv[0][0]) * (pv - uv[0][1]) - (pu - uv[0][0]) * (uv[1][1] - uv[0][1])) / det;
                    let b0 = 1.0 - b1 - b2;
                    const IN: f64 = -1e-12;
                    if b0 >= IN && b1 >= IN && b2 >= IN {
                        let p = Point3::from(c[0].coords * b0 + c[1].coords * b1 + c[2].coords * b2);
                        out.push((i, j, base.signed_distance(&p), p));
                    }
                }
            }
            out.into_iter()
        })
        .collect();
    hits.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
    let mut samples: Vec<OverhangSample> = Vec::with_capacity(hits.len());
    let mut last: Option<(i64, i64, f64)> = None;
    for (i, j, h, p) in hits {
        if let Some((li, lj, lh)) = last {
            if li == i && lj == j && h - lh < SAME_HIT {
                continue;
            }
        }
        last = Some((i, j, h));
        samples.push(OverhangSample {
            position: p,
            kind: OverhangKind::FaceOverhang,
        });
    }
    samples
}

fn point_samples(mesh: &TriMesh, base: &Plane, contact_eps: f64) -> Vec<OverhangSample> {
    let verts = mesh.vertices();
    let height: Vec<f64> = verts.iter().map(|p| base.signed_distance(p)).collect();
    let mut lowest = vec![true; verts.len()];
    let mut used = vec![false; verts.len()];
    for t in mesh.triangles() {
        for k in 0..3 {
            let (a, b) = (t[k] as usize, t[(k + 1) % 3] as usize);
            used[a] = true;
            if height[b] <= height[a] {
                lowest[a] = false;
            }
            if height[a] <= height[b] {
                lowest[b] = false;
            }
        }
    }
    (0..verts.len())
        .filter(|&i| used[i] && lowest[i] && height[i] > contact_eps)
        .map(|i| OverhangSample {
            position: verts[i],
            kind: OverhangKind::PointOverhang,
        })
        .collect()
}

fn edge_samples(mesh: &TriMesh, base: &Plane, risky: &[bool], r: f64) -> Vec<OverhangSample> {
    let tris = mesh.triangles();
    let verts = mesh.vertices();
    // edge -> (face, opposite vertex) for both sides
    let mut sides: HashMap<u64, Vec<(usize, u32)>> = HashMap::new();
    for (f, t) in tris.iter().enumerate() {
        for k in 0..3 {
            sides.entry(edge_key(t[k], t[(k + 1) % 3])).or_default().push((f, t[(k + 2) % 3]));
        }
    }
    let mut keys: Vec<u64> = sides.keys().copied().collect();
    keys.sort_unstable();
    let h = |p: &Point3<f64>| base.signed_distance(p);
    let mut out = Vec::new();
    for key in keys {
        let s = &sides[&key];
        if s.len() != 2 || !risky[s[0].0] || !risky[s[1].0] {
            continue;
        }
        let a = verts[(key >> 32) as usize];
        let b = verts[(key & 0xffff_ffff) as usize];
        let e = b - a;
        let len2 = e.norm_squared();
        if len2 == 0.0 {
            continue;
        }
        let margin = 1e-6 * len2.sqrt();
        let rises = s.iter().all(|&(_, o)| {
            let o = verts[o as usize];
            let t = ((o - a).dot(&e) / len2).clamp(0.0, 1.0);
            h(&o) > h(&a) + t * (h(&b) - h(&a)) + margin
        });
        if !rises {
            continue;
        }
        let n = (len2.sqrt() / r).ceil().max(1.0) as usize;
        for j in 0..n {
            out.push(OverhangSample {
                position: a + e * ((j as f64 + 0.5) / n as f64),
                kind: OverhangKind::EdgeOverhang,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn config(r: f64) -> SupportConfig {
        SupportConfig {
            sample_interval: r,
            ..SupportConfig::default()
        }
    }

    #[test]
    fn supported_cube_has_no_overhangs() {
        let samples = detect_overhangs(&fixtures::cube(10.0), &Plane::horizontal(0.0), &SelfSupportParams::default(), &config(2.0));
        assert!(samples.is_empty());
    }

    #[test]
    fn floating_slab_samples_its_underside() {
        let slab = fixtures::slab(10.0, 5.0, 1.0);
        let samples = detect_overhangs(&slab, &Plane::horizontal(0.0), &SelfSupportParams::default(), &config(2.0));
        let faces = samples.iter().filter(|s| s.kind == OverhangKind::FaceOverhang).count();
        assert!((25..=36).contains(&faces), "{faces}");
        for s in &samples {
            assert!((s.position.z - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn spike_has_one_point_overhang() {
        let spike = fixtures::spike(3.0, 4.0, 20.0);
        let samples = detect_overhangs(&spike, &Plane::horizontal(0.0), &SelfSupportParams::default(), &config(3.0));
        let points: Vec<_> = samples.iter().filter(|s| s.kind == OverhangKind::PointOverhang).collect();
        assert_eq!(points.len(), 1);
        assert!((points[0].position - Point3::new(0.0, 0.0, 4.0)).norm() < 1e-9);
    }

    #[test]
    fn face_samples_follow_the_lattice() {
        // oracle: lattice points (k + 0.5)·R strictly inside the footprint
        let slab = fixtures::slab(10.0, 5.0, 1.0);
        for r in [1.5, 2.0, 3.0, 4.0] {
            let samples = detect_overhangs(&slab, &Plane::horizontal(0.0), &SelfSupportParams::default(), &config(r));
            let per_axis = (0..100).filter(|k| (*k as f64 + 0.5) * r <= 10.0).count();
            let faces = samples.iter().filter(|s| s.kind == OverhangKind::FaceOverhang).count();
            assert_eq!(faces, per_axis * per_axis, "R = {r}");
        }
    }

    #[test]
    fn keel_edge_is_sampled() {
        // triangular prism lying on its ridge, raised off the platform
        let profile = [(0.0, 5.0), (6.0, 8.0), (-6.0, 8.0)];
        let keel = fixtures::extrude_xz(&profile, 12.0);
        let samples = detect_overhangs(&keel, &Plane::horizontal(0.0), &SelfSupportParams::default(), &config(50.0));
        let edges: Vec<_> = samples.iter().filter(|s| s.kind == OverhangKind::EdgeOverhang).collect();
        assert!(!edges.is_empty());
        for s in edges {
            assert!((s.position.z - 5.0).abs() < 1e-9 && s.position.x.abs() < 1e-9);
        }
    }
}
