//! Fast candidate scoring. Produces the same verdicts and (up to rounding)
//! the same risky areas and volumes as [`check_criteria`], without building
//! the clipped meshes: volumes are taken relative to a point on the plane so
//! that cap faces contribute nothing, cap area comes from the cut segments,
//! and connectivity is resolved with a union-find over mesh edges.
//!
//! [`check_criteria`]: super::check_criteria

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use super::criteria::{platform_below, platform_footprint, Infeasible};
use super::SearchConfig;
use crate::candidates::CandidateSet;
use crate::manufacturability::RiskTest;
use crate::mesh::{edge_key, ClipError, Plane, TriMesh, ON_PLANE_EPS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    /// Risky area of the upper part printed on the clipping plane.
    pub upper_risk: f64,
    /// Risky area of the lower part printed on the platform.
    pub lower_risk: f64,
    pub upper_volume: f64,
    pub lower_volume: f64,
}

/// Per-mesh tables for scoring many planes against one model.
pub struct Evaluator<'a> {
    mesh: &'a TriMesh,
    config: &'a SearchConfig,
    min_upper_volume: f64,
    test: RiskTest,
    footprint: Vec<Point3<f64>>,
    contact: Vec<bool>,
    det: Vec<f64>,
    area_vec: Vec<Vector3<f64>>,
    area: Vec<f64>,
    unit: Vec<Vector3<f64>>,
    centroid: Vec<Point3<f64>>,
    platform_risky: Vec<bool>,
    tri_edges: Vec<[u32; 3]>,
    edge_count: usize,
    platform_risk: f64,
    scale2: f64,
}

/// Reusable buffers for [`Evaluator::evaluate`].
#[derive(Default)]
pub struct Scratch {
    dist: Vec<f64>,
    side: Vec<i8>,
    parent: Vec<u32>,
    up_vol: Vec<f64>,
    lo_vol: Vec<f64>,
    cap: Vec<f64>,
    comp_vol: Vec<f64>,
    comp_cap: Vec<f64>,
    comp_ground: Vec<bool>,
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb) as usize] = ra.min(rb);
    }
}

#[inline]
fn tet(o: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> f64 {
    (a - o).dot(&(b - o).cross(&(c - o))) / 6.0
}

#[inline]
fn poly_area_vec(poly: &[Point3<f64>]) -> Vector3<f64> {
    let mut s = Vector3::zeros();
    for k in 1..poly.len() - 1 {
        s += (poly[k] - poly[0]).cross(&(poly[k + 1] - poly[0]));
    }
    s
}

#[inline]
fn poly_volume(o: &Point3<f64>, poly: &[Point3<f64>]) -> f64 {
    let mut v = 0.0;
    for k in 1..poly.len() - 1 {
        v += tet(o, &poly[0], &poly[k], &poly[k + 1]);
    }
    v
}

fn poly_centroid(poly: &[Point3<f64>]) -> Point3<f64> {
    let mut c = Vector3::zeros();
    for p in poly {
        c += p.coords;
    }
    Point3::from(c / poly.len() as f64)
}

impl<'a> Evaluator<'a> {
    pub fn new(mesh: &'a TriMesh, config: &'a SearchConfig, input_volume: f64) -> Self {
        let test = RiskTest::new(&config.self_support);
        let platform = &config.platform;
        let nf = mesh.triangle_count();
        let mut det = Vec::with_capacity(nf);
        let mut area_vec = Vec::with_capacity(nf);
        let mut area = Vec::with_capacity(nf);
        let mut unit = Vec::with_capacity(nf);
        let mut centroid = Vec::with_capacity(nf);
        let mut platform_risky = Vec::with_capacity(nf);
        let mut platform_risk = 0.0;
        for f in 0..nf {
            let [a, b, c] = mesh.corners(f);
            let av = mesh.area_vector(f);
            let twice = av.norm();
            let u = if twice > 0.0 { av / twice } else { Vector3::zeros() };
            let ctr = mesh.face_centroid(f);
            let risky = twice > 0.0 && test.risky(u.dot(&platform.normal), platform.signed_distance(&ctr));
            det.push(a.coords.dot(&b.coords.cross(&c.coords)));
            area_vec.push(av);
            area.push(0.5 * twice);
            unit.push(u);
            centroid.push(ctr);
            platform_risky.push(risky);
            if risky {
                platform_risk += 0.5 * twice;
            }
        }

        let mut keys: Vec<(u64, u32)> = Vec::with_capacity(3 * nf);
        for (f, t) in mesh.triangles().iter().enumerate() {
            for k in 0..3 {
                keys.push((edge_key(t[k], t[(k + 1) % 3]), (3 * f + k) as u32));
            }
        }
        keys.sort_unstable();
        let mut tri_edges = vec![[0u32; 3]; nf];
        let mut edge_count = 0usize;
        for i in 0..keys.len() {
            if i > 0 && keys[i].0 != keys[i - 1].0 {
                edge_count += 1;
            }
            let slot = keys[i].1 as usize;
            tri_edges[slot / 3][slot % 3] = edge_count as u32;
        }
        if !keys.is_empty() {
            edge_count += 1;
        }

        let contact = mesh
            .vertices()
            .iter()
            .map(|p| platform.signed_distance(p).abs() <= config.contact_eps)
            .collect();
        let diag = mesh.aabb().diagonal();
        Self {
            mesh,
            config,
            min_upper_volume: input_volume / config.volume_divisor as f64,
            test,
            footprint: platform_footprint(mesh, platform, config.contact_eps),
            contact,
            det,
            area_vec,
            area,
            unit,
            centroid,
            platform_risky,
            tri_edges,
            edge_count,
            platform_risk,
            scale2: diag * diag,
        }
    }

    pub fn mesh(&self) -> &TriMesh {
        self.mesh
    }

    /// `R(current, platform)`.
    pub fn platform_risk(&self) -> f64 {
        self.platform_risk
    }

    /// Criterion III alone; it depends only on the footprint.
    pub fn platform_below(&self, gamma: &Plane) -> bool {
        platform_below(&self.footprint, gamma)
    }

    /// Full feasibility test and scores for one plane.
    pub fn evaluate(&self, gamma: &Plane, s: &mut Scratch) -> Result<CandidateScore, Infeasible> {
        if !self.platform_below(gamma) {
            return Err(Infeasible::CriterionIII);
        }
        self.evaluate_split(gamma, s)
    }

    /// As [`evaluate`](Self::evaluate) for a plane already known to pass
    /// Criterion III.
    pub fn evaluate_split(&self, gamma: &Plane, s: &mut Scratch) -> Result<CandidateScore, Infeasible> {
        let verts = self.mesh.vertices();
        let tris = self.mesh.triangles();
        let nf = tris.len();
        s.dist.clear();
        s.side.clear();
        let (mut any_up, mut any_lo) = (false, false);
        for p in verts {
            let d = gamma.signed_distance(p);
            let sd = if d > ON_PLANE_EPS {
                any_up = true;
                1
            } else if d < -ON_PLANE_EPS {
                any_lo = true;
                -1
            } else {
                0
            };
            s.dist.push(d);
            s.side.push(sd);
        }
        if !(any_up && any_lo) {
            return Err(Infeasible::NoSplit);
        }

        let n = gamma.normal;
        let o = gamma.anchor;
        let o_vec = o.coords;
        let lower_cap_risky = self.test.dot_is_risky(n.dot(&self.config.platform.normal));
        s.up_vol.clear();
        s.lo_vol.clear();
        s.cap.clear();
        s.up_vol.resize(nf, 0.0);
        s.lo_vol.resize(nf, 0.0);
        s.cap.resize(nf, 0.0);
        let (mut v_up, mut v_lo, mut r_up, mut r_lo, mut cap_total) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut up_poly: [Point3<f64>; 4] = [Point3::origin(); 4];
        let mut lo_poly: [Point3<f64>; 4] = [Point3::origin(); 4];
        for (f, t) in tris.iter().enumerate() {
            let sd = [s.side[t[0] as usize], s.side[t[1] as usize], s.side[t[2] as usize]];
            let has_up = sd.iter().any(|&x| x > 0);
            let has_lo = sd.iter().any(|&x| x < 0);
            if !has_up && !has_lo {
                return Err(Infeasible::Degenerate(ClipError::CoplanarFace));
            }
            let dot_g = self.unit[f].dot(&n);
            // vertices the clip snaps onto the plane
            let pos = |i: u32| {
                let i = i as usize;
                if s.side[i] == 0 {
                    verts[i] - n * s.dist[i]
                } else {
                    verts[i]
                }
            };
            if !has_lo || !has_up {
                let (vol, area) = if sd.contains(&0) {
                    let corners = [pos(t[0]), pos(t[1]), pos(t[2])];
                    (poly_volume(&o, &corners), 0.5 * poly_area_vec(&corners).norm())
                } else {
                    ((self.det[f] - o_vec.dot(&self.area_vec[f])) / 6.0, self.area[f])
                };
                // on-plane edges of a whole triangle still bound the cap
                let mut cap = 0.0;
                for k in 0..3 {
                    if sd[k] == 0 && sd[(k + 1) % 3] == 0 {
                        let a = pos(t[k]) - o;
                        let b = pos(t[(k + 1) % 3]) - o;
                        cap += 0.5 * a.cross(&b).dot(&n);
                    }
                }
                if has_up {
                    v_up += vol;
                    s.up_vol[f] = vol;
                    if self.area[f] > 0.0 && self.test.risky(dot_g, gamma.signed_distance(&self.centroid[f])) {
                        r_up += area;
                    }
                    s.cap[f] = cap;
                    cap_total += cap;
                } else {
                    v_lo += vol;
                    s.lo_vol[f] = vol;
                    if self.platform_risky[f] {
                        r_lo += area;
                    }
                }
                continue;
            }

            let (mut nu, mut nl) = (0usize, 0usize);
            // walk edges once, building both polygons in triangle order
            let mut up_is_plane = [false; 4];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let (sa, sb) = (sd[k], sd[(k + 1) % 3]);
                let pa = pos(a);
                if sa >= 0 {
                    up_is_plane[nu] = sa == 0;
                    up_poly[nu] = pa;
                    nu += 1;
                }
                if sa <= 0 {
                    lo_poly[nl] = pa;
                    nl += 1;
                }
                if sa * sb < 0 {
                    let (i, j) = if a < b { (a, b) } else { (b, a) };
                    let (di, dj) = (s.dist[i as usize], s.dist[j as usize]);
                    let (pi, pj) = (verts[i as usize], verts[j as usize]);
                    let x = pi + (pj - pi) * (di / (di - dj));
                    up_is_plane[nu] = true;
                    up_poly[nu] = x;
                    nu += 1;
                    lo_poly[nl] = x;
                    nl += 1;
                }
            }
            let up = &up_poly[..nu];
            let lo = &lo_poly[..nl];
            let vu = poly_volume(&o, up);
            let vl = poly_volume(&o, lo);
            v_up += vu;
            v_lo += vl;
            s.up_vol[f] = vu;
            s.lo_vol[f] = vl;
            let mut cap = 0.0;
            for k in 0..nu {
                let k1 = (k + 1) % nu;
                if up_is_plane[k] && up_is_plane[k1] {
                    cap += 0.5 * (up[k] - o).cross(&(up[k1] - o)).dot(&n);
                }
            }
            s.cap[f] = cap;
            cap_total += cap;
            if self.area[f] > 0.0 {
                let au = 0.5 * poly_area_vec(up).norm();
                let al = 0.5 * poly_area_vec(lo).norm();
                if self.test.risky(dot_g, gamma.signed_distance(&poly_centroid(up))) {
                    r_up += au;
                }
                let platform = &self.config.platform;
                if self.test.risky(self.unit[f].dot(&platform.normal), platform.signed_distance(&poly_centroid(lo))) {
                    r_lo += al;
                }
            }
        }

        if v_up < self.min_upper_volume {
            return Err(Infeasible::VolumeBound);
        }
        if lower_cap_risky {
            r_lo += cap_total;
        }

        self.check_connectivity(s)?;

        if let Some(filter) = &self.config.thin_part_filter {
            for f in 0..nf {
                if self.unit[f].dot(&n).abs() >= filter.parallel_dot
                    && gamma.signed_distance(&self.centroid[f]).abs() < filter.nozzle_resolution
                {
                    return Err(Infeasible::ThinPart);
                }
            }
        }

        Ok(CandidateScore {
            upper_risk: r_up,
            lower_risk: r_lo,
            upper_volume: v_up,
            lower_volume: v_lo,
        })
    }

    /// Criterion II on the lower part and the attachment rule on the upper.
    fn check_connectivity(&self, s: &mut Scratch) -> Result<(), Infeasible> {
        let tris = self.mesh.triangles();
        let nodes = 2 * self.edge_count;
        s.parent.clear();
        s.parent.extend(0..nodes as u32);
        // node 2e is edge e on the upper side, 2e + 1 on the lower side
        for (f, t) in tris.iter().enumerate() {
            let sd = [s.side[t[0] as usize], s.side[t[1] as usize], s.side[t[2] as usize]];
            let has_up = sd.iter().any(|&x| x > 0);
            let has_lo = sd.iter().any(|&x| x < 0);
            let e = self.tri_edges[f];
            let (mut first_up, mut first_lo) = (u32::MAX, u32::MAX);
            for k in 0..3 {
                let (sa, sb) = (sd[k], sd[(k + 1) % 3]);
                let flat = sa == 0 && sb == 0;
                if sa > 0 || sb > 0 || (flat && !has_lo) {
                    let node = 2 * e[k];
                    if first_up == u32::MAX {
                        first_up = node;
                    } else {
                        union(&mut s.parent, first_up, node);
                    }
                }
                if sa < 0 || sb < 0 || (flat && !has_up) {
                    let node = 2 * e[k] + 1;
                    if first_lo == u32::MAX {
                        first_lo = node;
                    } else {
                        union(&mut s.parent, first_lo, node);
                    }
                }
            }
        }

        s.comp_vol.clear();
        s.comp_vol.resize(nodes, 0.0);
        s.comp_cap.clear();
        s.comp_cap.resize(nodes, 0.0);
        s.comp_ground.clear();
        s.comp_ground.resize(nodes, false);
        for (f, t) in tris.iter().enumerate() {
            let sd = [s.side[t[0] as usize], s.side[t[1] as usize], s.side[t[2] as usize]];
            let e = self.tri_edges[f];
            if sd.iter().any(|&x| x > 0) {
                let k = (0..3).find(|&k| sd[k] > 0 || sd[(k + 1) % 3] > 0).unwrap();
                let r = find(&mut s.parent, 2 * e[k]) as usize;
                s.comp_vol[r] += s.up_vol[f];
                s.comp_cap[r] += s.cap[f];
            }
            if sd.iter().any(|&x| x < 0) {
                let k = (0..3).find(|&k| sd[k] < 0 || sd[(k + 1) % 3] < 0).unwrap();
                let r = find(&mut s.parent, 2 * e[k] + 1) as usize;
                s.comp_vol[r] += s.lo_vol[f];
                if (0..3).any(|k| sd[k] < 0 && self.contact[t[k] as usize]) {
                    s.comp_ground[r] = true;
                }
            }
        }
        let cap_tol = 1e-12 * self.scale2;
        for node in 0..nodes {
            if s.parent[node] as usize != node || !(s.comp_vol[node] > 0.0) {
                continue;
            }
            if node % 2 == 1 && !s.comp_ground[node] {
                return Err(Infeasible::CriterionII);
            }
        }
        for node in (0..nodes).step_by(2) {
            if s.parent[node] as usize == node && s.comp_vol[node] > 0.0 && !(s.comp_cap[node] > cap_tol) {
                return Err(Infeasible::Attachment);
            }
        }
        Ok(())
    }
}

/// Scores the given candidates against one model in parallel, returning
/// the feasible ones in input order. Candidates whose offset lies outside
/// the model's extent along their normal cannot split it and are skipped.
pub(crate) fn score_candidates(ev: &Evaluator, set: &CandidateSet, ids: &[usize]) -> Vec<(usize, CandidateScore)> {
    let extents: Vec<(f64, f64)> = set
        .normals
        .iter()
        .map(|n| {
            ev.mesh().vertices().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                let t = p.coords.dot(n);
                (lo.min(t), hi.max(t))
            })
        })
        .collect();
    let live: Vec<usize> = ids
        .iter()
        .copied()
        .filter(|&i| {
            let c = &set.candidates[i];
            let (lo, hi) = extents[c.normal_index as usize];
            c.offset > lo && c.offset < hi
        })
        .collect();
    live.par_iter()
        .map_init(Scratch::default, |s, &i| ev.evaluate_split(&set.candidates[i].plane, s).ok().map(|sc| (i, sc)))
        .flatten()
        .collect()
}
