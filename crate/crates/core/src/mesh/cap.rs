//! Cross-section capping: loop extraction from cut edges, nesting of holes
//! under outer loops, and ear-clipping triangulation of a polygon with holes.
//!
//! All routines work on local vertex ids into a slice of 2D points. The
//! region to fill lies to the left of every directed edge, so outer loops
//! are counter-clockwise and holes clockwise.

use std::f64::consts::TAU;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CapError {
    #[error("cross-section edges do not form closed loops")]
    OpenLoop,
    #[error("cross-section loop with zero area")]
    ZeroAreaLoop,
    #[error("cross-section hole outside every outer loop")]
    OrphanHole,
    #[error("no bridge from hole to outer loop")]
    NoBridge,
}

type P2 = [f64; 2];

#[inline]
fn sub(a: P2, b: P2) -> P2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
fn cross(a: P2, b: P2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
fn orient(a: P2, b: P2, c: P2) -> f64 {
    cross(sub(b, a), sub(c, a))
}

pub fn signed_area(pts: &[P2], ring: &[u32]) -> f64 {
    let n = ring.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = pts[ring[i] as usize];
        let b = pts[ring[(i + 1) % n] as usize];
        s += cross(a, b);
    }
    0.5 * s
}

/// Splits directed edges into closed loops. At a vertex with several
/// outgoing edges the walk takes the first edge clockwise from the reversed
/// incoming edge, which keeps loops that touch at a vertex separate.
pub fn trace_loops(num_points: usize, pts: &[P2], edges: &[(u32, u32)]) -> Result<Vec<Vec<u32>>, CapError> {
    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); num_points];
    for (i, &(a, _)) in edges.iter().enumerate() {
        outgoing[a as usize].push(i);
    }
    let mut used = vec![false; edges.len()];
    let mut loops = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let origin = edges[start].0;
        let mut ring = vec![origin];
        let mut cur = start;
        loop {
            let (from, at) = edges[cur];
            let back = sub(pts[from as usize], pts[at as usize]);
            let mut best: Option<(f64, usize)> = None;
            let mut consider = |e: usize| {
                let dir = sub(pts[edges[e].1 as usize], pts[at as usize]);
                let ccw = cross(back, dir).atan2(back[0] * dir[0] + back[1] * dir[1]);
                let mut cw = -ccw;
                if cw <= 0.0 {
                    cw += TAU;
                }
                if best.is_none_or(|(b, _)| cw < b) {
                    best = Some((cw, e));
                }
            };
            for &e in &outgoing[at as usize] {
                if !used[e] {
                    consider(e);
                }
            }
            if at == origin {
                consider(start);
            }
            match best {
                None => return Err(CapError::OpenLoop),
                Some((_, e)) if e == start => break,
                Some((_, e)) => {
                    used[e] = true;
                    ring.push(at);
                    cur = e;
                }
            }
        }
        loops.push(ring);
    }
    Ok(loops)
}

/// A cap region: one outer loop and the holes directly inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct CapPolygon {
    pub outer: usize,
    pub holes: Vec<usize>,
}

fn point_in_ring(pts: &[P2], ring: &[u32], p: P2) -> bool {
    let mut inside = false;
    let n = ring.len();
    for i in 0..n {
        let a = pts[ring[i] as usize];
        let b = pts[ring[(i + 1) % n] as usize];
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Assigns each hole to the smallest outer loop containing it.
pub fn group_loops(pts: &[P2], loops: &[Vec<u32>]) -> Result<Vec<CapPolygon>, CapError> {
    let areas: Vec<f64> = loops.iter().map(|l| signed_area(pts, l)).collect();
    if areas.contains(&0.0) {
        return Err(CapError::ZeroAreaLoop);
    }
    let mut polys: Vec<CapPolygon> = Vec::new();
    let mut slot = vec![usize::MAX; loops.len()];
    for (i, a) in areas.iter().enumerate() {
        if *a > 0.0 {
            slot[i] = polys.len();
            polys.push(CapPolygon {
                outer: i,
                holes: Vec::new(),
            });
        }
    }
    for (h, a) in areas.iter().enumerate() {
        if *a > 0.0 {
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for (o, ao) in areas.iter().enumerate() {
            if *ao <= 0.0 || *ao < -a {
                continue;
            }
            let outer = &loops[o];
            // Probe with a hole vertex not shared with the outer loop, or an
            // edge midpoint if every vertex is shared.
            let probe = loops[h]
                .iter()
                .find(|v| !outer.contains(v))
                .map(|&v| pts[v as usize])
                .unwrap_or_else(|| {
                    let a = pts[loops[h][0] as usize];
                    let b = pts[loops[h][1] as usize];
                    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
                });
            if point_in_ring(pts, outer, probe) && best.is_none_or(|(ba, _)| *ao < ba) {
                best = Some((*ao, o));
            }
        }
        match best {
            Some((_, o)) => polys[slot[o]].holes.push(h),
            None => return Err(CapError::OrphanHole),
        }
    }
    Ok(polys)
}

fn segments_cross(a: P2, b: P2, c: P2, d: P2) -> bool {
    let d1 = orient(a, b, c);
    let d2 = orient(a, b, d);
    let d3 = orient(c, d, a);
    let d4 = orient(c, d, b);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Direction `dir` from the vertex `cur` points into the filled region
/// bounded locally by `prev → cur → next`.
fn in_cone(prev: P2, cur: P2, next: P2, target: P2) -> bool {
    let convex = orient(prev, cur, next) >= 0.0;
    if convex {
        orient(cur, next, target) > 0.0 && orient(prev, cur, target) > 0.0
    } else {
        !(orient(cur, next, target) <= 0.0 && orient(prev, cur, target) <= 0.0)
    }
}

/// Triangulates an outer loop with holes by bridging every hole into the
/// outer ring and ear clipping the result. Returns triangles of local ids,
/// counter-clockwise.
pub fn triangulate_polygon(pts: &[P2], outer: &[u32], holes: &[&[u32]]) -> Result<Vec<[u32; 3]>, CapError> {
    let mut ring: Vec<u32> = outer.to_vec();
    let mut pending: Vec<&[u32]> = holes.to_vec();
    // Rightmost holes first so earlier bridges never block later ones.
    pending.sort_by(|a, b| {
        let ma = a.iter().map(|&v| pts[v as usize][0]).fold(f64::NEG_INFINITY, f64::max);
        let mb = b.iter().map(|&v| pts[v as usize][0]).fold(f64::NEG_INFINITY, f64::max);
        mb.total_cmp(&ma)
    });
    for (hi, hole) in pending.iter().enumerate() {
        let mi = (0..hole.len())
            .max_by(|&i, &j| {
                let (p, q) = (pts[hole[i] as usize], pts[hole[j] as usize]);
                p[0].total_cmp(&q[0]).then(q[1].total_cmp(&p[1]))
            })
            .unwrap();
        let m = pts[hole[mi] as usize];
        let hprev = pts[hole[(mi + hole.len() - 1) % hole.len()] as usize];
        let hnext = pts[hole[(mi + 1) % hole.len()] as usize];
        let mut order: Vec<usize> = (0..ring.len()).collect();
        let dist = |i: usize| {
            let p = pts[ring[i] as usize];
            (p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2)
        };
        order.sort_by(|&i, &j| dist(i).total_cmp(&dist(j)).then(i.cmp(&j)));
        let n = ring.len();
        let mut bridge = None;
        'candidates: for &i in &order {
            let p = pts[ring[i] as usize];
            if p == m {
                bridge = Some(i);
                break;
            }
            let prev = pts[ring[(i + n - 1) % n] as usize];
            let next = pts[ring[(i + 1) % n] as usize];
            if !in_cone(prev, p, next, m) || !in_cone(hprev, m, hnext, p) {
                continue;
            }
            let blocked = |r: &[u32]| {
                let k = r.len();
                (0..k).any(|j| {
                    let a = pts[r[j] as usize];
                    let b = pts[r[(j + 1) % k] as usize];
                    segments_cross(p, m, a, b)
                })
            };
            if blocked(&ring) || pending[hi..].iter().any(|h| blocked(h)) {
                continue 'candidates;
            }
            bridge = Some(i);
            break;
        }
        let i = bridge.ok_or(CapError::NoBridge)?;
        let mut spliced = Vec::with_capacity(ring.len() + hole.len() + 2);
        spliced.extend_from_slice(&ring[..=i]);
        for k in 0..=hole.len() {
            spliced.push(hole[(mi + k) % hole.len()]);
        }
        spliced.push(ring[i]);
        spliced.extend_from_slice(&ring[i + 1..]);
        ring = spliced;
    }
    let mut tris = ear_clip(pts, &ring);
    flip_slivers(pts, &mut tris);
    Ok(tris)
}

/// Ear clipping leaves slivers where collinear boundary points remain at
/// the end. Each one is flipped against the triangle across its longest
/// edge, joining the middle point to the opposite apex. Runs of collinear
/// points clear from the outside in over several passes.
fn flip_slivers(pts: &[P2], tris: &mut [[u32; 3]]) {
    const SLIVER: f64 = 1e-6;
    let len2 = |a: u32, b: u32| {
        let (p, q) = (pts[a as usize], pts[b as usize]);
        (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
    };
    let area2 = |t: &[u32; 3]| orient(pts[t[0] as usize], pts[t[1] as usize], pts[t[2] as usize]);
    let is_sliver = |t: &[u32; 3]| {
        let longest = len2(t[0], t[1]).max(len2(t[1], t[2])).max(len2(t[2], t[0]));
        area2(t) <= SLIVER * longest
    };
    for _ in 0..tris.len() {
        let mut changed = false;
        for ti in 0..tris.len() {
            let t = tris[ti];
            if !is_sliver(&t) {
                continue;
            }
            // the middle point `b` sits opposite the longest edge c→a
            let k = (0..3)
                .max_by(|&i, &j| len2(t[(i + 2) % 3], t[i]).total_cmp(&len2(t[(j + 2) % 3], t[j])))
                .unwrap();
            let (c, a, b) = (t[(k + 2) % 3], t[k], t[(k + 1) % 3]);
            let Some(ni) = tris.iter().position(|u| (0..3).any(|m| u[m] == a && u[(m + 1) % 3] == c)) else {
                continue;
            };
            let u = tris[ni];
            let m = (0..3).find(|&m| u[m] == a).unwrap();
            let d = u[(m + 2) % 3];
            let first = [a, b, d];
            let second = [b, c, d];
            if area2(&first) > 0.0 && area2(&second) > 0.0 {
                tris[ti] = first;
                tris[ni] = second;
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

/// Ear clipping of a weakly simple counter-clockwise ring. Vertices that
/// coincide with a corner of the candidate ear never block it, so bridge
/// duplicates are handled. Collinear runs are kept; only strictly convex
/// corners are clipped while any exist.
fn ear_clip(pts: &[P2], ring: &[u32]) -> Vec<[u32; 3]> {
    let n = ring.len();
    let mut out = Vec::with_capacity(n.saturating_sub(2));
    if n < 3 {
        return out;
    }
    let mut prev: Vec<usize> = (0..n).map(|i| (i + n - 1) % n).collect();
    let mut next: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
    let mut alive = vec![true; n];
    let mut remaining = n;
    let p = |i: usize| pts[ring[i] as usize];

    let is_ear = |i: usize, prev: &[usize], next: &[usize], alive: &[bool]| -> bool {
        let (a, b, c) = (p(prev[i]), p(i), p(next[i]));
        let area2 = orient(a, b, c);
        if !(area2 > 0.0) {
            return false;
        }
        let tol = -1e-12 * area2.abs();
        let mut j = next[next[i]];
        while j != prev[i] {
            if alive[j] {
                let q = p(j);
                if q != a && q != b && q != c && orient(a, b, q) >= tol && orient(b, c, q) >= tol && orient(c, a, q) >= tol {
                    return false;
                }
            }
            j = next[j];
        }
        true
    };

    let mut cur = 0;
    let mut stalled = 0;
    while remaining > 3 {
        if is_ear(cur, &prev, &next, &alive) {
            out.push([ring[prev[cur]], ring[cur], ring[next[cur]]]);
            let (a, c) = (prev[cur], next[cur]);
            next[a] = c;
            prev[c] = a;
            alive[cur] = false;
            remaining -= 1;
            cur = c;
            stalled = 0;
            continue;
        }
        cur = next[cur];
        stalled += 1;
        if stalled > remaining {
            // Numerically stuck: clip the most convex corner regardless.
            let mut best = cur;
            let mut best_area = f64::NEG_INFINITY;
            let mut j = cur;
            for _ in 0..remaining {
                let a2 = orient(p(prev[j]), p(j), p(next[j]));
                if a2 > best_area {
                    best_area = a2;
                    best = j;
                }
                j = next[j];
            }
            out.push([ring[prev[best]], ring[best], ring[next[best]]]);
            let (a, c) = (prev[best], next[best]);
            next[a] = c;
            prev[c] = a;
            alive[best] = false;
            remaining -= 1;
            cur = c;
            stalled = 0;
        }
    }
    out.push([ring[prev[cur]], ring[cur], ring[next[cur]]]);
    out
}
