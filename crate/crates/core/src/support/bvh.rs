use nalgebra::{Point3, Vector3};

use crate::mesh::{Aabb, TriMesh};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: range into `order`. Inner: `start` is the left child, right is `start + 1`.
    start: usize,
    count: usize,
}

/// Bounding-volume hierarchy over the triangles of one mesh.
#[derive(Debug, Clone)]
pub(crate) struct Bvh<'a> {
    mesh: &'a TriMesh,
    nodes: Vec<Node>,
    order: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Hit {
    pub t: f64,
    pub triangle: usize,
}

impl<'a> Bvh<'a> {
    pub(crate) fn new(mesh: &'a TriMesh) -> Self {
        let n = mesh.triangle_count();
        let centroids: Vec<Point3<f64>> = (0..n).map(|i| mesh.face_centroid(i)).collect();
        let mut bvh = Bvh {
            mesh,
            nodes: Vec::with_capacity(2 * n / LEAF_SIZE + 1),
            order: (0..n).collect(),
        };
        bvh.nodes.push(Node {
            bounds: Aabb::empty(),
            start: 0,
            count: n,
        });
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let Node { start, count, .. } = bvh.nodes[ni];
            let mut bounds = Aabb::empty();
            let mut cbounds = Aabb::empty();
            for &t in &bvh.order[start..start + count] {
                for p in mesh.corners(t) {
                    bounds.grow(&p);
                }
                cbounds.grow(&centroids[t]);
            }
            bvh.nodes[ni].bounds = bounds;
            if count <= LEAF_SIZE {
                continue;
            }
            let ext = cbounds.max - cbounds.min;
            let axis = ext.imax();
            if !(ext[axis] > 0.0) {
                continue;
            }
            let slice = &mut bvh.order[start..start + count];
            let mid = count / 2;
            slice.select_nth_unstable_by(mid, |a, b| centroids[*a][axis].total_cmp(&centroids[*b][axis]));
            let left = bvh.nodes.len();
            bvh.nodes.push(Node {
                bounds: Aabb::empty(),
                start,
                count: mid,
            });
            bvh.nodes.push(Node {
                bounds: Aabb::empty(),
                start: start + mid,
                count: count - mid,
            });
            bvh.nodes[ni].start = left;
            bvh.nodes[ni].count = 0;
            stack.push(left);
            stack.push(left + 1);
        }
        bvh
    }

    pub(crate) fn mesh(&self) -> &TriMesh {
        self.mesh
    }

    /// Nearest hit with `t` in `(t_min, t_max)` among triangles accepted by `accept`.
    pub(crate) fn first_hit(
        &self,
        origin: &Point3<f64>,
        dir: &Vector3<f64>,
        t_min: f64,
        t_max: f64,
        mut accept: impl FnMut(usize) -> bool,
    ) -> Option<Hit> {
        let inv = dir.map(|c| 1.0 / c);
        let mut best: Option<Hit> = None;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            let limit = best.map_or(t_max, |h| h.t);
            if !slab_test(&node.bounds, origin, &inv, t_min, limit) {
                continue;
            }
            if node.count == 0 && node.start != 0 {
                stack.push(node.start);
                stack.push(node.start + 1);
                continue;
            }
            for &tri in &self.order[node.start..node.start + node.count] {
                if let Some(t) = ray_triangle(self.mesh, tri, origin, dir) {
                    if t > t_min && t < best.map_or(t_max, |h| h.t) && accept(tri) {
                        best = Some(Hit { t, triangle: tri });
                    }
                }
            }
        }
        best
    }

    /// True iff the open segment `a → b`, trimmed by `trim` mm at both ends,
    /// crosses any triangle.
    pub(crate) fn segment_blocked(&self, a: &Point3<f64>, b: &Point3<f64>, trim: f64) -> bool {
        let d = b - a;
        let len = d.norm();
        if len <= 2.0 * trim {
            return false;
        }
        let dir = d / len;
        self.first_hit(a, &dir, trim, len - trim, |_| true).is_some()
    }
}

fn slab_test(b: &Aabb, o: &Point3<f64>, inv: &Vector3<f64>, t_min: f64, t_max: f64) -> bool {
    if b.is_empty() {
        return false;
    }
    let mut lo = t_min;
    let mut hi = t_max;
    for k in 0..3 {
        let t1 = (b.min[k] - o[k]) * inv[k];
        let t2 = (b.max[k] - o[k]) * inv[k];
        let (near, far) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        // NaN (zero direction on a face of the box) keeps the current bounds
        if near > lo {
            lo = near;
        }
        if far < hi {
            hi = far;
        }
        if lo > hi + 1e-12 {
            return false;
        }
    }
    true
}

/// Möller–Trumbore; returns the ray parameter of the hit.
fn ray_triangle(mesh: &TriMesh, tri: usize, o: &Point3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    let [a, b, c] = mesh.corners(tri);
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    let scale = e1.norm() * e2.norm();
    if det.abs() <= 1e-14 * scale {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - a;
    let u = s.dot(&p) * inv;
    const EDGE: f64 = 1e-10;
    if !(-EDGE..=1.0 + EDGE).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < -EDGE || u + v > 1.0 + EDGE {
        return None;
    }
    Some(e2.dot(&q) * inv)
}
