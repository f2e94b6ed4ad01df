use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{Point3, Vector3};

use super::bvh::Bvh;
use super::{Strut, SupportConfig, SupportError, SupportTree, Tip, TipKind};
use crate::manufacturability::{RiskTest, SelfSupportParams};
use crate::mesh::{HalfSpaceCell, Plane, Side};

/// Slack for cell membership of tips and nodes (mm).
pub(crate) const CELL_EPS: f64 = 1e-3;
/// Rays and segments ignore hits this close to their start (mm).
const SURFACE_TRIM: f64 = 1e-6;
/// Tips this close to the base plane have reached it (mm).
const AT_BASE: f64 = 1e-9;

/// An open branch end waiting to descend.
#[derive(Debug, Clone, Copy)]
pub(crate) struct OpenTip {
    pub node: usize,
    pub merges: u32,
    /// Lies on the model surface, so nothing may connect into it from above.
    pub on_surface: bool,
}

/// Everything the growth step needs to know about the cell it works in.
pub(crate) struct CellContext<'a> {
    pub bvh: Bvh<'a>,
    pub base: Plane,
    pub cell: &'a HalfSpaceCell,
    pub cell_index: usize,
    pub risk: RiskTest,
    pub config: &'a SupportConfig,
}

#[derive(Debug, Clone, Copy)]
struct Pair {
    dist: f64,
    a: usize,
    b: usize,
}

impl PartialEq for Pair {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pair {}
impl PartialOrd for Pair {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pair {
    // reversed so the heap pops the closest pair first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.a.cmp(&self.a))
            .then(other.b.cmp(&self.b))
    }
}

enum Join {
    /// `upper` connects straight into `lower`, which stays open.
    Into { upper: usize, lower: usize },
    /// Both connect into a new node at this point.
    At(Point3<f64>),
}

impl<'a> CellContext<'a> {
    pub(crate) fn new(
        mesh: &'a crate::mesh::TriMesh,
        base: Plane,
        cell: &'a HalfSpaceCell,
        cell_index: usize,
        params: &SelfSupportParams,
        config: &'a SupportConfig,
    ) -> Self {
        Self {
            bvh: Bvh::new(mesh),
            base,
            cell,
            cell_index,
            risk: RiskTest::new(params),
            config,
        }
    }

    fn down(&self) -> Vector3<f64> {
        -self.base.normal
    }

    fn height(&self, p: &Point3<f64>) -> f64 {
        self.base.signed_distance(p)
    }

    /// Merges open tips pairwise, closest first, then drops every survivor
    /// until it lands on the model or reaches the base. Returns the tips left
    /// on the base plane.
    pub(crate) fn grow(&self, tree: &mut SupportTree, tips: Vec<OpenTip>) -> Result<Vec<OpenTip>, SupportError> {
        for t in &tips {
            let p = tree.nodes[t.node];
            if !self.cell.contains(&p, CELL_EPS) {
                return Err(SupportError::SampleOutsideCell { position: p });
            }
        }
        let mut open: Vec<Option<OpenTip>> = tips.into_iter().map(Some).collect();
        let tan = self.config.tree_angle_deg.to_radians().tan();
        let mut heap = BinaryHeap::new();
        for a in 0..open.len() {
            for b in a + 1..open.len() {
                if let Some(pair) = self.pair(tree, &open, a, b, tan) {
                    heap.push(pair);
                }
            }
        }
        while let Some(Pair { a, b, .. }) = heap.pop() {
            let (Some(ta), Some(tb)) = (open[a], open[b]) else {
                continue;
            };
            let merges = ta.merges.max(tb.merges) + 1;
            if merges > self.config.max_merges_per_branch {
                continue;
            }
            let Some(join) = self.join(tree, &ta, &tb, tan) else {
                continue;
            };
            let merged = match join {
                Join::Into { upper, lower } => {
                    let (up, low) = if upper == ta.node { (ta, tb) } else { (tb, ta) };
                    debug_assert_eq!(low.node, lower);
                    tree.push_strut(up.node, lower, self.cell_index);
                    OpenTip {
                        node: lower,
                        merges,
                        on_surface: false,
                    }
                }
                Join::At(m) => {
                    let node = tree.push_node(m);
                    tree.push_strut(ta.node, node, self.cell_index);
                    tree.push_strut(tb.node, node, self.cell_index);
                    OpenTip {
                        node,
                        merges,
                        on_surface: false,
                    }
                }
            };
            open[a] = None;
            open[b] = None;
            open.push(Some(merged));
            let c = open.len() - 1;
            for other in 0..c {
                if open[other].is_some() {
                    if let Some(pair) = self.pair(tree, &open, other, c, tan) {
                        heap.push(pair);
                    }
                }
            }
        }
        let mut carried = Vec::new();
        for tip in open.into_iter().flatten() {
            if let Some(t) = self.descend(tree, tip)? {
                carried.push(t);
            }
        }
        Ok(carried)
    }

    fn pair(&self, tree: &SupportTree, open: &[Option<OpenTip>], a: usize, b: usize, tan: f64) -> Option<Pair> {
        let (pa, pb) = (tree.nodes[open[a]?.node], tree.nodes[open[b]?.node]);
        let (ha, hb) = (self.height(&pa), self.height(&pb));
        let lateral = self.lateral(&(pb - pa)).norm();
        // cones of the two tips must meet above the base
        if lateral >= tan * (ha + hb) {
            return None;
        }
        Some(Pair {
            dist: (pb - pa).norm(),
            a,
            b,
        })
    }

    fn lateral(&self, v: &Vector3<f64>) -> Vector3<f64> {
        v - self.base.normal * v.dot(&self.base.normal)
    }

    fn join(&self, tree: &SupportTree, ta: &OpenTip, tb: &OpenTip, tan: f64) -> Option<Join> {
        let (pa, pb) = (tree.nodes[ta.node], tree.nodes[tb.node]);
        let (ha, hb) = (self.height(&pa), self.height(&pb));
        let w = self.lateral(&(pb - pa));
        let l = w.norm();
        let reach = l / tan;
        // one tip inside the other's cone: connect directly
        let direct = if ha - hb >= reach - 1e-12 {
            Some((ta, tb))
        } else if hb - ha >= reach - 1e-12 {
            Some((tb, ta))
        } else {
            None
        };
        if let Some((up, low)) = direct {
            if low.on_surface {
                return None;
            }
            let (pu, pl) = (tree.nodes[up.node], tree.nodes[low.node]);
            if self.bvh.segment_blocked(&pu, &pl, SURFACE_TRIM) {
                return None;
            }
            return Some(Join::Into {
                upper: up.node,
                lower: low.node,
            });
        }
        let z = 0.5 * (ha + hb - reach);
        if z <= AT_BASE {
            return None;
        }
        let m = pa + w * ((ha - z) * tan / l) + self.down() * (ha - z);
        if !self.cell.contains(&m, 0.0) {
            return None;
        }
        if self.bvh.segment_blocked(&pa, &m, SURFACE_TRIM) || self.bvh.segment_blocked(&pb, &m, SURFACE_TRIM) {
            return None;
        }
        Some(Join::At(m))
    }

    /// Drops `tip` along the build axis. Returns it again if it stopped on
    /// the base plane.
    fn descend(&self, tree: &mut SupportTree, tip: OpenTip) -> Result<Option<OpenTip>, SupportError> {
        let mut node = tip.node;
        let down = self.down();
        match self.travel(&tree.nodes[node], &down) {
            Travel::Land(p) => {
                let end = tree.push_node(p);
                tree.push_strut(node, end, self.cell_index);
                tree.tips.push(Tip {
                    node: end,
                    kind: TipKind::Model {
                        component: self.cell_index,
                    },
                });
                Ok(None)
            }
            Travel::Base(p) => Ok(Some(self.stop_at_base(tree, node, p, tip))),
            Travel::Wall(p, wall) => {
                if (p - tree.nodes[node]).norm() > AT_BASE {
                    let w = tree.push_node(p);
                    tree.push_strut(node, w, self.cell_index);
                    node = w;
                }
                let Some(dir) = self.tilt_away(&wall) else {
                    return Err(SupportError::Unprojectable { position: p });
                };
                match self.travel(&p, &dir) {
                    Travel::Land(q) => {
                        let end = tree.push_node(q);
                        tree.push_strut(node, end, self.cell_index);
                        tree.tips.push(Tip {
                            node: end,
                            kind: TipKind::Model {
                                component: self.cell_index,
                            },
                        });
                        Ok(None)
                    }
                    Travel::Base(q) => Ok(Some(self.stop_at_base(tree, node, q, tip))),
                    Travel::Wall(q, _) | Travel::Stuck(q) => Err(SupportError::Unprojectable { position: q }),
                }
            }
            Travel::Stuck(p) => Err(SupportError::Unprojectable { position: p }),
        }
    }

    fn stop_at_base(&self, tree: &mut SupportTree, node: usize, p: Point3<f64>, tip: OpenTip) -> OpenTip {
        let end = if (p - tree.nodes[node]).norm() > AT_BASE {
            let end = tree.push_node(p);
            tree.push_strut(node, end, self.cell_index);
            end
        } else {
            node
        };
        OpenTip {
            node: end,
            merges: tip.merges,
            on_surface: false,
        }
    }

    /// Direction within the tree angle that moves away from `wall`.
    fn tilt_away(&self, wall: &Plane) -> Option<Vector3<f64>> {
        let lat = self.lateral(&wall.normal);
        let ln = lat.norm();
        if ln < 1e-12 {
            return None;
        }
        let theta = self.config.tree_angle_deg.to_radians();
        let dir = self.down() * theta.cos() - lat * (theta.sin() / ln);
        (wall.normal.dot(&dir) <= 0.0).then_some(dir)
    }

    fn travel(&self, from: &Point3<f64>, dir: &Vector3<f64>) -> Travel {
        let descent = -dir.dot(&self.base.normal);
        let h = self.height(from);
        if h <= AT_BASE {
            return Travel::Base(*from);
        }
        if descent <= 0.0 {
            return Travel::Stuck(*from);
        }
        let t_base = h / descent;
        let mut t_wall = f64::INFINITY;
        let mut wall = None;
        for (plane, side) in &self.cell.halves {
            if *side != Side::Below {
                continue;
            }
            let rate = plane.normal.dot(dir);
            if rate <= 0.0 {
                continue;
            }
            let t = (-plane.signed_distance(from)).max(0.0) / rate;
            if t < t_wall {
                t_wall = t;
                wall = Some(*plane);
            }
        }
        let limit = t_base.min(t_wall);
        let mesh = self.bvh.mesh();
        let land = self.bvh.first_hit(from, dir, SURFACE_TRIM, limit, |tri| {
            let av = mesh.area_vector(tri);
            let twice = av.norm();
            twice > 0.0
                && av.dot(dir) < 0.0
                && !self
                    .risk
                    .risky(av.dot(&self.base.normal) / twice, self.base.signed_distance(&mesh.face_centroid(tri)))
        });
        if let Some(hit) = land {
            return Travel::Land(from + dir * hit.t);
        }
        if t_base <= t_wall {
            // land exactly on the plane
            let p = from + dir * t_base;
            Travel::Base(p - self.base.normal * self.base.signed_distance(&p))
        } else {
            Travel::Wall(from + dir * t_wall, wall.expect("finite wall time"))
        }
    }
}

enum Travel {
    Land(Point3<f64>),
    Base(Point3<f64>),
    Wall(Point3<f64>, Plane),
    Stuck(Point3<f64>),
}

impl SupportTree {
    pub(crate) fn push_node(&mut self, p: Point3<f64>) -> usize {
        self.nodes.push(p);
        self.nodes.len() - 1
    }

    pub(crate) fn push_strut(&mut self, upper: usize, lower: usize, cell: usize) {
        self.struts.push(Strut {
            upper,
            lower,
            radius: 0.0,
            cell,
            torque: 0.0,
        });
    }
}
