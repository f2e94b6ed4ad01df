//! Tree supports for whatever overhang a plan leaves behind. Supports of a
//! component grow inside its cell and continue into the cells printed
//! earlier until they reach the platform or a safe surface.

mod bvh;
mod grow;
mod overhang;

use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use overhang::{detect_overhangs, OverhangKind, OverhangSample};

use crate::manufacturability::SelfSupportParams;
use crate::mesh::{orthonormal_basis, HalfSpaceCell, Side, TriMesh};
use crate::search::DecompositionPlan;
use grow::{CellContext, OpenTip, CELL_EPS};

/// Standard gravity in mm/s².
pub const GRAVITY: f64 = 9810.0;
const PRISM_SIDES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportConfig {
    /// Overhang sampling spacing R (mm).
    pub sample_interval: f64,
    /// Largest strut tilt from the build axis, in degrees.
    pub tree_angle_deg: f64,
    pub max_merges_per_branch: u32,
    /// Torque scale for strut thickening.
    pub lambda: f64,
}

impl Default for SupportConfig {
    fn default() -> Self {
        Self {
            sample_interval: 3.0,
            tree_angle_deg: 30.0,
            max_merges_per_branch: 3,
            lambda: 1e-6,
        }
    }
}

impl SupportConfig {
    /// Radius of a strut that carries nothing.
    pub fn base_radius(&self) -> f64 {
        self.sample_interval / 4.0
    }

    pub fn validate(&self) -> Result<(), SupportError> {
        let ok = self.sample_interval > 0.0
            && self.sample_interval.is_finite()
            && self.tree_angle_deg > 0.0
            && self.tree_angle_deg < 90.0
            && self.lambda >= 0.0
            && self.lambda.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SupportError::Config(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SupportError {
    #[error("support sample {position:?} lies outside its cell")]
    SampleOutsideCell { position: Point3<f64> },
    #[error("unprojectable support at {position:?}")]
    Unprojectable { position: Point3<f64> },
    #[error("cell has no base half-space facing the growth direction")]
    NoBase,
    #[error("invalid support config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strut {
    pub upper: usize,
    pub lower: usize,
    pub radius: f64,
    /// Index of the plan component whose cell holds the strut.
    pub cell: usize,
    /// Magnitude of the gravity moment of everything carried, about `upper`.
    pub torque: f64,
}

impl Strut {
    pub fn length(&self, tree: &SupportTree) -> f64 {
        (tree.nodes[self.upper] - tree.nodes[self.lower]).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TipKind {
    /// A sampled overhang the tree holds up.
    Overhang { sample: OverhangKind },
    /// Lands on a safe face of the given component.
    Model { component: usize },
    Platform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tip {
    pub node: usize,
    pub kind: TipKind,
}

/// Struts point from `upper` down to `lower`; every node has at most one
/// strut leaving it downward.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SupportTree {
    pub nodes: Vec<Point3<f64>>,
    pub struts: Vec<Strut>,
    pub tips: Vec<Tip>,
}

impl SupportTree {
    pub fn is_empty(&self) -> bool {
        self.struts.is_empty()
    }

    /// Strut leaving each node downward.
    pub fn downward(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.nodes.len()];
        for (i, s) in self.struts.iter().enumerate() {
            out[s.upper] = Some(i);
        }
        out
    }

    /// Volume of the emitted prisms.
    pub fn volume(&self) -> f64 {
        self.struts.iter().fold(0.0, |acc, s| acc + prism_area(s.radius) * s.length(self))
    }

    pub fn cell_volume(&self, cell: usize) -> f64 {
        self.struts
            .iter()
            .filter(|s| s.cell == cell)
            .fold(0.0, |acc, s| acc + prism_area(s.radius) * s.length(self))
    }

    /// Merges crossed on the worst path from any tip down to a root.
    pub fn max_merges(&self) -> u32 {
        let down = self.downward();
        let mut incoming = vec![0u32; self.nodes.len()];
        for s in &self.struts {
            incoming[s.lower] += 1;
        }
        let mut worst = 0;
        for start in 0..self.nodes.len() {
            if incoming[start] != 0 {
                continue;
            }
            let mut merges = 0;
            let mut node = start;
            while let Some(s) = down[node] {
                node = self.struts[s].lower;
                if incoming[node] > 1 {
                    merges += incoming[node] - 1;
                }
            }
            worst = worst.max(merges);
        }
        worst
    }
}

/// Grows supports for `samples` inside `cell` along `-direction`. Returns
/// the partial tree and the tips that stopped on the cell's base plane.
pub fn grow_tree(
    samples: &[OverhangSample],
    component: &TriMesh,
    cell: &HalfSpaceCell,
    direction: &Vector3<f64>,
    params: &SelfSupportParams,
    config: &SupportConfig,
) -> Result<(SupportTree, Vec<Point3<f64>>), SupportError> {
    config.validate()?;
    let base = cell
        .halves
        .iter()
        .find(|(p, side)| *side == Side::Above && (p.normal - direction.normalize()).norm() < 1e-9)
        .map(|(p, _)| *p)
        .ok_or(SupportError::NoBase)?;
    let mut tree = SupportTree::default();
    let tips = seed(&mut tree, samples);
    let ctx = CellContext::new(component, base, cell, 0, params, config);
    let carried = ctx.grow(&mut tree, tips)?;
    let points = carried.iter().map(|t| tree.nodes[t.node]).collect();
    assign_radii(&mut tree, &base.normal, config);
    Ok((tree, points))
}

fn seed(tree: &mut SupportTree, samples: &[OverhangSample]) -> Vec<OpenTip> {
    samples
        .iter()
        .map(|s| {
            let node = tree.push_node(s.position);
            tree.tips.push(Tip {
                node,
                kind: TipKind::Overhang { sample: s.kind },
            });
            OpenTip {
                node,
                merges: 0,
                on_surface: true,
            }
        })
        .collect()
}

/// Builds supports for the whole plan, from the last printed component
/// down to the platform, and sizes every strut.
pub fn progressive_projection(
    plan: &DecompositionPlan,
    params: &SelfSupportParams,
    config: &SupportConfig,
) -> Result<SupportTree, SupportError> {
    config.validate()?;
    let mut tree = SupportTree::default();
    if plan.is_empty() {
        return Ok(tree);
    }
    let mut pending: Vec<(usize, OpenTip)> = Vec::new();
    for i in (0..plan.len()).rev() {
        let comp = &plan.components[i];
        let mut tips: Vec<OpenTip> = Vec::new();
        pending.retain(|(target, tip)| {
            if *target == i {
                tips.push(*tip);
                false
            } else {
                true
            }
        });
        if comp.risky_area > 0.0 {
            let samples = detect_overhangs(&comp.mesh, &comp.base, params, config);
            tips.extend(seed(&mut tree, &samples));
        }
        if tips.is_empty() {
            continue;
        }
        let ctx = CellContext::new(&comp.mesh, comp.base, &comp.cell, i, params, config);
        let carried = ctx.grow(&mut tree, tips)?;
        for tip in carried {
            let p = tree.nodes[tip.node];
            if i == 0 {
                tree.tips.push(Tip {
                    node: tip.node,
                    kind: TipKind::Platform,
                });
                continue;
            }
            let target = (0..i)
                .rev()
                .find(|&j| plan.components[j].cell.contains(&p, CELL_EPS))
                .ok_or(SupportError::Unprojectable { position: p })?;
            pending.push((target, tip));
        }
    }
    assign_radii(&mut tree, &plan.platform().normal, config);
    Ok(tree)
}

/// Sizes struts top-down: `r = (1 + λ‖τ‖)·R/4`, where `τ` is the gravity
/// torque about the strut's top of every strut above it, and never thinner
/// than the struts it carries.
fn assign_radii(tree: &mut SupportTree, up: &Vector3<f64>, config: &SupportConfig) {
    let g = -up * GRAVITY;
    let n = tree.nodes.len();
    let mut carried_volume = vec![0.0; n];
    let mut carried_moment = vec![Vector3::zeros(); n];
    let mut thickest_above = vec![0.0f64; n];
    let mut pending_in = vec![0usize; n];
    for s in &tree.struts {
        pending_in[s.lower] += 1;
    }
    let down = tree.downward();
    let mut ready: Vec<usize> = (0..n).filter(|&v| pending_in[v] == 0).collect();
    ready.reverse();
    while let Some(v) = ready.pop() {
        let Some(si) = down[v] else { continue };
        let s = tree.struts[si];
        let top = tree.nodes[s.upper];
        let bottom = tree.nodes[s.lower];
        let lever = carried_moment[v] - top.coords * carried_volume[v];
        let torque = lever.cross(&g).norm();
        let radius = ((1.0 + config.lambda * torque) * config.base_radius()).max(thickest_above[v]);
        tree.struts[si].radius = radius;
        tree.struts[si].torque = torque;
        let volume = PI * radius * radius * (top - bottom).norm();
        let centre = (top.coords + bottom.coords) * 0.5;
        let w = s.lower;
        carried_volume[w] += carried_volume[v] + volume;
        carried_moment[w] = carried_moment[w] + carried_moment[v] + centre * volume;
        thickest_above[w] = thickest_above[w].max(radius);
        pending_in[w] -= 1;
        if pending_in[w] == 0 {
            ready.push(w);
        }
    }
}

/// Cross-section of the octagon circumscribing a circle of `radius`.
fn prism_area(radius: f64) -> f64 {
    PRISM_SIDES as f64 * radius * radius * (PI / PRISM_SIDES as f64).tan()
}

/// One closed octagonal prism per strut; prisms are not unioned.
pub fn emit_support_mesh(tree: &SupportTree) -> TriMesh {
    emit_struts(tree, |_| true)
}

/// Prisms of the struts in one component's cell.
pub fn emit_cell_supports(tree: &SupportTree, cell: usize) -> TriMesh {
    emit_struts(tree, |s| s.cell == cell)
}

fn emit_struts(tree: &SupportTree, keep: impl Fn(&Strut) -> bool) -> TriMesh {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for s in tree.struts.iter().filter(|s| keep(s)) {
        let (top, bottom) = (tree.nodes[s.upper], tree.nodes[s.lower]);
        let axis = top - bottom;
        let len = axis.norm();
        if len <= 0.0 || s.radius <= 0.0 {
            continue;
        }
        let e = axis / len;
        let (u, v) = orthonormal_basis(&e);
        let rc = s.radius / (PI / PRISM_SIDES as f64).cos();
        let b0 = vertices.len() as u32;
        let k = PRISM_SIDES as u32;
        for end in [bottom, top] {
            for j in 0..PRISM_SIDES {
                let phi = 2.0 * PI * j as f64 / PRISM_SIDES as f64;
                vertices.push(end + (u * phi.cos() + v * phi.sin()) * rc);
            }
        }
        for j in 0..k {
            let j1 = (j + 1) % k;
            triangles.push([b0 + j, b0 + j1, b0 + k + j]);
            triangles.push([b0 + j1, b0 + k + j1, b0 + k + j]);
        }
        for j in 1..k - 1 {
            triangles.push([b0, b0 + j + 1, b0 + j]);
            triangles.push([b0 + k, b0 + k + j, b0 + k + j + 1]);
        }
    }
    TriMesh::from_raw(vertices, triangles)
}
