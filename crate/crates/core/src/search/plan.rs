use nalgebra::Vector3;

use super::criteria::platform_below;
use super::{platform_footprint, ClipRecord, SearchError};
use crate::manufacturability::{global_objective, risk, SelfSupportParams};
use crate::mesh::{HalfSpaceCell, Plane, Side, TriMesh};

const CELL_EPS: f64 = 1e-3;
const VOLUME_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct PlanComponent {
    pub mesh: TriMesh,
    pub base: Plane,
    pub direction: Vector3<f64>,
    pub risky_area: f64,
    pub cell: HalfSpaceCell,
}

/// Components in printing order; component 1 sits on the platform.
#[derive(Debug, Clone)]
pub struct DecompositionPlan {
    pub components: Vec<PlanComponent>,
    pub j_global: f64,
}

impl DecompositionPlan {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn platform(&self) -> &Plane {
        &self.components[0].base
    }
}

/// Turns a forward clip history into a printing sequence: the last
/// remainder prints first on the platform, then the clipped parts in
/// reverse clipping order, each on its clipping plane.
pub fn invert_to_sequence(
    input: &TriMesh,
    history: &[ClipRecord],
    platform: &Plane,
    params: &SelfSupportParams,
) -> Result<DecompositionPlan, SearchError> {
    let clipped: f64 = history.iter().map(|r| r.component.volume()).sum();
    let input_volume = input.volume();
    let remainder_volume = input_volume - clipped;
    if !(remainder_volume > 0.0) {
        return Err(SearchError::InconsistentHistory(format!(
            "clipped volume {clipped} leaves nothing of {input_volume}"
        )));
    }
    // the remainder is the input below every clipping plane
    let mut remainder = input.clone();
    for r in history {
        let (_, lower) = crate::mesh::clip(&remainder, &r.plane)
            .map_err(|e| SearchError::InconsistentHistory(e.to_string()))?;
        remainder = lower.ok_or_else(|| SearchError::InconsistentHistory("clip left nothing below".into()))?;
    }
    if (remainder.volume() - remainder_volume).abs() > VOLUME_REL_TOL * input_volume {
        return Err(SearchError::InconsistentHistory(format!(
            "remainder volume {} does not close input volume {input_volume}",
            remainder.volume()
        )));
    }
    Ok(assemble(remainder, history, platform, params))
}

/// Builds the plan from a known remainder. Cells follow
/// `Ω_k = (∩_{j<k} Γ_j⁻) ∩ Γ_k⁺`, with the platform closing the sequence.
pub(crate) fn assemble(remainder: TriMesh, history: &[ClipRecord], platform: &Plane, params: &SelfSupportParams) -> DecompositionPlan {
    let cell_for = |k: usize, top: &Plane| {
        let mut cell = HalfSpaceCell::new();
        for r in &history[..k] {
            cell = cell.with(r.plane, Side::Below);
        }
        cell.with(*top, Side::Above)
    };
    let mut components = Vec::with_capacity(history.len() + 1);
    components.push(PlanComponent {
        risky_area: risk(&remainder, platform, params),
        mesh: remainder,
        base: *platform,
        direction: platform.normal,
        cell: cell_for(history.len(), platform),
    });
    for k in (0..history.len()).rev() {
        let r = &history[k];
        components.push(PlanComponent {
            mesh: r.component.clone(),
            base: r.plane,
            direction: r.plane.normal,
            risky_area: risk(&r.component, &r.plane, params),
            cell: cell_for(k, &r.plane),
        });
    }
    let mut plan = DecompositionPlan {
        components,
        j_global: 0.0,
    };
    plan.j_global = global_objective(&plan, params);
    plan
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    VolumeClosure { expected: f64, actual: f64 },
    FirstBaseNotPlatform,
    DirectionMismatch { component: usize },
    /// A vertex of an earlier component lies above the base of `component`.
    Ordering { component: usize, earlier: usize, distance: f64 },
    OutsideCell { component: usize, violation: f64 },
    PlatformAbove { component: usize },
    RiskMismatch { component: usize, stored: f64, actual: f64 },
    ObjectiveMismatch { stored: f64, actual: f64 },
    Empty,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Checks volume closure, that every earlier part lies below each base,
/// cell membership, that the platform stays below every base, and the
/// recorded objective values.
pub fn validate_plan(plan: &DecompositionPlan, input: &TriMesh, platform: &Plane, params: &SelfSupportParams) -> ValidationReport {
    let mut violations = Vec::new();
    if plan.components.is_empty() {
        return ValidationReport {
            violations: vec![Violation::Empty],
        };
    }
    let expected = input.volume();
    let actual: f64 = plan.components.iter().map(|c| c.mesh.volume()).sum();
    if (actual - expected).abs() > VOLUME_REL_TOL * expected.abs() {
        violations.push(Violation::VolumeClosure { expected, actual });
    }
    let first = &plan.components[0].base;
    if (first.normal - platform.normal).norm() > 1e-12 || platform.signed_distance(&first.anchor).abs() > 1e-9 {
        violations.push(Violation::FirstBaseNotPlatform);
    }
    let footprint = platform_footprint(input, platform, 1e-3);
    let tol = 1e-6 * input.aabb().diagonal();
    for (i, c) in plan.components.iter().enumerate() {
        if (c.direction - c.base.normal).norm() > 1e-12 {
            violations.push(Violation::DirectionMismatch { component: i + 1 });
        }
        if i > 0 && !platform_below(&footprint, &c.base) {
            violations.push(Violation::PlatformAbove { component: i + 1 });
        }
        for (j, prior) in plan.components[..i].iter().enumerate() {
            let worst = prior
                .mesh
                .vertices()
                .iter()
                .map(|p| c.base.signed_distance(p))
                .fold(f64::NEG_INFINITY, f64::max);
            if worst > tol {
                violations.push(Violation::Ordering {
                    component: i + 1,
                    earlier: j + 1,
                    distance: worst,
                });
                break;
            }
        }
        let worst = c
            .mesh
            .vertices()
            .iter()
            .map(|p| c.cell.violation(p))
            .fold(0.0, f64::max);
        if worst > CELL_EPS {
            violations.push(Violation::OutsideCell {
                component: i + 1,
                violation: worst,
            });
        }
        let r = risk(&c.mesh, &c.base, params);
        if !close(r, c.risky_area) {
            violations.push(Violation::RiskMismatch {
                component: i + 1,
                stored: c.risky_area,
                actual: r,
            });
        }
    }
    let j = global_objective(plan, params);
    if !close(j, plan.j_global) {
        violations.push(Violation::ObjectiveMismatch {
            stored: plan.j_global,
            actual: j,
        });
    }
    ValidationReport { violations }
}
