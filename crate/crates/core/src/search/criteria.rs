use nalgebra::Point3;
use thiserror::Error;

use super::SearchConfig;
use crate::manufacturability::risk;
use crate::mesh::{clip_with_caps, solid_labels, ClipError, ClipPart, Plane, TriMesh};

/// Why a clipping plane was rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Infeasible {
    #[error("criterion III: platform not strictly below the clipping plane")]
    CriterionIII,
    #[error("degenerate clip: {0}")]
    Degenerate(ClipError),
    #[error("plane does not split the model")]
    NoSplit,
    #[error("volume bound: upper part smaller than V/w")]
    VolumeBound,
    #[error("criterion II: a lower component does not touch the platform")]
    CriterionII,
    #[error("attachment: an upper component has no face on the clipping plane")]
    Attachment,
    #[error("thin part: a near-parallel face lies within the nozzle resolution of the plane")]
    ThinPart,
}

impl Infeasible {
    pub fn reason(&self) -> &'static str {
        match self {
            Self::CriterionIII => "criterion III",
            Self::Degenerate(_) => "degenerate clip",
            Self::NoSplit => "no split",
            Self::VolumeBound => "volume bound",
            Self::CriterionII => "criterion II",
            Self::Attachment => "attachment",
            Self::ThinPart => "thin part",
        }
    }
}

/// A feasible clip, with both parts and their risky areas: the upper part
/// against the clipping plane, the lower against the platform.
#[derive(Debug, Clone)]
pub struct Feasible {
    pub upper: ClipPart,
    pub lower: ClipPart,
    pub upper_risk: f64,
    pub lower_risk: f64,
}

/// Vertices of `mesh` touching the platform plane. This is the region the
/// clipping planes must keep strictly below them.
pub fn platform_footprint(mesh: &TriMesh, platform: &Plane, eps: f64) -> Vec<Point3<f64>> {
    mesh.vertices()
        .iter()
        .filter(|p| platform.signed_distance(p).abs() <= eps)
        .copied()
        .collect()
}

/// Footprint points must have at least this clearance below a clipping
/// plane; matches the on-plane tolerance of the clipper.
pub(crate) const FOOTPRINT_CLEARANCE: f64 = crate::mesh::ON_PLANE_EPS;

pub(crate) fn platform_below(footprint: &[Point3<f64>], gamma: &Plane) -> bool {
    footprint.iter().all(|p| gamma.signed_distance(p) < -FOOTPRINT_CLEARANCE)
}

/// Reference feasibility test built on a full clip. The search itself uses
/// the equivalent [`Evaluator`](super::Evaluator) fast path.
pub fn check_criteria(remaining: &TriMesh, gamma: &Plane, config: &SearchConfig, input_volume: f64) -> Result<Feasible, Infeasible> {
    let footprint = platform_footprint(remaining, &config.platform, config.contact_eps);
    if !platform_below(&footprint, gamma) {
        return Err(Infeasible::CriterionIII);
    }
    let out = clip_with_caps(remaining, gamma).map_err(Infeasible::Degenerate)?;
    let (upper, lower) = match (out.upper, out.lower) {
        (Some(u), Some(l)) => (u, l),
        _ => return Err(Infeasible::NoSplit),
    };
    if upper.mesh.volume() < input_volume / config.volume_divisor as f64 {
        return Err(Infeasible::VolumeBound);
    }

    let (labels, count) = solid_labels(&lower.mesh);
    let mut grounded = vec![false; count];
    for (f, t) in lower.mesh.triangles().iter().enumerate() {
        if t.iter()
            .any(|&v| config.platform.signed_distance(&lower.mesh.vertices()[v as usize]).abs() <= config.contact_eps)
        {
            grounded[labels[f]] = true;
        }
    }
    if grounded.iter().any(|g| !g) {
        return Err(Infeasible::CriterionII);
    }

    let (labels, count) = solid_labels(&upper.mesh);
    let mut attached = vec![false; count];
    for f in upper.cap_faces() {
        attached[labels[f]] = true;
    }
    if attached.iter().any(|a| !a) {
        return Err(Infeasible::Attachment);
    }

    if let Some(filter) = &config.thin_part_filter {
        for f in 0..remaining.triangle_count() {
            let n = remaining.face_normal(f);
            if n.dot(&gamma.normal).abs() >= filter.parallel_dot
                && gamma.signed_distance(&remaining.face_centroid(f)).abs() < filter.nozzle_resolution
            {
                return Err(Infeasible::ThinPart);
            }
        }
    }

    let upper_risk = risk(&upper.mesh, gamma, &config.self_support);
    let lower_risk = risk(&lower.mesh, &config.platform, &config.self_support);
    Ok(Feasible {
        upper,
        lower,
        upper_risk,
        lower_risk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::search::ThinPartFilter;
    use nalgebra::Vector3;

    fn config() -> SearchConfig {
        SearchConfig::default()
    }

    #[test]
    fn cube_mid_cut_is_feasible() {
        let c = fixtures::cube(10.0);
        let f = check_criteria(&c, &Plane::horizontal(5.0), &config(), c.volume()).unwrap();
        assert!((f.upper.mesh.volume() - 500.0).abs() < 1e-9);
        assert_eq!(f.upper_risk, 0.0);
    }

    #[test]
    fn platform_above_plane_is_criterion_three() {
        let c = fixtures::cube(10.0);
        let down = Plane::new(Point3::new(0.0, 0.0, 5.0), -Vector3::z()).unwrap();
        let err = check_criteria(&c, &down, &config(), c.volume()).unwrap_err();
        assert_eq!(err.reason(), "criterion III");
    }

    #[test]
    fn floating_leg_is_criterion_two() {
        // the plane z − x = 1 leaves the tip of the top leg below it,
        // detached from the spine
        let u = fixtures::u_prism(30.0, 20.0, 5.0, 5.0);
        let plane = Plane::new(Point3::new(0.0, 0.0, 1.0), Vector3::new(-1.0, 0.0, 1.0)).unwrap();
        let err = check_criteria(&u, &plane, &config(), u.volume()).unwrap_err();
        assert_eq!(err.reason(), "criterion II");
    }

    #[test]
    fn small_top_slice_violates_volume_bound() {
        let c = fixtures::cube(10.0);
        let err = check_criteria(&c, &Plane::horizontal(9.5), &config(), c.volume()).unwrap_err();
        assert_eq!(err, Infeasible::VolumeBound);
    }

    #[test]
    fn coplanar_plane_is_degenerate() {
        let l = fixtures::l_prism(10.0, 30.0, 20.0, 5.0, 5.0);
        let err = check_criteria(&l, &Plane::horizontal(15.0), &config(), l.volume()).unwrap_err();
        assert_eq!(err.reason(), "degenerate clip");
    }

    #[test]
    fn detached_upper_piece_violates_attachment() {
        // second solid lies wholly above the plane
        let base = fixtures::box_mesh(Point3::origin(), Point3::new(10.0, 10.0, 10.0));
        let floating = fixtures::box_mesh(Point3::new(20.0, 0.0, 12.0), Point3::new(30.0, 10.0, 20.0));
        let m = TriMesh::merged([&base, &floating]);
        let err = check_criteria(&m, &Plane::horizontal(5.0), &config(), 10.0).unwrap_err();
        assert_eq!(err, Infeasible::Attachment);
    }

    #[test]
    fn thin_filter_rejects_near_parallel_faces() {
        let c = fixtures::l_prism(10.0, 30.0, 20.0, 5.0, 5.0);
        let mut cfg = config();
        cfg.thin_part_filter = Some(ThinPartFilter::new(1.0));
        let err = check_criteria(&c, &Plane::horizontal(15.5), &cfg, c.volume()).unwrap_err();
        assert_eq!(err, Infeasible::ThinPart);
        assert!(check_criteria(&c, &Plane::horizontal(12.0), &cfg, c.volume()).is_ok());
    }
}
