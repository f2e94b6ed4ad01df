//! Self-support scoring: the risky-face predicate, risky-area totals and the
//! global and local objectives built from them.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::mesh::{clip, ClipError, Plane, TriMesh};
use crate::search::DecompositionPlan;

/// Faces antiparallel to the base normal within this much of `n·d = −1`
/// qualify for the base-contact exemption.
const CONTACT_DOT_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfSupportParams {
    /// Largest printable overhang, in degrees from the build direction.
    pub alpha_max_deg: f64,
    /// Faces on the base plane within this distance are exempt (mm).
    pub base_contact_eps: f64,
}

impl Default for SelfSupportParams {
    fn default() -> Self {
        Self {
            alpha_max_deg: 45.0,
            base_contact_eps: 1e-3,
        }
    }
}

impl SelfSupportParams {
    pub fn new(alpha_max_deg: f64) -> Self {
        Self {
            alpha_max_deg,
            ..Self::default()
        }
    }

    pub fn sin_alpha(&self) -> f64 {
        self.alpha_max_deg.to_radians().sin()
    }

    pub fn is_valid(&self) -> bool {
        self.alpha_max_deg > 0.0 && self.alpha_max_deg < 90.0 && self.base_contact_eps >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceFlag {
    Safe,
    Risky,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub total_risky_area: f64,
    pub per_face_flags: Vec<FaceFlag>,
}

impl RiskReport {
    pub fn risky_faces(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_face_flags
            .iter()
            .enumerate()
            .filter(|(_, f)| **f == FaceFlag::Risky)
            .map(|(i, _)| i)
    }
}

/// Predicate tuned for repeated calls: caches `sin α`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RiskTest {
    sin_alpha: f64,
    contact_eps: f64,
}

impl RiskTest {
    pub(crate) fn new(params: &SelfSupportParams) -> Self {
        Self {
            sin_alpha: params.sin_alpha(),
            contact_eps: params.base_contact_eps,
        }
    }

    #[inline]
    pub(crate) fn dot_is_risky(&self, dot: f64) -> bool {
        dot + self.sin_alpha < 0.0
    }

    #[inline]
    pub(crate) fn is_contact(&self, dot: f64, centroid_distance: f64) -> bool {
        centroid_distance.abs() <= self.contact_eps && dot <= -1.0 + CONTACT_DOT_SLACK
    }

    #[inline]
    pub(crate) fn risky(&self, dot: f64, centroid_distance: f64) -> bool {
        self.dot_is_risky(dot) && !self.is_contact(dot, centroid_distance)
    }
}

/// True iff the face overhangs past `alpha_max` relative to the build
/// direction of `base` and does not rest on the base plane.
pub fn face_risky(face_normal: &Vector3<f64>, base: &Plane, params: &SelfSupportParams, face_centroid: &Point3<f64>) -> bool {
    RiskTest::new(params).risky(face_normal.dot(&base.normal), base.signed_distance(face_centroid))
}

pub fn risky_area(mesh: &TriMesh, base: &Plane, params: &SelfSupportParams) -> RiskReport {
    let test = RiskTest::new(params);
    let mut total = 0.0;
    let mut flags = Vec::with_capacity(mesh.triangle_count());
    for i in 0..mesh.triangle_count() {
        let av = mesh.area_vector(i);
        let twice = av.norm();
        let risky = twice > 0.0 && test.risky(av.dot(&base.normal) / twice, base.signed_distance(&mesh.face_centroid(i)));
        if risky {
            total += 0.5 * twice;
            flags.push(FaceFlag::Risky);
        } else {
            flags.push(FaceFlag::Safe);
        }
    }
    RiskReport {
        total_risky_area: total,
        per_face_flags: flags,
    }
}

/// `R(M, π)`: total area of faces of `mesh` that are risky on `base`.
pub fn risk(mesh: &TriMesh, base: &Plane, params: &SelfSupportParams) -> f64 {
    let test = RiskTest::new(params);
    let mut total = 0.0;
    for i in 0..mesh.triangle_count() {
        let av = mesh.area_vector(i);
        let twice = av.norm();
        if twice > 0.0 && test.risky(av.dot(&base.normal) / twice, base.signed_distance(&mesh.face_centroid(i))) {
            total += 0.5 * twice;
        }
    }
    total
}

/// `J_G`: risky area of every component against its own base.
pub fn global_objective(plan: &DecompositionPlan, params: &SelfSupportParams) -> f64 {
    plan.components.iter().fold(0.0, |acc, c| acc + risk(&c.mesh, &c.base, params))
}

/// `J_L`: the drop in risky area from clipping `current` by `gamma` and
/// printing the upper part on `gamma` instead of on the platform.
pub fn local_descent(current: &TriMesh, gamma: &Plane, platform: &Plane, params: &SelfSupportParams) -> Result<f64, ClipError> {
    let (upper, lower) = clip(current, gamma)?;
    let before = risk(current, platform, params);
    let lower_r = lower.map_or(0.0, |m| risk(&m, platform, params));
    let upper_r = upper.map_or(0.0, |m| risk(&m, gamma, params));
    Ok(before - lower_r - upper_r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use nalgebra::{Rotation3, Vector3};
    use std::f64::consts::PI;

    fn p45() -> SelfSupportParams {
        SelfSupportParams::default()
    }

    #[test]
    fn straight_overhang_is_risky() {
        let base = Plane::horizontal(0.0);
        assert!(face_risky(&-Vector3::z(), &base, &p45(), &Point3::new(0.0, 0.0, 5.0)));
    }

    #[test]
    fn vertical_wall_is_safe() {
        let base = Plane::horizontal(0.0);
        assert!(!face_risky(&Vector3::x(), &base, &p45(), &Point3::new(0.0, 0.0, 5.0)));
    }

    #[test]
    fn boundary_angle_is_safe() {
        // construct the normal so that n·d equals −sin α bit for bit
        let s = p45().sin_alpha();
        let base = Plane::horizontal(0.0);
        let n = Vector3::new((1.0 - s * s).sqrt(), 0.0, -s);
        assert_eq!(n.dot(&base.normal), -s);
        assert!(!face_risky(&n, &base, &p45(), &Point3::new(0.0, 0.0, 5.0)));
    }

    #[test]
    fn platform_contact_is_exempt() {
        let base = Plane::horizontal(0.0);
        assert!(!face_risky(&-Vector3::z(), &base, &p45(), &Point3::new(0.5, 0.5, 0.0)));
        assert!(face_risky(&-Vector3::z(), &base, &p45(), &Point3::new(0.5, 0.5, 0.01)));
    }

    #[test]
    fn cube_on_platform_has_no_risk() {
        let r = risky_area(&fixtures::cube(1.0), &Plane::horizontal(0.0), &p45());
        assert_eq!(r.total_risky_area, 0.0);
        assert!(r.per_face_flags.iter().all(|f| *f == FaceFlag::Safe));
    }

    #[test]
    fn icosphere_risky_area_matches_cap() {
        let s = fixtures::icosphere(1.0, 5);
        let r = risky_area(&s, &Plane::horizontal(-1.0), &p45());
        let cap = 2.0 * PI * (1.0 - (PI / 4.0).cos());
        assert!((r.total_risky_area - cap).abs() / cap < 0.02, "{}", r.total_risky_area);
    }

    #[test]
    fn tilted_cube_has_one_risky_face() {
        for deg in [50.0f64, -50.0] {
            let rot = Rotation3::from_axis_angle(&Vector3::x_axis(), deg.to_radians());
            let c = fixtures::cube(1.0).transformed(rot.matrix(), &Vector3::new(0.0, 0.0, 5.0));
            let r = risky_area(&c, &Plane::horizontal(0.0), &p45());
            assert_eq!(r.risky_faces().count(), 2);
            assert!((r.total_risky_area - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn same_direction_descent_is_zero() {
        let m = fixtures::snowman(1.0, 24);
        let platform = Plane::horizontal(0.0);
        let gamma = Plane::horizontal(12.3);
        let jl = local_descent(&m, &gamma, &platform, &p45()).unwrap();
        // upper part keeps its faces and direction; only the cap is new
        assert!(jl.abs() < 1e-9 * m.surface_area(), "{jl}");
    }

    #[test]
    fn vertical_cut_frees_cantilever_underside() {
        let l = fixtures::l_prism(10.0, 30.0, 20.0, 2.0, 5.0);
        let platform = Plane::horizontal(0.0);
        let gamma = Plane::new(Point3::new(12.0, 0.0, 0.0), Vector3::x()).unwrap();
        let jl = local_descent(&l, &gamma, &platform, &p45()).unwrap();
        assert!((jl - 18.0 * 5.0).abs() < 1e-9, "{jl}");
    }

    #[test]
    fn descent_brute_force_on_walls() {
        // upper part is a slice of vertical walls already safe on the
        // platform; nothing changes face by face over the original surface
        let c = fixtures::cube(10.0);
        let platform = Plane::horizontal(0.0);
        let gamma = Plane::new(Point3::new(0.0, 0.0, 7.0), Vector3::new(0.05, 0.0, 1.0)).unwrap();
        let part = crate::mesh::clip_with_caps(&c, &gamma).unwrap().upper.unwrap();
        let upper = &part.mesh;
        let test = RiskTest::new(&p45());
        let mut brute = 0.0;
        for f in 0..part.cap_start {
            let n = upper.face_normal(f);
            let ctr = upper.face_centroid(f);
            let e_p = test.risky(n.dot(&platform.normal), platform.signed_distance(&ctr)) as u8 as f64;
            let e_g = test.risky(n.dot(&gamma.normal), gamma.signed_distance(&ctr)) as u8 as f64;
            brute += (e_p - e_g) * upper.face_area(f);
        }
        let jl = local_descent(&c, &gamma, &platform, &p45()).unwrap();
        assert!(brute.abs() < 1e-12 && jl.abs() < 1e-12);
    }
}
