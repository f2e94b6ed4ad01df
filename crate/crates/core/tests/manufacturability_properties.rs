use mdp_core::fixtures;
use mdp_core::manufacturability::{local_descent, risk, risky_area, SelfSupportParams};
use mdp_core::mesh::{clip, ClipError, Plane, TriMesh};
use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;

fn suite() -> &'static [(&'static str, TriMesh)] {
    use std::sync::OnceLock;
    static SUITE: OnceLock<Vec<(&'static str, TriMesh)>> = OnceLock::new();
    SUITE.get_or_init(fixtures::suite)
}

fn unit(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos())
}

fn mid_plane(mesh: &TriMesh, normal: Vector3<f64>, fraction: f64) -> Plane {
    let (lo, hi) = mesh
        .vertices()
        .iter()
        .map(|p| p.coords.dot(&normal))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t), hi.max(t)));
    Plane::from_offset(normal, lo + fraction * (hi - lo)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn risk_is_bounded_by_surface_area(which in 0usize..5, theta in 0.0..std::f64::consts::TAU, phi in 0.0..std::f64::consts::PI, h in -5.0f64..5.0) {
        let (_, mesh) = &suite()[which];
        let base = Plane::from_offset(unit(theta, phi), h).unwrap();
        let r = risk(mesh, &base, &SelfSupportParams::default());
        prop_assert!(r >= 0.0);
        prop_assert!(r <= mesh.surface_area() * (1.0 + 1e-12));
        let report = risky_area(mesh, &base, &SelfSupportParams::default());
        let summed: f64 = report.risky_faces().map(|f| mesh.face_area(f)).sum();
        prop_assert!((report.total_risky_area - summed).abs() <= 1e-9 * summed.max(1.0));
        prop_assert!((report.total_risky_area - r).abs() <= 1e-12 * r.max(1.0));
    }

    #[test]
    fn risk_is_invariant_under_rigid_motion(
        which in 0usize..5,
        axis_theta in 0.0..std::f64::consts::TAU, axis_phi in 0.0..std::f64::consts::PI, angle in -std::f64::consts::PI..std::f64::consts::PI,
        tx in -50.0f64..50.0, ty in -50.0f64..50.0, tz in -50.0f64..50.0,
        theta in 0.0..std::f64::consts::TAU, phi in 0.0..std::f64::consts::PI, h in -5.0f64..5.0,
    ) {
        let (_, mesh) = &suite()[which];
        let params = SelfSupportParams::default();
        let base = Plane::from_offset(unit(theta, phi), h).unwrap();
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(unit(axis_theta, axis_phi)), angle);
        let t = Vector3::new(tx, ty, tz);
        let moved = mesh.transformed(rot.matrix(), &t);
        let moved_base = Plane::new(rot * base.anchor + t, rot * base.normal).unwrap();
        let a = risk(mesh, &base, &params);
        let b = risk(&moved, &moved_base, &params);
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn larger_alpha_never_adds_risk(which in 0usize..5, theta in 0.0..std::f64::consts::TAU, phi in 0.0..std::f64::consts::PI, a1 in 1.0f64..89.0, a2 in 1.0f64..89.0) {
        let (_, mesh) = &suite()[which];
        let base = Plane::from_offset(unit(theta, phi), 0.0).unwrap();
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let strict = risky_area(mesh, &base, &SelfSupportParams::new(lo));
        let loose = risky_area(mesh, &base, &SelfSupportParams::new(hi));
        prop_assert!(loose.total_risky_area <= strict.total_risky_area);
        for f in loose.risky_faces() {
            prop_assert_eq!(strict.per_face_flags[f], loose.per_face_flags[f]);
        }
    }

    #[test]
    fn local_descent_is_the_drop_in_risk(which in 0usize..5, theta in 0.0..std::f64::consts::TAU, phi in 0.0..std::f64::consts::PI, fraction in 0.05f64..0.95) {
        let (_, mesh) = &suite()[which];
        let params = SelfSupportParams::default();
        let platform = Plane::horizontal(0.0);
        let gamma = mid_plane(mesh, unit(theta, phi), fraction);
        let (upper, lower) = match clip(mesh, &gamma) {
            Ok(parts) => parts,
            Err(ClipError::CoplanarFace) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        let expected = risk(mesh, &platform, &params)
            - (lower.map_or(0.0, |m| risk(&m, &platform, &params)) + upper.map_or(0.0, |m| risk(&m, &gamma, &params)));
        let j = local_descent(mesh, &gamma, &platform, &params).unwrap();
        prop_assert!((j - expected).abs() <= 1e-9 * expected.abs().max(1.0));
    }
}

#[test]
fn dense_icosphere_matches_the_spherical_cap() {
    let r = 10.0;
    let sphere = fixtures::icosphere(r, 5);
    assert!(sphere.triangle_count() >= 20_000);
    let sphere = fixtures::rest_on_platform(&sphere);
    let got = risk(&sphere, &Plane::horizontal(0.0), &SelfSupportParams::default());
    let cap = 2.0 * std::f64::consts::PI * (1.0 - 45f64.to_radians().cos()) * r * r;
    assert!((got - cap).abs() <= 0.02 * cap, "{got} vs {cap}");
}
