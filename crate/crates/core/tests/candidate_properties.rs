use mdp_core::candidates::{generate_candidates, sample_normals, DofMode, SamplerConfig};
use mdp_core::fixtures;
use nalgebra::Vector3;
use proptest::prelude::*;

#[test]
fn every_plane_separates_vertices() {
    let config = SamplerConfig {
        normal_count: 60,
        offset_step: 0.7,
        ..SamplerConfig::default()
    };
    for (name, mesh) in fixtures::suite() {
        let set = generate_candidates(&mesh, &config).unwrap();
        assert!(!set.is_empty());
        for c in &set.candidates {
            let d: Vec<f64> = mesh.vertices().iter().map(|p| c.plane.signed_distance(p)).collect();
            assert!(d.iter().any(|&x| x > 0.0), "{name}: nothing above {:?}", c.plane);
            assert!(d.iter().any(|&x| x < 0.0), "{name}: nothing below {:?}", c.plane);
        }
    }
}

#[test]
fn regeneration_is_bitwise_identical_across_thread_counts() {
    let mesh = fixtures::snowman(1.0, 32);
    let config = SamplerConfig::default();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| generate_candidates(&mesh, &config).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.candidates.iter().zip(&b.candidates) {
        assert_eq!(x.normal_index, y.normal_index);
        assert_eq!(x.offset.to_bits(), y.offset.to_bits());
        for k in 0..3 {
            assert_eq!(x.plane.anchor[k].to_bits(), y.plane.anchor[k].to_bits());
            assert_eq!(x.plane.normal[k].to_bits(), y.plane.normal[k].to_bits());
        }
    }
}

#[test]
fn four_dof_normals_stay_perpendicular_to_the_axis() {
    let axis = Vector3::new(1.0, 2.0, 0.5).normalize();
    let normals = sample_normals(&SamplerConfig {
        normal_count: 36,
        dof: DofMode::four_dof(axis),
        ..SamplerConfig::default()
    })
    .unwrap();
    assert_eq!(normals.len(), 36);
    for n in normals {
        assert!(n.dot(&axis).abs() < 1e-12);
        assert!((n.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn eighty_millimetre_part_yields_tens_of_thousands_of_candidates() {
    let ball = fixtures::icosphere(40.0, 3);
    let set = generate_candidates(&ball, &SamplerConfig::default()).unwrap();
    assert!((10_000..=25_000).contains(&set.len()), "{}", set.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn fibonacci_normals_cover_the_sphere(theta in 0.0..std::f64::consts::TAU, z in -1.0f64..1.0) {
        use std::sync::OnceLock;
        static NORMALS: OnceLock<Vec<Vector3<f64>>> = OnceLock::new();
        let normals = NORMALS.get_or_init(|| sample_normals(&SamplerConfig::default()).unwrap());
        let s = (1.0 - z * z).sqrt();
        let probe = Vector3::new(s * theta.cos(), s * theta.sin(), z);
        let best = normals.iter().map(|n| n.dot(&probe)).fold(-1.0, f64::max);
        prop_assert!(best.clamp(-1.0, 1.0).acos().to_degrees() < 15.0);
    }
}
