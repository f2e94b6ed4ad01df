//! Finite candidate set of clipping planes: sampled normals times evenly
//! spaced offsets across the mesh extent.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{orthonormal_basis, Plane, TriMesh};

#[derive(Debug, Error, PartialEq)]
pub enum CandidateError {
    #[error("four-dof rotation axis must be non-zero")]
    ZeroAxis,
    #[error("normal_count must be at least 1")]
    NoNormals,
    #[error("offset_step must be positive and finite")]
    BadStep,
    #[error("no candidates: offset step exceeds the mesh extent along every normal")]
    NoCandidates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DofMode {
    FiveDof,
    FourDof { axis: [f64; 3] },
}

impl DofMode {
    pub fn four_dof(axis: Vector3<f64>) -> Self {
        Self::FourDof {
            axis: [axis.x, axis.y, axis.z],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub normal_count: usize,
    /// Spacing between parallel candidate planes (mm).
    pub offset_step: f64,
    pub dof: DofMode,
    /// Drop normals tilted more than this from +z (degrees).
    pub max_tilt_deg: Option<f64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            normal_count: 250,
            offset_step: 1.0,
            dof: DofMode::FiveDof,
            max_tilt_deg: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub plane: Plane,
    pub normal_index: u32,
    /// Signed offset of the plane along its normal from the origin.
    pub offset: f64,
}

/// Candidate planes in a fixed order: by normal index, then by ascending
/// offset.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub normals: Vec<Vector3<f64>>,
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn planes(&self) -> impl Iterator<Item = &Plane> {
        self.candidates.iter().map(|c| &c.plane)
    }
}

pub fn sample_normals(config: &SamplerConfig) -> Result<Vec<Vector3<f64>>, CandidateError> {
    let n = config.normal_count;
    if n == 0 {
        return Err(CandidateError::NoNormals);
    }
    let mut normals: Vec<Vector3<f64>> = match config.dof {
        DofMode::FiveDof => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - (2 * i + 1) as f64 / n as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * i as f64;
                    Vector3::new(r * phi.cos(), r * phi.sin(), z)
                })
                .collect()
        }
        DofMode::FourDof { axis } => {
            let axis = Vector3::from(axis);
            let len = axis.norm();
            if !(len > 0.0) || !len.is_finite() {
                return Err(CandidateError::ZeroAxis);
            }
            let a = axis / len;
            // start the circle at the direction closest to +z
            let up = Vector3::z() - a * a.z;
            let u = if up.norm() > 1e-9 { up.normalize() } else { orthonormal_basis(&a).0 };
            let v = a.cross(&u);
            (0..n)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / n as f64;
                    u * t.cos() + v * t.sin()
                })
                .collect()
        }
    };
    if let Some(limit) = config.max_tilt_deg {
        let min_z = limit.to_radians().cos();
        normals.retain(|d| d.z >= min_z - 1e-12);
    }
    Ok(normals)
}

pub fn generate_candidates(mesh: &TriMesh, config: &SamplerConfig) -> Result<CandidateSet, CandidateError> {
    let step = config.offset_step;
    if !(step > 0.0) || !step.is_finite() {
        return Err(CandidateError::BadStep);
    }
    let normals = sample_normals(config)?;
    let per_normal: Vec<Vec<Candidate>> = normals
        .par_iter()
        .enumerate()
        .map(|(i, n)| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for p in mesh.vertices() {
                let t = p.coords.dot(n);
                lo = lo.min(t);
                hi = hi.max(t);
            }
            let mut out = Vec::new();
            let mut k = 1u32;
            loop {
                let t = lo + k as f64 * step;
                if t > hi - step + 1e-9 * step {
                    break;
                }
                out.push(Candidate {
                    plane: Plane {
                        anchor: nalgebra::Point3::from(n * t),
                        normal: *n,
                    },
                    normal_index: i as u32,
                    offset: t,
                });
                k += 1;
            }
            out
        })
        .collect();
    let candidates: Vec<Candidate> = per_normal.into_iter().flatten().collect();
    if candidates.is_empty() {
        return Err(CandidateError::NoCandidates);
    }
    Ok(CandidateSet { normals, candidates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn fibonacci_normals_are_unit_and_distinct() {
        let ns = sample_normals(&SamplerConfig::default()).unwrap();
        assert_eq!(ns.len(), 250);
        for (i, a) in ns.iter().enumerate() {
            assert!((a.norm() - 1.0).abs() < 1e-12);
            for b in &ns[i + 1..] {
                assert!((a - b).norm() > 1e-3);
            }
        }
    }

    #[test]
    fn four_dof_circle() {
        let cfg = SamplerConfig {
            normal_count: 4,
            dof: DofMode::four_dof(Vector3::x()),
            ..Default::default()
        };
        let ns = sample_normals(&cfg).unwrap();
        let want = [Vector3::z(), -Vector3::y(), -Vector3::z(), Vector3::y()];
        for (a, b) in ns.iter().zip(want.iter()) {
            assert!(a.x.abs() < 1e-15);
            assert!((a - b).norm() < 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn zero_axis_rejected() {
        let cfg = SamplerConfig {
            dof: DofMode::four_dof(Vector3::zeros()),
            ..Default::default()
        };
        assert_eq!(sample_normals(&cfg), Err(CandidateError::ZeroAxis));
    }

    #[test]
    fn single_normal() {
        let cfg = SamplerConfig {
            normal_count: 1,
            ..Default::default()
        };
        let ns = sample_normals(&cfg).unwrap();
        assert_eq!(ns.len(), 1);
        assert!((ns[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn max_tilt_filters_normals() {
        let cfg = SamplerConfig {
            max_tilt_deg: Some(60.0),
            ..Default::default()
        };
        let ns = sample_normals(&cfg).unwrap();
        assert!(!ns.is_empty() && ns.len() < 250);
        assert!(ns.iter().all(|n| n.z >= 0.5 - 1e-12));
    }

    #[test]
    fn unit_cube_has_no_candidates() {
        let err = generate_candidates(&fixtures::cube(1.0), &SamplerConfig::default()).unwrap_err();
        assert_eq!(err, CandidateError::NoCandidates);
        assert!(err.to_string().starts_with("no candidates"));
    }

    #[test]
    fn scaled_cube_axis_normal_gets_99_offsets() {
        // the four-dof circle about x starts exactly at +z
        let cfg = SamplerConfig {
            normal_count: 4,
            dof: DofMode::four_dof(Vector3::x()),
            ..Default::default()
        };
        let set = generate_candidates(&fixtures::cube(100.0), &cfg).unwrap();
        let along_z: Vec<_> = set.candidates.iter().filter(|c| c.normal_index == 0).collect();
        assert_eq!(along_z.len(), 99);
        assert!((along_z[0].offset - 1.0).abs() < 1e-12);
        assert!((along_z[98].offset - 99.0).abs() < 1e-9);
    }

    #[test]
    fn candidates_are_ordered_and_reproducible() {
        let m = fixtures::snowman(1.0, 24);
        let a = generate_candidates(&m, &SamplerConfig::default()).unwrap();
        let b = generate_candidates(&m, &SamplerConfig::default()).unwrap();
        assert_eq!(a, b);
        for w in a.candidates.windows(2) {
            let ord = (w[0].normal_index, w[0].offset) < (w[1].normal_index, w[1].offset);
            assert!(ord);
        }
    }
}
