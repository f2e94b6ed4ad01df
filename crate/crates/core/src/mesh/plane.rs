use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::MeshError;

/// An oriented plane. The positive side ("above") is where
/// `(p - anchor) · normal > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub anchor: Point3<f64>,
    pub normal: Vector3<f64>,
}

impl Plane {
    /// Builds a plane, normalizing `normal`. Fails on a zero normal.
    pub fn new(anchor: Point3<f64>, normal: Vector3<f64>) -> Result<Self, MeshError> {
        let len = normal.norm();
        if !(len > 1e-12) || !len.is_finite() {
            return Err(MeshError::InvalidPlane);
        }
        Ok(Self {
            anchor,
            normal: normal / len,
        })
    }

    /// Plane `normal · p = offset` with its anchor at `offset * normal`.
    pub fn from_offset(normal: Vector3<f64>, offset: f64) -> Result<Self, MeshError> {
        let p = Self::new(Point3::origin(), normal)?;
        Ok(Self {
            anchor: Point3::from(p.normal * offset),
            normal: p.normal,
        })
    }

    /// Horizontal plane `z = height` facing +z.
    pub fn horizontal(height: f64) -> Self {
        Self {
            anchor: Point3::new(0.0, 0.0, height),
            normal: Vector3::z(),
        }
    }

    #[inline]
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        (p - self.anchor).dot(&self.normal)
    }

    /// `normal · anchor`, the plane offset from the origin along its normal.
    #[inline]
    pub fn offset(&self) -> f64 {
        self.anchor.coords.dot(&self.normal)
    }

    pub fn flipped(&self) -> Self {
        Self {
            anchor: self.anchor,
            normal: -self.normal,
        }
    }

    /// Orthonormal in-plane basis `(u, v)` with `u × v = normal`.
    pub fn basis(&self) -> (Vector3<f64>, Vector3<f64>) {
        orthonormal_basis(&self.normal)
    }

    pub fn project(&self, p: &Point3<f64>) -> Point3<f64> {
        p - self.normal * self.signed_distance(p)
    }

    pub fn is_unit(&self) -> bool {
        (self.normal.norm() - 1.0).abs() <= 1e-9
    }
}

/// Deterministic orthonormal `(u, v)` with `u × v = n` for a unit `n`.
pub fn orthonormal_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    // Duff et al. branchless construction.
    let sign = if n.z >= 0.0 { 1.0 } else { -1.0 };
    let a = -1.0 / (sign + n.z);
    let b = n.x * n.y * a;
    let u = Vector3::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x);
    let v = Vector3::new(b, sign + n.y * n.y * a, -n.y);
    (u, v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Above,
    Below,
}

/// Convex region given by a conjunction of half-spaces.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HalfSpaceCell {
    pub halves: Vec<(Plane, Side)>,
}

impl HalfSpaceCell {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, plane: Plane, side: Side) -> Self {
        self.halves.push((plane, side));
        self
    }

    /// True iff `point` passes every half-space test with slack `eps`.
    pub fn contains(&self, point: &Point3<f64>, eps: f64) -> bool {
        self.halves.iter().all(|(plane, side)| {
            let d = plane.signed_distance(point);
            match side {
                Side::Above => d >= -eps,
                Side::Below => d <= eps,
            }
        })
    }

    /// Largest violation of any half-space (0 when inside).
    pub fn violation(&self, point: &Point3<f64>) -> f64 {
        self.halves
            .iter()
            .map(|(plane, side)| {
                let d = plane.signed_distance(point);
                match side {
                    Side::Above => (-d).max(0.0),
                    Side::Below => d.max(0.0),
                }
            })
            .fold(0.0, f64::max)
    }
}

pub fn cell_contains(cell: &HalfSpaceCell, point: &Point3<f64>, eps: f64) -> bool {
    cell.contains(point, eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3<f64>>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x
    }

    pub fn diagonal(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            (self.max - self.min).norm()
        }
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cell_contains_everything() {
        let cell = HalfSpaceCell::new();
        assert!(cell.contains(&Point3::new(1e9, -3.0, 7.0), 0.0));
    }

    #[test]
    fn slack_admits_points_just_outside() {
        let cell = HalfSpaceCell::new().with(Plane::horizontal(0.0), Side::Above);
        assert!(cell.contains(&Point3::new(0.0, 0.0, -1e-6), 1e-3));
        assert!(!cell.contains(&Point3::new(0.0, 0.0, -1e-2), 1e-3));
    }

    #[test]
    fn slab_cell_rejects_point_above() {
        let cell = HalfSpaceCell::new()
            .with(Plane::horizontal(0.0), Side::Above)
            .with(Plane::horizontal(1.0), Side::Below);
        assert!(!cell.contains(&Point3::new(0.0, 0.0, 2.0), 1e-3));
        assert!(cell.contains(&Point3::new(0.0, 0.0, 0.5), 1e-3));
    }

    #[test]
    fn basis_is_right_handed() {
        for n in [
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(0.0, 0.0, -1.0),
            Vector3::new(0.3, -0.8, 0.2).normalize(),
        ] {
            let (u, v) = orthonormal_basis(&n);
            assert!((u.norm() - 1.0).abs() < 1e-12);
            assert!((v.norm() - 1.0).abs() < 1e-12);
            assert!((u.cross(&v) - n).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_normal_is_rejected() {
        assert!(Plane::new(Point3::origin(), Vector3::zeros()).is_err());
    }
}
