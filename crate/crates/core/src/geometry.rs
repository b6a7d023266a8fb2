//! Primitives on the embedded n-sphere: unit points, tangent vectors,
//! orthogonal projection, angles and geodesics.
//!
//! The sphere is treated as the set of unit vectors in R^{n+1}. Tangent
//! vectors at `x` are ambient vectors orthogonal to `x`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Norm below which a vector has no meaningful direction.
pub const DIRECTION_EPS: f64 = 1e-8;
/// Angular threshold beyond which two points count as antipodal.
pub const ANTIPODAL_EPS: f64 = 1e-9;
/// Angular threshold below which two points count as coincident.
pub const COINCIDENT_EPS: f64 = 1e-12;

/// A point on S^n, stored as a unit vector in R^{n+1}.
///
/// Constructors normalize on entry and reject near-zero vectors, so a value
/// of this type always satisfies `‖coords‖ = 1` to machine precision.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitPoint {
    coords: DVector<f64>,
}

impl UnitPoint {
    /// Normalizes `v` onto the sphere.
    pub fn new(v: DVector<f64>) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: v.len(),
            });
        }
        let norm = v.norm();
        if norm < DIRECTION_EPS {
            return Err(Error::DegenerateVector { norm });
        }
        Ok(Self { coords: v / norm })
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        Self::new(DVector::from_row_slice(v))
    }

    /// Standard basis vector e_k in R^{dim}.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(dim >= 2 && k < dim);
        let mut v = DVector::zeros(dim);
        v[k] = 1.0;
        Self { coords: v }
    }

    /// Ambient dimension n+1.
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn antipode(&self) -> Self {
        Self {
            coords: -self.coords.clone(),
        }
    }

    /// The orthogonal projection P(x) = I − xxᵀ as a dense matrix.
    ///
    /// Hot paths should prefer [`project_raw`], which avoids building the
    /// matrix.
    pub fn projection_matrix(&self) -> DMatrix<f64> {
        projection_matrix_raw(&self.coords)
    }
}

/// A tangent vector attached at a base point: `vec · base = 0`.
#[derive(Debug, Clone)]
pub struct TangentVector {
    pub base: UnitPoint,
    pub vec: DVector<f64>,
}

impl TangentVector {
    pub fn norm(&self) -> f64 {
        self.vec.norm()
    }
}

/// P(x) v = v − x (xᵀv) without materializing the projector.
///
/// `x` is not required to be unit; this is the literal formula I − xxᵀ,
/// which the ambient-derivative oracles rely on.
pub fn project_raw(x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    v - x * x.dot(v)
}

pub fn projection_matrix_raw(x: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::identity(x.len(), x.len()) - x * x.transpose()
}

/// Projects an ambient vector into the tangent space at `x`.
pub fn project(x: &UnitPoint, v: &DVector<f64>) -> Result<TangentVector> {
    if v.len() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: v.len(),
        });
    }
    Ok(TangentVector {
        vec: project_raw(x.coords(), v),
        base: x.clone(),
    })
}

fn clamp_unit(p: f64) -> f64 {
    p.clamp(-1.0, 1.0)
}

/// Angle arccos(aᵀb) ∈ [0, π]; the dot product is clamped into [−1, 1]
/// because rounding can push it slightly outside.
pub fn sphere_angle(a: &UnitPoint, b: &UnitPoint) -> f64 {
    clamp_unit(a.coords().dot(b.coords())).acos()
}

/// Angle between raw vectors, clamped the same way.
pub fn sphere_angle_raw(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    clamp_unit(a.dot(b)).acos()
}

/// Point at parameter `lambda` on the geodesic from `a` to `b`:
/// [sin((1−λ)θ)a + sin(λθ)b] / sin θ.
///
/// Undefined for antipodal endpoints; returns `a` when the endpoints
/// coincide.
pub fn geodesic_point(a: &UnitPoint, b: &UnitPoint, lambda: f64) -> Result<UnitPoint> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let theta = sphere_angle(a, b);
    if theta < COINCIDENT_EPS {
        return Ok(a.clone());
    }
    if theta > std::f64::consts::PI - ANTIPODAL_EPS {
        return Err(Error::GeodesicUndefined { angle: theta });
    }
    let s = theta.sin();
    let v = a.coords() * (((1.0 - lambda) * theta).sin() / s)
        + b.coords() * ((lambda * theta).sin() / s);
    UnitPoint::new(v)
}

/// Unit tangent vector at `from` pointing along the geodesic toward `to`.
///
/// Errors when the points coincide or are antipodal (no unique direction).
pub fn unit_tangent_toward(from: &UnitPoint, to: &UnitPoint) -> Result<DVector<f64>> {
    let theta = sphere_angle(from, to);
    if theta < COINCIDENT_EPS || theta > std::f64::consts::PI - ANTIPODAL_EPS {
        return Err(Error::DegenerateVector { norm: theta.sin() });
    }
    Ok((to.coords() - from.coords() * theta.cos()) / theta.sin())
}

/// Deterministic orthonormal basis of the tangent space at `x`, built from a
/// Householder reflection that carries e_1 onto ±x. Columns are the n
/// tangent directions.
pub fn tangent_basis(x: &UnitPoint) -> DMatrix<f64> {
    let dim = x.dim();
    let c = x.coords();
    // rho chosen so v = x − rho·e1 has no cancellation in the first entry
    let rho = if c[0] >= 0.0 { -1.0 } else { 1.0 };
    let mut v = c.clone();
    v[0] -= rho;
    let vn2 = v.norm_squared();
    let mut basis = DMatrix::zeros(dim, dim - 1);
    for j in 1..dim {
        // column H e_j with H = I − 2vvᵀ/‖v‖²
        let scale = 2.0 * v[j] / vn2;
        for i in 0..dim {
            let e = if i == j { 1.0 } else { 0.0 };
            basis[(i, j - 1)] = e - scale * v[i];
        }
    }
    basis
}
