//! Exact 2×2 kinematics: singular values, distortion functionals and the
//! Euclidean distance to the conformal group.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A real 2×2 matrix, row-major: `[[e11, e12], [e21, e22]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub e11: f64,
    pub e12: f64,
    pub e21: f64,
    pub e22: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(e11: f64, e12: f64, e21: f64, e22: f64) -> Self {
        Mat2 { e11, e12, e21, e22 }
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, b)
    }

    /// Counterclockwise rotation by `angle` radians.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    pub fn det(&self) -> f64 {
        self.e11 * self.e22 - self.e12 * self.e21
    }

    /// Squared Frobenius norm.
    pub fn norm_sq(&self) -> f64 {
        self.e11 * self.e11 + self.e12 * self.e12 + self.e21 * self.e21 + self.e22 * self.e22
    }

    pub fn transpose(&self) -> Self {
        Mat2::new(self.e11, self.e21, self.e12, self.e22)
    }

    /// Cofactor matrix, the derivative of `det` with respect to the entries.
    pub fn cofactor(&self) -> Self {
        Mat2::new(self.e22, -self.e21, -self.e12, self.e11)
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Mat2::new(self.e22 / d, -self.e12 / d, -self.e21 / d, self.e11 / d))
    }

    pub fn scale(&self, a: f64) -> Self {
        Mat2::new(a * self.e11, a * self.e12, a * self.e21, a * self.e22)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.e11 * v[0] + self.e12 * v[1],
            self.e21 * v[0] + self.e22 * v[1],
        ]
    }

    /// `F : G`, the Frobenius inner product.
    pub fn dot(&self, other: &Mat2) -> f64 {
        self.e11 * other.e11 + self.e12 * other.e12 + self.e21 * other.e21 + self.e22 * other.e22
    }

    pub fn max_abs(&self) -> f64 {
        self.e11
            .abs()
            .max(self.e12.abs())
            .max(self.e21.abs())
            .max(self.e22.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.e11.is_finite() && self.e12.is_finite() && self.e21.is_finite() && self.e22.is_finite()
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(self.e11 + o.e11, self.e12 + o.e12, self.e21 + o.e21, self.e22 + o.e22)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(self.e11 - o.e11, self.e12 - o.e12, self.e21 - o.e21, self.e22 - o.e22)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.e11 * o.e11 + self.e12 * o.e21,
            self.e11 * o.e12 + self.e12 * o.e22,
            self.e21 * o.e11 + self.e22 * o.e21,
            self.e21 * o.e12 + self.e22 * o.e22,
        )
    }
}

/// Ordered singular values `lambda_max >= lambda_min > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularPair {
    pub lambda_max: f64,
    pub lambda_min: f64,
}

impl SingularPair {
    /// The linear distortion `λ₁/λ₂`.
    pub fn ratio(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }
}

/// Outer distortion `𝕂` together with the linear distortion `K`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionPair {
    pub kk: f64,
    pub k: f64,
}

impl DistortionPair {
    pub fn of(f: &Mat2) -> Result<Self> {
        Ok(DistortionPair {
            kk: outer_distortion(f)?,
            k: linear_distortion(f)?,
        })
    }
}

fn require_gl_plus(f: &Mat2) -> Result<f64> {
    let det = f.det();
    if !f.is_finite() || det.is_nan() {
        return Err(Error::Domain(format!("non-finite matrix {f:?}")));
    }
    if det <= 0.0 {
        return Err(Error::Domain(format!(
            "not in GL+(2): det F = {det:e} for {f:?}"
        )));
    }
    Ok(det)
}

// ‖F‖² + 2 det F and ‖F‖² − 2 det F as sums of squares, free of cancellation.
fn sum_diff_sq(f: &Mat2) -> (f64, f64) {
    let s2 = (f.e11 + f.e22).powi(2) + (f.e12 - f.e21).powi(2);
    let d2 = (f.e11 - f.e22).powi(2) + (f.e12 + f.e21).powi(2);
    (s2, d2)
}

/// Closed-form singular values of `F ∈ GL+(2)`.
///
/// With `s = √(‖F‖² + 2 det F)` and `d = √(‖F‖² − 2 det F)`, the singular values
/// are `(s ± d)/2`. The smaller one is evaluated as `det F / λ₁`, which is the
/// same quantity without the subtractive cancellation of `(s − d)/2`.
pub fn singular_values(f: &Mat2) -> Result<SingularPair> {
    let det = require_gl_plus(f)?;
    let (s2, d2) = sum_diff_sq(f);
    let s = s2.sqrt();
    let d = if d2 < 1e-30 { 0.0 } else { d2.sqrt() };
    let lambda_max = 0.5 * (s + d);
    let lambda_min = if d == 0.0 { lambda_max } else { det / lambda_max };
    Ok(SingularPair {
        lambda_max,
        lambda_min,
    })
}

/// Outer distortion `𝕂(F) = ½ ‖F‖² / det F`.
pub fn outer_distortion(f: &Mat2) -> Result<f64> {
    let det = require_gl_plus(f)?;
    Ok(0.5 * f.norm_sq() / det)
}

/// Linear distortion `K(F) = λ₁/λ₂`.
pub fn linear_distortion(f: &Mat2) -> Result<f64> {
    Ok(singular_values(f)?.ratio())
}

fn require_at_least_one(x: f64, what: &str) -> Result<()> {
    if x.is_nan() || x < 1.0 {
        return Err(Error::Domain(format!("{what} must be >= 1, got {x}")));
    }
    Ok(())
}

/// `𝕂 = ½(K + 1/K)`.
pub fn kk_from_k(k: f64) -> Result<f64> {
    require_at_least_one(k, "linear distortion")?;
    Ok(0.5 * (k + 1.0 / k))
}

/// `K = 𝕂 + √(𝕂² − 1)`, the inverse of [`kk_from_k`] on `[1, ∞)`.
pub fn k_from_kk(kk: f64) -> Result<f64> {
    require_at_least_one(kk, "outer distortion")?;
    Ok(k_from_kk_unchecked(kk))
}

pub(crate) fn k_from_kk_unchecked(kk: f64) -> f64 {
    // clamp rounding just below 1
    kk + ((kk - 1.0) * (kk + 1.0)).max(0.0).sqrt()
}

pub(crate) fn kk_from_k_unchecked(k: f64) -> f64 {
    0.5 * (k + 1.0 / k)
}

/// `‖dev₂ log U‖² = ½ log²(λ₁/λ₂)` with `U = √(FᵀF)`.
pub fn dev_log_stretch_norm_sq(f: &Mat2) -> Result<f64> {
    let ln = linear_distortion(f)?.ln();
    Ok(0.5 * ln * ln)
}

/// Squared Euclidean distance from `F` to `CSO(2)`, `½(‖F‖² − 2 det F)`.
/// Defined for every 2×2 matrix.
pub fn euclid_dist_cso2_sq(f: &Mat2) -> f64 {
    0.5 * sum_diff_sq(f).1
}
