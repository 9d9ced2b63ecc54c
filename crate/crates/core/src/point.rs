//! Points of the closed unit disc stored in polar form with an explicit
//! modulus defect `1 - |z|`.
//!
//! Points accumulating at the boundary are the whole subject here, and
//! `1 - |z|` for `|z| = 1 - 2^{-200}` is not representable as the difference
//! of two doubles. Storing the defect keeps kernels such as `1 - conj(a) z`
//! accurate at every scale the selection loops reach.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HvlError, Result};

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}

/// Distance between two angles measured along the circle, in `[0, pi]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscPoint {
    /// Argument in radians.
    pub arg: f64,
    /// `1 - |z|`; zero on the circle, one at the origin.
    pub defect: f64,
}

impl DiscPoint {
    pub const ORIGIN: DiscPoint = DiscPoint { arg: 0.0, defect: 1.0 };

    pub fn new(arg: f64, defect: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&defect) || !arg.is_finite() {
            return Err(HvlError::InvalidParameter(format!(
                "polar point needs finite arg and defect in [0, 1], got ({arg}, {defect})"
            )));
        }
        Ok(DiscPoint { arg, defect })
    }

    /// Point of the open disc; rejects `|z| >= 1`.
    pub fn interior(arg: f64, defect: f64) -> Result<Self> {
        if defect <= 0.0 {
            return Err(HvlError::OutsideDisc(1.0 - defect));
        }
        Self::new(arg, defect)
    }

    pub fn boundary(theta: f64) -> Self {
        DiscPoint { arg: theta, defect: 0.0 }
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        let r = z.norm();
        if !r.is_finite() || r > 1.0 {
            return Err(HvlError::OutsideDisc(r));
        }
        let arg = if r == 0.0 { 0.0 } else { z.arg() };
        Ok(DiscPoint { arg, defect: 1.0 - r })
    }

    /// Like [`DiscPoint::from_complex`] but rejects boundary points.
    pub fn from_complex_interior(z: Complex64) -> Result<Self> {
        let p = Self::from_complex(z)?;
        if p.defect <= 0.0 {
            return Err(HvlError::OutsideDisc(z.norm()));
        }
        Ok(p)
    }

    pub fn modulus(&self) -> f64 {
        1.0 - self.defect
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::from_polar(self.modulus(), self.arg)
    }

    /// `1 - |z|^2` without cancellation.
    pub fn one_minus_modulus_sq(&self) -> f64 {
        self.defect * (2.0 - self.defect)
    }

    pub fn is_boundary(&self) -> bool {
        self.defect == 0.0
    }

    /// The point `s z` for `s = 1 - sigma`, keeping the defect exact.
    pub fn shrink(&self, sigma: f64) -> DiscPoint {
        DiscPoint {
            arg: self.arg,
            defect: (sigma + self.defect - sigma * self.defect).min(1.0),
        }
    }
}

/// `1 - conj(a) z` evaluated from polar data, accurate when both points
/// crowd the same boundary direction.
pub fn one_minus_conj_product(a: &DiscPoint, z: &DiscPoint) -> Complex64 {
    let s = a.modulus() * z.modulus();
    let one_minus_s = a.defect + z.defect - a.defect * z.defect;
    let half = 0.5 * wrap_angle(z.arg - a.arg);
    let (sh, ch) = half.sin_cos();
    // 1 - e^{i psi} = 2 sin(psi/2) (sin(psi/2) - i cos(psi/2))
    let one_minus_rot = Complex64::new(2.0 * sh * sh, -2.0 * sh * ch);
    Complex64::new(one_minus_s, 0.0) + one_minus_rot * s
}

/// Location and width of a feature of a boundary function: a peak of width
/// `scale` (for instance a Poisson kernel at a point with defect `scale`) or
/// an integrable singularity when `singular` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HotPoint {
    pub angle: f64,
    pub scale: f64,
    pub singular: bool,
}

impl HotPoint {
    pub fn peak(angle: f64, scale: f64) -> Self {
        HotPoint { angle, scale, singular: false }
    }

    pub fn singular(angle: f64) -> Self {
        HotPoint { angle, scale: 0.0, singular: true }
    }
}
