//! Jones-calculus polarization algebra.
//!
//! States are complex amplitude pairs `(ex, ey)` in units of sqrt(W); operators
//! are 2x2 complex transfer matrices. The circular basis is fixed as
//!
//! ```text
//! e_R = (ex - i ey) / sqrt(2)
//! e_L = (ex + i ey) / sqrt(2)
//! ```
//!
//! so that `(1, i)/sqrt(2)` is right-circular. Global phase is never
//! normalized away; use [`PolarizationState::approx_eq_up_to_phase`] where
//! only the physical state matters.

use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::Mul;

use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationState {
    pub ex: C64,
    pub ey: C64,
}

impl PolarizationState {
    pub fn new(ex: C64, ey: C64) -> Self {
        Self { ex, ey }
    }

    pub fn from_real(ex: f64, ey: f64) -> Self {
        Self::new(C64::new(ex, 0.0), C64::new(ey, 0.0))
    }

    pub fn horizontal() -> Self {
        Self::new(ONE, ZERO)
    }

    pub fn vertical() -> Self {
        Self::new(ZERO, ONE)
    }

    /// Unit-intensity linear polarization at `angle` radians from horizontal.
    pub fn linear(angle: f64) -> Self {
        Self::from_real(angle.cos(), angle.sin())
    }

    pub fn right_circular() -> Self {
        Self::from_circular(ONE, ZERO)
    }

    pub fn left_circular() -> Self {
        Self::from_circular(ZERO, ONE)
    }

    pub fn intensity(&self) -> f64 {
        self.ex.norm_sqr() + self.ey.norm_sqr()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.ex * factor, self.ey * factor)
    }

    /// Returns `(e_R, e_L)`.
    pub fn to_circular(&self) -> (C64, C64) {
        let er = (self.ex - I * self.ey) * FRAC_1_SQRT_2;
        let el = (self.ex + I * self.ey) * FRAC_1_SQRT_2;
        (er, el)
    }

    pub fn from_circular(er: C64, el: C64) -> Self {
        Self::new((er + el) * FRAC_1_SQRT_2, I * (er - el) * FRAC_1_SQRT_2)
    }

    /// Componentwise comparison after removing the best-fit global phase.
    pub fn approx_eq_up_to_phase(&self, other: &Self, tol: f64) -> bool {
        let overlap = other.ex.conj() * self.ex + other.ey.conj() * self.ey;
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            ONE
        };
        (self.ex - other.ex * phase).norm() <= tol && (self.ey - other.ey * phase).norm() <= tol
    }
}

/// A 2x2 Jones matrix acting on [`PolarizationState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationOperator {
    pub m00: C64,
    pub m01: C64,
    pub m10: C64,
    pub m11: C64,
}

impl PolarizationOperator {
    pub fn new(m00: C64, m01: C64, m10: C64, m11: C64) -> Self {
        Self { m00, m01, m10, m11 }
    }

    pub fn identity() -> Self {
        Self::diagonal(ONE, ONE)
    }

    pub fn zero() -> Self {
        Self::diagonal(ZERO, ZERO)
    }

    pub fn diagonal(a: C64, b: C64) -> Self {
        Self::new(a, ZERO, ZERO, b)
    }

    pub fn scalar(c: C64) -> Self {
        Self::diagonal(c, c)
    }

    /// Active rotation of the field by `angle` (x towards y).
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(
            C64::new(c, 0.0),
            C64::new(-s, 0.0),
            C64::new(s, 0.0),
            C64::new(c, 0.0),
        )
    }

    /// `self` expressed in a frame rotated by `angle`: R(angle) * self * R(-angle).
    pub fn rotated(&self, angle: f64) -> Self {
        Self::rotation(angle) * *self * Self::rotation(-angle)
    }

    /// Change of basis taking `(ex, ey)` to `(e_R, e_L)`.
    pub fn linear_to_circular() -> Self {
        Self::new(ONE, -I, ONE, I) * C64::new(FRAC_1_SQRT_2, 0.0)
    }

    /// Inverse of [`Self::linear_to_circular`].
    pub fn circular_to_linear() -> Self {
        Self::new(ONE, ONE, I, -I) * C64::new(FRAC_1_SQRT_2, 0.0)
    }

    /// Builds the linear-basis operator of an element that is diagonal in the
    /// circular basis with amplitudes `(a_r, a_l)`.
    pub fn from_circular_diagonal(a_r: C64, a_l: C64) -> Self {
        Self::circular_to_linear() * Self::diagonal(a_r, a_l) * Self::linear_to_circular()
    }

    pub fn apply(&self, s: &PolarizationState) -> PolarizationState {
        PolarizationState::new(
            self.m00 * s.ex + self.m01 * s.ey,
            self.m10 * s.ex + self.m11 * s.ey,
        )
    }

    pub fn adjoint(&self) -> Self {
        Self::new(
            self.m00.conj(),
            self.m10.conj(),
            self.m01.conj(),
            self.m11.conj(),
        )
    }

    pub fn determinant(&self) -> C64 {
        self.m00 * self.m11 - self.m01 * self.m10
    }

    /// Largest absolute entry difference to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        [
            self.m00 - other.m00,
            self.m01 - other.m01,
            self.m10 - other.m10,
            self.m11 - other.m11,
        ]
        .iter()
        .map(|d| d.norm())
        .fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        (self.adjoint() * *self).max_abs_diff(&Self::identity()) <= tol
    }

    /// Equality after removing a global phase (and only a phase).
    pub fn approx_eq_up_to_phase(&self, other: &Self, tol: f64) -> bool {
        let entries = [
            (self.m00, other.m00),
            (self.m01, other.m01),
            (self.m10, other.m10),
            (self.m11, other.m11),
        ];
        let overlap: C64 = entries.iter().map(|(a, b)| b.conj() * a).sum();
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            ONE
        };
        entries.iter().all(|(a, b)| (a - b * phase).norm() <= tol)
    }

    /// Singular values `(sigma_max, sigma_min)` from the eigenvalues of M^H M.
    pub fn singular_values(&self) -> (f64, f64) {
        let h = self.adjoint() * *self;
        let trace = h.m00.re + h.m11.re;
        let det = h.determinant().re;
        let disc = (trace * trace - 4.0 * det).max(0.0).sqrt();
        let hi = ((trace + disc) / 2.0).max(0.0).sqrt();
        let lo = ((trace - disc) / 2.0).max(0.0).sqrt();
        (hi, lo)
    }

    pub fn max_singular_value(&self) -> f64 {
        self.singular_values().0
    }
}

impl Mul for PolarizationOperator {
    type Output = PolarizationOperator;

    fn mul(self, rhs: PolarizationOperator) -> PolarizationOperator {
        PolarizationOperator::new(
            self.m00 * rhs.m00 + self.m01 * rhs.m10,
            self.m00 * rhs.m01 + self.m01 * rhs.m11,
            self.m10 * rhs.m00 + self.m11 * rhs.m10,
            self.m10 * rhs.m01 + self.m11 * rhs.m11,
        )
    }
}

impl Mul<C64> for PolarizationOperator {
    type Output = PolarizationOperator;

    fn mul(self, c: C64) -> PolarizationOperator {
        PolarizationOperator::new(self.m00 * c, self.m01 * c, self.m10 * c, self.m11 * c)
    }
}

pub fn apply(op: &PolarizationOperator, s: &PolarizationState) -> PolarizationState {
    op.apply(s)
}

/// Composes a train of operators. The first element is the first one the light
/// traverses, so `compose([A, B])` is `B * A`.
pub fn compose(ops: &[PolarizationOperator]) -> Result<PolarizationOperator> {
    let (first, rest) = ops.split_first().ok_or(Error::EmptyTrain)?;
    Ok(rest.iter().fold(*first, |acc, op| *op * acc))
}
