//! Scalar interval arithmetic.
//!
//! Plain floating point, no outward rounding. Enclosures are exact up to the
//! rounding of the endpoint computations.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::ExprError;

/// Closed interval `[lo, hi]` with `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    /// Returns `None` for inverted or NaN endpoints.
    pub fn try_new(lo: f64, hi: f64) -> Option<Self> {
        (lo <= hi).then_some(Self { lo, hi })
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    /// Smallest interval containing both endpoints, in any order.
    pub fn spanning(a: f64, b: f64) -> Self {
        Self {
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    pub fn width(self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Largest absolute value in the interval.
    pub fn mag(self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn is_finite(self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_zero(self) -> bool {
        self.contains(0.0)
    }

    pub fn encloses(self, other: Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn hull(self, other: Interval) -> Self {
        Self {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn intersect(self, other: Interval) -> Option<Self> {
        Self::try_new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub fn scale(self, k: f64) -> Self {
        Self::spanning(self.lo * k, self.hi * k)
    }

    pub fn div(self, rhs: Interval) -> Result<Self, ExprError> {
        if rhs.contains_zero() {
            return Err(ExprError::Domain(format!(
                "division by an interval containing zero [{}, {}]",
                rhs.lo, rhs.hi
            )));
        }
        Ok(self * Interval::spanning(1.0 / rhs.lo, 1.0 / rhs.hi))
    }

    pub fn abs(self) -> Self {
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            -self
        } else {
            Self::new(0.0, self.mag())
        }
    }

    pub fn exp(self) -> Self {
        Self::new(self.lo.exp(), self.hi.exp())
    }

    pub fn ln(self) -> Result<Self, ExprError> {
        if self.lo <= 0.0 {
            return Err(ExprError::Domain(format!(
                "log of an interval reaching non-positive values [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(Self::new(self.lo.ln(), self.hi.ln()))
    }

    pub fn sqrt(self) -> Result<Self, ExprError> {
        if self.lo < 0.0 {
            return Err(ExprError::Domain(format!(
                "sqrt of an interval reaching negative values [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(Self::new(self.lo.sqrt(), self.hi.sqrt()))
    }

    pub fn sin(self) -> Self {
        if !self.is_finite() || self.width() >= 2.0 * PI {
            return Self::new(-1.0, 1.0);
        }
        let mut lo = self.lo.sin().min(self.hi.sin());
        let mut hi = self.lo.sin().max(self.hi.sin());
        // maxima at pi/2 + 2k pi, minima at -pi/2 + 2k pi
        if contains_phase(self, FRAC_PI_2) {
            hi = 1.0;
        }
        if contains_phase(self, -FRAC_PI_2) {
            lo = -1.0;
        }
        Self::new(lo, hi)
    }

    pub fn cos(self) -> Self {
        if !self.is_finite() || self.width() >= 2.0 * PI {
            return Self::new(-1.0, 1.0);
        }
        let mut lo = self.lo.cos().min(self.hi.cos());
        let mut hi = self.lo.cos().max(self.hi.cos());
        if contains_phase(self, 0.0) {
            hi = 1.0;
        }
        if contains_phase(self, PI) {
            lo = -1.0;
        }
        Self::new(lo, hi)
    }

    pub fn powi(self, n: i32) -> Result<Self, ExprError> {
        match n {
            0 => Ok(Self::point(1.0)),
            n if n < 0 => {
                if self.contains_zero() {
                    return Err(ExprError::Domain(format!(
                        "negative power of an interval containing zero [{}, {}]",
                        self.lo, self.hi
                    )));
                }
                Self::point(1.0).div(self.powi(-n)?)
            }
            n if n % 2 == 0 => {
                let a = self.lo.powi(n);
                let b = self.hi.powi(n);
                if self.contains_zero() {
                    Ok(Self::new(0.0, a.max(b)))
                } else {
                    Ok(Self::spanning(a, b))
                }
            }
            n => Ok(Self::new(self.lo.powi(n), self.hi.powi(n))),
        }
    }

    /// General power. Integral point exponents go through [`Interval::powi`];
    /// anything else needs a non-negative base.
    pub fn pow(self, exponent: Interval) -> Result<Self, ExprError> {
        if exponent.lo == exponent.hi {
            if let Some(n) = integral_exponent(exponent.lo) {
                return self.powi(n);
            }
            if self.lo >= 0.0 && exponent.lo > 0.0 {
                return Ok(Self::new(self.lo.powf(exponent.lo), self.hi.powf(exponent.lo)));
            }
        }
        if self.lo <= 0.0 {
            return Err(ExprError::Domain(format!(
                "non-integral power of an interval reaching non-positive values [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok((exponent * self.ln()?).exp())
    }

    pub fn min(self, other: Interval) -> Self {
        Self::new(self.lo.min(other.lo), self.hi.min(other.hi))
    }

    pub fn max(self, other: Interval) -> Self {
        Self::new(self.lo.max(other.lo), self.hi.max(other.hi))
    }

    /// Interval extension of the unit step `1 if v >= 0 else 0`.
    pub fn step(self) -> Self {
        if self.lo >= 0.0 {
            Self::point(1.0)
        } else if self.hi < 0.0 {
            Self::point(0.0)
        } else {
            Self::new(0.0, 1.0)
        }
    }
}

/// Whether `phase + 2k*pi` lies in `x` for some integer k.
fn contains_phase(x: Interval, phase: f64) -> bool {
    let k = ((x.lo - phase) / (2.0 * PI)).ceil();
    phase + 2.0 * PI * k <= x.hi
}

pub(crate) fn integral_exponent(v: f64) -> Option<i32> {
    (v.fract() == 0.0 && v.abs() < i32::MAX as f64).then_some(v as i32)
}

impl From<f64> for Interval {
    fn from(v: f64) -> Self {
        Self::point(v)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Add for Interval {
    type Output = Interval;

    fn add(self, rhs: Interval) -> Interval {
        Interval::new(self.lo + rhs.lo, self.hi + rhs.hi)
    }
}

impl Sub for Interval {
    type Output = Interval;

    fn sub(self, rhs: Interval) -> Interval {
        Interval::new(self.lo - rhs.hi, self.hi - rhs.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;

    fn mul(self, rhs: Interval) -> Interval {
        let a = self.lo * rhs.lo;
        let b = self.lo * rhs.hi;
        let c = self.hi * rhs.lo;
        let d = self.hi * rhs.hi;
        Interval::new(a.min(b).min(c).min(d), a.max(b).max(c).max(d))
    }
}

impl Neg for Interval {
    type Output = Interval;

    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}
