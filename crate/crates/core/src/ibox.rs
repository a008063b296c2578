use std::fmt;

use crate::error::{ReachError, Result};
use crate::interval::Interval;

/// Axis-aligned box `[lower, upper]` in R^n, the set representation used for
/// initial states, inputs and reachable-set over-approximations.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl IntervalBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(ReachError::InvalidBox(format!(
                "lower has length {}, upper has length {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.is_empty() {
            return Err(ReachError::InvalidBox("box must have dimension >= 1".into()));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
            return Err(ReachError::InvalidBox(format!(
                "component {i}: lower {} is not <= upper {}",
                lower[i], upper[i]
            )));
        }
        Ok(Self { lower, upper })
    }

    /// Degenerate box `[x, x]`.
    pub fn point(x: &[f64]) -> Result<Self> {
        Self::new(x.to_vec(), x.to_vec())
    }

    pub fn from_intervals(items: &[Interval]) -> Result<Self> {
        Self::new(
            items.iter().map(|i| i.lo).collect(),
            items.iter().map(|i| i.hi).collect(),
        )
    }

    /// The same interval repeated `n` times.
    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; n], vec![hi; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn get(&self, i: usize) -> Interval {
        Interval::new(self.lower[i], self.upper[i])
    }

    pub fn intervals(&self) -> Vec<Interval> {
        (0..self.dim()).map(|i| self.get(i)).collect()
    }

    /// Center and half-width vectors.
    pub fn center_halfwidth(&self) -> (Vec<f64>, Vec<f64>) {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| ((l + u) / 2.0, (u - l) / 2.0))
            .unzip()
    }

    pub fn center(&self) -> Vec<f64> {
        self.center_halfwidth().0
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }

    pub fn is_finite(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }

    fn check_dim(&self, other: &IntervalBox) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(ReachError::Dimension(format!(
                "boxes of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &IntervalBox) -> Result<IntervalBox> {
        self.check_dim(other)?;
        Ok(Self {
            lower: zip_map(&self.lower, &other.lower, f64::min),
            upper: zip_map(&self.upper, &other.upper, f64::max),
        })
    }

    /// Intersection, or `None` when the boxes are disjoint.
    pub fn intersect(&self, other: &IntervalBox) -> Result<Option<IntervalBox>> {
        self.check_dim(other)?;
        let lower = zip_map(&self.lower, &other.lower, f64::max);
        let upper = zip_map(&self.upper, &other.upper, f64::min);
        Ok(lower
            .iter()
            .zip(&upper)
            .all(|(l, u)| l <= u)
            .then_some(Self { lower, upper }))
    }

    /// Whether `other` lies inside `self` componentwise.
    pub fn contains(&self, other: &IntervalBox) -> Result<bool> {
        self.check_dim(other)?;
        Ok((0..self.dim()).all(|i| self.lower[i] <= other.lower[i] && other.upper[i] <= self.upper[i]))
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && (0..self.dim()).all(|i| self.lower[i] <= x[i] && x[i] <= self.upper[i])
    }

    /// Smallest signed distance from `x` to the box faces; negative when `x`
    /// lies outside.
    pub fn slack(&self, x: &[f64]) -> f64 {
        (0..self.dim())
            .map(|i| (x[i] - self.lower[i]).min(self.upper[i] - x[i]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Hull of a non-empty set of points.
    pub fn hull_of_points<'a, I>(points: I) -> Result<IntervalBox>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut iter = points.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| ReachError::InvalidBox("hull of an empty point set".into()))?;
        let mut lower = first.to_vec();
        let mut upper = first.to_vec();
        for p in iter {
            if p.len() != lower.len() {
                return Err(ReachError::Dimension("points of unequal dimension".into()));
            }
            for i in 0..p.len() {
                lower[i] = lower[i].min(p[i]);
                upper[i] = upper[i].max(p[i]);
            }
        }
        Self::new(lower, upper)
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

impl fmt::Display for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim() {
            if i > 0 {
                write!(f, " x ")?;
            }
            write!(f, "[{}, {}]", self.lower[i], self.upper[i])?;
        }
        Ok(())
    }
}
