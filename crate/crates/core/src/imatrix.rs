//! Interval matrices and the interval matrix exponential.

use nalgebra::DMatrix;

use crate::error::{ReachError, Result};
use crate::interval::Interval;

/// Default truncation order of the Taylor series in [`interval_expm`].
pub const DEFAULT_TAYLOR_ORDER: usize = 20;

/// Dense matrix of intervals, stored row-major as separate bound arrays.
///
/// Infinite bounds may be stored (Jacobian diagonals are allowed to be
/// unbounded) but every arithmetic operation rejects them.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMatrix {
    rows: usize,
    cols: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl IntervalMatrix {
    pub fn new(rows: usize, cols: usize, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != rows * cols || hi.len() != rows * cols {
            return Err(ReachError::InvalidMatrix(format!(
                "expected {} entries for a {rows}x{cols} matrix",
                rows * cols
            )));
        }
        if let Some(k) = (0..lo.len()).find(|&k| !(lo[k] <= hi[k])) {
            return Err(ReachError::InvalidMatrix(format!(
                "entry ({}, {}): lower {} is not <= upper {}",
                k / cols.max(1),
                k % cols.max(1),
                lo[k],
                hi[k]
            )));
        }
        Ok(Self { rows, cols, lo, hi })
    }

    pub fn from_bounds(lower: &DMatrix<f64>, upper: &DMatrix<f64>) -> Result<Self> {
        if lower.shape() != upper.shape() {
            return Err(ReachError::InvalidMatrix("bound matrices differ in shape".into()));
        }
        let (rows, cols) = lower.shape();
        let lo = (0..rows * cols).map(|k| lower[(k / cols, k % cols)]).collect();
        let hi = (0..rows * cols).map(|k| upper[(k / cols, k % cols)]).collect();
        Self::new(rows, cols, lo, hi)
    }

    pub fn from_rows(lower: &[Vec<f64>], upper: &[Vec<f64>]) -> Result<Self> {
        let rows = lower.len();
        let cols = lower.first().map_or(0, Vec::len);
        if upper.len() != rows || lower.iter().chain(upper).any(|r| r.len() != cols) {
            return Err(ReachError::InvalidMatrix("ragged or mismatched rows".into()));
        }
        Self::new(rows, cols, lower.concat(), upper.concat())
    }

    pub fn point(m: &DMatrix<f64>) -> Self {
        Self::from_bounds(m, m).expect("point matrix bounds are ordered")
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            lo: vec![0.0; rows * cols],
            hi: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.lo[i * n + i] = 1.0;
            m.hi[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> Interval {
        let k = i * self.cols + j;
        Interval::new(self.lo[k], self.hi[k])
    }

    pub fn set(&mut self, i: usize, j: usize, v: Interval) {
        let k = i * self.cols + j;
        self.lo[k] = v.lo;
        self.hi[k] = v.hi;
    }

    pub fn lower(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.lo)
    }

    pub fn upper(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.hi)
    }

    /// Entrywise midpoint. Entries with an infinite bound have no meaningful
    /// center and come back as NaN or infinite.
    pub fn center(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).mid())
    }

    pub fn to_rows(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let split = |v: &[f64]| v.chunks(self.cols.max(1)).map(<[f64]>::to_vec).collect();
        (split(&self.lo), split(&self.hi))
    }

    pub fn is_finite(&self) -> bool {
        self.lo.iter().chain(&self.hi).all(|v| v.is_finite())
    }

    pub fn check_finite(&self) -> Result<()> {
        match (0..self.lo.len()).find(|&k| !self.lo[k].is_finite() || !self.hi[k].is_finite()) {
            Some(k) => Err(ReachError::InfiniteEntry {
                row: k / self.cols,
                col: k % self.cols,
            }),
            None => Ok(()),
        }
    }

    /// Infinity norm: largest row sum of entry magnitudes.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).mag()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest entry width.
    pub fn max_width(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).fold(0.0, f64::max)
    }

    pub fn add(&self, other: &IntervalMatrix) -> Result<IntervalMatrix> {
        if self.shape() != other.shape() {
            return Err(ReachError::Dimension(format!(
                "cannot add {:?} and {:?} matrices",
                self.shape(),
                other.shape()
            )));
        }
        self.check_finite()?;
        other.check_finite()?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a + b).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a + b).collect(),
        })
    }

    /// Product enclosing `{A B : A in self, B in other}`, each entry built
    /// from the min/max of the four endpoint products.
    pub fn mul(&self, other: &IntervalMatrix) -> Result<IntervalMatrix> {
        if self.cols != other.rows {
            return Err(ReachError::Dimension(format!(
                "cannot multiply {:?} by {:?}",
                self.shape(),
                other.shape()
            )));
        }
        self.check_finite()?;
        other.check_finite()?;
        let (n, m, p) = (self.rows, self.cols, other.cols);
        let mut lo = vec![0.0; n * p];
        let mut hi = vec![0.0; n * p];
        for i in 0..n {
            for k in 0..m {
                let (al, ah) = (self.lo[i * m + k], self.hi[i * m + k]);
                if al == 0.0 && ah == 0.0 {
                    continue;
                }
                let row_lo = &mut lo[i * p..(i + 1) * p];
                let row_hi = &mut hi[i * p..(i + 1) * p];
                let (bl, bh) = (&other.lo[k * p..(k + 1) * p], &other.hi[k * p..(k + 1) * p]);
                for j in 0..p {
                    let (a, b, c, d) = (al * bl[j], al * bh[j], ah * bl[j], ah * bh[j]);
                    row_lo[j] += a.min(b).min(c.min(d));
                    row_hi[j] += a.max(b).max(c.max(d));
                }
            }
        }
        Ok(Self { rows: n, cols: p, lo, hi })
    }

    /// Multiplies every entry by the interval `k`.
    pub fn scale(&self, k: Interval) -> Result<IntervalMatrix> {
        self.check_finite()?;
        let mut out = self.clone();
        for idx in 0..self.lo.len() {
            let v = Interval::new(self.lo[idx], self.hi[idx]) * k;
            out.lo[idx] = v.lo;
            out.hi[idx] = v.hi;
        }
        Ok(out)
    }

    /// Adds `[-r, r]` to every entry.
    pub fn inflate(&self, r: f64) -> IntervalMatrix {
        let mut out = self.clone();
        out.lo.iter_mut().for_each(|v| *v -= r);
        out.hi.iter_mut().for_each(|v| *v += r);
        out
    }

    /// Widens every entry by `rel` times its magnitude. Used as a cheap guard
    /// against accumulated rounding, since no directed rounding is performed.
    fn widen_relative(&self, rel: f64) -> IntervalMatrix {
        let mut out = self.clone();
        for idx in 0..self.lo.len() {
            let r = rel * self.lo[idx].abs().max(self.hi[idx].abs());
            out.lo[idx] -= r;
            out.hi[idx] += r;
        }
        out
    }

    /// Entrywise hull.
    pub fn hull(&self, other: &IntervalMatrix) -> Result<IntervalMatrix> {
        if self.shape() != other.shape() {
            return Err(ReachError::Dimension("hull of differently shaped matrices".into()));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        })
    }

    /// Whether every entry of `m` lies within `tol` of the matching interval.
    pub fn contains_matrix(&self, m: &DMatrix<f64>, tol: f64) -> bool {
        m.shape() == self.shape()
            && (0..self.rows).all(|i| {
                (0..self.cols).all(|j| {
                    let e = self.get(i, j);
                    e.lo - tol <= m[(i, j)] && m[(i, j)] <= e.hi + tol
                })
            })
    }

    /// Whether `other` lies entrywise within `self`, up to `tol`.
    pub fn encloses(&self, other: &IntervalMatrix, tol: f64) -> bool {
        self.shape() == other.shape()
            && (0..self.lo.len()).all(|k| self.lo[k] - tol <= other.lo[k] && other.hi[k] <= self.hi[k] + tol)
    }
}

/// Options for [`interval_expm_with`].
#[derive(Debug, Clone, Copy)]
pub struct ExpmOptions {
    pub order: usize,
    /// Split `tau` into `2^k` sub-steps when `|C|*tau >= 1`.
    pub auto_split: bool,
}

impl Default for ExpmOptions {
    fn default() -> Self {
        Self {
            order: DEFAULT_TAYLOR_ORDER,
            auto_split: true,
        }
    }
}

/// Encloses `{exp(C tau) : C in c}` with default options.
pub fn interval_expm(c: &IntervalMatrix, tau: f64) -> Result<IntervalMatrix> {
    interval_expm_with(c, tau, ExpmOptions::default())
}

/// Truncated Taylor series `sum_{k<=N} (c tau)^k / k!` inflated by the
/// remainder bound `rho = a^{N+1} / ((N+1)! (1 - a/(N+2)))`, `a = |c|_inf tau`.
/// With `auto_split`, the argument is first scaled by `2^-s` so that `a < 1`
/// and the result squared `s` times.
pub fn interval_expm_with(c: &IntervalMatrix, tau: f64, opts: ExpmOptions) -> Result<IntervalMatrix> {
    if c.rows != c.cols {
        return Err(ReachError::NotSquare {
            rows: c.rows,
            cols: c.cols,
        });
    }
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(ReachError::InvalidProblem(format!("tau must be finite and >= 0, got {tau}")));
    }
    c.check_finite()?;
    let a = c.scale(Interval::point(tau))?;
    expm_of(&a, opts)
}

/// Exponential of an already scaled interval matrix `a`.
fn expm_of(a: &IntervalMatrix, opts: ExpmOptions) -> Result<IntervalMatrix> {
    let order = opts.order.max(1);
    let norm = a.norm_inf();
    let mut splits = 0u32;
    if opts.auto_split && norm >= 1.0 {
        splits = norm.log2().floor() as u32 + 1;
    }
    let scaled_norm = norm / 2f64.powi(splits as i32);
    let limit = (order + 2) as f64;
    if scaled_norm >= limit {
        return Err(ReachError::TaylorDivergence {
            norm: scaled_norm,
            limit,
        });
    }
    let a = if splits > 0 {
        a.scale(Interval::point(0.5f64.powi(splits as i32)))?
    } else {
        a.clone()
    };

    let n = a.rows;
    let mut sum = IntervalMatrix::identity(n);
    let mut term = IntervalMatrix::identity(n);
    for k in 1..=order {
        term = term.mul(&a)?.scale(Interval::point(1.0 / k as f64))?;
        sum = sum.add(&term)?;
    }
    let mut rho = scaled_norm.powi(order as i32 + 1);
    for k in 1..=order + 1 {
        rho /= k as f64;
    }
    rho /= 1.0 - scaled_norm / limit;
    let guard = |k: usize| 4.0 * k as f64 * f64::EPSILON;
    let mut result = sum.inflate(rho).widen_relative(guard(order + n));
    for _ in 0..splits {
        result = result.mul(&result)?.widen_relative(guard(n));
    }
    Ok(result)
}

/// Encloses `{ integral_0^tau exp(C t) dt : C in c }`.
///
/// The horizon is cut into `panels` pieces of width `h`. On the k-th piece
/// the integrand lies in `exp(c k h) * exp(c [0, h])`, so the piece
/// contributes `h` times that product; the pieces are summed.
pub fn interval_expm_integral(c: &IntervalMatrix, tau: f64, panels: usize, order: usize) -> Result<IntervalMatrix> {
    if c.rows != c.cols {
        return Err(ReachError::NotSquare {
            rows: c.rows,
            cols: c.cols,
        });
    }
    c.check_finite()?;
    let n = c.rows;
    if tau == 0.0 {
        return Ok(IntervalMatrix::zeros(n, n));
    }
    let panels = panels.max(1);
    let h = tau / panels as f64;
    let opts = ExpmOptions { order, auto_split: true };
    let step = interval_expm_with(c, h, opts)?;
    let within_panel = expm_of(&c.scale(Interval::new(0.0, h))?, opts)?;

    let mut acc = IntervalMatrix::zeros(n, n);
    let mut start = IntervalMatrix::identity(n);
    for k in 0..panels {
        acc = acc.add(&start.mul(&within_panel)?)?;
        if k + 1 < panels {
            start = start.mul(&step)?;
        }
    }
    Ok(acc.scale(Interval::point(h))?.widen_relative(4.0 * (panels + n) as f64 * f64::EPSILON))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar(lo: f64, hi: f64) -> IntervalMatrix {
        IntervalMatrix::new(1, 1, vec![lo], vec![hi]).unwrap()
    }

    #[test]
    fn degenerate_and_enumerated_products() {
        assert_eq!(scalar(1.0, 1.0).mul(&scalar(2.0, 2.0)).unwrap(), scalar(2.0, 2.0));
        // endpoint products of [-1,1]*[2,3]: -2, -3, 2, 3
        assert_eq!(scalar(-1.0, 1.0).mul(&scalar(2.0, 3.0)).unwrap(), scalar(-3.0, 3.0));
    }

    #[test]
    fn identity_is_neutral() {
        let m = IntervalMatrix::from_rows(
            &[vec![1.0, -2.0], vec![0.5, 3.0]],
            &[vec![1.5, -1.0], vec![0.5, 4.0]],
        )
        .unwrap();
        assert_eq!(IntervalMatrix::identity(2).mul(&m).unwrap(), m);
    }

    #[test]
    fn arithmetic_rejects_bad_input() {
        let a = IntervalMatrix::zeros(2, 3);
        assert!(matches!(a.mul(&a), Err(ReachError::Dimension(_))));
        assert!(matches!(a.add(&IntervalMatrix::zeros(3, 2)), Err(ReachError::Dimension(_))));
        let inf = IntervalMatrix::new(1, 1, vec![f64::NEG_INFINITY], vec![0.0]).unwrap();
        assert!(matches!(inf.mul(&scalar(1.0, 1.0)), Err(ReachError::InfiniteEntry { .. })));
        assert!(matches!(interval_expm(&a, 1.0), Err(ReachError::NotSquare { .. })));
    }

    #[test]
    fn scalar_exponential() {
        let e = interval_expm(&scalar(-1.0, -1.0), 1.0).unwrap().get(0, 0);
        assert!(e.contains((-1.0f64).exp()));
        assert!(e.width() <= 1e-9);
    }

    #[test]
    fn zero_matrix_gives_identity() {
        for tau in [0.0, 1.0, 50.0] {
            let e = interval_expm(&IntervalMatrix::zeros(3, 3), tau).unwrap();
            assert!(e.contains_matrix(&DMatrix::identity(3, 3), 0.0));
        }
    }

    #[test]
    fn divergence_without_splitting() {
        let opts = ExpmOptions {
            order: 5,
            auto_split: false,
        };
        let err = interval_expm_with(&scalar(-10.0, -10.0), 1.0, opts).unwrap_err();
        assert!(matches!(err, ReachError::TaylorDivergence { .. }));
        assert!(interval_expm_with(&scalar(-10.0, -10.0), 1.0, ExpmOptions::default()).is_ok());
    }

    fn corner_matrices(c: &IntervalMatrix) -> Vec<DMatrix<f64>> {
        let (r, k) = c.shape();
        let n = r * k;
        (0..1usize << n)
            .map(|mask| {
                DMatrix::from_fn(r, k, |i, j| {
                    let e = c.get(i, j);
                    if mask >> (i * k + j) & 1 == 1 {
                        e.hi
                    } else {
                        e.lo
                    }
                })
            })
            .collect()
    }

    #[test]
    fn interval_exponential_encloses_corner_exponentials() {
        let c = IntervalMatrix::from_rows(
            &[vec![-1.0, 0.9], vec![0.9, -1.0]],
            &[vec![-1.0, 1.1], vec![1.1, -1.0]],
        )
        .unwrap();
        let e = interval_expm(&c, 0.1).unwrap();
        for a in corner_matrices(&c) {
            let reference = (a * 0.1).exp();
            assert!(e.contains_matrix(&reference, 0.0), "{reference}");
        }
    }

    #[test]
    fn higher_order_is_not_wider() {
        let c = IntervalMatrix::from_rows(
            &[vec![-1.0, 0.2, 0.0], vec![0.1, -0.5, 0.3], vec![0.0, 0.2, -2.0]],
            &[vec![-0.8, 0.4, 0.1], vec![0.2, -0.4, 0.3], vec![0.1, 0.3, -1.5]],
        )
        .unwrap();
        for tau in [0.3, 1.0, 4.0] {
            for order in [5, 10, 15] {
                let a = interval_expm_with(&c, tau, ExpmOptions { order, auto_split: true }).unwrap();
                let b = interval_expm_with(&c, tau, ExpmOptions { order: order + 5, auto_split: true }).unwrap();
                for i in 0..3 {
                    for j in 0..3 {
                        assert!(b.get(i, j).width() <= a.get(i, j).width() * (1.0 + 1e-12) + 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn integral_of_scalar_exponential() {
        // int_0^1 e^{-t} dt = 1 - e^{-1}
        let exact = 1.0 - (-1.0f64).exp();
        let coarse = interval_expm_integral(&scalar(-1.0, -1.0), 1.0, 32, 20).unwrap().get(0, 0);
        let fine = interval_expm_integral(&scalar(-1.0, -1.0), 1.0, 64, 20).unwrap().get(0, 0);
        assert!(coarse.contains(exact) && fine.contains(exact));
        assert!(fine.width() <= coarse.width());
        assert!(fine.width() < 0.02);
    }

    #[test]
    fn integral_of_zero_horizon_is_zero() {
        let m = interval_expm_integral(&scalar(-1.0, 2.0), 0.0, 8, 20).unwrap();
        assert_eq!(m, scalar(0.0, 0.0));
    }

    proptest! {
        #[test]
        fn product_and_sum_enclose_members(
            entries in proptest::collection::vec((-3.0..3.0f64, 0.0..1.0f64), 8),
            picks in proptest::collection::vec(0.0..=1.0f64, 8)
        ) {
            let (lo, w): (Vec<f64>, Vec<f64>) = entries.into_iter().unzip();
            let hi: Vec<f64> = lo.iter().zip(&w).map(|(l, w)| l + w).collect();
            let a = IntervalMatrix::new(2, 2, lo[..4].to_vec(), hi[..4].to_vec()).unwrap();
            let b = IntervalMatrix::new(2, 2, lo[4..].to_vec(), hi[4..].to_vec()).unwrap();
            let sample = |m: &IntervalMatrix, off: usize| {
                DMatrix::from_fn(2, 2, |i, j| {
                    let e = m.get(i, j);
                    (e.lo + picks[off + i * 2 + j] * e.width()).min(e.hi)
                })
            };
            let (pa, pb) = (sample(&a, 0), sample(&b, 4));
            prop_assert!(a.mul(&b).unwrap().contains_matrix(&(&pa * &pb), 1e-12));
            prop_assert!(a.add(&b).unwrap().contains_matrix(&(&pa + &pb), 1e-12));
        }

        #[test]
        fn point_exponential_matches_reference(
            vals in proptest::collection::vec(-1.0..1.0f64, 9), tau in 0.0..1.0f64
        ) {
            let m = DMatrix::from_row_slice(3, 3, &vals);
            let norm = (0..3).map(|i| (0..3).map(|j| m[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max);
            prop_assume!(norm * tau <= 1.0);
            let e = interval_expm(&IntervalMatrix::point(&m), tau).unwrap();
            let reference = (m * tau).exp();
            prop_assert!(e.contains_matrix(&reference, 1e-9));
            prop_assert!(e.max_width() <= 1e-9);
        }
    }
}
