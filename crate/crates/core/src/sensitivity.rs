//! Bounds on the sensitivity matrices `S_x = dPhi/dx0`, `S_p = dPhi/dp`
//! over an initial box and a constant-input box.

use log::warn;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ReachError, Result};
use crate::flow::{finite_difference_sensitivities, flow_with_sensitivities};
use crate::ibox::IntervalBox;
use crate::imatrix::{interval_expm_integral, interval_expm_with, ExpmOptions, IntervalMatrix, DEFAULT_TAYLOR_ORDER};
use crate::system::{InputMode, ReachProblem, SystemModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    UserSupplied,
    IntervalArithmetic,
    SamplingFalsification,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::UserSupplied => "user_supplied",
            Provenance::IntervalArithmetic => "interval_arithmetic",
            Provenance::SamplingFalsification => "sampling_falsification",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityBounds {
    pub sx: IntervalMatrix,
    pub sp: IntervalMatrix,
    pub provenance: Provenance,
    /// Whether the bounds are guaranteed (up to integration and rounding
    /// error) rather than empirical.
    pub guaranteed: bool,
}

impl SensitivityBounds {
    pub fn user_supplied(sx: IntervalMatrix, sp: IntervalMatrix) -> Result<Self> {
        let n = sx.rows();
        if sx.cols() != n || sp.rows() != n {
            return Err(ReachError::Dimension(format!(
                "sensitivity bounds of shapes {:?} and {:?} are not n_x x n_x and n_x x n_p",
                sx.shape(),
                sp.shape()
            )));
        }
        Ok(Self {
            sx,
            sp,
            provenance: Provenance::UserSupplied,
            guaranteed: true,
        })
    }

    /// Entrywise containment of point sensitivities, with absolute slack
    /// `tol * (1 + |value|)`.
    pub fn contains(&self, sx: &DMatrix<f64>, sp: &DMatrix<f64>, tol: f64) -> bool {
        let inside = |b: &IntervalMatrix, m: &DMatrix<f64>| {
            b.shape() == m.shape()
                && (0..m.nrows()).all(|i| {
                    (0..m.ncols()).all(|j| {
                        let (e, v) = (b.get(i, j), m[(i, j)]);
                        let slack = tol * (1.0 + v.abs());
                        e.lo - slack <= v && v <= e.hi + slack
                    })
                })
        };
        inside(&self.sx, sx) && inside(&self.sp, sp)
    }

    /// Whether `other` lies entrywise inside `self`, up to `tol * (1 + |bound|)`.
    pub fn encloses(&self, other: &SensitivityBounds, tol: f64) -> bool {
        let inside = |a: &IntervalMatrix, b: &IntervalMatrix| {
            a.shape() == b.shape()
                && (0..a.rows()).all(|i| {
                    (0..a.cols()).all(|j| {
                        let (x, y) = (a.get(i, j), b.get(i, j));
                        x.lo - tol * (1.0 + y.lo.abs()) <= y.lo && y.hi <= x.hi + tol * (1.0 + y.hi.abs())
                    })
                })
        };
        inside(&self.sx, &other.sx) && inside(&self.sp, &other.sp)
    }
}

fn require_constant_horizon(sys: &SystemModel, prob: &ReachProblem) -> Result<f64> {
    prob.validate_for(sys)?;
    if !sys.is_continuous() {
        return Err(ReachError::InvalidProblem(
            "sensitivity bounds are defined for continuous-time systems".into(),
        ));
    }
    if prob.input_mode != InputMode::Constant {
        return Err(ReachError::InvalidProblem(
            "sensitivity bounds need a constant input mode".into(),
        ));
    }
    Ok(prob.horizon())
}

/// Point sensitivities from the variational equations when the field has a
/// Jacobian evaluator, otherwise from central finite differences of the flow.
pub fn point_sensitivities(
    sys: &SystemModel,
    prob: &ReachProblem,
    x0: &[f64],
    p: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let tf = prob.tf.ok_or_else(|| ReachError::InvalidProblem("missing final time".into()))?;
    if sys.field().has_jacobian() {
        flow_with_sensitivities(sys, prob.t0, tf, x0, p, prob.steps).map(|(_, sx, sp)| (sx, sp))
    } else {
        finite_difference_sensitivities(sys, prob.t0, tf, x0, p, prob.steps, 1e-5)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IaOptions {
    /// Quadrature panels for the enclosure of `int_0^tau exp(J t) dt`.
    pub panels: usize,
    pub order: usize,
    /// Random `(x0, p)` samples whose sensitivities must fall inside the
    /// result; zero disables the check.
    pub self_check_samples: usize,
    pub seed: u64,
}

impl Default for IaOptions {
    fn default() -> Self {
        Self {
            panels: 32,
            order: DEFAULT_TAYLOR_ORDER,
            self_check_samples: 100,
            seed: 0,
        }
    }
}

/// Sensitivity bounds from Jacobian bounds valid over the horizon, the
/// reachable states and the input box:
/// `S_x in exp(jx tau)` and `S_p in (int_0^tau exp(jx t) dt) jp`.
pub fn bounds_via_interval_arithmetic(
    sys: &SystemModel,
    prob: &ReachProblem,
    jx: &IntervalMatrix,
    jp: &IntervalMatrix,
    opts: IaOptions,
) -> Result<SensitivityBounds> {
    let tau = require_constant_horizon(sys, prob)?;
    let (n, m) = (sys.n_x(), sys.n_p());
    if jx.shape() != (n, n) || jp.shape() != (n, m) {
        return Err(ReachError::Dimension(format!("Jacobian bounds must be {n}x{n} and {n}x{m}")));
    }
    jx.check_finite()?;
    jp.check_finite()?;
    let expm = ExpmOptions {
        order: opts.order,
        auto_split: true,
    };
    let sx = interval_expm_with(jx, tau, expm)?;
    let sp = interval_expm_integral(jx, tau, opts.panels, opts.order)?.mul(jp)?;
    let bounds = SensitivityBounds {
        sx,
        sp,
        provenance: Provenance::IntervalArithmetic,
        guaranteed: true,
    };

    if opts.self_check_samples > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for _ in 0..opts.self_check_samples {
            let x0 = uniform_point(&mut rng, &prob.x0);
            let p = uniform_point(&mut rng, &prob.p);
            let (sx, sp) = match point_sensitivities(sys, prob, &x0, &p) {
                Ok(s) => s,
                Err(ReachError::Divergence { .. }) => continue,
                Err(e) => return Err(e),
            };
            if !bounds.contains(&sx, &sp, 1e-6) {
                return Err(ReachError::Soundness(format!(
                    "sampled sensitivities at x0 = {x0:?}, p = {p:?} fall outside the interval-arithmetic \
                     bounds; the Jacobian bounds probably do not hold along the trajectories"
                )));
            }
        }
    }
    Ok(bounds)
}

pub(crate) fn uniform_point<R: Rng>(rng: &mut R, b: &IntervalBox) -> Vec<f64> {
    b.lower()
        .iter()
        .zip(b.upper())
        .map(|(&lo, &hi)| lo + (hi - lo) * rng.random::<f64>())
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct SfOptions {
    /// Phase-1 samples; `None` means `100 (n_x + n_p)`.
    pub samples: Option<usize>,
    /// Consecutive non-falsifying searches an entry must survive.
    pub restarts: usize,
    pub seed: u64,
    /// Evaluation cap for a single pattern search.
    pub max_evals_per_search: usize,
    /// Cap on searches per matrix entry and direction.
    pub max_searches_per_entry: usize,
}

impl Default for SfOptions {
    fn default() -> Self {
        Self {
            samples: None,
            restarts: 5,
            seed: 0,
            max_evals_per_search: 400,
            max_searches_per_entry: 50,
        }
    }
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes: Vec<u64> = Vec::with_capacity(count);
    let mut k = 2u64;
    while primes.len() < count {
        if primes.iter().take_while(|&&p| p * p <= k).all(|&p| k % p != 0) {
            primes.push(k);
        }
        k += 1;
    }
    primes
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Halton points `1..=count` in the unit cube of dimension `dim`.
pub fn halton(count: usize, dim: usize) -> Vec<Vec<f64>> {
    let primes = first_primes(dim);
    (1..=count as u64)
        .map(|i| primes.iter().map(|&b| radical_inverse(i, b)).collect())
        .collect()
}

/// Running entrywise hull of sampled sensitivities.
struct Hull {
    lo: Vec<f64>,
    hi: Vec<f64>,
    n: usize,
    m: usize,
}

impl Hull {
    fn new(n: usize, m: usize) -> Self {
        let len = n * n + n * m;
        Self {
            lo: vec![f64::INFINITY; len],
            hi: vec![f64::NEG_INFINITY; len],
            n,
            m,
        }
    }

    fn values(&self, sx: &DMatrix<f64>, sp: &DMatrix<f64>) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.lo.len());
        for i in 0..self.n {
            v.extend((0..self.n).map(|j| sx[(i, j)]));
        }
        for i in 0..self.n {
            v.extend((0..self.m).map(|k| sp[(i, k)]));
        }
        v
    }

    fn merge(&mut self, values: &[f64]) {
        for (k, &v) in values.iter().enumerate() {
            self.lo[k] = self.lo[k].min(v);
            self.hi[k] = self.hi[k].max(v);
        }
    }

    fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(lo, hi)| lo > hi)
    }

    fn into_bounds(self) -> Result<SensitivityBounds> {
        let (n, m) = (self.n, self.m);
        let split = n * n;
        let sx = IntervalMatrix::new(n, n, self.lo[..split].to_vec(), self.hi[..split].to_vec())?;
        let sp = IntervalMatrix::new(n, m, self.lo[split..].to_vec(), self.hi[split..].to_vec())?;
        Ok(SensitivityBounds {
            sx,
            sp,
            provenance: Provenance::SamplingFalsification,
            guaranteed: false,
        })
    }
}

/// Maximizes `objective` over the unit cube by coordinate pattern search
/// from `start`, halving the radius after each unsuccessful poll.
fn pattern_search<F>(start: Vec<f64>, active: &[usize], max_evals: usize, mut objective: F)
where
    F: FnMut(&[f64]) -> f64,
{
    let mut u = start;
    let mut best = objective(&u);
    let mut evals = 1;
    let mut radius = 0.25;
    while radius >= 1e-6 && evals < max_evals {
        let mut improved = false;
        'poll: for &d in active {
            for dir in [1.0, -1.0] {
                let mut cand = u.clone();
                cand[d] = (u[d] + dir * radius).clamp(0.0, 1.0);
                if cand[d] == u[d] {
                    continue;
                }
                let v = objective(&cand);
                evals += 1;
                if v > best {
                    best = v;
                    u = cand;
                    improved = true;
                    break 'poll;
                }
                if evals >= max_evals {
                    break 'poll;
                }
            }
        }
        if !improved {
            radius *= 0.5;
        }
    }
}

/// Empirical sensitivity bounds: the hull of sensitivities at quasi-random
/// samples, then widened by falsification searches on every entry in both
/// directions until each survives `restarts` consecutive searches.
pub fn bounds_via_sampling_falsification(
    sys: &SystemModel,
    prob: &ReachProblem,
    opts: SfOptions,
) -> Result<SensitivityBounds> {
    require_constant_horizon(sys, prob)?;
    let (n, m) = (sys.n_x(), sys.n_p());
    let dim = n + m;
    let (lower, widths): (Vec<f64>, Vec<f64>) = {
        let mut lower = prob.x0.lower().to_vec();
        lower.extend_from_slice(prob.p.lower());
        let mut widths = prob.x0.widths();
        widths.extend(prob.p.widths());
        (lower, widths)
    };
    let to_point = |u: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let z: Vec<f64> = (0..dim).map(|d| lower[d] + widths[d] * u[d]).collect();
        (z[..n].to_vec(), z[n..].to_vec())
    };
    let mut hull = Hull::new(n, m);

    let samples = opts.samples.unwrap_or(100 * dim).max(1);
    let mut diverged = 0usize;
    for u in halton(samples, dim) {
        let (x0, p) = to_point(&u);
        match point_sensitivities(sys, prob, &x0, &p) {
            Ok((sx, sp)) => {
                let v = hull.values(&sx, &sp);
                hull.merge(&v);
            }
            Err(ReachError::Divergence { time }) => {
                diverged += 1;
                warn!("sample x0 = {x0:?}, p = {p:?} diverged at t = {time}; skipped");
            }
            Err(e) => return Err(e),
        }
    }
    if 2 * diverged > samples || hull.is_empty() {
        return Err(ReachError::Sampling(format!(
            "{diverged} of {samples} sampled trajectories diverged"
        )));
    }

    let active: Vec<usize> = (0..dim).filter(|&d| widths[d] > 0.0).collect();
    if !active.is_empty() && opts.restarts > 0 {
        let entries = hull.lo.len();
        for task in 0..2 * entries {
            let (entry, upper) = (task / 2, task % 2 == 1);
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(task as u64);
            let (mut survived, mut searches) = (0, 0);
            while survived < opts.restarts && searches < opts.max_searches_per_entry {
                searches += 1;
                let before = if upper { hull.hi[entry] } else { hull.lo[entry] };
                let start: Vec<f64> = (0..dim)
                    .map(|d| if widths[d] > 0.0 { rng.random::<f64>() } else { 0.0 })
                    .collect();
                pattern_search(start, &active, opts.max_evals_per_search, |u| {
                    let (x0, p) = to_point(u);
                    match point_sensitivities(sys, prob, &x0, &p) {
                        Ok((sx, sp)) => {
                            let v = hull.values(&sx, &sp);
                            hull.merge(&v);
                            if upper {
                                v[entry]
                            } else {
                                -v[entry]
                            }
                        }
                        Err(_) => f64::NEG_INFINITY,
                    }
                });
                let after = if upper { hull.hi[entry] } else { hull.lo[entry] };
                if after != before {
                    survived = 0;
                } else {
                    survived += 1;
                }
            }
        }
    }
    hull.into_bounds()
}
