//! Method selection: validate a problem, pick a method from the declared
//! capabilities (or honor an explicit request) and run it.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::{debug, info};

use crate::error::{ReachError, Result};
use crate::imatrix::IntervalMatrix;
use crate::interval::Interval;
use crate::methods::{
    check_monotonicity, ct_mixed_mono_reach, dt_mixed_mono_reach, growth_bound_reach, monotone_reach, sign_matrix,
};
use crate::sensitivity::{
    bounds_via_interval_arithmetic, bounds_via_sampling_falsification, IaOptions, SensitivityBounds, SfOptions,
};
use crate::system::{InputMode, Method, ReachProblem, ReachResult, SystemModel, TimeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Auto,
    Explicit(Method),
}

impl fmt::Display for MethodChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodChoice::Auto => f.write_str("auto"),
            MethodChoice::Explicit(m) => m.fmt(f),
        }
    }
}

impl FromStr for MethodChoice {
    type Err = ReachError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            Ok(MethodChoice::Auto)
        } else {
            s.parse().map(MethodChoice::Explicit)
        }
    }
}

/// Budgets and knobs shared by all methods.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Phase-1 samples for sampling/falsification; `None` means `100 (n_x + n_p)`.
    pub samples: Option<usize>,
    pub restarts: usize,
    pub seed: u64,
    /// Sampling/falsification is refused above this state dimension.
    pub dimension_cap: usize,
    pub panels: usize,
    pub taylor_order: usize,
    /// Samples for the interval-arithmetic self-check ...
    pub self_check_samples: usize,
    /// ... which only runs up to this state dimension.
    pub self_check_max_dim: usize,
    pub max_evals_per_search: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let sf = SfOptions::default();
        let ia = IaOptions::default();
        Self {
            samples: None,
            restarts: sf.restarts,
            seed: 0,
            dimension_cap: 20,
            panels: ia.panels,
            taylor_order: ia.order,
            self_check_samples: ia.self_check_samples,
            self_check_max_dim: 10,
            max_evals_per_search: sf.max_evals_per_search,
        }
    }
}

impl SolverConfig {
    fn ia_options(&self, n_x: usize) -> IaOptions {
        IaOptions {
            panels: self.panels,
            order: self.taylor_order,
            self_check_samples: if n_x <= self.self_check_max_dim { self.self_check_samples } else { 0 },
            seed: self.seed,
        }
    }

    fn sf_options(&self) -> SfOptions {
        SfOptions {
            samples: self.samples,
            restarts: self.restarts,
            seed: self.seed,
            max_evals_per_search: self.max_evals_per_search,
            ..SfOptions::default()
        }
    }
}

/// Jacobian bounds for the problem: the declared ones, or ones derived from
/// the field over the invariant space (continuous time) or the initial box
/// (discrete time). `None` when neither is possible.
pub fn available_jacobian_bounds(sys: &SystemModel, prob: &ReachProblem) -> Option<Result<(IntervalMatrix, IntervalMatrix)>> {
    if let Some(b) = sys.declared_jacobian_bounds() {
        return Some(Ok((b.jx.clone(), b.jp.clone())));
    }
    match sys.kind() {
        TimeKind::Continuous => {
            let x = sys.invariant_space()?;
            let t = Interval::spanning(prob.t0, prob.tf.unwrap_or(prob.t0));
            sys.field().jacobian_bounds(t, x, &prob.p)
        }
        TimeKind::Discrete => sys.field().jacobian_bounds(Interval::point(prob.t0), &prob.x0, &prob.p),
    }
}

fn require_jacobian_bounds(sys: &SystemModel, prob: &ReachProblem) -> Result<(IntervalMatrix, IntervalMatrix)> {
    available_jacobian_bounds(sys, prob).unwrap_or_else(|| {
        Err(ReachError::MissingCapability(
            "Jacobian bounds (declared, or Jacobian expressions plus an invariant space)".into(),
        ))
    })
}

fn require_constant_input(prob: &ReachProblem, method: Method) -> Result<()> {
    if prob.input_mode != InputMode::Constant {
        return Err(ReachError::MissingCapability(format!("{method} needs a constant input mode")));
    }
    Ok(())
}

fn with_bounds_time(mut r: ReachResult, started: Instant, note: &str) -> ReachResult {
    r.timing.bounds = started.elapsed().as_secs_f64() - r.timing.reach;
    if !note.is_empty() {
        r.notes = format!("{note}; {}", r.notes);
    }
    r
}

fn sd_with(sys: &SystemModel, prob: &ReachProblem, method: Method, bounds: &SensitivityBounds, started: Instant) -> Result<ReachResult> {
    let r = crate::methods::sd_reach_as(method, sys, prob, &bounds.sx, &bounds.sp)?;
    let note = format!(
        "sensitivity bounds: {}{}",
        bounds.provenance.name(),
        if bounds.guaranteed { "" } else { " (not guaranteed)" }
    );
    Ok(with_bounds_time(r, started, &note))
}

/// Runs one method, checking its preconditions first.
pub fn run_method(sys: &SystemModel, prob: &ReachProblem, method: Method, cfg: &SolverConfig) -> Result<ReachResult> {
    prob.validate_for(sys)?;
    if method.is_continuous() != sys.is_continuous() {
        return Err(ReachError::InvalidProblem(format!(
            "{method} is not defined for {} systems",
            if sys.is_continuous() { "continuous-time" } else { "discrete-time" }
        )));
    }
    let started = Instant::now();
    debug!("running {method}");
    match method {
        Method::GrowthBound => {
            let c = sys
                .contraction()
                .ok_or_else(|| ReachError::MissingCapability("contraction data for the growth bound".into()))?;
            growth_bound_reach(sys, prob, c)
        }
        Method::CtMixedMono => {
            let derived = sys.declared_jacobian_bounds().is_none();
            let (jx, jp) = require_jacobian_bounds(sys, prob)?;
            let r = ct_mixed_mono_reach(sys, prob, &jx, &jp)?;
            Ok(with_bounds_time(r, started, if derived { "Jacobian bounds derived from expressions" } else { "" }))
        }
        Method::Monotone => {
            let (jx, jp) = require_jacobian_bounds(sys, prob)?;
            let signs = check_monotonicity(&sign_matrix(&jx), &sign_matrix(&jp)).ok_or_else(|| {
                ReachError::NoApplicableMethod("the Jacobian sign pattern is not orthant-monotone".into())
            })?;
            let r = monotone_reach(sys, prob, &signs, &jx, &jp)?;
            Ok(with_bounds_time(r, started, ""))
        }
        Method::SdMixedMono => {
            require_constant_input(prob, method)?;
            let b = sys
                .sensitivity_bounds()
                .ok_or_else(|| ReachError::MissingCapability("user-supplied sensitivity bounds".into()))?;
            sd_with(sys, prob, method, b, started)
        }
        Method::SdMixedMonoIa => {
            require_constant_input(prob, method)?;
            let (jx, jp) = require_jacobian_bounds(sys, prob)?;
            let b = bounds_via_interval_arithmetic(sys, prob, &jx, &jp, cfg.ia_options(sys.n_x()))?;
            sd_with(sys, prob, method, &b, started)
        }
        Method::SdMixedMonoSf => {
            require_constant_input(prob, method)?;
            if sys.n_x() > cfg.dimension_cap {
                return Err(ReachError::DimensionCap {
                    n_x: sys.n_x(),
                    cap: cfg.dimension_cap,
                });
            }
            let b = bounds_via_sampling_falsification(sys, prob, cfg.sf_options())?;
            sd_with(sys, prob, method, &b, started)
        }
        Method::DtMixedMono => {
            let (jx, jp) = require_jacobian_bounds(sys, prob)?;
            let r = dt_mixed_mono_reach(sys, prob, &jx, &jp)?;
            Ok(with_bounds_time(r, started, ""))
        }
    }
}

/// The method automatic selection would use, following the fixed order
/// growth bound, CT mixed-monotonicity, sampled-data mixed-monotonicity.
pub fn auto_method(sys: &SystemModel, prob: &ReachProblem) -> Result<Method> {
    prob.validate_for(sys)?;
    let jacobians = available_jacobian_bounds(sys, prob).is_some();
    match sys.kind() {
        TimeKind::Continuous => {
            if sys.contraction().is_some() {
                Ok(Method::GrowthBound)
            } else if jacobians {
                Ok(Method::CtMixedMono)
            } else if prob.input_mode != InputMode::Constant {
                Err(ReachError::NoApplicableMethod(
                    "no contraction data or Jacobian bounds, and sampled-data methods need constant inputs".into(),
                ))
            } else if sys.sensitivity_bounds().is_some() {
                Ok(Method::SdMixedMono)
            } else {
                Ok(Method::SdMixedMonoSf)
            }
        }
        TimeKind::Discrete if jacobians => Ok(Method::DtMixedMono),
        TimeKind::Discrete => Err(ReachError::NoApplicableMethod(
            "discrete-time systems need Jacobian bounds (declared or derivable)".into(),
        )),
    }
}

pub fn solve(sys: &SystemModel, prob: &ReachProblem, choice: MethodChoice, cfg: &SolverConfig) -> Result<ReachResult> {
    let method = match choice {
        MethodChoice::Auto => auto_method(sys, prob)?,
        MethodChoice::Explicit(m) => m,
    };
    info!("solving with {method} ({choice})");
    run_method(sys, prob, method, cfg)
}

/// Why a method produced no result.
#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub method: Method,
    pub reason: String,
    /// The method was attempted and failed, rather than being inapplicable.
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveAllReport {
    pub results: Vec<ReachResult>,
    pub skipped: Vec<Skipped>,
}

fn applicability(sys: &SystemModel, prob: &ReachProblem, method: Method, cfg: &SolverConfig) -> std::result::Result<(), String> {
    if method.is_continuous() != sys.is_continuous() {
        return Err(if sys.is_continuous() {
            "not a discrete-time system".into()
        } else {
            "not a continuous-time system".into()
        });
    }
    let constant = prob.input_mode == InputMode::Constant;
    let jacobians = || match available_jacobian_bounds(sys, prob) {
        None => Err("no Jacobian bounds declared or derivable".to_string()),
        Some(Err(e)) => Err(format!("Jacobian bounds could not be derived: {e}")),
        Some(Ok(b)) => Ok(b),
    };
    match method {
        Method::GrowthBound if sys.contraction().is_none() => Err("no contraction data".into()),
        Method::CtMixedMono | Method::DtMixedMono => jacobians().map(|_| ()),
        Method::Monotone => {
            let (jx, jp) = jacobians()?;
            check_monotonicity(&sign_matrix(&jx), &sign_matrix(&jp))
                .map(|_| ())
                .ok_or_else(|| "Jacobian sign pattern is not orthant-monotone".into())
        }
        Method::SdMixedMono | Method::SdMixedMonoIa | Method::SdMixedMonoSf if !constant => {
            Err("needs a constant input mode".into())
        }
        Method::SdMixedMono if sys.sensitivity_bounds().is_none() => Err("no user-supplied sensitivity bounds".into()),
        Method::SdMixedMonoIa => jacobians().map(|_| ()),
        Method::SdMixedMonoSf if sys.n_x() > cfg.dimension_cap => Err(format!(
            "refused: n_x = {} exceeds the sampling dimension cap {}",
            sys.n_x(),
            cfg.dimension_cap
        )),
        _ => Ok(()),
    }
}

/// Runs every applicable method in the fixed method order, recording a
/// reason for each method that was skipped or failed.
pub fn solve_all(sys: &SystemModel, prob: &ReachProblem, cfg: &SolverConfig) -> Result<SolveAllReport> {
    prob.validate_for(sys)?;
    let mut report = SolveAllReport::default();
    for method in Method::ALL {
        if let Err(reason) = applicability(sys, prob, method, cfg) {
            debug!("skipping {method}: {reason}");
            report.skipped.push(Skipped {
                method,
                reason,
                failed: false,
            });
            continue;
        }
        match run_method(sys, prob, method, cfg) {
            Ok(r) => report.results.push(r),
            Err(e) => report.skipped.push(Skipped {
                method,
                reason: e.to_string(),
                failed: true,
            }),
        }
    }
    Ok(report)
}
