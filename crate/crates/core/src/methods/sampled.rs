use std::collections::HashMap;
use std::time::Instant;

use super::finish;
use crate::error::{ReachError, Result};
use crate::flow::{flow, step_map, InputSignal};
use crate::ibox::IntervalBox;
use crate::imatrix::IntervalMatrix;
use crate::system::{InputMode, Method, ReachProblem, ReachResult, SystemModel};

/// Per-row pair of evaluation points and the correction `c_i >= 0` that
/// widens the faces.
struct Row {
    lo_point: (Vec<f64>, Vec<f64>),
    hi_point: (Vec<f64>, Vec<f64>),
    correction: f64,
}

fn rows(x: &IntervalBox, p: &IntervalBox, sx: &IntervalMatrix, sp: &IntervalMatrix) -> Result<Vec<Row>> {
    sx.check_finite()?;
    sp.check_finite()?;
    let (n, m) = (x.dim(), p.dim());
    // (under, over, slope) for one entry with bounds [lo, hi] on the
    // derivative and range [a, b] of the variable.
    let pick = |lo: f64, hi: f64, a: f64, b: f64| {
        if 0.5 * (lo + hi) >= 0.0 {
            (a, b, lo.min(0.0))
        } else {
            (b, a, hi.max(0.0))
        }
    };
    Ok((0..n)
        .map(|i| {
            let (mut xl, mut xu, mut pl, mut pu) = (vec![0.0; n], vec![0.0; n], vec![0.0; m], vec![0.0; m]);
            let mut correction = 0.0;
            for j in 0..n {
                let e = sx.get(i, j);
                let (u, o, alpha) = pick(e.lo, e.hi, x.lower()[j], x.upper()[j]);
                (xl[j], xu[j]) = (u, o);
                correction += alpha * (u - o);
            }
            for k in 0..m {
                let e = sp.get(i, k);
                let (u, o, beta) = pick(e.lo, e.hi, p.lower()[k], p.upper()[k]);
                (pl[k], pu[k]) = (u, o);
                correction += beta * (u - o);
            }
            Row {
                lo_point: (xl, pl),
                hi_point: (xu, pu),
                correction,
            }
        })
        .collect())
}

fn key(x: &[f64], p: &[f64]) -> Vec<u64> {
    x.iter().chain(p).map(|v| v.to_bits()).collect()
}

/// Shared construction: `lower_i = phi_i(lo point) - c_i`,
/// `upper_i = phi_i(hi point) + c_i`, with successor evaluations cached so
/// that identical points across rows are evaluated once.
fn reach_from_bounds<F>(
    method: Method,
    prob: &ReachProblem,
    dx: &IntervalMatrix,
    dp: &IntervalMatrix,
    started: Instant,
    mut successor: F,
) -> Result<ReachResult>
where
    F: FnMut(&[f64], &[f64]) -> Result<Vec<f64>>,
{
    let rows = rows(&prob.x0, &prob.p, dx, dp)?;
    let mut cache: HashMap<Vec<u64>, Vec<f64>> = HashMap::new();
    let mut eval = |point: &(Vec<f64>, Vec<f64>)| -> Result<Vec<f64>> {
        let k = key(&point.0, &point.1);
        if let Some(v) = cache.get(&k) {
            return Ok(v.clone());
        }
        let v = successor(&point.0, &point.1)?;
        cache.insert(k, v.clone());
        Ok(v)
    };
    let n = rows.len();
    let (mut lower, mut upper) = (vec![0.0; n], vec![0.0; n]);
    for (i, row) in rows.iter().enumerate() {
        lower[i] = eval(&row.lo_point)?[i] - row.correction;
        upper[i] = eval(&row.hi_point)?[i] + row.correction;
    }
    let evals = cache.len();
    let widened = rows.iter().filter(|r| r.correction > 0.0).count();
    let notes = format!("{evals} distinct successor evaluations, {widened} dimension(s) widened by nonzero slopes");
    finish(method, lower, upper, evals, started, notes)
}

fn check_shapes(sys: &SystemModel, a: &IntervalMatrix, b: &IntervalMatrix, what: &str) -> Result<()> {
    let (n, m) = (sys.n_x(), sys.n_p());
    if a.shape() != (n, n) || b.shape() != (n, m) {
        return Err(ReachError::Dimension(format!("{what} must be {n}x{n} and {n}x{m}")));
    }
    Ok(())
}

/// Sampled-data mixed-monotonicity from sensitivity bounds: at most
/// `2 n_x` successors of the original system, constant inputs only.
pub fn sd_mixed_mono_reach(
    sys: &SystemModel,
    prob: &ReachProblem,
    sx: &IntervalMatrix,
    sp: &IntervalMatrix,
) -> Result<ReachResult> {
    sd_reach_as(Method::SdMixedMono, sys, prob, sx, sp)
}

pub(crate) fn sd_reach_as(
    method: Method,
    sys: &SystemModel,
    prob: &ReachProblem,
    sx: &IntervalMatrix,
    sp: &IntervalMatrix,
) -> Result<ReachResult> {
    let started = Instant::now();
    prob.validate_for(sys)?;
    if !sys.is_continuous() {
        return Err(ReachError::InvalidProblem(
            "sampled-data mixed-monotonicity needs a continuous-time system".into(),
        ));
    }
    if prob.input_mode != InputMode::Constant {
        return Err(ReachError::InvalidProblem(
            "sampled-data mixed-monotonicity is limited to constant inputs".into(),
        ));
    }
    check_shapes(sys, sx, sp, "sensitivity bounds")?;
    let tf = prob.tf.expect("validated continuous problem");
    reach_from_bounds(method, prob, sx, sp, started, |x, p| {
        flow(sys, prob.t0, tf, x, InputSignal::Constant(p), prob.steps)
    })
}

/// Discrete-time mixed-monotonicity from Jacobian bounds of the map: at
/// most `2 n_x` map evaluations.
pub fn dt_mixed_mono_reach(
    sys: &SystemModel,
    prob: &ReachProblem,
    jx: &IntervalMatrix,
    jp: &IntervalMatrix,
) -> Result<ReachResult> {
    let started = Instant::now();
    prob.validate_for(sys)?;
    if sys.is_continuous() {
        return Err(ReachError::InvalidProblem(
            "discrete-time mixed-monotonicity needs a discrete-time system".into(),
        ));
    }
    check_shapes(sys, jx, jp, "Jacobian bounds")?;
    reach_from_bounds(Method::DtMixedMono, prob, jx, jp, started, |x, p| step_map(sys, prob.t0, x, p))
}
