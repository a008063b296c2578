use std::time::Instant;

use super::finish;
use crate::error::{ReachError, Result};
use crate::flow::rk4;
use crate::imatrix::IntervalMatrix;
use crate::system::{Method, ReachProblem, ReachResult, SystemModel};

/// Per-row choice of arguments for the decomposition function: for each
/// off-diagonal state (or input) entry, whether the hatted argument is used,
/// and the matching nonnegative slope.
#[derive(Debug, Clone)]
struct Selectors {
    x_hat: Vec<Vec<bool>>,
    alpha: Vec<Vec<f64>>,
    p_hat: Vec<Vec<bool>>,
    beta: Vec<Vec<f64>>,
}

/// The diagonal of `jx` is never read, so it may hold infinite bounds.
fn selectors(jx: &IntervalMatrix, jp: &IntervalMatrix) -> Result<Selectors> {
    let (n, m) = (jx.rows(), jp.cols());
    let choose = |lo: f64, hi: f64, row: usize, col: usize| -> Result<(bool, f64)> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(ReachError::InfiniteEntry { row, col });
        }
        let center = 0.5 * (lo + hi);
        Ok(if center >= 0.0 { (false, (-lo).max(0.0)) } else { (true, hi.max(0.0)) })
    };
    let mut s = Selectors {
        x_hat: vec![vec![false; n]; n],
        alpha: vec![vec![0.0; n]; n],
        p_hat: vec![vec![false; m]; n],
        beta: vec![vec![0.0; m]; n],
    };
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let e = jx.get(i, j);
            (s.x_hat[i][j], s.alpha[i][j]) = choose(e.lo, e.hi, i, j)?;
        }
        for k in 0..m {
            let e = jp.get(i, k);
            (s.p_hat[i][k], s.beta[i][k]) = choose(e.lo, e.hi, i, k)?;
        }
    }
    Ok(s)
}

/// Continuous-time mixed-monotonicity: one trajectory of the embedded
/// system of dimension `2 n_x` from `(x_lo, x_hi)` with inputs
/// `(p_lo, p_hi)`. Valid for time-varying inputs.
pub fn ct_mixed_mono_reach(
    sys: &SystemModel,
    prob: &ReachProblem,
    jx: &IntervalMatrix,
    jp: &IntervalMatrix,
) -> Result<ReachResult> {
    let started = Instant::now();
    prob.validate_for(sys)?;
    if !sys.is_continuous() {
        return Err(ReachError::InvalidProblem(
            "continuous-time mixed-monotonicity needs a continuous-time system".into(),
        ));
    }
    let (n, m) = (sys.n_x(), sys.n_p());
    if jx.shape() != (n, n) || jp.shape() != (n, m) {
        return Err(ReachError::Dimension(format!("Jacobian bounds must be {n}x{n} and {n}x{m}")));
    }
    let s = selectors(jx, jp)?;
    let field = sys.field();
    let (p_lo, p_hi) = (prob.p.lower(), prob.p.upper());

    // g_i(x, p, xh, ph) = f_i(xi, pi) + alpha_i (x - xh) + beta_i (p - ph)
    let g = |i: usize, t: f64, x: &[f64], p: &[f64], xh: &[f64], ph: &[f64], xi: &mut [f64], pi: &mut [f64]| {
        let mut corr = 0.0;
        for j in 0..n {
            xi[j] = if s.x_hat[i][j] { xh[j] } else { x[j] };
            corr += s.alpha[i][j] * (x[j] - xh[j]);
        }
        for k in 0..m {
            pi[k] = if s.p_hat[i][k] { ph[k] } else { p[k] };
            corr += s.beta[i][k] * (p[k] - ph[k]);
        }
        field.eval_component(i, t, xi, pi).map(|v| v + corr)
    };

    let mut y0 = prob.x0.lower().to_vec();
    y0.extend_from_slice(prob.x0.upper());
    let (mut xi, mut pi) = (vec![0.0; n], vec![0.0; m]);
    let tf = prob.tf.expect("validated continuous problem");
    let y = rk4(prob.t0, tf, &y0, prob.steps, |_, t, y, out| {
        let (x, xh) = y.split_at(n);
        for i in 0..n {
            out[i] = g(i, t, x, p_lo, xh, p_hi, &mut xi, &mut pi)?;
            out[n + i] = g(i, t, xh, p_hi, x, p_lo, &mut xi, &mut pi)?;
        }
        Ok(())
    })?;
    let (lower, upper) = y.split_at(n);
    let zero_slopes = s.alpha.iter().flatten().chain(s.beta.iter().flatten()).all(|&a| a == 0.0);
    let notes = format!(
        "one embedded trajectory of dimension {}{}",
        2 * n,
        if zero_slopes { ", sign-stable Jacobian (all slopes zero)" } else { "" }
    );
    finish(Method::CtMixedMono, lower.to_vec(), upper.to_vec(), 1, started, notes)
}
