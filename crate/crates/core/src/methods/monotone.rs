use std::time::Instant;

use super::{finish, sign_matrix, MonotoneSigns};
use crate::error::{ReachError, Result};
use crate::flow::{flow, InputSignal};
use crate::imatrix::IntervalMatrix;
use crate::system::{Method, ReachProblem, ReachResult, SystemModel};

fn mix(lo: &[f64], hi: &[f64], flip: &[bool], invert: bool) -> Vec<f64> {
    lo.iter()
        .zip(hi)
        .zip(flip)
        .map(|((&l, &h), &f)| if f ^ invert { h } else { l })
        .collect()
}

/// Reachable box of an orthant-monotone system from two trajectories: the
/// orthant-minimal and orthant-maximal corners of the initial and input
/// boxes. Dimension `i` takes its lower face from the first trajectory when
/// `epsilon[i] = 0` and from the second one otherwise.
pub fn monotone_reach(
    sys: &SystemModel,
    prob: &ReachProblem,
    signs: &MonotoneSigns,
    jx: &IntervalMatrix,
    jp: &IntervalMatrix,
) -> Result<ReachResult> {
    let started = Instant::now();
    prob.validate_for(sys)?;
    if !sys.is_continuous() {
        return Err(ReachError::InvalidProblem("the monotone method needs a continuous-time system".into()));
    }
    let (n, m) = (sys.n_x(), sys.n_p());
    if signs.epsilon.len() != n || signs.delta.len() != m {
        return Err(ReachError::Dimension(format!("orthant bits must have lengths {n} and {m}")));
    }
    if !signs.verify(&sign_matrix(jx), &sign_matrix(jp)) {
        return Err(ReachError::InvalidProblem(
            "orthant bits do not satisfy the sign pattern of the Jacobian bounds".into(),
        ));
    }
    let (xl, xu, pl, pu) = (prob.x0.lower(), prob.x0.upper(), prob.p.lower(), prob.p.upper());
    let tf = prob.tf.expect("validated continuous problem");
    let a = flow(
        sys,
        prob.t0,
        tf,
        &mix(xl, xu, &signs.epsilon, false),
        InputSignal::Constant(&mix(pl, pu, &signs.delta, false)),
        prob.steps,
    )?;
    let b = flow(
        sys,
        prob.t0,
        tf,
        &mix(xl, xu, &signs.epsilon, true),
        InputSignal::Constant(&mix(pl, pu, &signs.delta, true)),
        prob.steps,
    )?;
    let lower = (0..n).map(|i| if signs.epsilon[i] { b[i] } else { a[i] }).collect();
    let upper = (0..n).map(|i| if signs.epsilon[i] { a[i] } else { b[i] }).collect();
    let flipped = signs.epsilon.iter().filter(|&&e| e).count();
    finish(
        Method::Monotone,
        lower,
        upper,
        2,
        started,
        format!("orthant with {flipped} flipped state(s)"),
    )
}
