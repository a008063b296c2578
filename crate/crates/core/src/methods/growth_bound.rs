use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::finish;
use crate::error::{ReachError, Result};
use crate::flow::{flow, InputSignal};
use crate::system::{ContractionData, ContractionVariant, Method, ReachProblem, ReachResult, SystemModel};

const SIMPSON_PANELS: usize = 200;
const MAX_CONDITION: f64 = 1e8;

/// `int_0^tau exp(C t) q dt`: closed form `C^-1 (exp(C tau) - I) q` for
/// well-conditioned `C`, composite Simpson on `exp(C t) q` otherwise.
pub fn integral_of_exponential_times(c: &DMatrix<f64>, tau: f64, q: &[f64]) -> Vec<f64> {
    let n = c.nrows();
    let q = DVector::from_column_slice(q);
    let sv = c.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if smin > 0.0 && smax / smin < MAX_CONDITION {
        let e = (c * tau).exp() - DMatrix::<f64>::identity(n, n);
        if let Some(v) = c.clone().lu().solve(&(e * &q)) {
            return v.iter().copied().collect();
        }
    }
    let h = tau / SIMPSON_PANELS as f64;
    let step = (c * h).exp();
    let mut v = q.clone();
    let mut acc = v.clone();
    for k in 1..=SIMPSON_PANELS {
        v = &step * v;
        let w = if k == SIMPSON_PANELS {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += &v * w;
    }
    (acc * (h / 3.0)).iter().copied().collect()
}

/// Growth-bound over-approximation `[Phi* - G, Phi* + G]` around the
/// trajectory of the box centers, valid for time-varying inputs.
pub fn growth_bound_reach(
    sys: &SystemModel,
    prob: &ReachProblem,
    contraction: &ContractionData,
) -> Result<ReachResult> {
    let started = Instant::now();
    prob.validate_for(sys)?;
    if !sys.is_continuous() {
        return Err(ReachError::InvalidProblem("the growth bound needs a continuous-time system".into()));
    }
    let tau = prob.horizon();
    let (x_star, x_half) = prob.x0.center_halfwidth();
    let (p_star, p_half) = prob.p.center_halfwidth();
    let input_term = || -> Result<(Vec<f64>, &'static str)> {
        match (&contraction.input_influence, sys.additive_input()) {
            (Some(pt), _) => Ok((pt.clone(), "input influence bound")),
            (None, true) => Ok((p_half.clone(), "additive input")),
            (None, false) => Err(ReachError::MissingCapability(
                "the growth bound needs an additive input or an input influence bound".into(),
            )),
        }
    };

    let (g, notes) = match &contraction.variant {
        ContractionVariant::Matrix(c) => {
            let (q, how) = input_term()?;
            let e = (c * tau).exp();
            let ex = &e * DVector::from_column_slice(&x_half);
            let iq = integral_of_exponential_times(c, tau, &q);
            let g: Vec<f64> = ex.iter().zip(&iq).map(|(a, b)| a + b).collect();
            (g, format!("contraction matrix, {how}"))
        }
        ContractionVariant::Scalar(c) => {
            let (q, how) = input_term()?;
            let growth = (c * tau).exp();
            let integral = if *c == 0.0 { tau } else { (c * tau).exp_m1() / c };
            let g = x_half.iter().zip(&q).map(|(x, q)| growth * x + integral * q).collect();
            (g, format!("logarithmic-norm bound {c}, {how}"))
        }
        ContractionVariant::Custom(gf) => {
            let g = gf(tau, &x_half, &p_half);
            if g.len() != sys.n_x() || g.iter().any(|v| !(*v >= 0.0)) {
                return Err(ReachError::InvalidProblem(format!(
                    "user growth function must return {} nonnegative values",
                    sys.n_x()
                )));
            }
            (g, "user growth function (taken on trust)".to_string())
        }
    };
    let tf = prob.tf.expect("validated continuous problem");
    let center = flow(sys, prob.t0, tf, &x_star, InputSignal::Constant(&p_star), prob.steps)?;
    let lower = center.iter().zip(&g).map(|(c, g)| c - g).collect();
    let upper = center.iter().zip(&g).map(|(c, g)| c + g).collect();
    finish(Method::GrowthBound, lower, upper, 1, started, notes)
}
