//! Fixed-step trajectory evaluation and variational equations.

use nalgebra::DMatrix;

use crate::error::{ReachError, Result};
use crate::system::{ReachProblem, SystemModel, TimeKind, VectorField};

/// Input applied along a trajectory.
#[derive(Debug, Clone, Copy)]
pub enum InputSignal<'a> {
    Constant(&'a [f64]),
    /// One input vector per integration step.
    Piecewise(&'a [Vec<f64>]),
}

impl InputSignal<'_> {
    fn at(&self, step: usize) -> &[f64] {
        match self {
            InputSignal::Constant(p) => p,
            InputSignal::Piecewise(ps) => &ps[step.min(ps.len() - 1)],
        }
    }

    fn check(&self, n_p: usize, steps: usize) -> Result<()> {
        match self {
            InputSignal::Constant(p) if p.len() != n_p => Err(ReachError::Dimension(format!(
                "input has length {}, expected {n_p}",
                p.len()
            ))),
            InputSignal::Piecewise(ps) if ps.len() != steps => Err(ReachError::Dimension(format!(
                "piecewise input has {} samples for {steps} steps",
                ps.len()
            ))),
            InputSignal::Piecewise(ps) if ps.iter().any(|p| p.len() != n_p) => {
                Err(ReachError::Dimension(format!("piecewise input samples must have length {n_p}")))
            }
            _ => Ok(()),
        }
    }
}

/// Classical RK4 for `y' = f(k, t, y)` with `steps` equal steps from `t0` to
/// `tf`, where `k` is the index of the current step.
pub(crate) fn rk4<F>(t0: f64, tf: f64, y0: &[f64], steps: usize, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(usize, f64, &[f64], &mut [f64]) -> Result<()>,
{
    let mut y = y0.to_vec();
    if tf == t0 {
        return Ok(y);
    }
    let steps = steps.max(1);
    let n = y.len();
    let h = (tf - t0) / steps as f64;
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        f(k, t, &y, &mut k1)?;
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        f(k, t + 0.5 * h, &tmp, &mut k2)?;
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        f(k, t + 0.5 * h, &tmp, &mut k3)?;
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        f(k, t + h, &tmp, &mut k4)?;
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(ReachError::Divergence {
                time: if k + 1 == steps { tf } else { t + h },
            });
        }
    }
    Ok(y)
}

fn require_continuous(sys: &SystemModel) -> Result<()> {
    match sys.kind() {
        TimeKind::Continuous => Ok(()),
        TimeKind::Discrete => Err(ReachError::InvalidProblem(
            "trajectories are only defined for continuous-time systems".into(),
        )),
    }
}

fn check_horizon(t0: f64, tf: f64, steps: usize) -> Result<()> {
    if !(tf >= t0) || !t0.is_finite() || !tf.is_finite() {
        return Err(ReachError::InvalidProblem(format!("need t0 <= tf, got [{t0}, {tf}]")));
    }
    if steps == 0 {
        return Err(ReachError::InvalidProblem("step count must be >= 1".into()));
    }
    Ok(())
}

/// `Phi(tf; t0, x0, p)` by fixed-step RK4.
pub fn flow(sys: &SystemModel, t0: f64, tf: f64, x0: &[f64], p: InputSignal<'_>, steps: usize) -> Result<Vec<f64>> {
    require_continuous(sys)?;
    flow_of(sys.field(), t0, tf, x0, p, steps)
}

/// Trajectory of an arbitrary field, bypassing the system-kind check.
pub(crate) fn flow_of(
    field: &dyn VectorField,
    t0: f64,
    tf: f64,
    x0: &[f64],
    p: InputSignal<'_>,
    steps: usize,
) -> Result<Vec<f64>> {
    check_horizon(t0, tf, steps)?;
    if x0.len() != field.n_x() {
        return Err(ReachError::Dimension(format!(
            "state has length {}, expected {}",
            x0.len(),
            field.n_x()
        )));
    }
    p.check(field.n_p(), steps)?;
    rk4(t0, tf, x0, steps, |k, t, y, out| field.eval(t, y, p.at(k), out))
}

/// State and sensitivities `S_x = dPhi/dx0`, `S_p = dPhi/dp` at `tf` from the
/// variational equations, integrated on the same RK4 grid as the state.
pub fn flow_with_sensitivities(
    sys: &SystemModel,
    t0: f64,
    tf: f64,
    x0: &[f64],
    p: &[f64],
    steps: usize,
) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>)> {
    require_continuous(sys)?;
    check_horizon(t0, tf, steps)?;
    let field = sys.field();
    let (n, m) = (field.n_x(), field.n_p());
    if x0.len() != n || p.len() != m {
        return Err(ReachError::Dimension(format!(
            "state/input lengths ({}, {}) for (n_x, n_p) = ({n}, {m})",
            x0.len(),
            p.len()
        )));
    }
    if !field.has_jacobian() {
        return Err(ReachError::MissingCapability("Jacobian evaluator".into()));
    }
    // Layout: x (n), S_x column-major (n*n), S_p column-major (n*m).
    let mut y0 = vec![0.0; n + n * n + n * m];
    y0[..n].copy_from_slice(x0);
    for i in 0..n {
        y0[n + i * n + i] = 1.0;
    }
    let mut jx = DMatrix::zeros(n, n);
    let mut jp = DMatrix::zeros(n, m);
    let y = rk4(t0, tf, &y0, steps, |_, t, y, out| {
        let x = &y[..n];
        field.eval(t, x, p, &mut out[..n])?;
        field.jacobian(t, x, p, &mut jx, &mut jp)?;
        let sx = DMatrix::from_column_slice(n, n, &y[n..n + n * n]);
        let sp = DMatrix::from_column_slice(n, m, &y[n + n * n..]);
        let dsx = &jx * sx;
        let dsp = &jx * sp + &jp;
        out[n..n + n * n].copy_from_slice(dsx.as_slice());
        out[n + n * n..].copy_from_slice(dsp.as_slice());
        Ok(())
    })?;
    let sx = DMatrix::from_column_slice(n, n, &y[n..n + n * n]);
    let sp = DMatrix::from_column_slice(n, m, &y[n + n * n..]);
    Ok((y[..n].to_vec(), sx, sp))
}

/// `(S_x, S_p)` at `tf` for a constant input.
pub fn sensitivities(
    sys: &SystemModel,
    t0: f64,
    tf: f64,
    x0: &[f64],
    p: &[f64],
    steps: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    flow_with_sensitivities(sys, t0, tf, x0, p, steps).map(|(_, sx, sp)| (sx, sp))
}

/// Central finite-difference approximation of `(S_x, S_p)`, with step
/// `h * max(1, |v|)` per coordinate `v`.
pub fn finite_difference_sensitivities(
    sys: &SystemModel,
    t0: f64,
    tf: f64,
    x0: &[f64],
    p: &[f64],
    steps: usize,
    h: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, m) = (sys.n_x(), sys.n_p());
    let mut sx = DMatrix::zeros(n, n);
    let mut sp = DMatrix::zeros(n, m);
    let mut xv = x0.to_vec();
    for j in 0..n {
        let d = h * x0[j].abs().max(1.0);
        xv[j] = x0[j] + d;
        let fwd = flow(sys, t0, tf, &xv, InputSignal::Constant(p), steps)?;
        xv[j] = x0[j] - d;
        let bwd = flow(sys, t0, tf, &xv, InputSignal::Constant(p), steps)?;
        xv[j] = x0[j];
        for i in 0..n {
            sx[(i, j)] = (fwd[i] - bwd[i]) / (2.0 * d);
        }
    }
    let mut pv = p.to_vec();
    for k in 0..m {
        let d = h * p[k].abs().max(1.0);
        pv[k] = p[k] + d;
        let fwd = flow(sys, t0, tf, x0, InputSignal::Constant(&pv), steps)?;
        pv[k] = p[k] - d;
        let bwd = flow(sys, t0, tf, x0, InputSignal::Constant(&pv), steps)?;
        pv[k] = p[k];
        for i in 0..n {
            sp[(i, k)] = (fwd[i] - bwd[i]) / (2.0 * d);
        }
    }
    Ok((sx, sp))
}

/// One application of a discrete-time map `x+ = F(t0, x, p)`.
pub fn step_map(sys: &SystemModel, t0: f64, x: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    if sys.kind() != TimeKind::Discrete {
        return Err(ReachError::InvalidProblem("step_map needs a discrete-time system".into()));
    }
    if x.len() != sys.n_x() || p.len() != sys.n_p() {
        return Err(ReachError::Dimension(format!(
            "state/input lengths ({}, {}) for (n_x, n_p) = ({}, {})",
            x.len(),
            p.len(),
            sys.n_x(),
            sys.n_p()
        )));
    }
    let mut out = vec![0.0; x.len()];
    sys.field().eval(t0, x, p, &mut out)?;
    if out.iter().any(|v| !v.is_finite()) {
        return Err(ReachError::Divergence { time: t0 });
    }
    Ok(out)
}

/// Successor of `x0` under constant input `p` for the problem's horizon:
/// the flow for continuous systems, one map step for discrete ones.
pub fn successor(sys: &SystemModel, prob: &ReachProblem, x0: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    match (sys.kind(), prob.tf) {
        (TimeKind::Continuous, Some(tf)) => flow(sys, prob.t0, tf, x0, InputSignal::Constant(p), prob.steps),
        (TimeKind::Discrete, _) => step_map(sys, prob.t0, x0, p),
        (TimeKind::Continuous, None) => Err(ReachError::InvalidProblem(
            "continuous-time problems need a final time".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::FnField;
    use approx::assert_abs_diff_eq;

    fn decay() -> SystemModel {
        SystemModel::continuous(
            FnField::new(1, 1, |_, x, p, out| out[0] = -x[0] + p[0]).with_jacobian(|_, _, _, jx, jp| {
                jx[(0, 0)] = -1.0;
                jp[(0, 0)] = 1.0;
            }),
        )
    }

    fn linear(a: DMatrix<f64>) -> SystemModel {
        let n = a.nrows();
        let a2 = a.clone();
        SystemModel::continuous(
            FnField::new(n, 1, move |_, x, _, out| {
                for i in 0..n {
                    out[i] = (0..n).map(|j| a[(i, j)] * x[j]).sum();
                }
            })
            .with_jacobian(move |_, _, _, jx, jp| {
                jx.copy_from(&a2);
                jp.fill(0.0);
            }),
        )
    }

    fn pendulum() -> SystemModel {
        SystemModel::continuous(
            FnField::new(2, 1, |_, x, p, out| {
                out[0] = x[1];
                out[1] = -x[0].sin() - 0.3 * x[1] + p[0];
            })
            .with_jacobian(|_, x, _, jx, jp| {
                jx[(0, 0)] = 0.0;
                jx[(0, 1)] = 1.0;
                jx[(1, 0)] = -x[0].cos();
                jx[(1, 1)] = -0.3;
                jp[(0, 0)] = 0.0;
                jp[(1, 0)] = 1.0;
            }),
        )
    }

    #[test]
    fn exponential_decay() {
        let x = flow(&decay(), 0.0, 1.0, &[1.0], InputSignal::Constant(&[0.0]), 100).unwrap();
        assert_abs_diff_eq!(x[0], (-1.0f64).exp(), epsilon = 1e-7);
    }

    #[test]
    fn polynomial_is_exact() {
        let sys = SystemModel::continuous(FnField::new(1, 1, |_, _, p, out| out[0] = p[0]));
        let x = flow(&sys, 0.0, 3.0, &[0.0], InputSignal::Constant(&[2.0]), 4).unwrap();
        assert_eq!(x[0], 6.0);
        let x = flow(&sys, 0.0, 3.0, &[0.0], InputSignal::Constant(&[2.0]), 200).unwrap();
        assert_abs_diff_eq!(x[0], 6.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_horizon_returns_initial_state() {
        let x = flow(&decay(), 2.0, 2.0, &[0.7], InputSignal::Constant(&[0.0]), 10).unwrap();
        assert_eq!(x, vec![0.7]);
    }

    #[test]
    fn divergence_reports_time() {
        let sys = SystemModel::continuous(FnField::new(1, 1, |_, x, _, out| out[0] = x[0] * x[0]));
        let err = flow(&sys, 0.0, 2.0, &[10.0], InputSignal::Constant(&[0.0]), 50).unwrap_err();
        assert!(matches!(err, ReachError::Divergence { time } if time > 0.0 && time <= 2.0));
    }

    #[test]
    fn semigroup() {
        let sys = pendulum();
        let p = [0.2];
        let x1 = flow(&sys, 0.0, 1.0, &[1.0, 0.0], InputSignal::Constant(&p), 100).unwrap();
        let x2 = flow(&sys, 1.0, 3.0, &x1, InputSignal::Constant(&p), 200).unwrap();
        let direct = flow(&sys, 0.0, 3.0, &[1.0, 0.0], InputSignal::Constant(&p), 300).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(x2[i], direct[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let sys = pendulum();
        let run = |steps| flow(&sys, 0.0, 4.0, &[1.0, 0.5], InputSignal::Constant(&[0.0]), steps).unwrap();
        let reference = run(400);
        let err = |steps| {
            let x = run(steps);
            (0..2).map(|i| (x[i] - reference[i]).abs()).fold(0.0, f64::max)
        };
        let ratio = err(20) / err(40);
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn piecewise_input() {
        let sys = SystemModel::continuous(FnField::new(1, 1, |_, _, p, out| out[0] = p[0]));
        let signal = vec![vec![1.0], vec![-1.0], vec![2.0]];
        let x = flow(&sys, 0.0, 3.0, &[0.0], InputSignal::Piecewise(&signal), 3).unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-12);
        assert!(flow(&sys, 0.0, 3.0, &[0.0], InputSignal::Piecewise(&signal), 4).is_err());
    }

    #[test]
    fn linear_sensitivity_is_matrix_exponential() {
        let a = DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 0.5, -1.0]);
        let (sx, sp) = sensitivities(&linear(a.clone()), 0.0, 1.5, &[0.3, -0.2], &[0.0], 200).unwrap();
        let reference = (a * 1.5).exp();
        assert!((sx - reference).abs().max() < 1e-6);
        assert_eq!(sp.abs().max(), 0.0);
    }

    #[test]
    fn sensitivities_match_finite_differences() {
        let sys = pendulum();
        let (x0, p) = ([0.8, -0.4], [0.1]);
        let (sx, sp) = sensitivities(&sys, 0.0, 2.0, &x0, &p, 200).unwrap();
        let (fx, fp) = finite_difference_sensitivities(&sys, 0.0, 2.0, &x0, &p, 200, 1e-5).unwrap();
        assert!((&sx - &fx).abs().max() < 1e-6);
        assert!((&sp - &fp).abs().max() < 1e-6);
        let (dx, _) = decay_sens();
        assert_abs_diff_eq!(dx, (-1.0f64).exp(), epsilon = 1e-8);
    }

    fn decay_sens() -> (f64, f64) {
        let (sx, sp) = sensitivities(&decay(), 0.0, 1.0, &[1.0], &[0.0], 200).unwrap();
        (sx[(0, 0)], sp[(0, 0)])
    }

    #[test]
    fn sensitivities_need_a_jacobian() {
        let sys = SystemModel::continuous(FnField::new(1, 1, |_, x, _, out| out[0] = -x[0]));
        assert!(matches!(
            sensitivities(&sys, 0.0, 1.0, &[1.0], &[0.0], 10),
            Err(ReachError::MissingCapability(_))
        ));
    }

    #[test]
    fn discrete_step() {
        let a = [0.5, -0.2, 0.1, 0.3];
        let sys = SystemModel::discrete(FnField::new(2, 2, move |_, x, p, out| {
            out[0] = a[0] * x[0] + a[1] * x[1] + p[0];
            out[1] = a[2] * x[0] + a[3] * x[1] + p[1];
        }));
        let y = step_map(&sys, 0.0, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(y[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(y[1], 0.4, epsilon = 1e-15);
        assert!(step_map(&sys, 0.0, &[1.0], &[0.0, 0.0]).is_err());
        let id = SystemModel::discrete(FnField::new(2, 1, |_, x, _, out| out.copy_from_slice(x)));
        assert_eq!(step_map(&id, 0.0, &[3.0, -1.0], &[0.0]).unwrap(), vec![3.0, -1.0]);
        assert!(flow(&id, 0.0, 1.0, &[0.0, 0.0], InputSignal::Constant(&[0.0]), 1).is_err());
    }
}
