use nalgebra::DMatrix;

use super::Expr;
use crate::error::{ExprError, ReachError, Result};
use crate::ibox::IntervalBox;
use crate::imatrix::IntervalMatrix;
use crate::interval::Interval;
use crate::system::VectorField;

/// Textual definition of a vector field `f(t, x, p)` (or map `F`), with
/// optional user-supplied Jacobian expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldSpec {
    n_x: usize,
    n_p: usize,
    components: Vec<Expr>,
    jacobian_x: Option<Vec<Vec<Expr>>>,
    jacobian_p: Option<Vec<Vec<Expr>>>,
}

fn parse_matrix<S: AsRef<str>>(
    rows: &[Vec<S>],
    shape: (usize, usize),
    n_x: usize,
    n_p: usize,
    what: &str,
) -> Result<Vec<Vec<Expr>>> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(ReachError::Dimension(format!(
            "{what} must be {}x{}",
            shape.0, shape.1
        )));
    }
    rows.iter()
        .map(|r| {
            r.iter()
                .map(|s| Expr::parse_with_dims(s.as_ref(), n_x, n_p).map_err(ReachError::from))
                .collect()
        })
        .collect()
}

impl VectorFieldSpec {
    pub fn parse<S: AsRef<str>>(n_x: usize, n_p: usize, components: &[S]) -> Result<Self> {
        if n_x == 0 {
            return Err(ReachError::Dimension("state dimension must be >= 1".into()));
        }
        if components.len() != n_x {
            return Err(ReachError::Dimension(format!(
                "expected {n_x} components, found {}",
                components.len()
            )));
        }
        let components = components
            .iter()
            .map(|s| Expr::parse_with_dims(s.as_ref(), n_x, n_p))
            .collect::<Result<_, ExprError>>()?;
        Ok(Self {
            n_x,
            n_p,
            components,
            jacobian_x: None,
            jacobian_p: None,
        })
    }

    /// Attaches Jacobian expressions, `jx` of shape n_x x n_x and `jp` of
    /// shape n_x x n_p.
    pub fn with_jacobians<S: AsRef<str>>(mut self, jx: &[Vec<S>], jp: &[Vec<S>]) -> Result<Self> {
        self.jacobian_x = Some(parse_matrix(jx, (self.n_x, self.n_x), self.n_x, self.n_p, "jacobian_x")?);
        self.jacobian_p = Some(parse_matrix(jp, (self.n_x, self.n_p), self.n_x, self.n_p, "jacobian_p")?);
        Ok(self)
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn has_jacobians(&self) -> bool {
        self.jacobian_x.is_some() && self.jacobian_p.is_some()
    }

    fn jacobian_exprs(&self) -> Result<(&Vec<Vec<Expr>>, &Vec<Vec<Expr>>)> {
        match (&self.jacobian_x, &self.jacobian_p) {
            (Some(jx), Some(jp)) => Ok((jx, jp)),
            _ => Err(ReachError::MissingCapability("Jacobian expressions".into())),
        }
    }
}

/// Entrywise natural interval extension of the Jacobian expressions over
/// `t_range x x x p`.
pub fn jacobian_bounds(
    spec: &VectorFieldSpec,
    t_range: Interval,
    x: &IntervalBox,
    p: &IntervalBox,
) -> Result<(IntervalMatrix, IntervalMatrix)> {
    let (jx, jp) = spec.jacobian_exprs()?;
    if x.dim() != spec.n_x || p.dim() != spec.n_p {
        return Err(ReachError::Dimension(format!(
            "boxes of dimension ({}, {}) for a field with (n_x, n_p) = ({}, {})",
            x.dim(),
            p.dim(),
            spec.n_x,
            spec.n_p
        )));
    }
    let (xi, pi) = (x.intervals(), p.intervals());
    let eval = |rows: &Vec<Vec<Expr>>, cols: usize| -> Result<IntervalMatrix> {
        let mut m = IntervalMatrix::zeros(spec.n_x, cols);
        for (i, row) in rows.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                if !e.is_zero() {
                    m.set(i, j, e.eval_interval(t_range, &xi, &pi)?);
                }
            }
        }
        Ok(m)
    };
    Ok((eval(jx, spec.n_x)?, eval(jp, spec.n_p)?))
}

impl VectorField for VectorFieldSpec {
    fn n_x(&self) -> usize {
        self.n_x
    }

    fn n_p(&self) -> usize {
        self.n_p
    }

    fn eval(&self, t: f64, x: &[f64], p: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, e) in out.iter_mut().zip(&self.components) {
            *o = e.eval(t, x, p)?;
        }
        Ok(())
    }

    fn eval_component(&self, i: usize, t: f64, x: &[f64], p: &[f64]) -> Result<f64> {
        Ok(self.components[i].eval(t, x, p)?)
    }

    fn has_jacobian(&self) -> bool {
        self.has_jacobians()
    }

    fn jacobian(&self, t: f64, x: &[f64], p: &[f64], jx: &mut DMatrix<f64>, jp: &mut DMatrix<f64>) -> Result<()> {
        let (ex, ep) = self.jacobian_exprs()?;
        for i in 0..self.n_x {
            for (j, e) in ex[i].iter().enumerate() {
                jx[(i, j)] = if e.is_zero() { 0.0 } else { e.eval(t, x, p)? };
            }
            for (k, e) in ep[i].iter().enumerate() {
                jp[(i, k)] = if e.is_zero() { 0.0 } else { e.eval(t, x, p)? };
            }
        }
        Ok(())
    }

    fn jacobian_bounds(
        &self,
        t: Interval,
        x: &IntervalBox,
        p: &IntervalBox,
    ) -> Option<Result<(IntervalMatrix, IntervalMatrix)>> {
        self.has_jacobians().then(|| jacobian_bounds(self, t, x, p))
    }
}
