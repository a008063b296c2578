//! System models, reachability problems and results.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{ReachError, Result};
use crate::ibox::IntervalBox;
use crate::imatrix::IntervalMatrix;
use crate::interval::Interval;
use crate::sensitivity::SensitivityBounds;

/// Default number of fixed Runge-Kutta steps per reachability horizon.
pub const DEFAULT_STEPS: usize = 200;

/// A vector field `f(t, x, p)` or a map `F(t, x, p)`.
pub trait VectorField: Send + Sync {
    fn n_x(&self) -> usize;
    fn n_p(&self) -> usize;

    fn eval(&self, t: f64, x: &[f64], p: &[f64], out: &mut [f64]) -> Result<()>;

    /// Single component `f_i`. Fields that can evaluate one component
    /// cheaply should override this.
    fn eval_component(&self, i: usize, t: f64, x: &[f64], p: &[f64]) -> Result<f64> {
        let mut out = vec![0.0; self.n_x()];
        self.eval(t, x, p, &mut out)?;
        Ok(out[i])
    }

    /// Whether [`VectorField::jacobian`] is available.
    fn has_jacobian(&self) -> bool {
        false
    }

    /// Point Jacobians `df/dx` (n_x x n_x) and `df/dp` (n_x x n_p).
    fn jacobian(&self, _t: f64, _x: &[f64], _p: &[f64], _jx: &mut DMatrix<f64>, _jp: &mut DMatrix<f64>) -> Result<()> {
        Err(ReachError::MissingCapability("Jacobian evaluator".into()))
    }

    /// Enclosure of the Jacobians over a time interval and state/input boxes,
    /// when the field can produce one.
    fn jacobian_bounds(
        &self,
        _t: Interval,
        _x: &IntervalBox,
        _p: &IntervalBox,
    ) -> Option<Result<(IntervalMatrix, IntervalMatrix)>> {
        None
    }
}

type FieldFn = dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync;
type JacobianFn = dyn Fn(f64, &[f64], &[f64], &mut DMatrix<f64>, &mut DMatrix<f64>) + Send + Sync;

/// Vector field backed by closures.
#[derive(Clone)]
pub struct FnField {
    n_x: usize,
    n_p: usize,
    f: Arc<FieldFn>,
    jacobian: Option<Arc<JacobianFn>>,
}

impl FnField {
    pub fn new(n_x: usize, n_p: usize, f: impl Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Self {
            n_x,
            n_p,
            f: Arc::new(f),
            jacobian: None,
        }
    }

    pub fn with_jacobian(
        mut self,
        j: impl Fn(f64, &[f64], &[f64], &mut DMatrix<f64>, &mut DMatrix<f64>) + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(j));
        self
    }
}

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField")
            .field("n_x", &self.n_x)
            .field("n_p", &self.n_p)
            .field("jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl VectorField for FnField {
    fn n_x(&self) -> usize {
        self.n_x
    }

    fn n_p(&self) -> usize {
        self.n_p
    }

    fn eval(&self, t: f64, x: &[f64], p: &[f64], out: &mut [f64]) -> Result<()> {
        (self.f)(t, x, p, out);
        Ok(())
    }

    fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    fn jacobian(&self, t: f64, x: &[f64], p: &[f64], jx: &mut DMatrix<f64>, jp: &mut DMatrix<f64>) -> Result<()> {
        match &self.jacobian {
            Some(j) => {
                j(t, x, p, jx, jp);
                Ok(())
            }
            None => Err(ReachError::MissingCapability("Jacobian evaluator".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeKind {
    Continuous,
    Discrete,
}

/// User growth-bound function `G(tau, [x], [p])`, taken on trust to be
/// monotone and to bound trajectory deviations.
pub type CustomGrowthFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum ContractionVariant {
    /// Componentwise contraction matrix: `C_ii >= J_ii`, `C_ij >= |J_ij|`.
    Matrix(DMatrix<f64>),
    /// Upper bound on the logarithmic norm of the state Jacobian.
    Scalar(f64),
    Custom(CustomGrowthFn),
}

impl fmt::Debug for ContractionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Matrix(m) => f.debug_tuple("Matrix").field(m).finish(),
            Self::Scalar(c) => f.debug_tuple("Scalar").field(c).finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContractionData {
    pub variant: ContractionVariant,
    /// Bound `p~ >= |f(t,x,p) - f(t,x,p*)|` for fields without additive input.
    pub input_influence: Option<Vec<f64>>,
}

impl ContractionData {
    pub fn matrix(c: DMatrix<f64>) -> Self {
        Self {
            variant: ContractionVariant::Matrix(c),
            input_influence: None,
        }
    }

    pub fn scalar(c: f64) -> Self {
        Self {
            variant: ContractionVariant::Scalar(c),
            input_influence: None,
        }
    }

    pub fn custom(g: impl Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self {
            variant: ContractionVariant::Custom(Arc::new(g)),
            input_influence: None,
        }
    }

    pub fn with_input_influence(mut self, p_tilde: Vec<f64>) -> Self {
        self.input_influence = Some(p_tilde);
        self
    }

    /// Smallest contraction matrix compatible with the given state Jacobian
    /// bounds: upper bound on the diagonal, magnitude elsewhere.
    pub fn from_jacobian_bounds(jx: &IntervalMatrix) -> Result<Self> {
        let (n, m) = jx.shape();
        if n != m {
            return Err(ReachError::NotSquare { rows: n, cols: m });
        }
        let mut c = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let e = jx.get(i, j);
                let v = if i == j { e.hi } else { e.mag() };
                if !v.is_finite() {
                    return Err(ReachError::InfiniteEntry { row: i, col: j });
                }
                c[(i, j)] = v;
            }
        }
        Ok(Self::matrix(c))
    }

    fn validate(&self, n_x: usize) -> Result<()> {
        if let ContractionVariant::Matrix(c) = &self.variant {
            if c.shape() != (n_x, n_x) {
                return Err(ReachError::Dimension(format!(
                    "contraction matrix must be {n_x}x{n_x}, got {:?}",
                    c.shape()
                )));
            }
            for i in 0..n_x {
                for j in 0..n_x {
                    if !c[(i, j)].is_finite() || (i != j && c[(i, j)] < 0.0) {
                        return Err(ReachError::InvalidProblem(format!(
                            "contraction matrix entry ({i}, {j}) = {} must be finite and, off the diagonal, >= 0",
                            c[(i, j)]
                        )));
                    }
                }
            }
        }
        if let ContractionVariant::Scalar(c) = &self.variant {
            if !c.is_finite() {
                return Err(ReachError::InvalidProblem("contraction factor must be finite".into()));
            }
        }
        if let Some(pt) = &self.input_influence {
            if pt.len() != n_x {
                return Err(ReachError::Dimension(format!(
                    "input influence bound must have length {n_x}"
                )));
            }
            if pt.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(ReachError::InvalidProblem(
                    "input influence bound must be finite and >= 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Declared Jacobian bounds `J_x in jx`, `J_p in jp`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBounds {
    pub jx: IntervalMatrix,
    pub jp: IntervalMatrix,
}

/// A continuous- or discrete-time system together with whatever optional
/// information the reachability methods can exploit.
#[derive(Clone)]
pub struct SystemModel {
    kind: TimeKind,
    field: Arc<dyn VectorField>,
    contraction: Option<ContractionData>,
    jacobian_bounds: Option<JacobianBounds>,
    sensitivity_bounds: Option<SensitivityBounds>,
    additive_input: bool,
    invariant_space: Option<IntervalBox>,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("kind", &self.kind)
            .field("n_x", &self.n_x())
            .field("n_p", &self.n_p())
            .field("contraction", &self.contraction)
            .field("jacobian_bounds", &self.jacobian_bounds.is_some())
            .field("sensitivity_bounds", &self.sensitivity_bounds.is_some())
            .field("additive_input", &self.additive_input)
            .field("invariant_space", &self.invariant_space)
            .finish()
    }
}

impl SystemModel {
    pub fn continuous(field: impl VectorField + 'static) -> Self {
        Self::with_kind(TimeKind::Continuous, Arc::new(field))
    }

    pub fn discrete(field: impl VectorField + 'static) -> Self {
        Self::with_kind(TimeKind::Discrete, Arc::new(field))
    }

    pub fn with_kind(kind: TimeKind, field: Arc<dyn VectorField>) -> Self {
        Self {
            kind,
            field,
            contraction: None,
            jacobian_bounds: None,
            sensitivity_bounds: None,
            additive_input: false,
            invariant_space: None,
        }
    }

    pub fn with_contraction(mut self, c: ContractionData) -> Result<Self> {
        c.validate(self.n_x())?;
        self.contraction = Some(c);
        Ok(self)
    }

    pub fn with_jacobian_bounds(mut self, jx: IntervalMatrix, jp: IntervalMatrix) -> Result<Self> {
        let (n, m) = (self.n_x(), self.n_p());
        if jx.shape() != (n, n) || jp.shape() != (n, m) {
            return Err(ReachError::Dimension(format!(
                "Jacobian bounds must be {n}x{n} and {n}x{m}"
            )));
        }
        self.jacobian_bounds = Some(JacobianBounds { jx, jp });
        Ok(self)
    }

    pub fn with_sensitivity_bounds(mut self, s: SensitivityBounds) -> Result<Self> {
        let (n, m) = (self.n_x(), self.n_p());
        if s.sx.shape() != (n, n) || s.sp.shape() != (n, m) {
            return Err(ReachError::Dimension(format!(
                "sensitivity bounds must be {n}x{n} and {n}x{m}"
            )));
        }
        self.sensitivity_bounds = Some(s);
        Ok(self)
    }

    /// Declares `f(t, x, p) = f(t, x, 0) + p`.
    pub fn with_additive_input(mut self) -> Result<Self> {
        if self.kind != TimeKind::Continuous {
            return Err(ReachError::InvalidProblem(
                "additive input is only defined for continuous-time systems".into(),
            ));
        }
        if self.n_p() != self.n_x() {
            return Err(ReachError::Dimension(format!(
                "additive input needs n_p = n_x, got n_p = {} and n_x = {}",
                self.n_p(),
                self.n_x()
            )));
        }
        self.additive_input = true;
        Ok(self)
    }

    /// The invariant state set over which Jacobian bounds may be derived.
    pub fn with_invariant_space(mut self, x: IntervalBox) -> Result<Self> {
        if x.dim() != self.n_x() {
            return Err(ReachError::Dimension("invariant space has the wrong dimension".into()));
        }
        self.invariant_space = Some(x);
        Ok(self)
    }

    pub fn kind(&self) -> TimeKind {
        self.kind
    }

    pub fn is_continuous(&self) -> bool {
        self.kind == TimeKind::Continuous
    }

    pub fn n_x(&self) -> usize {
        self.field.n_x()
    }

    pub fn n_p(&self) -> usize {
        self.field.n_p()
    }

    pub fn field(&self) -> &dyn VectorField {
        self.field.as_ref()
    }

    pub fn contraction(&self) -> Option<&ContractionData> {
        self.contraction.as_ref()
    }

    pub fn declared_jacobian_bounds(&self) -> Option<&JacobianBounds> {
        self.jacobian_bounds.as_ref()
    }

    pub fn sensitivity_bounds(&self) -> Option<&SensitivityBounds> {
        self.sensitivity_bounds.as_ref()
    }

    pub fn additive_input(&self) -> bool {
        self.additive_input
    }

    pub fn invariant_space(&self) -> Option<&IntervalBox> {
        self.invariant_space.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    /// Any measurable signal with values in the input box.
    TimeVarying,
    /// A single constant value from the input box over the whole horizon.
    Constant,
}

/// Initial time, optional final time (continuous systems only), initial
/// state box and input box.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachProblem {
    pub t0: f64,
    pub tf: Option<f64>,
    pub x0: IntervalBox,
    pub p: IntervalBox,
    pub input_mode: InputMode,
    /// Fixed Runge-Kutta steps over `[t0, tf]`.
    pub steps: usize,
}

impl ReachProblem {
    pub fn continuous(t0: f64, tf: f64, x0: IntervalBox, p: IntervalBox) -> Self {
        Self {
            t0,
            tf: Some(tf),
            x0,
            p,
            input_mode: InputMode::Constant,
            steps: DEFAULT_STEPS,
        }
    }

    pub fn discrete(t0: f64, x0: IntervalBox, p: IntervalBox) -> Self {
        Self {
            t0,
            tf: None,
            x0,
            p,
            input_mode: InputMode::Constant,
            steps: 1,
        }
    }

    pub fn with_input_mode(mut self, mode: InputMode) -> Self {
        self.input_mode = mode;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    /// `tf - t0`, zero for discrete problems.
    pub fn horizon(&self) -> f64 {
        self.tf.map_or(0.0, |tf| tf - self.t0)
    }

    pub fn validate_for(&self, sys: &SystemModel) -> Result<()> {
        if self.x0.dim() != sys.n_x() {
            return Err(ReachError::Dimension(format!(
                "initial box has dimension {}, system has n_x = {}",
                self.x0.dim(),
                sys.n_x()
            )));
        }
        if self.p.dim() != sys.n_p() {
            return Err(ReachError::Dimension(format!(
                "input box has dimension {}, system has n_p = {}",
                self.p.dim(),
                sys.n_p()
            )));
        }
        if !self.x0.is_finite() || !self.p.is_finite() {
            return Err(ReachError::InvalidProblem("initial and input boxes must be bounded".into()));
        }
        match (sys.kind(), self.tf) {
            (TimeKind::Continuous, Some(tf)) => {
                if !(tf > self.t0) {
                    return Err(ReachError::InvalidProblem(format!(
                        "final time {tf} must exceed initial time {}",
                        self.t0
                    )));
                }
                if self.steps == 0 {
                    return Err(ReachError::InvalidProblem("step count must be >= 1".into()));
                }
            }
            (TimeKind::Continuous, None) => {
                return Err(ReachError::InvalidProblem(
                    "continuous-time problems need a final time".into(),
                ))
            }
            (TimeKind::Discrete, Some(_)) => {
                return Err(ReachError::InvalidProblem(
                    "discrete-time problems take no final time".into(),
                ))
            }
            (TimeKind::Discrete, None) => {}
        }
        Ok(())
    }
}

/// Over-approximation methods, in the order the dispatcher considers them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    GrowthBound,
    CtMixedMono,
    Monotone,
    /// Sampled-data mixed-monotonicity with user-supplied sensitivity bounds.
    SdMixedMono,
    SdMixedMonoIa,
    SdMixedMonoSf,
    DtMixedMono,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::GrowthBound,
        Method::CtMixedMono,
        Method::Monotone,
        Method::SdMixedMono,
        Method::SdMixedMonoIa,
        Method::SdMixedMonoSf,
        Method::DtMixedMono,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::GrowthBound => "growth_bound",
            Method::CtMixedMono => "ct_mixed_mono",
            Method::Monotone => "monotone",
            Method::SdMixedMono => "sd_mixed_mono",
            Method::SdMixedMonoIa => "sd_mixed_mono_ia",
            Method::SdMixedMonoSf => "sd_mixed_mono_sf",
            Method::DtMixedMono => "dt_mixed_mono",
        }
    }

    pub fn is_continuous(self) -> bool {
        self != Method::DtMixedMono
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = ReachError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| ReachError::InvalidProblem(format!("unknown method `{s}`")))
    }
}

/// Wall-clock seconds spent computing capability data (Jacobian or
/// sensitivity bounds) versus the reachability step itself.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timing {
    pub bounds: f64,
    pub reach: f64,
}

impl Timing {
    pub fn total(&self) -> f64 {
        self.bounds + self.reach
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachResult {
    pub over_approx: IntervalBox,
    pub method: Method,
    /// Successor evaluations: trajectories for continuous methods (one
    /// embedded trajectory for CT mixed-monotonicity), map evaluations for
    /// the discrete method.
    pub trajectory_evals: usize,
    pub timing: Timing,
    pub notes: String,
}

impl ReachResult {
    pub fn wall_time(&self) -> f64 {
        self.timing.total()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> IntervalBox {
        IntervalBox::uniform(n, 0.0, 1.0).unwrap()
    }

    fn linear2() -> SystemModel {
        SystemModel::continuous(FnField::new(2, 2, |_, x, p, out| {
            out[0] = -x[0] + p[0];
            out[1] = -x[1] + p[1];
        }))
    }

    #[test]
    fn additive_input_needs_matching_dimensions() {
        assert!(linear2().with_additive_input().is_ok());
        let narrow = SystemModel::continuous(FnField::new(2, 1, |_, _, _, _| {}));
        assert!(narrow.with_additive_input().is_err());
        let discrete = SystemModel::discrete(FnField::new(2, 2, |_, _, _, _| {}));
        assert!(discrete.with_additive_input().is_err());
    }

    #[test]
    fn contraction_matrix_is_validated() {
        let bad = DMatrix::from_row_slice(2, 2, &[-1.0, -0.5, 0.0, -1.0]);
        assert!(linear2().with_contraction(ContractionData::matrix(bad)).is_err());
        let good = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -1.0]);
        assert!(linear2().with_contraction(ContractionData::matrix(good.clone())).is_ok());
        let neg_pt = ContractionData::matrix(good).with_input_influence(vec![1.0, -1.0]);
        assert!(linear2().with_contraction(neg_pt).is_err());
    }

    #[test]
    fn contraction_from_jacobian_bounds() {
        let jx = IntervalMatrix::from_rows(&[vec![-2.0, -1.0], vec![0.5, -3.0]], &[vec![-1.0, 0.5], vec![2.0, -1.5]])
            .unwrap();
        let c = ContractionData::from_jacobian_bounds(&jx).unwrap();
        match c.variant {
            ContractionVariant::Matrix(m) => {
                assert_eq!(m, DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -1.5]))
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn problem_validation() {
        let sys = linear2();
        assert!(ReachProblem::continuous(0.0, 1.0, unit(2), unit(2)).validate_for(&sys).is_ok());
        assert!(ReachProblem::continuous(1.0, 1.0, unit(2), unit(2)).validate_for(&sys).is_err());
        assert!(ReachProblem::continuous(0.0, 1.0, unit(3), unit(2)).validate_for(&sys).is_err());
        assert!(ReachProblem::discrete(0.0, unit(2), unit(2)).validate_for(&sys).is_err());
        let dsys = SystemModel::discrete(FnField::new(2, 2, |_, _, _, _| {}));
        assert!(ReachProblem::discrete(0.0, unit(2), unit(2)).validate_for(&dsys).is_ok());
        assert!(ReachProblem::continuous(0.0, 1.0, unit(2), unit(2)).validate_for(&dsys).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("bogus".parse::<Method>().is_err());
    }
}
