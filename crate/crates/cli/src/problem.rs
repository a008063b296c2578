//! Versioned JSON problem files.

use std::path::Path;

use boxreach::expr::VectorFieldSpec;
use boxreach::sensitivity::SensitivityBounds;
use boxreach::system::{ContractionData, InputMode};
use boxreach::{IntervalBox, IntervalMatrix, MethodChoice, ReachProblem, SolverConfig, SystemModel};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::traffic::{build_traffic, TrafficParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: u32,
    pub system: SystemSpec,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub capabilities: Capabilities,
    #[serde(default)]
    pub solver: SolverSpec,
}

/// Exactly one of a built-in benchmark or inline expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Builtin(Builtin),
    Inline(InlineSystem),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Builtin {
    Traffic(TrafficParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeSpec {
    #[default]
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineSystem {
    #[serde(default)]
    pub time: TimeSpec,
    pub n_x: usize,
    pub n_p: usize,
    /// One expression per state, over `t`, `x1..`, `p1..`.
    pub f: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jacobian_x: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jacobian_p: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxSpec {
    pub fn to_box(&self, what: &str) -> Result<IntervalBox, CliError> {
        if self.lower.len() != self.upper.len() {
            return Err(CliError::Input(format!(
                "{what}: lower has {} entries but upper has {}",
                self.lower.len(),
                self.upper.len()
            )));
        }
        IntervalBox::new(self.lower.clone(), self.upper.clone()).map_err(|e| CliError::Input(format!("{what}: {e}")))
    }
}

impl From<&IntervalBox> for BoxSpec {
    fn from(b: &IntervalBox) -> Self {
        Self {
            lower: b.lower().to_vec(),
            upper: b.upper().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputModeSpec {
    #[default]
    Constant,
    TimeVarying,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default)]
    pub t0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tf: Option<f64>,
    pub x0: BoxSpec,
    pub p: BoxSpec,
    #[serde(default)]
    pub input_mode: InputModeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixBounds {
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
}

impl MatrixBounds {
    fn to_matrix(&self, what: &str) -> Result<IntervalMatrix, CliError> {
        IntervalMatrix::from_rows(&self.lower, &self.upper).map_err(|e| CliError::Input(format!("{what}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ContractionSpec {
    Matrix(Vec<Vec<f64>>),
    Scalar(f64),
    /// Matrix built from the (declared or derived) Jacobian bounds.
    Derive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JacobianPair {
    pub jx: MatrixBounds,
    pub jp: MatrixBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JacobianSpec {
    /// The literal string `"derive"`: interval evaluation of the Jacobian
    /// expressions over the invariant space.
    Derive(DeriveTag),
    Declared(JacobianPair),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeriveTag {
    Derive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityPair {
    pub sx: MatrixBounds,
    pub sp: MatrixBounds,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Capabilities {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contraction: Option<ContractionSpec>,
    /// Bound `p̃` on the input influence for the growth bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_influence: Option<Vec<f64>>,
    /// Declares `f(t, x, p) = f(t, x) + p`.
    #[serde(default)]
    pub additive_input: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariant_space: Option<BoxSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jacobian_bounds: Option<JacobianSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity_bounds: Option<SensitivityPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    /// `"auto"`, `"all"` or a method name.
    pub method: String,
    pub steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    pub restarts: usize,
    pub seed: u64,
    pub dimension_cap: usize,
    pub max_evals_per_search: usize,
    pub panels: usize,
    pub taylor_order: usize,
    pub self_check_samples: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let c = SolverConfig::default();
        Self {
            method: "auto".into(),
            steps: 200,
            samples: None,
            restarts: c.restarts,
            seed: 0,
            dimension_cap: c.dimension_cap,
            max_evals_per_search: c.max_evals_per_search,
            panels: c.panels,
            taylor_order: c.taylor_order,
            self_check_samples: c.self_check_samples,
        }
    }
}

/// What the solver was asked to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Request {
    One(MethodChoice),
    All,
}

impl Request {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        if s == "all" {
            return Ok(Request::All);
        }
        s.parse().map(Request::One).map_err(|e| CliError::Input(format!("solver.method: {e}")))
    }
}

/// A fully built problem.
pub struct Loaded {
    pub file: ProblemFile,
    pub system: SystemModel,
    pub problem: ReachProblem,
    pub config: SolverConfig,
    pub request: Request,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ProblemFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Schema {
                path: if path.is_empty() { ".".into() } else { path },
                message: e.into_inner().to_string(),
            }
        })?;
        if file.version != SCHEMA_VERSION {
            return Err(CliError::Schema {
                path: "version".into(),
                message: format!("unsupported version {}, expected {SCHEMA_VERSION}", file.version),
            });
        }
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }

    pub fn build(self) -> Result<Loaded, CliError> {
        let mut system = match &self.system {
            SystemSpec::Builtin(Builtin::Traffic(p)) => build_traffic(p)?,
            SystemSpec::Inline(s) => inline_system(s)?,
        };
        let x0 = self.problem.x0.to_box("problem.x0")?;
        let p = self.problem.p.to_box("problem.p")?;
        let mut problem = match (system.is_continuous(), self.problem.tf) {
            (true, Some(tf)) => ReachProblem::continuous(self.problem.t0, tf, x0, p).with_steps(self.solver.steps),
            (true, None) => return Err(CliError::Input("problem.tf is required for continuous-time systems".into())),
            (false, None) => ReachProblem::discrete(self.problem.t0, x0, p),
            (false, Some(_)) => return Err(CliError::Input("problem.tf must be omitted for discrete-time systems".into())),
        };
        if self.problem.input_mode == InputModeSpec::TimeVarying {
            problem = problem.with_input_mode(InputMode::TimeVarying);
        }
        system = apply_capabilities(system, &problem, &self.capabilities)?;
        problem.validate_for(&system)?;
        let s = &self.solver;
        let config = SolverConfig {
            samples: s.samples,
            restarts: s.restarts,
            seed: s.seed,
            dimension_cap: s.dimension_cap,
            panels: s.panels,
            taylor_order: s.taylor_order,
            self_check_samples: s.self_check_samples,
            max_evals_per_search: s.max_evals_per_search,
            ..SolverConfig::default()
        };
        let request = Request::parse(&s.method)?;
        Ok(Loaded {
            file: self,
            system,
            problem,
            config,
            request,
        })
    }
}

fn inline_system(s: &InlineSystem) -> Result<SystemModel, CliError> {
    let mut spec = VectorFieldSpec::parse(s.n_x, s.n_p, &s.f)?;
    match (&s.jacobian_x, &s.jacobian_p) {
        (Some(jx), Some(jp)) => spec = spec.with_jacobians(jx, jp)?,
        (None, None) => {}
        _ => {
            return Err(CliError::Input(
                "system.inline: jacobian_x and jacobian_p must be given together".into(),
            ))
        }
    }
    Ok(match s.time {
        TimeSpec::Continuous => SystemModel::continuous(spec),
        TimeSpec::Discrete => SystemModel::discrete(spec),
    })
}

fn apply_capabilities(mut sys: SystemModel, prob: &ReachProblem, caps: &Capabilities) -> Result<SystemModel, CliError> {
    if caps.additive_input && !sys.additive_input() {
        sys = sys.with_additive_input()?;
    }
    if let Some(b) = &caps.invariant_space {
        sys = sys.with_invariant_space(b.to_box("capabilities.invariant_space")?)?;
    }
    match &caps.jacobian_bounds {
        Some(JacobianSpec::Declared(j)) => {
            sys = sys.with_jacobian_bounds(
                j.jx.to_matrix("capabilities.jacobian_bounds.jx")?,
                j.jp.to_matrix("capabilities.jacobian_bounds.jp")?,
            )?;
        }
        Some(JacobianSpec::Derive(_)) => {
            // Fail early rather than letting every method skip.
            if let Err(e) = jacobian_bounds(&sys, prob) {
                return Err(CliError::Input(format!("capabilities.jacobian_bounds: {e}")));
            }
        }
        None => {}
    }
    if let Some(s) = &caps.sensitivity_bounds {
        let b = SensitivityBounds::user_supplied(
            s.sx.to_matrix("capabilities.sensitivity_bounds.sx")?,
            s.sp.to_matrix("capabilities.sensitivity_bounds.sp")?,
        )?;
        sys = sys.with_sensitivity_bounds(b)?;
    }
    let contraction = match &caps.contraction {
        None => sys.contraction().cloned(),
        Some(ContractionSpec::Matrix(rows)) => {
            let n = rows.len();
            if rows.iter().any(|r| r.len() != n) {
                return Err(CliError::Input("capabilities.contraction.matrix must be square".into()));
            }
            Some(ContractionData::matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j])))
        }
        Some(ContractionSpec::Scalar(c)) => Some(ContractionData::scalar(*c)),
        Some(ContractionSpec::Derive) => {
            let (jx, _) = jacobian_bounds(&sys, prob)
                .map_err(|e| CliError::Input(format!("capabilities.contraction: {e}")))?;
            Some(ContractionData::from_jacobian_bounds(&jx)?)
        }
    };
    if let Some(mut c) = contraction {
        if let Some(pt) = &caps.input_influence {
            c = c.with_input_influence(pt.clone());
        }
        sys = sys.with_contraction(c)?;
    } else if caps.input_influence.is_some() {
        return Err(CliError::Input(
            "capabilities.input_influence needs contraction data".into(),
        ));
    }
    Ok(sys)
}

fn jacobian_bounds(sys: &SystemModel, prob: &ReachProblem) -> Result<(IntervalMatrix, IntervalMatrix), String> {
    match boxreach::hub::available_jacobian_bounds(sys, prob) {
        Some(Ok(b)) => Ok(b),
        Some(Err(e)) => Err(e.to_string()),
        None => Err("no Jacobian expressions, or no invariant space to evaluate them over".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINEAR: &str = r#"{
        "version": 1,
        "system": {"inline": {"n_x": 2, "n_p": 1, "f": ["-x1 + 2*x2", "2*x1 - x2 + p1"]}},
        "problem": {"tf": 1, "x0": {"lower": [0, 0], "upper": [1, 1]}, "p": {"lower": [0], "upper": [0.5]}},
        "capabilities": {"contraction": {"matrix": [[-1, 2], [2, -1]]}, "input_influence": [0, 0.25]}
    }"#;

    #[test]
    fn inline_problem_builds() {
        let l = ProblemFile::from_json(LINEAR).unwrap().build().unwrap();
        assert_eq!(l.system.n_x(), 2);
        assert!(l.system.contraction().is_some());
        assert_eq!(l.request, Request::One(MethodChoice::Auto));
        assert_eq!(l.problem.steps, 200);
    }

    #[test]
    fn round_trips() {
        let f = ProblemFile::from_json(LINEAR).unwrap();
        assert_eq!(ProblemFile::from_json(&f.to_json()).unwrap(), f);
    }

    #[test]
    fn schema_errors_carry_a_path() {
        let bad = LINEAR.replace(r#""tf": 1"#, r#""tf": "one""#);
        match ProblemFile::from_json(&bad) {
            Err(CliError::Schema { path, .. }) => assert_eq!(path, "problem.tf"),
            other => panic!("unexpected {other:?}"),
        }
        let unknown = LINEAR.replace(r#""n_x": 2"#, r#""nx": 2"#);
        assert!(matches!(ProblemFile::from_json(&unknown), Err(CliError::Schema { .. })));
        let version = LINEAR.replace(r#""version": 1"#, r#""version": 7"#);
        assert!(matches!(ProblemFile::from_json(&version), Err(CliError::Schema { path, .. }) if path == "version"));
    }

    #[test]
    fn both_system_kinds_is_rejected() {
        let both = LINEAR.replace(
            r#""system": {"inline""#,
            r#""system": {"builtin": {"name": "traffic"}, "inline""#,
        );
        assert!(ProblemFile::from_json(&both).is_err());
    }

    #[test]
    fn mismatched_box_lengths() {
        let bad = LINEAR.replace(r#""upper": [1, 1]"#, r#""upper": [1]"#);
        let err = ProblemFile::from_json(&bad).unwrap().build().err().unwrap();
        assert!(err.to_string().contains("problem.x0"));
    }

    #[test]
    fn derive_needs_expressions() {
        let bad = LINEAR.replace(r#""contraction": {"matrix": [[-1, 2], [2, -1]]}"#, r#""contraction": "derive""#);
        assert!(ProblemFile::from_json(&bad).unwrap().build().is_err());
    }

    #[test]
    fn traffic_builtin_with_defaults() {
        let text = r#"{
            "version": 1,
            "system": {"builtin": {"name": "traffic", "n_x": 5}},
            "problem": {"tf": 30, "x0": {"lower": [1,1,1,1,1], "upper": [2,2,2,2,2]},
                        "p": {"lower": [1.5,0,0,0,0], "upper": [2,0,0,0,0]}},
            "capabilities": {"jacobian_bounds": "derive"},
            "solver": {"method": "all", "steps": 50}
        }"#;
        let l = ProblemFile::from_json(text).unwrap().build().unwrap();
        assert_eq!(l.system.n_x(), 5);
        assert_eq!(l.request, Request::All);
        let even = text.replace(r#""n_x": 5"#, r#""n_x": 4"#);
        assert!(ProblemFile::from_json(&even).unwrap().build().is_err());
    }
}
