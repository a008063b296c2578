//! Orchestration behind the CLI verbs.

use std::path::Path;

use boxreach::hub::SolveAllReport;
use boxreach::{solve, solve_all, IntervalBox, MethodChoice, ReachProblem, SolverConfig, SystemModel};
use log::info;

use crate::error::CliError;
use crate::problem::{Loaded, Request};
use crate::report::{
    boxes_csv, cloud_csv, to_json, write_atomic, BoxRecord, ResultFile, SkipRecord, TimingFile, TimingRecord,
    Validation, RESULT_VERSION,
};
use crate::traffic::{build_traffic, TrafficParams};
use crate::validate::{containment, successor_cloud};

fn request_name(r: Request) -> String {
    match r {
        Request::All => "all".into(),
        Request::One(c) => c.to_string(),
    }
}

/// Runs one method (auto or explicit) or all applicable ones. A failing
/// single method is an error; with `All`, failures are recorded.
pub fn execute(sys: &SystemModel, prob: &ReachProblem, request: Request, cfg: &SolverConfig) -> Result<SolveAllReport, CliError> {
    match request {
        Request::All => solve_all(sys, prob, cfg).map_err(CliError::Solver),
        Request::One(choice) => {
            let r = solve(sys, prob, choice, cfg).map_err(CliError::Solver)?;
            Ok(SolveAllReport {
                results: vec![r],
                skipped: Vec::new(),
            })
        }
    }
}

pub struct Outcome {
    pub report: SolveAllReport,
    pub result: ResultFile,
    /// Some attempted method failed, or a validated box missed samples.
    pub failed: bool,
}

fn result_file(n_x: usize, request: Request, report: &SolveAllReport) -> ResultFile {
    ResultFile {
        version: RESULT_VERSION,
        n_x,
        request: request_name(request),
        results: report.results.iter().map(BoxRecord::from).collect(),
        skipped: report.skipped.iter().map(SkipRecord::from).collect(),
        validation: None,
    }
}

fn write_all(out: &Path, outcome: &Outcome, cloud: Option<&[Vec<f64>]>) -> Result<(), CliError> {
    write_atomic(out, "result.json", &to_json(&outcome.result))?;
    let timing = TimingFile {
        version: RESULT_VERSION,
        methods: outcome.report.results.iter().map(TimingRecord::from).collect(),
    };
    write_atomic(out, "timing.json", &to_json(&timing))?;
    write_atomic(out, "boxes.csv", &boxes_csv(&outcome.report.results))?;
    if let Some(c) = cloud {
        write_atomic(out, "cloud.csv", &cloud_csv(c))?;
    }
    Ok(())
}

/// `reach`: solve and write `result.json`, `timing.json`, `boxes.csv` and,
/// when `cloud` is given as `(samples, seed)`, `cloud.csv`.
pub fn reach(loaded: &Loaded, out: Option<&Path>, cloud: Option<(usize, u64)>) -> Result<Outcome, CliError> {
    let report = execute(&loaded.system, &loaded.problem, loaded.request, &loaded.config)?;
    let failed = report.skipped.iter().any(|s| s.failed);
    let outcome = Outcome {
        result: result_file(loaded.system.n_x(), loaded.request, &report),
        report,
        failed,
    };
    let samples = cloud
        .map(|(n, seed)| successor_cloud(&loaded.system, &loaded.problem, n, seed))
        .transpose()?;
    if let Some(dir) = out {
        write_all(dir, &outcome, samples.as_deref())?;
        info!("wrote artifacts to {}", dir.display());
    }
    Ok(outcome)
}

/// `validate`: solve, draw a successor cloud and report containment for
/// every returned box. Artifacts are written before any soundness verdict.
pub fn validate(loaded: &Loaded, samples: usize, seed: u64, out: Option<&Path>) -> Result<Outcome, CliError> {
    let report = execute(&loaded.system, &loaded.problem, loaded.request, &loaded.config)?;
    let cloud = successor_cloud(&loaded.system, &loaded.problem, samples, seed)?;
    let methods: Vec<_> = report.results.iter().map(|r| containment(r, &cloud)).collect();
    let failed = report.skipped.iter().any(|s| s.failed) || methods.iter().any(|m| !m.sound);
    let mut result = result_file(loaded.system.n_x(), loaded.request, &report);
    result.validation = Some(Validation { samples, seed, methods });
    let outcome = Outcome { report, result, failed };
    if let Some(dir) = out {
        write_all(dir, &outcome, Some(&cloud))?;
    }
    Ok(outcome)
}

/// Traffic benchmark: the 3-link diverge with its reference initial box,
/// or `[100, 200]^n` for larger networks.
pub fn traffic_benchmark(n: usize, steps: usize) -> Result<(SystemModel, ReachProblem), CliError> {
    let params = TrafficParams::with_links(n);
    let sys = build_traffic(&params)?;
    let x0 = if n == 3 {
        IntervalBox::new(vec![150.0, 180.0, 100.0], vec![200.0, 300.0, 220.0])?
    } else {
        IntervalBox::uniform(n, 100.0, 200.0)?
    };
    let prob = ReachProblem::continuous(0.0, params.period, x0, params.input_box()?).with_steps(steps);
    Ok((sys, prob))
}

pub fn bench_table(report: &SolveAllReport) -> String {
    let mut s = format!(
        "{:<18} {:>12} {:>12} {:>12} {:>6}\n",
        "method", "bounds [s]", "reach [s]", "total [s]", "evals"
    );
    for r in &report.results {
        s.push_str(&format!(
            "{:<18} {:>12.4} {:>12.4} {:>12.4} {:>6}\n",
            r.method.name(),
            r.timing.bounds,
            r.timing.reach,
            r.timing.total(),
            r.trajectory_evals
        ));
    }
    for k in &report.skipped {
        s.push_str(&format!("{:<18} skipped: {}\n", k.method.name(), k.reason));
    }
    s
}

pub fn bench_traffic(n: usize, steps: usize, request: Request, out: Option<&Path>) -> Result<Outcome, CliError> {
    let (sys, prob) = traffic_benchmark(n, steps)?;
    let cfg = SolverConfig::default();
    let report = execute(&sys, &prob, request, &cfg)?;
    let failed = report.skipped.iter().any(|s| s.failed);
    let outcome = Outcome {
        result: result_file(n, request, &report),
        report,
        failed,
    };
    if let Some(dir) = out {
        write_all(dir, &outcome, None)?;
    }
    Ok(outcome)
}

impl Default for Request {
    fn default() -> Self {
        Request::One(MethodChoice::Auto)
    }
}
