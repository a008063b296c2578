//! Monte-Carlo successor clouds and containment checks.

use boxreach::flow::{flow, successor, InputSignal};
use boxreach::system::InputMode;
use boxreach::{IntervalBox, ReachProblem, ReachResult, SystemModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Constant pieces per sampled input signal in time-varying mode.
pub const SIGNAL_PIECES: usize = 10;

/// Absolute slack below which a sample still counts as contained.
pub const FACE_TOLERANCE: f64 = 1e-9;

fn uniform(rng: &mut ChaCha8Rng, b: &IntervalBox) -> Vec<f64> {
    b.lower()
        .iter()
        .zip(b.upper())
        .map(|(&l, &u)| if l == u { l } else { rng.random_range(l..=u) })
        .collect()
}

/// `samples` successors of random initial states and inputs. Time-varying
/// problems draw piecewise-constant signals with [`SIGNAL_PIECES`] pieces.
pub fn successor_cloud(sys: &SystemModel, prob: &ReachProblem, samples: usize, seed: u64) -> Result<Vec<Vec<f64>>, CliError> {
    prob.validate_for(sys)?;
    if samples == 0 {
        return Err(CliError::Input("at least one sample is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let piecewise = prob.input_mode == InputMode::TimeVarying && sys.is_continuous();
    (0..samples)
        .map(|_| {
            let x0 = uniform(&mut rng, &prob.x0);
            let r = if piecewise {
                let pieces: Vec<Vec<f64>> = (0..SIGNAL_PIECES).map(|_| uniform(&mut rng, &prob.p)).collect();
                let per_step: Vec<Vec<f64>> = (0..prob.steps)
                    .map(|k| pieces[k * SIGNAL_PIECES / prob.steps].clone())
                    .collect();
                let tf = prob.tf.expect("validated continuous problem");
                flow(sys, prob.t0, tf, &x0, InputSignal::Piecewise(&per_step), prob.steps)
            } else {
                let p = uniform(&mut rng, &prob.p);
                successor(sys, prob, &x0, &p)
            };
            r.map_err(CliError::Solver)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Containment {
    pub method: String,
    /// Fraction of samples within [`FACE_TOLERANCE`] of the box.
    pub fraction: f64,
    /// Smallest signed distance of any sample to a face; negative means
    /// a violation.
    pub worst_slack: f64,
    /// Width of the sample hull over width of the box, per dimension;
    /// `None` when a zero-width box face is exceeded.
    pub hull_ratio: Vec<Option<f64>>,
    pub sound: bool,
}

pub fn containment(result: &ReachResult, cloud: &[Vec<f64>]) -> Containment {
    let b = &result.over_approx;
    let slacks: Vec<f64> = cloud.iter().map(|x| b.slack(x)).collect();
    let inside = slacks.iter().filter(|&&s| s >= -FACE_TOLERANCE).count();
    let fraction = if cloud.is_empty() { 1.0 } else { inside as f64 / cloud.len() as f64 };
    let worst_slack = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    let hull_ratio = match IntervalBox::hull_of_points(cloud.iter().map(Vec::as_slice)) {
        Ok(h) => h
            .widths()
            .iter()
            .zip(b.widths())
            .map(|(&hw, bw)| if bw > 0.0 { Some(hw / bw) } else if hw == 0.0 { Some(1.0) } else { None })
            .collect(),
        Err(_) => Vec::new(),
    };
    Containment {
        method: result.method.name().to_string(),
        fraction,
        worst_slack,
        hull_ratio,
        sound: inside == cloud.len(),
    }
}
