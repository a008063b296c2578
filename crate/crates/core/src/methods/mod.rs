//! The over-approximation procedures.

mod ct_mixed;
mod gf2;
mod growth_bound;
mod monotone;
mod sampled;

use std::time::Instant;

pub use ct_mixed::ct_mixed_mono_reach;
pub use gf2::{check_monotonicity, sign_matrix, MonotoneSigns, Sign};
pub use growth_bound::{growth_bound_reach, integral_of_exponential_times};
pub use monotone::monotone_reach;
pub use sampled::{dt_mixed_mono_reach, sd_mixed_mono_reach};
pub(crate) use sampled::sd_reach_as;

use crate::error::{ReachError, Result};
use crate::ibox::IntervalBox;
use crate::system::{Method, ReachResult, Timing};

/// Builds the result box, rejecting inverted or non-finite faces instead of
/// returning them.
fn finish(
    method: Method,
    lower: Vec<f64>,
    upper: Vec<f64>,
    trajectory_evals: usize,
    started: Instant,
    notes: String,
) -> Result<ReachResult> {
    if let Some(i) = (0..lower.len()).find(|&i| !lower[i].is_finite() || !upper[i].is_finite()) {
        return Err(ReachError::Soundness(format!(
            "{method}: non-finite bound in dimension {i} ([{}, {}])",
            lower[i], upper[i]
        )));
    }
    if let Some(i) = (0..lower.len()).find(|&i| lower[i] > upper[i]) {
        return Err(ReachError::Soundness(format!(
            "{method}: inverted interval in dimension {i} ([{}, {}]); the capability data \
             (Jacobian or sensitivity bounds) are probably invalid",
            lower[i], upper[i]
        )));
    }
    Ok(ReachResult {
        over_approx: IntervalBox::new(lower, upper)?,
        method,
        trajectory_evals,
        timing: Timing {
            bounds: 0.0,
            reach: started.elapsed().as_secs_f64(),
        },
        notes,
    })
}
