//! Interval over-approximation of reachable sets for continuous- and
//! discrete-time nonlinear systems.

pub mod error;
pub mod expr;
pub mod flow;
pub mod hub;
pub mod ibox;
pub mod imatrix;
pub mod interval;
pub mod methods;
pub mod sensitivity;
pub mod system;

pub use error::{ExprError, ReachError, Result};
pub use hub::{solve, solve_all, MethodChoice, SolveAllReport, SolverConfig};
pub use ibox::IntervalBox;
pub use imatrix::IntervalMatrix;
pub use interval::Interval;
pub use system::{Method, ReachProblem, ReachResult, SystemModel};
