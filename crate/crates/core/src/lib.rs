//! RIS reflection design for uplink NOMA sensors with successive interference
//! cancellation, maximizing finite-blocklength weighted-sum and max-min rates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod fblr_rate;
pub mod gradient_opt;
pub mod harness;
pub mod linalg;
pub mod scenario;
pub mod sequential_sdr;
pub mod trace;

pub use error::{Error, Result};
pub use fblr_rate::{Objective, RateBreakdown, RisVector};
pub use scenario::{ChannelSet, Scenario, ScenarioConfig};
pub use trace::SolverTrace;
