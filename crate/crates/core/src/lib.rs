//! Exact completion-time guarantees for SI information spread over
//! opportunistic networks with group-structured contact rates.
//!
//! The spread of one piece of information is modelled as a counting Markov
//! chain over per-group infected counts. Truncating the chain at the target
//! penetration `ceil(alpha N)` turns the completion time `T_alpha` into a
//! phase-type absorption time, whose distribution, quantiles (guaranteed
//! times) and moments are computed exactly by [`analysis`].
//!
//! - [`model`]: network specification and effective rates
//! - [`chain`]: state space and upper-triangular subgenerator
//! - [`analysis`]: CDF, guaranteed time, moments, decay rate, planning
//! - [`closedform`]: closed-form oracles for homogeneous and non-cooperative models
//! - [`hetero`]: two-community heterogeneity analysis
//! - [`sim`]: Monte Carlo simulation and KS comparison
//! - [`trace`]: contact-trace statistics, rate estimation, synthetic traces
//! - [`contribution`]: per-group node contribution ratios

// NaN must fail the parameter guards, hence `!(x >= 0.0)` style checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod chain;
pub mod closedform;
pub mod contribution;
pub mod error;
pub mod hetero;
pub mod model;
pub mod sim;
pub mod trace;

pub use analysis::SpreadDistribution;
pub use error::{Result, SpreadError};
pub use model::{GroupProfile, NetworkSpec, RateMatrix};
