//! Structural elicitation of risk preferences from binary lottery choices.
//!
//! The crate is `no_std` (with `alloc`) and purely computational:
//!
//! * [`lottery`] and [`utility`]: finite lotteries, CARA/CRRA utility,
//!   expected utility and certainty equivalents that stay finite for large
//!   risk parameters.
//! * [`premium`]: compensating premia by root finding, their limits and
//!   precomputed premium curves with monotone cubic interpolation.
//! * [`ordering`]: Π/Ω-orderedness verdicts, indifference thresholds and
//!   premium peaks.
//! * [`choice`]: the six stochastic choice models with tremble errors.
//! * [`battery`] and [`dataset`]: the 40-pair Holt–Laury style battery,
//!   choice datasets and synthetic data.
//! * [`estimation`]: likelihood, pooled/homoskedastic/heteroskedastic
//!   maximum likelihood, block bootstrap and consistent-subject
//!   post-processing.
//!
//! IO, parallel execution and the command line live in the `pirum` crate.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod battery;
pub mod choice;
pub mod dataset;
mod error;
pub mod estimation;
pub mod exec;
pub mod lottery;
mod math;
pub mod ordering;
pub mod pchip;
pub mod premium;
pub mod root;
pub mod utility;

pub use battery::{andersen_battery, Battery, BatteryPair, PairId, QuestionSet};
pub use choice::{
    choice_prob_menu, choice_prob_pair, value_index, ChoiceModelSpec, Menu, ModelKind,
    ModelParams, PairEvaluator,
};
pub use dataset::{simulate_dataset, ChoiceDataset, Response, SubjectRecord};
pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use lottery::Lottery;
pub use ordering::{
    classify_pair, indifference_threshold, indifference_thresholds, mps_local_diagnostic,
    OrderVerdict,
};
pub use premium::{
    build_premium_curve, compensating_premium, interpolate_premium, premium_limits, GridSpec,
    PremiumCurve,
};
pub use utility::{certainty_equivalent, expected_utility, utility, RiskParam, UtilityFamily};
