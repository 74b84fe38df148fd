//! Maximum-likelihood estimation of the choice models.
//!
//! Three specifications share one likelihood: a single parameter vector for
//! everybody (pooled), individual risk parameters with common noise
//! (homoskedastic), and fully individual parameters (heteroskedastic).

mod bootstrap;
mod fit;
mod likelihood;
pub mod optimize;
mod postprocess;
mod transform;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use alloc::format;

pub use bootstrap::{block_bootstrap, block_bootstrap_with, BootstrapSummary};
pub use fit::{fit, fit_with, lambda_bounds, EstimationSpec, OptimizerSettings, THETA_BOUNDS, KAPPA_TILDE_BOUNDS};
pub use likelihood::{count_local_maxima, log_likelihood, profile_log_likelihood, subject_log_likelihood, PROB_FLOOR};
pub use postprocess::{postprocess_consistent, feasible_interval, PROJECTION_LIMIT};
pub use transform::{inverse_transform, transform_params, KAPPA_CLAMP};

use crate::choice::{ModelKind, ModelParams};
use crate::error::{Error, Result};
use crate::utility::UtilityFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Pooled,
    Homoskedastic,
    Heteroskedastic,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Pooled => "pooled",
            Scheme::Homoskedastic => "homo",
            Scheme::Heteroskedastic => "hetero",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pooled" => Ok(Scheme::Pooled),
            "homo" | "homoskedastic" => Ok(Scheme::Homoskedastic),
            "hetero" | "heteroskedastic" => Ok(Scheme::Heteroskedastic),
            other => Err(Error::Parse(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Parameters for a whole dataset, shaped by the scheme.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamSet {
    Pooled(ModelParams),
    Homoskedastic { thetas: Vec<f64>, lambda: f64, kappa: f64 },
    Heteroskedastic(Vec<ModelParams>),
}

impl ParamSet {
    /// Parameters of subject `i`.
    pub fn subject(&self, i: usize) -> ModelParams {
        match self {
            ParamSet::Pooled(p) => *p,
            ParamSet::Homoskedastic { thetas, lambda, kappa } => {
                ModelParams { theta: thetas[i], lambda: *lambda, kappa: *kappa }
            }
            ParamSet::Heteroskedastic(v) => v[i],
        }
    }

    /// Checks the vector length against `subjects`.
    pub fn check_len(&self, subjects: usize) -> Result<()> {
        let found = match self {
            ParamSet::Pooled(_) => return Ok(()),
            ParamSet::Homoskedastic { thetas, .. } => thetas.len(),
            ParamSet::Heteroskedastic(v) => v.len(),
        };
        if found == subjects {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: subjects, found })
        }
    }
}

/// Annotations attached to an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flag {
    ThetaAtBound,
    LambdaAtBound,
    KappaAtBound,
    /// The local stage stopped before the gradient test passed.
    NotConverged,
    /// Replaced by the midpoint of the interval of consistent parameters.
    ConsistentMidpoint,
    /// Consistent only above every threshold; set to the upper default.
    ConsistentAbove,
    /// Consistent only below every threshold; set to the lower default.
    ConsistentBelow,
    /// Estimate outside the plotting range; value left unchanged.
    Projected,
}

impl Flag {
    pub fn name(self) -> &'static str {
        match self {
            Flag::ThetaAtBound => "theta_bound",
            Flag::LambdaAtBound => "lambda_bound",
            Flag::KappaAtBound => "kappa_bound",
            Flag::NotConverged => "not_converged",
            Flag::ConsistentMidpoint => "consistent_midpoint",
            Flag::ConsistentAbove => "consistent_above",
            Flag::ConsistentBelow => "consistent_below",
            Flag::Projected => "projected",
        }
    }

    pub const ALL: [Flag; 8] = [
        Flag::ThetaAtBound,
        Flag::LambdaAtBound,
        Flag::KappaAtBound,
        Flag::NotConverged,
        Flag::ConsistentMidpoint,
        Flag::ConsistentAbove,
        Flag::ConsistentBelow,
        Flag::Projected,
    ];
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Flag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Flag::ALL
            .into_iter()
            .find(|f| f.name() == s.trim())
            .ok_or_else(|| Error::Parse(format!("unknown flag `{s}`")))
    }
}

/// Outcome of the local refinement stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub converged: bool,
    /// Largest projected-gradient norm reached at termination.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

impl Diagnostics {
    pub(crate) fn merge(self, other: Diagnostics) -> Diagnostics {
        Diagnostics {
            converged: self.converged && other.converged,
            gradient_norm: self.gradient_norm.max(other.gradient_norm),
            iterations: self.iterations + other.iterations,
            evaluations: self.evaluations + other.evaluations,
        }
    }
}

/// One row of a fit: a subject, or the whole sample for pooled fits.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub id: String,
    pub params: ModelParams,
    pub log_likelihood: f64,
    pub flags: Vec<Flag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: ModelKind,
    pub family: UtilityFamily,
    pub scheme: Scheme,
    /// One entry per subject, or a single entry with id `pooled`.
    pub estimates: Vec<Estimate>,
    pub log_likelihood: f64,
    pub diagnostics: Diagnostics,
}

impl FitResult {
    pub fn param_set(&self) -> ParamSet {
        match self.scheme {
            Scheme::Pooled => ParamSet::Pooled(self.estimates[0].params),
            Scheme::Homoskedastic => {
                let first = self.estimates[0].params;
                ParamSet::Homoskedastic {
                    thetas: self.estimates.iter().map(|e| e.params.theta).collect(),
                    lambda: first.lambda,
                    kappa: first.kappa,
                }
            }
            Scheme::Heteroskedastic => ParamSet::Heteroskedastic(self.estimates.iter().map(|e| e.params).collect()),
        }
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.params.theta).collect()
    }
}
