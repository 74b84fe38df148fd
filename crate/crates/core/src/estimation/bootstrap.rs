//! Standard errors of the shared parameters by resampling subjects.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fit::{fit_with, EstimationSpec};
use super::Scheme;
use crate::choice::PairEvaluator;
use crate::dataset::ChoiceDataset;
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::math::sqrt;

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    pub reps: usize,
    /// Replicates whose fit returned an error.
    pub failed: usize,
    /// Draws of the risk parameter; empty unless the fit is pooled.
    pub thetas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub kappas: Vec<f64>,
    pub se_theta: Option<f64>,
    pub se_lambda: f64,
    pub se_kappa: f64,
}

/// Sample standard deviation with `n - 1` in the denominator.
fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    sqrt(v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0))
}

pub fn block_bootstrap(spec: &EstimationSpec, dataset: &ChoiceDataset, reps: usize, seed: u64) -> Result<BootstrapSummary> {
    let ev = spec.evaluator(dataset.battery())?;
    block_bootstrap_with(spec, dataset, reps, seed, &ev, &Sequential)
}

/// Refits on `reps` samples of whole subjects drawn with replacement. Each
/// replicate has its own random stream, so the result does not depend on
/// the executor.
pub fn block_bootstrap_with<E: Executor>(
    spec: &EstimationSpec,
    dataset: &ChoiceDataset,
    reps: usize,
    seed: u64,
    ev: &PairEvaluator,
    exec: &E,
) -> Result<BootstrapSummary> {
    if spec.scheme == Scheme::Heteroskedastic {
        return Err(Error::UnsupportedModel("the bootstrap needs shared parameters".into()));
    }
    if reps < 2 {
        return Err(Error::InvalidParameter(format!("{reps} replicates; need at least 2")));
    }
    let n = dataset.len();
    if n == 0 {
        return Err(Error::InvalidDataset("no subjects to resample".into()));
    }
    let fits = exec.map(reps, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let draw: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        fit_with(spec, &dataset.select(&draw), ev, &Sequential)
    });
    let mut summary = BootstrapSummary {
        reps,
        failed: 0,
        thetas: Vec::new(),
        lambdas: Vec::new(),
        kappas: Vec::new(),
        se_theta: None,
        se_lambda: 0.0,
        se_kappa: 0.0,
    };
    for f in fits {
        match f {
            Ok(f) => {
                let p = f.estimates[0].params;
                if spec.scheme == Scheme::Pooled {
                    summary.thetas.push(p.theta);
                }
                summary.lambdas.push(p.lambda);
                summary.kappas.push(p.kappa);
            }
            Err(_) => summary.failed += 1,
        }
    }
    if summary.lambdas.len() < 2 {
        return Err(Error::NonConvergence(format!("only {} of {reps} replicates succeeded", summary.lambdas.len())));
    }
    summary.se_theta = (!summary.thetas.is_empty()).then(|| std_dev(&summary.thetas));
    summary.se_lambda = std_dev(&summary.lambdas);
    summary.se_kappa = std_dev(&summary.kappas);
    Ok(summary)
}
