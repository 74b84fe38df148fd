//! Two-stage maximum-likelihood fits: a genetic algorithm over the search
//! box, then projected BFGS in transformed coordinates.

use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::likelihood::{pooled_tally, subject_tally, tally_loglik, Tally};
use super::optimize::{bfgs_minimize, genetic_minimize, global_minimize_1d_with, local_minimize_1d, Bounds, GaSettings};
use super::transform::inverse_transform;
use super::{Diagnostics, Estimate, FitResult, Flag, Scheme};
use crate::battery::Battery;
use crate::choice::{ModelKind, ModelParams, PairEvaluator};
use crate::dataset::ChoiceDataset;
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::math::{abs, CompensatedSum};
use crate::premium::GridSpec;
use crate::utility::UtilityFamily;

/// Search box for the risk parameter.
pub const THETA_BOUNDS: (f64, f64) = (-20.0, 20.0);

/// Search box for the transformed tremble probability.
pub const KAPPA_TILDE_BOUNDS: (f64, f64) = (-15.0, 15.0);

/// Search box for the log precision. Index scales differ by orders of
/// magnitude between models, so each gets its own range.
pub fn lambda_bounds(kind: ModelKind) -> (f64, f64) {
    match kind {
        ModelKind::CeRum | ModelKind::PiRum | ModelKind::CumPiRum => (-15.0, 8.0),
        ModelKind::Rpm => (-6.0, 10.0),
        ModelKind::ConEu => (-5.0, 12.0),
        ModelKind::EuRum => (-60.0, 60.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    /// Population and generations of the global stage for three-parameter
    /// problems.
    pub population: usize,
    pub generations: usize,
    /// Global stage of the outer two-parameter homoskedastic problem.
    pub outer_population: usize,
    pub outer_generations: usize,
    /// Projected-gradient norm at which the local stage stops.
    pub local_tolerance: f64,
    pub max_local_iterations: usize,
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            population: 50,
            generations: 100,
            outer_population: 20,
            outer_generations: 25,
            local_tolerance: 1e-6,
            max_local_iterations: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationSpec {
    pub model: ModelKind,
    pub family: UtilityFamily,
    pub scheme: Scheme,
    pub optimizer: OptimizerSettings,
    /// Grid of the premium curves (and threshold scans) used by the
    /// likelihood.
    pub grid: GridSpec,
    /// Solve premia exactly instead of interpolating.
    pub exact: bool,
}

impl EstimationSpec {
    pub fn new(model: ModelKind, family: UtilityFamily, scheme: Scheme) -> Self {
        EstimationSpec {
            model,
            family,
            scheme,
            optimizer: OptimizerSettings::default(),
            grid: GridSpec::default(),
            exact: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.optimizer.seed = seed;
        self
    }

    /// Evaluator over every pair of `battery`.
    pub fn evaluator(&self, battery: &Battery) -> Result<PairEvaluator> {
        PairEvaluator::new(self.model, self.family, battery.lottery_pairs(), &self.grid, self.exact)
    }

    fn validate(&self) -> Result<()> {
        let o = &self.optimizer;
        if o.population < 2 || o.outer_population < 2 {
            return Err(Error::InvalidParameter("GA population must be at least 2".into()));
        }
        if !(o.local_tolerance > 0.0) {
            return Err(Error::InvalidParameter("local tolerance must be positive".into()));
        }
        self.grid.validate()
    }
}

/// Fits with a fresh evaluator on the calling thread.
pub fn fit(spec: &EstimationSpec, dataset: &ChoiceDataset) -> Result<FitResult> {
    let ev = spec.evaluator(dataset.battery())?;
    fit_with(spec, dataset, &ev, &Sequential)
}

/// Fits with a prebuilt evaluator, running independent subproblems on
/// `exec`.
pub fn fit_with<E: Executor>(
    spec: &EstimationSpec,
    dataset: &ChoiceDataset,
    ev: &PairEvaluator,
    exec: &E,
) -> Result<FitResult> {
    spec.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidDataset("no subjects to fit".into()));
    }
    if ev.kind() != spec.model || ev.family() != spec.family || ev.len() != dataset.battery().len() {
        return Err(Error::InvalidParameter("evaluator does not match the estimation spec".into()));
    }
    let tallies: Vec<Vec<Tally>> = dataset.subjects().iter().map(subject_tally).collect();
    let pooled = pooled_tally(dataset.subjects(), ev.len());
    let problem = Problem { spec, ev };
    match spec.scheme {
        Scheme::Pooled => Ok(problem.pooled(&pooled)),
        Scheme::Heteroskedastic => Ok(problem.heteroskedastic(dataset, &pooled, &tallies, exec)),
        Scheme::Homoskedastic => Ok(problem.homoskedastic(dataset, &pooled, &tallies, exec)),
    }
}

struct Problem<'a> {
    spec: &'a EstimationSpec,
    ev: &'a PairEvaluator,
}

#[inline]
fn to_params(u: &[f64]) -> ModelParams {
    let (lambda, kappa) = inverse_transform(u[1], u[2]);
    ModelParams { theta: u[0], lambda, kappa }
}

impl<'a> Problem<'a> {
    fn bounds3(&self) -> Bounds {
        let (ll, lh) = lambda_bounds(self.spec.model);
        Bounds::new(
            alloc::vec![THETA_BOUNDS.0, ll, KAPPA_TILDE_BOUNDS.0],
            alloc::vec![THETA_BOUNDS.1, lh, KAPPA_TILDE_BOUNDS.1],
        )
    }

    fn ga(&self, outer: bool) -> GaSettings {
        let o = &self.spec.optimizer;
        let (population, generations) =
            if outer { (o.outer_population, o.outer_generations) } else { (o.population, o.generations) };
        GaSettings { population, generations, ..GaSettings::default() }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.optimizer.seed);
        rng.set_stream(stream);
        rng
    }

    fn default_seeds(&self) -> Vec<Vec<f64>> {
        let (ll, lh) = lambda_bounds(self.spec.model);
        [0.25, 0.5, 0.75]
            .iter()
            .flat_map(|&w| [0.0, 0.7].map(|theta| alloc::vec![theta, ll + w * (lh - ll), -3.0]))
            .collect()
    }

    /// Global plus local search for one three-parameter problem.
    fn solve3(&self, tally: &[Tally], seeds: &[Vec<f64>], stream: u64) -> (Vec<f64>, f64, Diagnostics) {
        let bounds = self.bounds3();
        let ev = self.ev;
        let objective = |u: &[f64]| -tally_loglik(ev, tally, &to_params(u));
        let mut rng = self.rng(stream);
        let (start, _) = genetic_minimize(objective, &bounds, seeds, &self.ga(false), &mut rng);
        let o = &self.spec.optimizer;
        let local = bfgs_minimize(objective, &start, &bounds, o.local_tolerance, o.max_local_iterations);
        (local.x, -local.value, local.diagnostics)
    }

    fn flags(&self, bounds: &Bounds, u: &[f64], diag: &Diagnostics) -> Vec<Flag> {
        let mut flags = Vec::new();
        for (i, f) in [Flag::ThetaAtBound, Flag::LambdaAtBound, Flag::KappaAtBound].into_iter().enumerate() {
            if i < u.len() && bounds.at_bound(u, i) {
                flags.push(f);
            }
        }
        if !diag.converged {
            flags.push(Flag::NotConverged);
        }
        flags
    }

    fn result(&self, scheme: Scheme, estimates: Vec<Estimate>, diagnostics: Diagnostics) -> FitResult {
        let mut acc = CompensatedSum::default();
        for e in &estimates {
            acc.add(e.log_likelihood);
        }
        FitResult {
            model: self.spec.model,
            family: self.spec.family,
            scheme,
            estimates,
            log_likelihood: acc.value(),
            diagnostics,
        }
    }

    fn pooled_vector(&self, pooled: &[Tally]) -> (Vec<f64>, f64, Diagnostics) {
        self.solve3(pooled, &self.default_seeds(), 0)
    }

    fn pooled(&self, pooled: &[Tally]) -> FitResult {
        let (u, ll, diag) = self.pooled_vector(pooled);
        let flags = self.flags(&self.bounds3(), &u, &diag);
        let est = Estimate { id: String::from("pooled"), params: to_params(&u), log_likelihood: ll, flags };
        self.result(Scheme::Pooled, alloc::vec![est], diag)
    }

    fn heteroskedastic<E: Executor>(
        &self,
        dataset: &ChoiceDataset,
        pooled: &[Tally],
        tallies: &[Vec<Tally>],
        exec: &E,
    ) -> FitResult {
        let (pooled_u, _, _) = self.pooled_vector(pooled);
        let mut seeds = alloc::vec![pooled_u];
        seeds.extend(self.default_seeds());
        let bounds = self.bounds3();
        let fits = exec.map(tallies.len(), |i| self.solve3(&tallies[i], &seeds, i as u64 + 1));
        let mut diagnostics: Option<Diagnostics> = None;
        let estimates = fits
            .into_iter()
            .zip(dataset.subjects())
            .map(|((u, ll, diag), s)| {
                diagnostics = Some(diagnostics.map_or(diag, |d| d.merge(diag)));
                Estimate { id: s.id.clone(), params: to_params(&u), log_likelihood: ll, flags: self.flags(&bounds, &u, &diag) }
            })
            .collect();
        self.result(Scheme::Heteroskedastic, estimates, diagnostics.unwrap())
    }

    fn homoskedastic<E: Executor>(
        &self,
        dataset: &ChoiceDataset,
        pooled: &[Tally],
        tallies: &[Vec<Tally>],
        exec: &E,
    ) -> FitResult {
        let ev = self.ev;
        let (lo, hi) = THETA_BOUNDS;
        let inner = |tally: &[Tally], theta: f64, lambda: f64, kappa: f64| {
            -tally_loglik(ev, tally, &ModelParams { theta, lambda, kappa })
        };
        let breaks = threshold_midpoints(dataset);
        let global_pass = |lambda: f64, kappa: f64| -> Vec<(f64, f64)> {
            exec.map(tallies.len(), |i| {
                global_minimize_1d_with(|t| inner(&tallies[i], t, lambda, kappa), lo, hi, 0.1, &breaks)
            })
        };

        let (pooled_u, _, _) = self.pooled_vector(pooled);
        let (l0, k0) = inverse_transform(pooled_u[1], pooled_u[2]);
        let mut warm: Vec<f64> = global_pass(l0, k0).into_iter().map(|(t, _)| t).collect();
        let mut best_value = f64::INFINITY;

        let mut outer = |v: &[f64]| -> f64 {
            let (lambda, kappa) = inverse_transform(v[0], v[1]);
            let start = &warm;
            let results = exec.map(tallies.len(), |i| {
                local_minimize_1d(|t| inner(&tallies[i], t, lambda, kappa), start[i], lo, hi, 0.5)
            });
            let mut acc = CompensatedSum::default();
            for (_, val) in &results {
                acc.add(*val);
            }
            let total = acc.value();
            if total < best_value {
                best_value = total;
                warm = results.into_iter().map(|(t, _)| t).collect();
            }
            total
        };

        let (ll, lh) = lambda_bounds(self.spec.model);
        let bounds = Bounds::new(alloc::vec![ll, KAPPA_TILDE_BOUNDS.0], alloc::vec![lh, KAPPA_TILDE_BOUNDS.1]);
        let seeds = alloc::vec![alloc::vec![pooled_u[1], pooled_u[2]]];
        let mut rng = self.rng(0x0100_0000);
        let (start, _) = genetic_minimize(&mut outer, &bounds, &seeds, &self.ga(true), &mut rng);
        let o = &self.spec.optimizer;
        let local = bfgs_minimize(&mut outer, &start, &bounds, o.local_tolerance, o.max_local_iterations);

        let (lambda, kappa) = inverse_transform(local.x[0], local.x[1]);
        let finals = global_pass(lambda, kappa);
        let shared = self.flags(&bounds, &local.x, &local.diagnostics);
        let theta_bounds = Bounds::new(alloc::vec![lo], alloc::vec![hi]);
        let estimates = finals
            .into_iter()
            .zip(dataset.subjects())
            .map(|((theta, val), s)| {
                let mut flags = Vec::new();
                if theta_bounds.at_bound(&[theta], 0) {
                    flags.push(Flag::ThetaAtBound);
                }
                // shared flags name lambda/kappa, which sit at positions 0/1 here
                for f in &shared {
                    flags.push(match f {
                        Flag::ThetaAtBound => Flag::LambdaAtBound,
                        Flag::LambdaAtBound => Flag::KappaAtBound,
                        other => *other,
                    });
                }
                Estimate { id: s.id.clone(), params: ModelParams { theta, lambda, kappa }, log_likelihood: -val, flags }
            })
            .collect();
        self.result(Scheme::Homoskedastic, estimates, local.diagnostics)
    }
}

/// Midpoints between consecutive distinct indifference thresholds of the
/// battery. Choice probabilities switch regime at the thresholds, so with
/// sharp choices a subject's likelihood is flat between them and these points
/// cover every stretch.
fn threshold_midpoints(dataset: &ChoiceDataset) -> Vec<f64> {
    let mut t: Vec<f64> = dataset.battery().pairs().iter().filter_map(|p| p.threshold).collect();
    t.sort_by(f64::total_cmp);
    t.dedup_by(|a, b| abs(*a - *b) < 1e-9);
    t.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

impl core::fmt::Display for OptimizerSettings {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "population={} generations={} outer_population={} outer_generations={} tol={} seed={}",
            self.population, self.generations, self.outer_population, self.outer_generations, self.local_tolerance, self.seed
        )
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::{andersen_battery, QuestionSet};
    use crate::choice::ChoiceModelSpec;
    use crate::dataset::{simulate_dataset, Response, SubjectRecord};

    fn small_settings() -> OptimizerSettings {
        OptimizerSettings { population: 24, generations: 30, outer_population: 8, outer_generations: 6, ..Default::default() }
    }

    #[test]
    fn pooled_recovers_pi_parameters() {
        let b = andersen_battery();
        let truth = ModelParams::new(0.7, 0.003, 0.05).unwrap();
        let specs = alloc::vec![ChoiceModelSpec { kind: ModelKind::PiRum, family: UtilityFamily::Crra, params: truth }; 250];
        let d = simulate_dataset(&specs, &b, &[QuestionSet::Full40], 42).unwrap();
        let spec = EstimationSpec::new(ModelKind::PiRum, UtilityFamily::Crra, Scheme::Pooled);
        let r = fit(&spec, &d).unwrap();
        let p = r.estimates[0].params;
        assert!((p.theta - 0.7).abs() < 0.05, "{p:?}");
        assert!(r.log_likelihood < 0.0);
        assert_eq!(fit(&spec, &d).unwrap(), r);
    }

    #[test]
    fn consistent_subject_drives_kappa_to_zero() {
        let b = andersen_battery();
        let responses = b
            .pairs()
            .iter()
            .map(|p| match p.threshold {
                Some(t) if 0.3 > t => Response::Y,
                _ => Response::X,
            })
            .collect();
        let s = SubjectRecord { id: "1".into(), question_set: QuestionSet::Full40, pairs: b.indices(QuestionSet::Full40), responses };
        let d = ChoiceDataset::new(b, alloc::vec![s]).unwrap();
        let mut spec = EstimationSpec::new(ModelKind::PiRum, UtilityFamily::Crra, Scheme::Heteroskedastic);
        spec.optimizer = small_settings();
        let r = fit(&spec, &d).unwrap();
        let e = &r.estimates[0];
        assert!(e.params.kappa < 1e-4, "{e:?}");
        assert!(e.log_likelihood > -1e-2, "{e:?}");
    }

    #[test]
    fn nested_schemes_order_likelihoods() {
        let b = andersen_battery();
        let specs: Vec<ChoiceModelSpec> = (0..12)
            .map(|i| ChoiceModelSpec {
                kind: ModelKind::PiRum,
                family: UtilityFamily::Crra,
                params: ModelParams::new(-0.5 + 0.2 * i as f64, 0.004, 0.05).unwrap(),
            })
            .collect();
        let d = simulate_dataset(&specs, &b, &[QuestionSet::Full40], 5).unwrap();
        let run = |scheme| {
            let mut spec = EstimationSpec::new(ModelKind::PiRum, UtilityFamily::Crra, scheme);
            spec.optimizer = small_settings();
            fit(&spec, &d).unwrap().log_likelihood
        };
        let (pooled, homo, hetero) = (run(Scheme::Pooled), run(Scheme::Homoskedastic), run(Scheme::Heteroskedastic));
        assert!(pooled <= homo + 1e-6, "{pooled} {homo}");
        assert!(homo <= hetero + 1e-6, "{homo} {hetero}");
    }
}
