//! Replacement of degenerate individual estimates for subjects whose
//! choices are explained without error by some risk parameter.

use super::{FitResult, Flag, Scheme};
use crate::battery::Battery;
use crate::dataset::{ChoiceDataset, Response, SubjectRecord};
use crate::error::{Error, Result};

/// Estimates beyond this magnitude are flagged; it is also the value used
/// for subjects consistent on an unbounded side.
pub const PROJECTION_LIMIT: f64 = 5.0;

/// Range of risk parameters under which every answer of `subject` is the
/// preferred option. Choosing the safer `Y` means the parameter lies above
/// the pair's threshold, `X` below it, and indifference pins it to the
/// threshold. Ends may be infinite. `None` when no parameter fits.
pub fn feasible_interval(subject: &SubjectRecord, battery: &Battery) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (&j, r) in subject.pairs.iter().zip(&subject.responses) {
        match (battery.pairs()[j].threshold, r) {
            (None, Response::X) => {}
            (None, _) => return None,
            (Some(t), Response::X) => hi = hi.min(t),
            (Some(t), Response::Y) => lo = lo.max(t),
            (Some(t), Response::Indifferent) => {
                lo = lo.max(t);
                hi = hi.min(t);
            }
        }
    }
    let pinned = subject.responses.contains(&Response::Indifferent);
    if lo < hi || (pinned && lo == hi) {
        Some((lo, hi))
    } else {
        None
    }
}

/// For each consistent subject of a heteroskedastic fit, moves the risk
/// parameter to the midpoint of its feasible interval, or to
/// `-PROJECTION_LIMIT` / `PROJECTION_LIMIT` when the interval is unbounded
/// below / above. Remaining estimates outside `PROJECTION_LIMIT` are
/// flagged but kept. Log-likelihoods are left as fitted.
pub fn postprocess_consistent(fit: &FitResult, dataset: &ChoiceDataset) -> Result<FitResult> {
    if fit.scheme != Scheme::Heteroskedastic {
        return Err(Error::UnsupportedModel("consistency adjustment needs individual estimates".into()));
    }
    if fit.estimates.len() != dataset.len() {
        return Err(Error::DimensionMismatch { expected: dataset.len(), found: fit.estimates.len() });
    }
    let mut out = fit.clone();
    for (e, s) in out.estimates.iter_mut().zip(dataset.subjects()) {
        let replaced = match feasible_interval(s, dataset.battery()) {
            Some((lo, hi)) if lo.is_finite() && hi.is_finite() => Some((0.5 * (lo + hi), Flag::ConsistentMidpoint)),
            Some((_, hi)) if hi.is_finite() => Some((hi.min(-PROJECTION_LIMIT), Flag::ConsistentBelow)),
            Some((lo, _)) if lo.is_finite() => Some((lo.max(PROJECTION_LIMIT), Flag::ConsistentAbove)),
            // no informative answer at all: nothing to replace
            _ => None,
        };
        if let Some((theta, flag)) = replaced {
            e.params.theta = theta;
            e.flags.retain(|f| *f != Flag::ThetaAtBound);
            e.flags.push(flag);
        } else if e.params.theta.abs() > PROJECTION_LIMIT {
            e.flags.push(Flag::Projected);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::{andersen_battery, QuestionSet};
    use crate::choice::{ModelKind, ModelParams};
    use crate::estimation::{Diagnostics, Estimate};
    use crate::utility::UtilityFamily;
    use alloc::vec::Vec;

    fn answers(b: &Battery, theta: f64) -> Vec<Response> {
        b.pairs()
            .iter()
            .map(|p| match p.threshold {
                Some(t) if theta > t => Response::Y,
                _ => Response::X,
            })
            .collect()
    }

    fn subject(b: &Battery, responses: Vec<Response>) -> SubjectRecord {
        SubjectRecord { id: "1".into(), question_set: QuestionSet::Full40, pairs: b.indices(QuestionSet::Full40), responses }
    }

    fn fit_of(theta: f64) -> FitResult {
        let e = Estimate { id: "1".into(), params: ModelParams { theta, lambda: 1e3, kappa: 0.0 }, log_likelihood: 0.0, flags: Vec::new() };
        FitResult {
            model: ModelKind::PiRum,
            family: UtilityFamily::Crra,
            scheme: Scheme::Heteroskedastic,
            estimates: alloc::vec![e],
            log_likelihood: 0.0,
            diagnostics: Diagnostics { converged: true, gradient_norm: 0.0, iterations: 0, evaluations: 0 },
        }
    }

    #[test]
    fn interval_brackets_the_generating_parameter() {
        let b = andersen_battery();
        let (lo, hi) = feasible_interval(&subject(&b, answers(&b, 0.3)), &b).unwrap();
        assert!(lo < 0.3 && 0.3 < hi, "{lo} {hi}");
        let (lo, hi) = feasible_interval(&subject(&b, answers(&b, 9.0)), &b).unwrap();
        assert!(lo.is_finite() && hi == f64::INFINITY);
    }

    fn inconsistent(b: &Battery) -> Vec<Response> {
        let mut r = answers(b, 0.3);
        let th = |k: usize| b.pairs()[k].threshold;
        let with_t: Vec<usize> = (0..b.len()).filter(|&j| th(j).is_some()).collect();
        let lowest = *with_t.iter().min_by(|&&a, &&c| th(a).unwrap().total_cmp(&th(c).unwrap())).unwrap();
        let highest = *with_t.iter().max_by(|&&a, &&c| th(a).unwrap().total_cmp(&th(c).unwrap())).unwrap();
        r[lowest] = Response::X;
        r[highest] = Response::Y;
        r
    }

    #[test]
    fn inconsistent_answers_have_no_interval() {
        let b = andersen_battery();
        assert_eq!(feasible_interval(&subject(&b, inconsistent(&b)), &b), None);
    }

    #[test]
    fn consistent_subjects_are_moved_and_flagged() {
        let b = andersen_battery();
        let d = ChoiceDataset::new(b.clone(), alloc::vec![subject(&b, answers(&b, 0.3))]).unwrap();
        let out = postprocess_consistent(&fit_of(19.9), &d).unwrap();
        let (lo, hi) = feasible_interval(&d.subjects()[0], &b).unwrap();
        assert_eq!(out.estimates[0].params.theta, 0.5 * (lo + hi));
        assert_eq!(out.estimates[0].flags, alloc::vec![Flag::ConsistentMidpoint]);

        let d = ChoiceDataset::new(b.clone(), alloc::vec![subject(&b, answers(&b, 9.0))]).unwrap();
        let out = postprocess_consistent(&fit_of(3.0), &d).unwrap();
        assert_eq!(out.estimates[0].params.theta, PROJECTION_LIMIT);
        assert_eq!(out.estimates[0].flags, alloc::vec![Flag::ConsistentAbove]);
    }

    #[test]
    fn far_estimates_are_flagged_not_clamped() {
        let b = andersen_battery();
        let d = ChoiceDataset::new(b.clone(), alloc::vec![subject(&b, inconsistent(&b))]).unwrap();
        let out = postprocess_consistent(&fit_of(-7.5), &d).unwrap();
        assert_eq!(out.estimates[0].params.theta, -7.5);
        assert_eq!(out.estimates[0].flags, alloc::vec![Flag::Projected]);
        let out = postprocess_consistent(&fit_of(4.0), &d).unwrap();
        assert!(out.estimates[0].flags.is_empty());
    }
}
