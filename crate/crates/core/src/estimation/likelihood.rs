//! Log-likelihood of observed choices, with half weights for declared
//! indifference.

use alloc::vec::Vec;

use super::ParamSet;
use crate::choice::{ModelParams, PairEvaluator};
use crate::dataset::{ChoiceDataset, SubjectRecord};
use crate::error::{Error, Result};
use crate::math::{abs, ln, CompensatedSum};

/// Probabilities are floored here before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-300;

/// Weighted counts of X and Y answers for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Tally {
    pub pair: usize,
    pub wx: f64,
    pub wy: f64,
}

pub(crate) fn subject_tally(s: &SubjectRecord) -> Vec<Tally> {
    s.pairs
        .iter()
        .zip(&s.responses)
        .map(|(&pair, r)| {
            let (wx, wy) = r.weights();
            Tally { pair, wx, wy }
        })
        .collect()
}

/// Counts summed over subjects, one entry per pair that was asked.
pub(crate) fn pooled_tally<'a>(subjects: impl IntoIterator<Item = &'a SubjectRecord>, pairs: usize) -> Vec<Tally> {
    let mut acc: Vec<Tally> = (0..pairs).map(|pair| Tally { pair, wx: 0.0, wy: 0.0 }).collect();
    for s in subjects {
        for (&j, r) in s.pairs.iter().zip(&s.responses) {
            let (wx, wy) = r.weights();
            acc[j].wx += wx;
            acc[j].wy += wy;
        }
    }
    acc.retain(|t| t.wx > 0.0 || t.wy > 0.0);
    acc
}

#[inline]
fn log_floor(p: f64) -> f64 {
    // NaN falls through to the floor as well
    if p > PROB_FLOOR {
        ln(p)
    } else {
        ln(PROB_FLOOR)
    }
}

pub(crate) fn tally_loglik(ev: &PairEvaluator, tally: &[Tally], params: &ModelParams) -> f64 {
    let mut acc = CompensatedSum::default();
    for t in tally {
        let (px, py) = ev.probs(t.pair, params);
        if t.wx > 0.0 {
            acc.add(t.wx * log_floor(px));
        }
        if t.wy > 0.0 {
            acc.add(t.wy * log_floor(py));
        }
    }
    acc.value()
}

/// Log-likelihood contribution of one subject.
pub fn subject_log_likelihood(ev: &PairEvaluator, subject: &SubjectRecord, params: &ModelParams) -> f64 {
    tally_loglik(ev, &subject_tally(subject), params)
}

/// Total log-likelihood of `dataset` under `params`. The evaluator must be
/// built on the dataset's battery.
pub fn log_likelihood(ev: &PairEvaluator, dataset: &ChoiceDataset, params: &ParamSet) -> Result<f64> {
    params.check_len(dataset.len())?;
    if ev.len() != dataset.battery().len() {
        return Err(Error::DimensionMismatch { expected: dataset.battery().len(), found: ev.len() });
    }
    let mut acc = CompensatedSum::default();
    for (i, s) in dataset.subjects().iter().enumerate() {
        let p = params.subject(i);
        p.validate()?;
        acc.add(subject_log_likelihood(ev, s, &p));
    }
    Ok(acc.value())
}

/// Log-likelihood of one subject along a list of risk parameters at fixed
/// noise parameters.
pub fn profile_log_likelihood(
    ev: &PairEvaluator,
    subject: &SubjectRecord,
    thetas: &[f64],
    lambda: f64,
    kappa: f64,
) -> Vec<f64> {
    let tally = subject_tally(subject);
    thetas
        .iter()
        .map(|&theta| tally_loglik(ev, &tally, &ModelParams { theta, lambda, kappa }))
        .collect()
}

/// Number of local maxima of a sampled curve. Runs of values equal within
/// `rel_tol` count as one plateau; a plateau is a maximum when every
/// existing neighbouring plateau is strictly lower.
pub fn count_local_maxima(values: &[f64], rel_tol: f64) -> usize {
    let close = |a: f64, b: f64| abs(a - b) <= rel_tol * (1.0 + abs(a).max(abs(b)));
    let mut plateaus: Vec<f64> = Vec::new();
    for &v in values {
        match plateaus.last() {
            Some(&last) if close(last, v) => {}
            _ => plateaus.push(v),
        }
    }
    if plateaus.len() <= 1 {
        return plateaus.len();
    }
    (0..plateaus.len())
        .filter(|&i| {
            let left = i == 0 || plateaus[i - 1] < plateaus[i];
            let right = i + 1 == plateaus.len() || plateaus[i + 1] < plateaus[i];
            left && right
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::{andersen_battery, QuestionSet};
    use crate::choice::ModelKind;
    use crate::dataset::Response;
    use crate::premium::GridSpec;
    use crate::utility::UtilityFamily;
    use alloc::vec;

    fn one_subject(responses: Vec<Response>) -> ChoiceDataset {
        let b = andersen_battery();
        let pairs = b.indices(QuestionSet::Full40);
        let s = SubjectRecord { id: "1".into(), question_set: QuestionSet::Full40, pairs, responses };
        ChoiceDataset::new(b, vec![s]).unwrap()
    }

    fn evaluator(kind: ModelKind) -> PairEvaluator {
        PairEvaluator::new(kind, UtilityFamily::Crra, andersen_battery().lottery_pairs(), &GridSpec::default(), false)
            .unwrap()
    }

    #[test]
    fn random_choice_gives_log_half() {
        let d = one_subject(vec![Response::X; 40]);
        let ev = evaluator(ModelKind::CeRum);
        let p = ParamSet::Pooled(ModelParams::new(0.4, 0.0, 0.1).unwrap());
        let ll = log_likelihood(&ev, &d, &p).unwrap();
        assert!((ll - 40.0 * ln(0.5)).abs() < 1e-10);
    }

    #[test]
    fn indifference_counts_half_each() {
        let d = one_subject(vec![Response::Indifferent; 40]);
        let ev = evaluator(ModelKind::PiRum);
        let p = ModelParams::new(0.4, 0.002, 0.05).unwrap();
        let ll = log_likelihood(&ev, &d, &ParamSet::Pooled(p)).unwrap();
        let mut want = 0.0;
        for j in 0..40 {
            let (px, py) = ev.probs(j, &p);
            want += 0.5 * ln(px) + 0.5 * ln(py);
        }
        assert!((ll - want).abs() < 1e-10);
        // half-and-half answers are best explained by coin flips
        assert!(ll <= 40.0 * ln(0.5) + 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let d = one_subject(vec![Response::X; 40]);
        let ev = evaluator(ModelKind::CeRum);
        let p = ParamSet::Heteroskedastic(vec![]);
        assert_eq!(log_likelihood(&ev, &d, &p), Err(Error::DimensionMismatch { expected: 1, found: 0 }));
    }

    #[test]
    fn local_maxima_counting() {
        assert_eq!(count_local_maxima(&[0.0, 1.0, 2.0, 1.0, 0.0], 1e-12), 1);
        assert_eq!(count_local_maxima(&[0.0, 2.0, 1.0, 3.0, 0.0], 1e-12), 2);
        assert_eq!(count_local_maxima(&[0.0, 2.0, 2.0, 2.0, 0.0], 1e-12), 1);
        assert_eq!(count_local_maxima(&[3.0, 2.0, 1.0], 1e-12), 1);
        assert_eq!(count_local_maxima(&[1.0, 1.0], 1e-12), 1);
    }
}
