//! Per-subject choice records and synthetic data.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::battery::{Battery, QuestionSet};
use crate::choice::{ChoiceModelSpec, ModelKind, PairEvaluator};
use crate::error::{Error, Result};
use crate::premium::GridSpec;
use crate::utility::UtilityFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Response {
    X,
    Y,
    /// Declared indifference; counts as half a choice of each option.
    Indifferent,
}

impl Response {
    /// Likelihood weights on `ln P(X)` and `ln P(Y)`.
    #[inline]
    pub fn weights(self) -> (f64, f64) {
        match self {
            Response::X => (1.0, 0.0),
            Response::Y => (0.0, 1.0),
            Response::Indifferent => (0.5, 0.5),
        }
    }

    pub fn code(self) -> char {
        match self {
            Response::X => 'X',
            Response::Y => 'Y',
            Response::Indifferent => 'I',
        }
    }
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

impl FromStr for Response {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "X" | "x" => Ok(Response::X),
            "Y" | "y" => Ok(Response::Y),
            "I" | "i" => Ok(Response::Indifferent),
            other => Err(Error::Parse(format!("response `{other}` is not X, Y or I"))),
        }
    }
}

/// One subject's answers. `pairs[k]` indexes the battery and `responses[k]`
/// is the answer to it.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: String,
    pub question_set: QuestionSet,
    pub pairs: Vec<usize>,
    pub responses: Vec<Response>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceDataset {
    battery: Battery,
    subjects: Vec<SubjectRecord>,
}

impl ChoiceDataset {
    pub fn new(battery: Battery, subjects: Vec<SubjectRecord>) -> Result<Self> {
        for s in &subjects {
            if s.pairs.len() != s.responses.len() {
                return Err(Error::InvalidDataset(format!(
                    "subject {}: {} pairs but {} responses",
                    s.id,
                    s.pairs.len(),
                    s.responses.len()
                )));
            }
            if let Some(j) = s.pairs.iter().find(|&&j| j >= battery.len()) {
                return Err(Error::InvalidDataset(format!("subject {}: unknown pair index {j}", s.id)));
            }
            let mut have = s.pairs.clone();
            have.sort_unstable();
            if have != battery.indices(s.question_set) {
                return Err(Error::InvalidDataset(format!(
                    "subject {}: answered pairs do not match question set {}",
                    s.id,
                    s.question_set.name()
                )));
            }
        }
        Ok(ChoiceDataset { battery, subjects })
    }

    pub fn battery(&self) -> &Battery {
        &self.battery
    }

    pub fn subjects(&self) -> &[SubjectRecord] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn choice_count(&self) -> usize {
        self.subjects.iter().map(|s| s.responses.len()).sum()
    }

    /// A dataset made of the listed subjects, repeats allowed.
    pub fn select(&self, indices: &[usize]) -> ChoiceDataset {
        ChoiceDataset {
            battery: self.battery.clone(),
            subjects: indices.iter().map(|&i| self.subjects[i].clone()).collect(),
        }
    }
}

/// Draws one response per battery question for every subject. Subject `i`
/// uses `specs[i]` and `question_sets[i]` (a single entry applies to all)
/// and its own random stream, so results depend only on `seed`.
pub fn simulate_dataset(
    specs: &[ChoiceModelSpec],
    battery: &Battery,
    question_sets: &[QuestionSet],
    seed: u64,
) -> Result<ChoiceDataset> {
    if question_sets.is_empty() || (question_sets.len() != 1 && question_sets.len() != specs.len()) {
        return Err(Error::DimensionMismatch { expected: specs.len(), found: question_sets.len() });
    }
    let mut evaluators: Vec<((ModelKind, UtilityFamily), PairEvaluator)> = Vec::new();
    for s in specs {
        s.params.validate()?;
        let key = (s.kind, s.family);
        if !evaluators.iter().any(|(k, _)| *k == key) {
            let ev = PairEvaluator::new(s.kind, s.family, battery.lottery_pairs(), &GridSpec::default(), true)?;
            evaluators.push((key, ev));
        }
    }
    let mut subjects = Vec::with_capacity(specs.len());
    for (i, s) in specs.iter().enumerate() {
        let ev = &evaluators.iter().find(|(k, _)| *k == (s.kind, s.family)).unwrap().1;
        let set = question_sets[if question_sets.len() == 1 { 0 } else { i }];
        let pairs = battery.indices(set);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let responses = pairs
            .iter()
            .map(|&j| {
                let u: f64 = rng.gen();
                if u < ev.prob_x(j, &s.params) {
                    Response::X
                } else {
                    Response::Y
                }
            })
            .collect();
        subjects.push(SubjectRecord { id: format!("{}", i + 1), question_set: set, pairs, responses });
    }
    ChoiceDataset::new(battery.clone(), subjects)
}
