//! Finite lotteries and their text form `"x1:p1,x2:p2,..."`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::math::abs;

/// Tolerance on the probability sum.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-12;

/// A finite lottery: outcomes with strictly positive probabilities summing
/// to one. Outcomes need not be sorted or distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct Lottery {
    outcomes: Vec<f64>,
    probabilities: Vec<f64>,
    min: f64,
    max: f64,
}

impl Lottery {
    pub fn new(outcomes: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::InvalidLottery("a lottery needs at least one outcome".into()));
        }
        if outcomes.len() != probabilities.len() {
            return Err(Error::InvalidLottery(format!(
                "{} outcomes but {} probabilities",
                outcomes.len(),
                probabilities.len()
            )));
        }
        if let Some(x) = outcomes.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidLottery(format!("non-finite outcome {x}")));
        }
        if let Some(p) = probabilities.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::InvalidLottery(format!("probability {p} is not strictly positive")));
        }
        let total: f64 = probabilities.iter().sum();
        if abs(total - 1.0) > PROBABILITY_SUM_TOLERANCE {
            return Err(Error::InvalidLottery(format!("probabilities sum to {total}, not 1")));
        }
        let min = outcomes.iter().copied().fold(f64::INFINITY, f64::min);
        let max = outcomes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Lottery { outcomes, probabilities, min, max })
    }

    /// The sure amount `x`.
    pub fn degenerate(x: f64) -> Self {
        Lottery { outcomes: alloc::vec![x], probabilities: alloc::vec![1.0], min: x, max: x }
    }

    /// Equally likely outcomes.
    pub fn equiprobable(outcomes: &[f64]) -> Result<Self> {
        let p = 1.0 / outcomes.len() as f64;
        let mut probabilities = alloc::vec![p; outcomes.len()];
        // absorb rounding so the sum is exactly representable
        if let Some(last) = probabilities.last_mut() {
            let head: f64 = (outcomes.len().saturating_sub(1)) as f64 * p;
            *last = 1.0 - head;
        }
        Lottery::new(outcomes.to_vec(), probabilities)
    }

    /// Two outcomes: `hi` with probability `p`, `lo` with `1 - p`. A
    /// probability of exactly 0 or 1 yields the degenerate lottery.
    pub fn binary(hi: f64, lo: f64, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidLottery(format!("probability {p} outside [0, 1]")));
        }
        if p == 1.0 {
            Ok(Lottery::degenerate(hi))
        } else if p == 0.0 {
            Ok(Lottery::degenerate(lo))
        } else {
            Lottery::new(alloc::vec![hi, lo], alloc::vec![p, 1.0 - p])
        }
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// `(outcome, probability)` pairs in stored order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.outcomes.iter().copied().zip(self.probabilities.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(x, p)| x * p).sum()
    }

    /// True when the lottery pays a single amount for sure.
    pub fn is_degenerate(&self) -> bool {
        self.min == self.max
    }

    /// The lottery `X + c`.
    pub fn shifted(&self, c: f64) -> Lottery {
        Lottery {
            outcomes: self.outcomes.iter().map(|x| x + c).collect(),
            probabilities: self.probabilities.clone(),
            min: self.min + c,
            max: self.max + c,
        }
    }

    /// The lottery `k X` for `k > 0`.
    pub fn scaled(&self, k: f64) -> Result<Lottery> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidParameter(format!("scale factor {k} must be positive")));
        }
        Ok(Lottery {
            outcomes: self.outcomes.iter().map(|x| x * k).collect(),
            probabilities: self.probabilities.clone(),
            min: self.min * k,
            max: self.max * k,
        })
    }

    /// Sorted ascending with duplicate outcomes merged.
    pub fn canonical(&self) -> Lottery {
        let mut pairs: Vec<(f64, f64)> = self.iter().collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut outcomes: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut probabilities: Vec<f64> = Vec::with_capacity(pairs.len());
        for (x, p) in pairs {
            match outcomes.last() {
                Some(&last) if last == x => *probabilities.last_mut().unwrap() += p,
                _ => {
                    outcomes.push(x);
                    probabilities.push(p);
                }
            }
        }
        Lottery { outcomes, probabilities, min: self.min, max: self.max }
    }

    /// Smallest and largest outcome over the union of the given lotteries.
    pub fn union_range<'a>(lotteries: impl IntoIterator<Item = &'a Lottery>) -> (f64, f64) {
        lotteries.into_iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| {
            (lo.min(l.min), hi.max(l.max))
        })
    }
}

impl fmt::Display for Lottery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (x, p)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}:{p}")?;
        }
        Ok(())
    }
}

impl FromStr for Lottery {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut outcomes = Vec::new();
        let mut probabilities = Vec::new();
        for item in s.split(',') {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            let (x, p) = item
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("expected `outcome:probability`, got `{item}`")))?;
            outcomes.push(parse_number(x)?);
            probabilities.push(parse_number(p)?);
        }
        Lottery::new(outcomes, probabilities)
    }
}

fn parse_number(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("`{}` is not a number", s.trim())))
}

/// Parses a pair written as `"<X>|<Y>"`.
pub fn parse_pair(s: &str) -> Result<(Lottery, Lottery)> {
    let (x, y) = s
        .split_once('|')
        .ok_or_else(|| Error::Parse(String::from("a pair is written `<X>|<Y>`")))?;
    Ok((x.parse()?, y.parse()?))
}
