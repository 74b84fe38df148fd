//! The four-block, ten-question multiple price list and its question subsets.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::choice::{rpm_shape, RpmShape};
use crate::error::{Error, Result};
use crate::lottery::Lottery;
use crate::premium::GridSpec;
use crate::utility::UtilityFamily;

/// Payoffs `(x_hi, x_lo, y_hi, y_lo)` of the four blocks. The risky option
/// `X` pays `x_hi` with probability `q / 10`, otherwise `x_lo`; the safe
/// option `Y` pays `y_hi` or `y_lo` with the same probabilities.
pub const ANDERSEN_BLOCKS: [[f64; 4]; 4] = [
    [3850.0, 100.0, 2000.0, 1600.0],
    [4000.0, 500.0, 2250.0, 1500.0],
    [4000.0, 150.0, 2000.0, 1750.0],
    [4500.0, 50.0, 2500.0, 1000.0],
];

pub const QUESTIONS_PER_BLOCK: u8 = 10;

/// Block (1-based) and question (1-based) of a battery pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairId {
    pub block: u8,
    pub question: u8,
}

impl PairId {
    pub fn new(block: u8, question: u8) -> Self {
        PairId { block, question }
    }
}

impl fmt::Display for PairId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}q{}", self.block, self.question)
    }
}

impl FromStr for PairId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("`{s}` is not a pair id like b2q7"));
        let rest = s.trim().strip_prefix('b').ok_or_else(bad)?;
        let (b, q) = rest.split_once('q').ok_or_else(bad)?;
        Ok(PairId { block: b.parse().map_err(|_| bad())?, question: q.parse().map_err(|_| bad())? })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryPair {
    pub id: PairId,
    /// Probability of the high payoff in both options.
    pub p: f64,
    pub x_hi: f64,
    pub x_lo: f64,
    pub y_hi: f64,
    pub y_lo: f64,
    pub x: Lottery,
    pub y: Lottery,
    /// Risk parameter at which the two options are equally good; `None`
    /// when `X` dominates.
    pub threshold: Option<f64>,
}

/// Which questions of each block a subject answered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuestionSet {
    Full40,
    /// Questions 3, 5, 7, 8, 9, 10.
    SubsetA,
    /// Questions 1, 2, 3, 5, 7, 10.
    SubsetB,
}

impl QuestionSet {
    pub const ALL: [QuestionSet; 3] = [QuestionSet::Full40, QuestionSet::SubsetA, QuestionSet::SubsetB];

    pub fn questions(self) -> &'static [u8] {
        match self {
            QuestionSet::Full40 => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
            QuestionSet::SubsetA => &[3, 5, 7, 8, 9, 10],
            QuestionSet::SubsetB => &[1, 2, 3, 5, 7, 10],
        }
    }

    /// Pair ids in block-major order.
    pub fn pair_ids(self, blocks: u8) -> Vec<PairId> {
        (1..=blocks)
            .flat_map(|b| self.questions().iter().map(move |&q| PairId::new(b, q)))
            .collect()
    }

    /// The set whose pairs are exactly `ids` (in any order).
    pub fn from_pairs(ids: &[PairId], blocks: u8) -> Option<QuestionSet> {
        let mut sorted: Vec<PairId> = ids.to_vec();
        sorted.sort();
        QuestionSet::ALL.into_iter().find(|s| s.pair_ids(blocks) == sorted)
    }

    pub fn name(self) -> &'static str {
        match self {
            QuestionSet::Full40 => "full",
            QuestionSet::SubsetA => "a",
            QuestionSet::SubsetB => "b",
        }
    }
}

impl FromStr for QuestionSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" | "full40" | "40" => Ok(QuestionSet::Full40),
            "a" | "subset_a" => Ok(QuestionSet::SubsetA),
            "b" | "subset_b" => Ok(QuestionSet::SubsetB),
            other => Err(Error::Parse(format!("unknown question set `{other}`"))),
        }
    }
}

/// An ordered list of pairs, block-major, with thresholds for one family.
#[derive(Debug, Clone, PartialEq)]
pub struct Battery {
    family: UtilityFamily,
    blocks: u8,
    pairs: Vec<BatteryPair>,
}

impl Battery {
    /// Builds a price list from per-block payoffs, computing thresholds for
    /// `family` on `scan`.
    pub fn from_blocks(blocks: &[[f64; 4]], family: UtilityFamily, scan: &GridSpec) -> Result<Self> {
        let mut pairs = Vec::with_capacity(blocks.len() * QUESTIONS_PER_BLOCK as usize);
        for (b, &[x_hi, x_lo, y_hi, y_lo]) in blocks.iter().enumerate() {
            for q in 1..=QUESTIONS_PER_BLOCK {
                let p = q as f64 / QUESTIONS_PER_BLOCK as f64;
                let x = Lottery::binary(x_hi, x_lo, p)?;
                let y = Lottery::binary(y_hi, y_lo, p)?;
                let threshold = match rpm_shape(family, &x, &y, scan)? {
                    RpmShape::Threshold(t) => Some(t),
                    RpmShape::XDominates => None,
                    RpmShape::YDominates => {
                        return Err(Error::InvalidParameter(format!(
                            "block {} question {q}: the safe option dominates",
                            b + 1
                        )))
                    }
                };
                pairs.push(BatteryPair {
                    id: PairId::new(b as u8 + 1, q),
                    p,
                    x_hi,
                    x_lo,
                    y_hi,
                    y_lo,
                    x,
                    y,
                    threshold,
                });
            }
        }
        Ok(Battery { family, blocks: blocks.len() as u8, pairs })
    }

    pub fn family(&self) -> UtilityFamily {
        self.family
    }

    pub fn blocks(&self) -> u8 {
        self.blocks
    }

    pub fn pairs(&self) -> &[BatteryPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Position of a pair in [`Battery::pairs`].
    pub fn index_of(&self, id: PairId) -> Option<usize> {
        if id.block == 0 || id.block > self.blocks || id.question == 0 || id.question > QUESTIONS_PER_BLOCK {
            return None;
        }
        Some((id.block as usize - 1) * QUESTIONS_PER_BLOCK as usize + id.question as usize - 1)
    }

    /// Pair indices of a question set, block-major.
    pub fn indices(&self, set: QuestionSet) -> Vec<usize> {
        set.pair_ids(self.blocks).into_iter().filter_map(|id| self.index_of(id)).collect()
    }

    /// `(X, Y)` for every pair, in order.
    pub fn lottery_pairs(&self) -> Vec<(Lottery, Lottery)> {
        self.pairs.iter().map(|p| (p.x.clone(), p.y.clone())).collect()
    }

    /// Finite thresholds of the pairs in `set`.
    pub fn thresholds(&self, set: QuestionSet) -> Vec<f64> {
        self.indices(set).into_iter().filter_map(|i| self.pairs[i].threshold).collect()
    }
}

/// The 40-pair battery with CRRA thresholds on the default grid.
pub fn andersen_battery() -> Battery {
    Battery::from_blocks(&ANDERSEN_BLOCKS, UtilityFamily::Crra, &GridSpec::default())
        .expect("the built-in battery is well formed")
}
