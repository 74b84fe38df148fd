//! CARA and CRRA utility, expected utility and certainty equivalents.
//!
//! Certainty equivalents are evaluated around the outcome that dominates the
//! exponential sum (the minimum for risk-averse agents, the maximum for
//! risk-loving ones), so every exponent is non-positive and nothing
//! overflows even for payoffs in the thousands and parameters of order 20.

use core::fmt;
use core::str::FromStr;

use alloc::format;

use crate::error::{Error, Result};
use crate::lottery::Lottery;
use crate::math::{abs, exp, expm1, ln, ln_1p, CompensatedSum};

/// Below this magnitude of the exponent parameter the certainty equivalent
/// switches to its cumulant expansion.
const SERIES_CUTOFF: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UtilityFamily {
    /// `u(x) = -exp(-a x) / a`, identity at `a = 0`.
    Cara,
    /// `u(x) = x^(1-g) / (1-g)`, natural log at `g = 1`. Needs `x > 0`.
    Crra,
}

impl UtilityFamily {
    pub fn name(self) -> &'static str {
        match self {
            UtilityFamily::Cara => "cara",
            UtilityFamily::Crra => "crra",
        }
    }

    /// Checks that every outcome lies in the family's support.
    pub fn check_support(self, lottery: &Lottery) -> Result<()> {
        match self {
            UtilityFamily::Cara => Ok(()),
            UtilityFamily::Crra if lottery.min() > 0.0 => Ok(()),
            UtilityFamily::Crra => Err(Error::Domain { outcome: lottery.min() }),
        }
    }

    /// Arrow-Pratt coefficient of absolute risk aversion at `x`.
    pub fn absolute_risk_aversion(self, theta: f64, x: f64) -> f64 {
        match self {
            UtilityFamily::Cara => theta,
            UtilityFamily::Crra => theta / x,
        }
    }
}

impl fmt::Display for UtilityFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UtilityFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cara" => Ok(UtilityFamily::Cara),
            "crra" => Ok(UtilityFamily::Crra),
            other => Err(Error::Parse(format!("unknown utility family `{other}`"))),
        }
    }
}

/// A risk parameter: any finite real, or the infinitely risk-averse limit.
///
/// Negative values describe risk-loving agents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiskParam {
    Finite(f64),
    Infinite,
}

impl RiskParam {
    pub fn finite(self) -> Option<f64> {
        match self {
            RiskParam::Finite(t) => Some(t),
            RiskParam::Infinite => None,
        }
    }

    fn validate(self) -> Result<Self> {
        match self {
            RiskParam::Finite(t) if !t.is_finite() => {
                Err(Error::InvalidParameter(format!("risk parameter {t} is not finite")))
            }
            p => Ok(p),
        }
    }
}

impl From<f64> for RiskParam {
    /// `+inf` maps to [`RiskParam::Infinite`].
    fn from(t: f64) -> Self {
        if t == f64::INFINITY {
            RiskParam::Infinite
        } else {
            RiskParam::Finite(t)
        }
    }
}

impl fmt::Display for RiskParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RiskParam::Finite(t) => write!(f, "{t}"),
            RiskParam::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for RiskParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("+inf") {
            return Ok(RiskParam::Infinite);
        }
        let t: f64 = s.parse().map_err(|_| Error::Parse(format!("`{s}` is not a risk parameter")))?;
        RiskParam::from(t).validate()
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("risk parameter {theta} is not finite")))
    }
}

/// `u_theta(x)`.
pub fn utility(family: UtilityFamily, theta: f64, x: f64) -> Result<f64> {
    check_theta(theta)?;
    match family {
        UtilityFamily::Cara => {
            if theta == 0.0 {
                Ok(x)
            } else {
                Ok(-exp(-theta * x) / theta)
            }
        }
        UtilityFamily::Crra => {
            if x <= 0.0 {
                return Err(Error::Domain { outcome: x });
            }
            let r = 1.0 - theta;
            if r == 0.0 {
                Ok(ln(x))
            } else {
                Ok(exp(r * ln(x)) / r)
            }
        }
    }
}

/// Exponent rate and transformed outcome for both families: CARA works with
/// `exp(-a x)`, CRRA with `exp((1-g) ln x)`. Writing both as `exp(k z)`
/// lets the log-domain code be shared.
#[inline]
pub(crate) fn rate(family: UtilityFamily, theta: f64) -> f64 {
    match family {
        UtilityFamily::Cara => -theta,
        UtilityFamily::Crra => 1.0 - theta,
    }
}

#[inline]
pub(crate) fn transformed(family: UtilityFamily, x: f64) -> f64 {
    match family {
        UtilityFamily::Cara => x,
        UtilityFamily::Crra => ln(x),
    }
}

/// `ln E[exp(k (z - anchor))]` with the anchor chosen so the exponents are
/// non-positive.
fn log_mgf(family: UtilityFamily, k: f64, lottery: &Lottery, shift: f64, anchor: f64) -> f64 {
    let mut acc = CompensatedSum::default();
    for (x, p) in lottery.iter() {
        acc.add(p * expm1(k * (transformed(family, x + shift) - anchor)));
    }
    ln_1p(acc.value())
}

fn dominant_anchor(family: UtilityFamily, k: f64, lo: f64, hi: f64) -> f64 {
    // lo/hi are raw outcomes; the exponent k*z is largest at hi when k > 0
    let x = if k > 0.0 { hi } else { lo };
    transformed(family, x)
}

/// `E[u_theta(L)]`. Values beyond `f64` range come out as `0` or `±inf`,
/// never NaN.
pub fn expected_utility(family: UtilityFamily, theta: f64, lottery: &Lottery) -> Result<f64> {
    check_theta(theta)?;
    family.check_support(lottery)?;
    let k = rate(family, theta);
    if k == 0.0 {
        let mut acc = CompensatedSum::default();
        for (x, p) in lottery.iter() {
            acc.add(p * transformed(family, x));
        }
        return Ok(acc.value());
    }
    // both families read u = exp(k z) / k
    let sign = k.signum();
    let anchor = dominant_anchor(family, k, lottery.min(), lottery.max());
    let log_mag = k * anchor + log_mgf(family, k, lottery, 0.0, anchor) - ln(abs(k));
    Ok(sign * exp(log_mag))
}

/// `scale * (E[u(X)] - E[u(Y)])` evaluated without forming either expected
/// utility, so the result is exact in sign and finite whenever the true
/// value is representable.
pub fn scaled_eu_difference(
    family: UtilityFamily,
    theta: f64,
    x: &Lottery,
    y: &Lottery,
    scale: f64,
) -> Result<f64> {
    check_theta(theta)?;
    family.check_support(x)?;
    family.check_support(y)?;
    let k = rate(family, theta);
    if k == 0.0 {
        return Ok(scale * (expected_utility(family, theta, x)? - expected_utility(family, theta, y)?));
    }
    let (lo, hi) = Lottery::union_range([x, y]);
    let anchor = dominant_anchor(family, k, lo, hi);
    let sum = |l: &Lottery| {
        let mut acc = CompensatedSum::default();
        for (o, p) in l.iter() {
            acc.add(p * exp(k * (transformed(family, o) - anchor)));
        }
        acc.value()
    };
    let diff = sum(x) - sum(y);
    if diff == 0.0 || scale == 0.0 {
        return Ok(0.0);
    }
    let sign = k.signum() * diff.signum() * scale.signum();
    Ok(sign * exp(k * anchor + ln(abs(diff)) + ln(abs(scale)) - ln(abs(k))))
}

/// `CE_theta(L)`: the sure amount with the same expected utility.
pub fn certainty_equivalent(
    family: UtilityFamily,
    theta: impl Into<RiskParam>,
    lottery: &Lottery,
) -> Result<f64> {
    let theta = theta.into().validate()?;
    family.check_support(lottery)?;
    match theta {
        RiskParam::Infinite => Ok(lottery.min()),
        RiskParam::Finite(t) => Ok(ce_finite(family, t, lottery)),
    }
}

/// Certainty equivalent for a finite parameter; support already checked.
pub(crate) fn ce_finite(family: UtilityFamily, theta: f64, lottery: &Lottery) -> f64 {
    ce_shifted(family, theta, lottery, 0.0)
}

/// `CE_theta(L + shift)` without building the shifted lottery. The caller
/// guarantees the shifted outcomes lie in the support.
pub(crate) fn ce_shifted(family: UtilityFamily, theta: f64, lottery: &Lottery, shift: f64) -> f64 {
    let (lo, hi) = (lottery.min() + shift, lottery.max() + shift);
    if lottery.is_degenerate() {
        return lo;
    }
    if theta == 0.0 {
        return lottery.mean() + shift;
    }
    let k = rate(family, theta);
    let z = if abs(k) < SERIES_CUTOFF {
        series_log_ce(family, k, lottery, shift)
    } else {
        let anchor = dominant_anchor(family, k, lo, hi);
        anchor + log_mgf(family, k, lottery, shift, anchor) / k
    };
    let ce = match family {
        UtilityFamily::Cara => z,
        UtilityFamily::Crra => exp(z),
    };
    // guard the last ulp so the bounds min <= CE <= max hold exactly
    ce.clamp(lo, hi)
}

/// Cumulant expansion of `(1/k) ln E[exp(k z)]` to second order in `k`.
fn series_log_ce(family: UtilityFamily, k: f64, lottery: &Lottery, shift: f64) -> f64 {
    let mut m = CompensatedSum::default();
    for (x, p) in lottery.iter() {
        m.add(p * transformed(family, x + shift));
    }
    let mean = m.value();
    let mut var = CompensatedSum::default();
    let mut third = CompensatedSum::default();
    for (x, p) in lottery.iter() {
        let d = transformed(family, x + shift) - mean;
        var.add(p * d * d);
        third.add(p * d * d * d);
    }
    mean + k * var.value() / 2.0 + k * k * third.value() / 6.0
}
