//! Grid-based orderedness verdicts for lottery pairs.
//!
//! A pair is Π-ordered when its premium curve is (weakly) increasing in the
//! risk parameter, and Ω-ordered when the premium changes sign at most once,
//! from negative to positive.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lottery::Lottery;
use crate::math::abs;
use crate::premium::{premium_finite, GridSpec};
use crate::root::{bisect_sign, golden_max};
use crate::utility::{ce_finite, UtilityFamily};

/// Relative width of the band around zero inside which a premium or a
/// certainty-equivalent gap counts as indifference.
pub const ZERO_BAND: f64 = 1e-9;

/// Default monotonicity slack, relative to the outcome span of the pair.
pub const DEFAULT_SLACK: f64 = 1e-9;

/// Sub-intervals used to re-examine near-flat stretches of a curve.
const REFINE: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct OrderVerdict {
    pub pi_ordered: bool,
    pub omega_ordered: bool,
    /// Location and height of an interior premium maximum, present only for
    /// curves that are not increasing.
    pub peak_theta: Option<f64>,
    pub peak_premium: Option<f64>,
    /// Risk parameters at which the premium changes sign, ascending.
    pub crossings: Vec<f64>,
    pub grid: GridSpec,
}

fn pair_span(x: &Lottery, y: &Lottery) -> f64 {
    let (lo, hi) = Lottery::union_range([x, y]);
    (hi - lo).max(f64::MIN_POSITIVE)
}

/// `CE(Y) - CE(X)`, which has the sign of the compensating premium.
pub fn ce_gap(family: UtilityFamily, theta: f64, x: &Lottery, y: &Lottery) -> f64 {
    ce_finite(family, theta, y) - ce_finite(family, theta, x)
}

/// Classifies a pair on `grid`. `slack` defaults to `1e-9` times the outcome
/// span of the pair.
pub fn classify_pair(
    family: UtilityFamily,
    x: &Lottery,
    y: &Lottery,
    grid: &GridSpec,
    slack: Option<f64>,
) -> Result<OrderVerdict> {
    grid.validate()?;
    family.check_support(x)?;
    family.check_support(y)?;
    let span = pair_span(x, y);
    let slack = slack.unwrap_or(DEFAULT_SLACK * span);
    if !(slack >= 0.0) {
        return Err(Error::InvalidParameter("monotonicity slack must be non-negative".into()));
    }
    let premium = |t: f64| premium_finite(family, t, x, y);
    let thetas = grid.nodes();
    let values = thetas.iter().map(|&t| premium(t)).collect::<Result<Vec<_>>>()?;

    let mut pi_ordered = true;
    for i in 0..values.len() - 1 {
        let diff = values[i + 1] - values[i];
        if diff < -slack {
            pi_ordered = false;
            break;
        }
        if diff < slack && !refined_nondecreasing(&premium, thetas[i], thetas[i + 1], values[i], slack)? {
            pi_ordered = false;
            break;
        }
    }

    let band = ZERO_BAND * span;
    let crossings = sign_changes(&thetas, &values, band, |t| premium(t).unwrap_or(0.0));
    let omega_ordered = crossings.iter().all(|c| c.rising) && crossings.len() <= 1;
    let crossings: Vec<f64> = crossings.into_iter().map(|c| c.theta).collect();

    let (peak_theta, peak_premium) = if pi_ordered {
        (None, None)
    } else {
        match interior_peak(&thetas, &values, |t| premium(t).unwrap_or(f64::NEG_INFINITY)) {
            Some((t, v)) => (Some(t), Some(v)),
            None => (None, None),
        }
    };

    Ok(OrderVerdict {
        pi_ordered: pi_ordered && omega_ordered,
        omega_ordered,
        peak_theta,
        peak_premium,
        crossings,
        grid: *grid,
    })
}

fn refined_nondecreasing<F>(premium: &F, a: f64, b: f64, start: f64, slack: f64) -> Result<bool>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut prev = start;
    for j in 1..=REFINE {
        let t = if j == REFINE { b } else { a + (b - a) * j as f64 / REFINE as f64 };
        let v = premium(t)?;
        if v - prev < -slack {
            return Ok(false);
        }
        prev = v;
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy)]
struct Crossing {
    theta: f64,
    rising: bool,
}

/// Sign changes of a sampled function, ignoring samples inside the zero
/// band, each refined by bisection on the sign of `f`.
fn sign_changes<F>(thetas: &[f64], values: &[f64], band: f64, f: F) -> Vec<Crossing>
where
    F: Fn(f64) -> f64,
{
    let mut out = Vec::new();
    let mut last: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if abs(v) <= band {
            continue;
        }
        let s = v.signum();
        if let Some((j, prev)) = last {
            if s != prev {
                let theta = bisect_sign(&f, thetas[j], thetas[i], 1e-12 * (1.0 + abs(thetas[i])));
                out.push(Crossing { theta, rising: s > 0.0 });
            }
        }
        last = Some((i, s));
    }
    out
}

/// Interior maximum of a sampled curve refined by golden section between
/// the neighbours of the best node. `None` when the best node is an end.
pub fn interior_peak<F>(thetas: &[f64], values: &[f64], f: F) -> Option<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let k = values
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > values[best] { i } else { best });
    if k == 0 || k + 1 == values.len() {
        return None;
    }
    let (t, v) = golden_max(f, thetas[k - 1], thetas[k + 1], 1e-9);
    if v >= values[k] {
        Some((t, v))
    } else {
        Some((thetas[k], values[k]))
    }
}

/// Every risk parameter on the scan grid at which `X` and `Y` have equal
/// certainty equivalents, ascending.
pub fn indifference_thresholds(
    family: UtilityFamily,
    x: &Lottery,
    y: &Lottery,
    scan: &GridSpec,
) -> Result<Vec<f64>> {
    scan.validate()?;
    family.check_support(x)?;
    family.check_support(y)?;
    let band = ZERO_BAND * pair_span(x, y);
    let thetas = scan.nodes();
    let gap = |t: f64| ce_gap(family, t, x, y);
    let values: Vec<f64> = thetas.iter().map(|&t| gap(t)).collect();
    Ok(sign_changes(&thetas, &values, band, gap).into_iter().map(|c| c.theta).collect())
}

/// The unique indifference threshold on the scan grid, `None` when the
/// preference never flips, and [`Error::AmbiguousThreshold`] when it flips
/// more than once.
pub fn indifference_threshold(
    family: UtilityFamily,
    x: &Lottery,
    y: &Lottery,
    scan: &GridSpec,
) -> Result<Option<f64>> {
    let crossings = indifference_thresholds(family, x, y, scan)?;
    match crossings.len() {
        0 => Ok(None),
        1 => Ok(Some(crossings[0])),
        _ => Err(Error::AmbiguousThreshold { crossings }),
    }
}

/// Local sufficient condition for premium monotonicity under small
/// mean-preserving spreads of `Y`: absolute risk aversion times the
/// conditional variance of the spread must not increase across the ordered
/// outcomes of `Y`.
pub fn mps_local_diagnostic<V>(family: UtilityFamily, theta: f64, y: &Lottery, spread_variance: V) -> bool
where
    V: Fn(f64) -> f64,
{
    let canon = y.canonical();
    let products: Vec<f64> = canon
        .outcomes()
        .iter()
        .map(|&o| family.absolute_risk_aversion(theta, o) * spread_variance(o))
        .collect();
    products.windows(2).all(|w| w[1] <= w[0] + 1e-12 * abs(w[0]).max(abs(w[1])))
}

/// True when `values` never falls by more than `slack` between neighbours.
pub fn is_nondecreasing(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] - w[0] >= -slack)
}
