//! Stochastic choice models over lottery pairs and menus.
//!
//! Five random utility models differ only in the preference index fed to a
//! logit; the random parameter model instead perturbs the risk parameter
//! around each pair's indifference threshold. Pair probabilities are mixed
//! with a tremble `kappa`: `(1 - kappa) * rho + kappa * (1 - rho)`.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::lottery::Lottery;
use crate::math::{abs, exp, expm1, CompensatedSum};
use crate::ordering::{ce_gap, ZERO_BAND};
use crate::premium::{build_premium_curve, premium_finite, GridSpec, PremiumCurve};
use crate::utility::{ce_finite, expected_utility, rate, scaled_eu_difference, transformed, UtilityFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Logit on expected utilities.
    EuRum,
    /// Logit on certainty equivalents.
    CeRum,
    /// Logit on minus the premium needed to match the best option.
    PiRum,
    /// Like `PiRum`, but premia are summed along the preference ranking.
    CumPiRum,
    /// Random risk parameter around the pair's indifference threshold.
    Rpm,
    /// Logit on expected utility rescaled by the utility range of the menu.
    ConEu,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::EuRum,
        ModelKind::CeRum,
        ModelKind::PiRum,
        ModelKind::CumPiRum,
        ModelKind::Rpm,
        ModelKind::ConEu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::EuRum => "eu",
            ModelKind::CeRum => "ce",
            ModelKind::PiRum => "pi",
            ModelKind::CumPiRum => "cumpi",
            ModelKind::Rpm => "rpm",
            ModelKind::ConEu => "coneu",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown model `{s}`")))
    }
}

/// Risk parameter, logit precision and tremble probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub theta: f64,
    pub lambda: f64,
    pub kappa: f64,
}

impl ModelParams {
    pub fn new(theta: f64, lambda: f64, kappa: f64) -> Result<Self> {
        let p = ModelParams { theta, lambda, kappa };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.theta.is_finite() {
            return Err(Error::InvalidParameter(format!("theta = {} is not finite", self.theta)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda = {} must be >= 0", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(Error::InvalidParameter(format!("kappa = {} must lie in [0, 1]", self.kappa)));
        }
        Ok(())
    }
}

/// A model kind and family together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChoiceModelSpec {
    pub kind: ModelKind,
    pub family: UtilityFamily,
    pub params: ModelParams,
}

/// An ordered choice set of at least two lotteries.
#[derive(Debug, Clone, PartialEq)]
pub struct Menu {
    lotteries: Vec<Lottery>,
}

impl Menu {
    pub fn new(lotteries: Vec<Lottery>) -> Result<Self> {
        if lotteries.len() < 2 {
            return Err(Error::InvalidParameter("a menu needs at least two lotteries".into()));
        }
        Ok(Menu { lotteries })
    }

    pub fn pair(x: Lottery, y: Lottery) -> Self {
        Menu { lotteries: alloc::vec![x, y] }
    }

    pub fn lotteries(&self) -> &[Lottery] {
        &self.lotteries
    }

    pub fn len(&self) -> usize {
        self.lotteries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Numerically safe logistic function.
#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + exp(-z))
    } else {
        let e = exp(z);
        e / (1.0 + e)
    }
}

#[inline]
pub fn tremble(rho: f64, kappa: f64) -> f64 {
    (1.0 - kappa) * rho + kappa * (1.0 - rho)
}

fn check_menu(family: UtilityFamily, lotteries: &[Lottery]) -> Result<()> {
    lotteries.iter().try_for_each(|l| family.check_support(l))
}

/// Index of the lottery with the largest certainty equivalent, lowest index
/// on ties.
fn best_index(ces: &[f64]) -> usize {
    ces.iter().enumerate().fold(0, |best, (i, v)| if *v > ces[best] { i } else { best })
}

/// Expected normalized utility `E[(u(x) - u(lo)) / (u(hi) - u(lo))]` with
/// `lo`, `hi` the extreme outcomes over the whole menu.
fn contextual_values(family: UtilityFamily, theta: f64, lotteries: &[&Lottery]) -> Vec<f64> {
    let (lo, hi) = Lottery::union_range(lotteries.iter().copied());
    if lo == hi {
        return alloc::vec![0.0; lotteries.len()];
    }
    let k = rate(family, theta);
    let z0 = transformed(family, lo);
    let width = transformed(family, hi) - z0;
    let nu = |x: f64| -> f64 {
        let dz = transformed(family, x) - z0;
        if k == 0.0 {
            return dz / width;
        }
        let (a, b) = (k * dz, k * width);
        if b > 700.0 {
            exp(a - b) * (-expm1(-a)) / (-expm1(-b))
        } else {
            expm1(a) / expm1(b)
        }
    };
    lotteries
        .iter()
        .map(|l| {
            let mut acc = CompensatedSum::default();
            for (x, p) in l.iter() {
                acc.add(p * nu(x));
            }
            acc.value()
        })
        .collect()
}

/// Preference indices `V_i(theta)` for the random utility models.
pub fn value_index(kind: ModelKind, family: UtilityFamily, theta: f64, menu: &Menu) -> Result<Vec<f64>> {
    if !theta.is_finite() {
        return Err(Error::InvalidParameter(format!("theta = {theta} is not finite")));
    }
    let ls = menu.lotteries();
    check_menu(family, ls)?;
    match kind {
        ModelKind::EuRum => ls.iter().map(|l| expected_utility(family, theta, l)).collect(),
        ModelKind::CeRum => Ok(ls.iter().map(|l| ce_finite(family, theta, l)).collect()),
        ModelKind::PiRum => {
            let ces: Vec<f64> = ls.iter().map(|l| ce_finite(family, theta, l)).collect();
            let best = best_index(&ces);
            ls.iter()
                .enumerate()
                .map(|(i, l)| {
                    if i == best {
                        Ok(0.0)
                    } else {
                        premium_finite(family, theta, l, &ls[best]).map(|p| -p)
                    }
                })
                .collect()
        }
        ModelKind::CumPiRum => {
            let ces: Vec<f64> = ls.iter().map(|l| ce_finite(family, theta, l)).collect();
            let mut order: Vec<usize> = (0..ls.len()).collect();
            order.sort_by(|&a, &b| ces[b].total_cmp(&ces[a]).then(a.cmp(&b)));
            let mut values = alloc::vec![0.0; ls.len()];
            for w in order.windows(2) {
                let (above, here) = (w[0], w[1]);
                values[here] = values[above] - premium_finite(family, theta, &ls[here], &ls[above])?;
            }
            Ok(values)
        }
        ModelKind::ConEu => {
            let refs: Vec<&Lottery> = ls.iter().collect();
            Ok(contextual_values(family, theta, &refs))
        }
        ModelKind::Rpm => Err(Error::UnsupportedModel(
            "the random parameter model has no preference index".into(),
        )),
    }
}

/// `V_X - V_Y` for a pair under a random utility model, computed without
/// forming either index where that could overflow.
pub fn pair_index_gap(kind: ModelKind, family: UtilityFamily, theta: f64, x: &Lottery, y: &Lottery) -> Result<f64> {
    pair_index_gap_scaled(kind, family, theta, x, y, 1.0)
}

fn pair_index_gap_scaled(
    kind: ModelKind,
    family: UtilityFamily,
    theta: f64,
    x: &Lottery,
    y: &Lottery,
    scale: f64,
) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::InvalidParameter(format!("theta = {theta} is not finite")));
    }
    family.check_support(x)?;
    family.check_support(y)?;
    Ok(match kind {
        ModelKind::EuRum => scaled_eu_difference(family, theta, x, y, scale)?,
        ModelKind::CeRum => scale * -ce_gap(family, theta, x, y),
        ModelKind::PiRum | ModelKind::CumPiRum => scale * -premium_finite(family, theta, x, y)?,
        ModelKind::ConEu => {
            let v = contextual_values(family, theta, &[x, y]);
            scale * (v[0] - v[1])
        }
        ModelKind::Rpm => {
            return Err(Error::UnsupportedModel(
                "the random parameter model has no preference index".into(),
            ))
        }
    })
}

/// How the preference within a pair depends on the risk parameter, as the
/// random parameter model needs it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RpmShape {
    /// `X` preferred below the threshold, `Y` above.
    Threshold(f64),
    /// `X` preferred at every scanned parameter.
    XDominates,
    /// `Y` preferred at every scanned parameter.
    YDominates,
}

/// Scans the pair on `scan` and classifies it for the random parameter
/// model.
pub fn rpm_shape(family: UtilityFamily, x: &Lottery, y: &Lottery, scan: &GridSpec) -> Result<RpmShape> {
    let crossings = crate::ordering::indifference_thresholds(family, x, y, scan)?;
    match crossings.as_slice() {
        [] => {
            // no sign change: the sign anywhere outside the zero band decides
            let (lo, hi) = Lottery::union_range([x, y]);
            let band = ZERO_BAND * (hi - lo);
            let gap = scan
                .nodes()
                .into_iter()
                .map(|t| ce_gap(family, t, x, y))
                .find(|g| abs(*g) > band)
                .unwrap_or(0.0);
            if gap < 0.0 {
                Ok(RpmShape::XDominates)
            } else if gap > 0.0 {
                Ok(RpmShape::YDominates)
            } else {
                Err(Error::RpmOrientation("the pair is indifferent at every parameter".into()))
            }
        }
        [t] => {
            let below = ce_gap(family, *t - 0.5 * scan.step, x, y);
            if below < 0.0 {
                Ok(RpmShape::Threshold(*t))
            } else {
                Err(Error::RpmOrientation(format!(
                    "Y is preferred below the threshold {t}; the risky option must come first"
                )))
            }
        }
        many => Err(Error::RpmOrientation(format!(
            "preference flips {} times, at {:?}",
            many.len(),
            many
        ))),
    }
}

/// `(P(X), P(Y))` before trembles, each computed without cancellation.
fn rpm_base(shape: RpmShape, theta: f64, lambda: f64) -> (f64, f64) {
    match shape {
        RpmShape::Threshold(t) => logistic_pair(lambda * (t - theta)),
        RpmShape::XDominates => (1.0, 0.0),
        RpmShape::YDominates => (0.0, 1.0),
    }
}

#[inline]
fn logistic_pair(z: f64) -> (f64, f64) {
    (logistic(z), logistic(-z))
}

/// Probability of choosing `X` over `Y`, trembles included. The random
/// parameter model scans the default grid for the pair's threshold.
pub fn choice_prob_pair(
    kind: ModelKind,
    family: UtilityFamily,
    params: &ModelParams,
    x: &Lottery,
    y: &Lottery,
) -> Result<f64> {
    params.validate()?;
    let rho = if kind == ModelKind::Rpm {
        family.check_support(x)?;
        family.check_support(y)?;
        rpm_base(rpm_shape(family, x, y, &GridSpec::default())?, params.theta, params.lambda).0
    } else {
        logistic(pair_index_gap_scaled(kind, family, params.theta, x, y, params.lambda)?)
    };
    Ok(tremble(rho, params.kappa))
}

/// Logit choice probabilities over a menu. Trembles are defined for pairs
/// only, so `kappa` is ignored here.
pub fn choice_prob_menu(kind: ModelKind, family: UtilityFamily, params: &ModelParams, menu: &Menu) -> Result<Vec<f64>> {
    params.validate()?;
    let ls = menu.lotteries();
    check_menu(family, ls)?;
    let theta = params.theta;
    // scaled index differences against the best option, all <= 0
    let diffs: Vec<f64> = match kind {
        ModelKind::Rpm => {
            return Err(Error::UnsupportedModel(
                "menu probabilities are defined for random utility models only".into(),
            ))
        }
        ModelKind::EuRum => {
            let ces: Vec<f64> = ls.iter().map(|l| ce_finite(family, theta, l)).collect();
            let best = best_index(&ces);
            ls.iter()
                .map(|l| scaled_eu_difference(family, theta, l, &ls[best], params.lambda).map(|d| d.min(0.0)))
                .collect::<Result<_>>()?
        }
        _ => {
            let v = value_index(kind, family, theta, menu)?;
            let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            v.iter().map(|vi| params.lambda * (vi - top)).collect()
        }
    };
    let weights: Vec<f64> = diffs.iter().map(|d| exp(*d)).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

#[derive(Debug, Clone)]
enum Cache {
    Direct,
    Curves(Vec<PremiumCurve>),
    Shapes(Vec<RpmShape>),
}

/// Pair probabilities for one model over a fixed list of pairs, with the
/// expensive per-pair work (premium curves, thresholds) done once up front.
#[derive(Debug, Clone)]
pub struct PairEvaluator {
    kind: ModelKind,
    family: UtilityFamily,
    pairs: Vec<(Lottery, Lottery)>,
    cache: Cache,
}

impl PairEvaluator {
    /// With `exact` set, premia are solved at every call instead of read
    /// from interpolated curves.
    pub fn new(
        kind: ModelKind,
        family: UtilityFamily,
        pairs: Vec<(Lottery, Lottery)>,
        grid: &GridSpec,
        exact: bool,
    ) -> Result<Self> {
        for (x, y) in &pairs {
            family.check_support(x)?;
            family.check_support(y)?;
        }
        let cache = match kind {
            ModelKind::PiRum | ModelKind::CumPiRum if !exact => Cache::Curves(
                pairs
                    .iter()
                    .map(|(x, y)| build_premium_curve(family, x, y, grid))
                    .collect::<Result<_>>()?,
            ),
            ModelKind::Rpm => Cache::Shapes(
                pairs.iter().map(|(x, y)| rpm_shape(family, x, y, grid)).collect::<Result<_>>()?,
            ),
            _ => Cache::Direct,
        };
        Ok(PairEvaluator { kind, family, pairs, cache })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn family(&self) -> UtilityFamily {
        self.family
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pair(&self, j: usize) -> (&Lottery, &Lottery) {
        let (x, y) = &self.pairs[j];
        (x, y)
    }

    /// The threshold of pair `j` for the random parameter model.
    pub fn rpm_shape(&self, j: usize) -> Option<RpmShape> {
        match &self.cache {
            Cache::Shapes(s) => Some(s[j]),
            _ => None,
        }
    }

    /// `(P(X), P(Y))` for pair `j` before trembles. Parameters are assumed
    /// valid and finite.
    pub fn base_probs(&self, j: usize, theta: f64, lambda: f64) -> (f64, f64) {
        let (x, y) = &self.pairs[j];
        match &self.cache {
            Cache::Curves(c) => logistic_pair(-lambda * c[j].eval(theta)),
            Cache::Shapes(s) => rpm_base(s[j], theta, lambda),
            Cache::Direct => match pair_index_gap_scaled(self.kind, self.family, theta, x, y, lambda) {
                Ok(z) => logistic_pair(z),
                Err(_) => (f64::NAN, f64::NAN),
            },
        }
    }

    /// `(P(X), P(Y))` for pair `j` with trembles.
    #[inline]
    pub fn probs(&self, j: usize, params: &ModelParams) -> (f64, f64) {
        let (px, py) = self.base_probs(j, params.theta, params.lambda);
        (tremble(px, params.kappa), tremble(py, params.kappa))
    }

    pub fn prob_x(&self, j: usize, params: &ModelParams) -> f64 {
        self.probs(j, params).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn example_menu() -> Menu {
        Menu::new(vec![
            Lottery::degenerate(4.0),
            Lottery::equiprobable(&[1.0, 10.0]).unwrap(),
            Lottery::equiprobable(&[2.0, 3.0]).unwrap(),
        ])
        .unwrap()
    }

    fn peaked_pair() -> (Lottery, Lottery) {
        (
            Lottery::equiprobable(&[12.0, 9.0, 4.0]).unwrap(),
            Lottery::new(vec![10.0, 4.0], vec![2.0 / 3.0, 1.0 / 3.0]).unwrap(),
        )
    }

    #[test]
    fn parses_kinds() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("probit".parse::<ModelKind>().is_err());
    }

    #[test]
    fn pi_indices_on_worked_menu() {
        let v = value_index(ModelKind::PiRum, UtilityFamily::Crra, 4.0, &example_menu()).unwrap();
        assert_eq!(v[0], 0.0);
        assert!((v[1] + 2.193_703_297).abs() < 1e-6);
        assert!((v[2] + 1.618_796_086).abs() < 1e-6);
        let c = value_index(ModelKind::CumPiRum, UtilityFamily::Crra, 4.0, &example_menu()).unwrap();
        // ranking at gamma = 4 is X1, X3, X2
        let step = premium_finite(UtilityFamily::Crra, 4.0, &example_menu().lotteries()[1], &example_menu().lotteries()[2]).unwrap();
        assert!((c[2] - v[2]).abs() < 1e-12);
        assert!((c[1] - (c[2] - step)).abs() < 1e-12);
    }

    #[test]
    fn trivial_probabilities() {
        let (x, y) = peaked_pair();
        for kind in ModelKind::ALL {
            let zero = ModelParams::new(3.0, 0.0, 0.1).unwrap();
            assert!((choice_prob_pair(kind, UtilityFamily::Crra, &zero, &x, &y).unwrap() - 0.5).abs() < 1e-12);
            let half = ModelParams::new(3.0, 2.0, 0.5).unwrap();
            assert!((choice_prob_pair(kind, UtilityFamily::Crra, &half, &x, &y).unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn eu_rum_washes_out_at_large_gamma() {
        let (x, y) = peaked_pair();
        let p = ModelParams::new(20.0, 1.0, 0.0).unwrap();
        let prob = choice_prob_pair(ModelKind::EuRum, UtilityFamily::Crra, &p, &x, &y).unwrap();
        assert!((prob - 0.5).abs() < 1e-3);
    }

    #[test]
    fn pi_pair_reduces_to_premium_logit() {
        let (x, y) = peaked_pair();
        for t in [-2.0, 1.0, 5.0, 9.0] {
            let p = ModelParams::new(t, 3.0, 0.0).unwrap();
            let prob = choice_prob_pair(ModelKind::PiRum, UtilityFamily::Crra, &p, &x, &y).unwrap();
            let pi = premium_finite(UtilityFamily::Crra, t, &x, &y).unwrap();
            assert!((prob - logistic(-3.0 * pi)).abs() < 1e-12);
        }
    }

    #[test]
    fn menu_probabilities() {
        let m = example_menu();
        let p = ModelParams::new(4.0, 0.0, 0.0).unwrap();
        for kind in [ModelKind::EuRum, ModelKind::CeRum, ModelKind::PiRum, ModelKind::CumPiRum, ModelKind::ConEu] {
            let probs = choice_prob_menu(kind, UtilityFamily::Crra, &p, &m).unwrap();
            assert!(probs.iter().all(|q| (q - 1.0 / 3.0).abs() < 1e-12));
        }
        let sharp = ModelParams::new(4.0, 200.0, 0.0).unwrap();
        let probs = choice_prob_menu(ModelKind::PiRum, UtilityFamily::Crra, &sharp, &m).unwrap();
        assert!(probs[0] > 1.0 - 1e-12);
        assert!(choice_prob_menu(ModelKind::Rpm, UtilityFamily::Crra, &sharp, &m).is_err());
    }

    #[test]
    fn rpm_shapes() {
        let (x, y) = peaked_pair();
        let g = GridSpec::default();
        match rpm_shape(UtilityFamily::Crra, &x, &y, &g).unwrap() {
            RpmShape::Threshold(t) => assert!((t - 4.909_93).abs() < 1e-4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(rpm_shape(UtilityFamily::Crra, &y, &x, &g), Err(Error::RpmOrientation(_))));
        let up = x.shifted(1.0);
        assert_eq!(rpm_shape(UtilityFamily::Crra, &up, &x, &g).unwrap(), RpmShape::XDominates);
        assert_eq!(rpm_shape(UtilityFamily::Crra, &x, &up, &g).unwrap(), RpmShape::YDominates);
    }

    #[test]
    fn evaluator_matches_direct_probabilities() {
        let (x, y) = peaked_pair();
        let g = GridSpec::default();
        for kind in ModelKind::ALL {
            let ev = PairEvaluator::new(kind, UtilityFamily::Crra, vec![(x.clone(), y.clone())], &g, false).unwrap();
            for t in [-1.234, 0.5, 4.567, 7.0] {
                let p = ModelParams::new(t, 2.0, 0.05).unwrap();
                let direct = choice_prob_pair(kind, UtilityFamily::Crra, &p, &x, &y).unwrap();
                assert!((ev.prob_x(0, &p) - direct).abs() < 1e-6, "{kind} {t}");
            }
        }
    }
}
