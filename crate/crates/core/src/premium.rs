//! Compensating premia: the sure amount that must be added to `X` so that
//! it is valued exactly like `Y`.
//!
//! The equation `E[u(X + p)] = E[u(Y)]` is solved in certainty-equivalent
//! units, `CE(X + p) - CE(Y) = 0`, which keeps the residual on the money
//! scale for every risk parameter.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lottery::Lottery;
use crate::math::{abs, round};
use crate::pchip::Pchip;
use crate::root::{brent_root, RootOptions};
use crate::utility::{ce_finite, ce_shifted, RiskParam, UtilityFamily};

/// An arithmetic grid of risk parameters, `start + i * step` for
/// `i = 0..=n` with `start + n * step == stop` up to rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { start: -20.0, stop: 20.0, step: 0.01 }
    }
}

impl GridSpec {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        let g = GridSpec { start, stop, step };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.start.is_finite()
            && self.stop.is_finite()
            && self.step.is_finite()
            && self.step > 0.0
            && self.stop > self.start;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "grid {}..{} step {} is not ascending",
                self.start, self.stop, self.step
            )))
        }
    }

    /// Number of intervals.
    pub fn intervals(&self) -> usize {
        round((self.stop - self.start) / self.step).max(1.0) as usize
    }

    pub fn len(&self) -> usize {
        self.intervals() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.intervals() {
            self.stop
        } else {
            self.start + i as f64 * self.step
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// The same range with `factor` times as many intervals.
    pub fn refined(&self, factor: usize) -> GridSpec {
        GridSpec { start: self.start, stop: self.stop, step: self.step / factor.max(1) as f64 }
    }
}

/// `(E[Y] - E[X], min Y - min X)`: the premium for a risk-neutral agent and
/// for the infinitely risk-averse one.
pub fn premium_limits(x: &Lottery, y: &Lottery) -> (f64, f64) {
    (y.mean() - x.mean(), y.min() - x.min())
}

/// The compensating premium of `X` relative to `Y`. Positive when `Y` is
/// preferred, negative when `X` is, zero at indifference, and
/// antisymmetric in its arguments.
pub fn compensating_premium(
    family: UtilityFamily,
    theta: impl Into<RiskParam>,
    x: &Lottery,
    y: &Lottery,
) -> Result<f64> {
    family.check_support(x)?;
    family.check_support(y)?;
    match theta.into() {
        RiskParam::Infinite => Ok(premium_limits(x, y).1),
        RiskParam::Finite(t) if !t.is_finite() => {
            Err(Error::InvalidParameter(format!("risk parameter {t} is not finite")))
        }
        RiskParam::Finite(t) => premium_finite(family, t, x, y),
    }
}

/// Premium for a finite parameter on lotteries already checked against the
/// support.
pub(crate) fn premium_finite(family: UtilityFamily, theta: f64, x: &Lottery, y: &Lottery) -> Result<f64> {
    if theta == 0.0 {
        return Ok(premium_limits(x, y).0);
    }
    let ce_x = ce_finite(family, theta, x);
    let ce_y = ce_finite(family, theta, y);
    if family == UtilityFamily::Cara {
        // translation invariance turns the equation into a difference
        return Ok(ce_y - ce_x);
    }
    if ce_x <= ce_y {
        solve_nonnegative(family, theta, x, y, ce_x, ce_y)
    } else {
        solve_nonnegative(family, theta, y, x, ce_y, ce_x).map(|p| -p)
    }
}

/// Solves `CE(X + p) = CE(Y)` for `p >= 0` given `CE(X) <= CE(Y)`.
fn solve_nonnegative(
    family: UtilityFamily,
    theta: f64,
    x: &Lottery,
    y: &Lottery,
    ce_x: f64,
    ce_y: f64,
) -> Result<f64> {
    if ce_x == ce_y {
        return Ok(0.0);
    }
    let span = {
        let (lo, hi) = Lottery::union_range([x, y]);
        (hi - lo).max(f64::MIN_POSITIVE)
    };
    let g = |p: f64| ce_shifted(family, theta, x, p) - ce_y;
    let mut lo = (y.min() - x.max()).max(0.0);
    let mut hi = y.max() - x.min();
    let mut g_lo = if lo == 0.0 { ce_x - ce_y } else { g(lo) };
    if g_lo > 0.0 {
        lo = 0.0;
        g_lo = ce_x - ce_y;
    }
    if g_lo == 0.0 {
        return Ok(lo);
    }
    let mut g_hi = g(hi);
    let mut width = span;
    while g_hi < 0.0 {
        if width > 1e6 * span {
            return Err(Error::NonConvergence(format!(
                "premium bracket exceeded {} at risk parameter {theta}",
                1e6 * span
            )));
        }
        lo = hi;
        g_lo = g_hi;
        hi += width;
        width *= 2.0;
        g_hi = g(hi);
    }
    let opts = RootOptions { xtol: 1e-13 * span, ftol: 1e-12 * span, ..RootOptions::default() };
    brent_root(g, lo, hi, g_lo, g_hi, opts)
}

/// Premia on a grid of risk parameters, interpolated monotonically between
/// nodes and held constant beyond the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct PremiumCurve {
    family: UtilityFamily,
    grid: GridSpec,
    interp: Pchip,
}

impl PremiumCurve {
    pub fn family(&self) -> UtilityFamily {
        self.family
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn thetas(&self) -> &[f64] {
        self.interp.nodes()
    }

    pub fn values(&self) -> &[f64] {
        self.interp.values()
    }

    /// Premium at the first grid node.
    pub fn left_limit(&self) -> f64 {
        self.values()[0]
    }

    /// Premium at the last grid node.
    pub fn right_limit(&self) -> f64 {
        *self.values().last().unwrap()
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.interp.eval(theta)
    }
}

/// Solves the premium at every node of `grid`.
pub fn build_premium_curve(
    family: UtilityFamily,
    x: &Lottery,
    y: &Lottery,
    grid: &GridSpec,
) -> Result<PremiumCurve> {
    grid.validate()?;
    family.check_support(x)?;
    family.check_support(y)?;
    let thetas = grid.nodes();
    let values = thetas
        .iter()
        .map(|&t| premium_finite(family, t, x, y))
        .collect::<Result<Vec<_>>>()?;
    Ok(PremiumCurve { family, grid: *grid, interp: Pchip::new(thetas, values)? })
}

pub fn interpolate_premium(curve: &PremiumCurve, theta: f64) -> f64 {
    curve.eval(theta)
}

/// `|CE(X + p) - CE(Y)|`, the residual of a candidate premium.
pub fn premium_residual(family: UtilityFamily, theta: f64, x: &Lottery, y: &Lottery, p: f64) -> f64 {
    abs(ce_shifted(family, theta, x, p) - ce_finite(family, theta, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utility::certainty_equivalent;
    use alloc::vec;

    fn peaked_pair() -> (Lottery, Lottery) {
        (
            Lottery::equiprobable(&[12.0, 9.0, 4.0]).unwrap(),
            Lottery::new(vec![10.0, 4.0], vec![2.0 / 3.0, 1.0 / 3.0]).unwrap(),
        )
    }

    #[test]
    fn worked_example_premia() {
        let x1 = Lottery::degenerate(4.0);
        let x2 = Lottery::equiprobable(&[1.0, 10.0]).unwrap();
        let x3 = Lottery::equiprobable(&[2.0, 3.0]).unwrap();
        let crra = UtilityFamily::Crra;
        let p = |t: f64, a: &Lottery| compensating_premium(crra, t, a, &x1).unwrap();
        assert!((p(4.0, &x2) - 2.193_703_297).abs() < 1e-6);
        assert!((p(4.0, &x3) - 1.618_796_086).abs() < 1e-6);
        assert!((p(2.0, &x2) - 1.424_428_901).abs() < 1e-6);
        assert!((p(2.0, &x3) - 1.561_552_813).abs() < 1e-6);
    }

    #[test]
    fn limits_and_special_parameters() {
        let (x, y) = peaked_pair();
        let (p0, pinf) = premium_limits(&x, &y);
        assert!((p0 + 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(pinf, 0.0);
        for fam in [UtilityFamily::Cara, UtilityFamily::Crra] {
            assert_eq!(compensating_premium(fam, 0.0, &x, &y).unwrap(), p0);
            assert_eq!(compensating_premium(fam, RiskParam::Infinite, &x, &y).unwrap(), pinf);
        }
        let narrower_x = Lottery::equiprobable(&[11.0, 9.0, 4.0]).unwrap();
        let (m, w) = premium_limits(&narrower_x, &y);
        assert!(m.abs() < 1e-12 && w == 0.0);
    }

    #[test]
    fn shift_gives_constant_premium() {
        let (x, _) = peaked_pair();
        let y = x.shifted(2.0);
        for fam in [UtilityFamily::Cara, UtilityFamily::Crra] {
            for t in [-3.0, 0.5, 4.0, 15.0] {
                let p = compensating_premium(fam, t, &x, &y).unwrap();
                assert!((p - 2.0).abs() < 1e-10, "{fam} {t} {p}");
            }
        }
    }

    #[test]
    fn residual_is_small_and_antisymmetric() {
        let (x, y) = peaked_pair();
        for t in [-20.0, -2.0, 1.0, 4.9, 6.0, 20.0] {
            let p = compensating_premium(UtilityFamily::Crra, t, &x, &y).unwrap();
            let q = compensating_premium(UtilityFamily::Crra, t, &y, &x).unwrap();
            assert!((p + q).abs() < 1e-10);
            let r = if p >= 0.0 {
                premium_residual(UtilityFamily::Crra, t, &x, &y, p)
            } else {
                premium_residual(UtilityFamily::Crra, t, &y, &x, -p)
            };
            assert!(r < 1e-10 * 8.0, "{t}: {r}");
        }
    }

    #[test]
    fn cara_premium_is_ce_difference() {
        let (x, y) = peaked_pair();
        for a in [-1.0, 0.3, 0.48, 2.0] {
            let p = compensating_premium(UtilityFamily::Cara, a, &x, &y).unwrap();
            let d = certainty_equivalent(UtilityFamily::Cara, a, &y).unwrap()
                - certainty_equivalent(UtilityFamily::Cara, a, &x).unwrap();
            assert!((p - d).abs() < 1e-10);
        }
    }

    #[test]
    fn curve_interpolates_near_solver() {
        let (x, y) = peaked_pair();
        let grid = GridSpec::new(0.0, 10.0, 0.01).unwrap();
        let c = build_premium_curve(UtilityFamily::Crra, &x, &y, &grid).unwrap();
        assert_eq!(c.thetas().len(), 1001);
        let direct = compensating_premium(UtilityFamily::Crra, 6.005, &x, &y).unwrap();
        assert!((c.eval(6.005) - direct).abs() < 1e-4);
        assert_eq!(c.eval(25.0), c.right_limit());
        assert_eq!(c.eval(c.thetas()[300]), c.values()[300]);
    }

    #[test]
    fn grid_nodes_hit_endpoints() {
        let g = GridSpec::default();
        assert_eq!(g.len(), 4001);
        assert_eq!(g.node(0), -20.0);
        assert_eq!(g.node(4000), 20.0);
        assert!((g.node(2000)).abs() < 1e-12);
        assert!(GridSpec::new(1.0, 0.0, 0.1).is_err());
    }
}
