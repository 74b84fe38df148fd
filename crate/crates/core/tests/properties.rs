use pirum_core::choice::{choice_prob_pair, logistic, ModelKind, ModelParams};
use pirum_core::ordering::classify_pair;
use pirum_core::{
    certainty_equivalent, compensating_premium, premium_limits, GridSpec, Lottery, RiskParam, UtilityFamily,
};
use proptest::prelude::*;

const FAMILIES: [UtilityFamily; 2] = [UtilityFamily::Cara, UtilityFamily::Crra];

fn config() -> ProptestConfig {
    ProptestConfig { cases: 1000, ..ProptestConfig::default() }
}

/// Lotteries on positive outcomes so that both families apply.
fn lottery(max_len: usize) -> impl Strategy<Value = Lottery> {
    prop::collection::vec((0.5f64..50.0, 0.05f64..1.0), 1..=max_len).prop_map(|v| {
        let total: f64 = v.iter().map(|(_, w)| w).sum();
        let (xs, mut ps): (Vec<f64>, Vec<f64>) = v.into_iter().map(|(x, w)| (x, w / total)).unzip();
        let head: f64 = ps[..ps.len() - 1].iter().sum();
        *ps.last_mut().unwrap() = 1.0 - head;
        Lottery::new(xs, ps).unwrap()
    })
}

fn family() -> impl Strategy<Value = UtilityFamily> {
    prop::sample::select(FAMILIES.to_vec())
}

fn span(x: &Lottery, y: &Lottery) -> f64 {
    let (lo, hi) = Lottery::union_range([x, y]);
    (hi - lo).max(1.0)
}

/// Premium by plain bisection on `CE(X + p) - CE(Y)` over `[0, max Y - min X]`,
/// with the roles swapped and the sign flipped when `X` is preferred.
fn bisection_premium(family: UtilityFamily, theta: f64, x: &Lottery, y: &Lottery) -> f64 {
    let target = certainty_equivalent(family, theta, y).unwrap();
    if certainty_equivalent(family, theta, x).unwrap() > target {
        return -bisection_premium(family, theta, y, x);
    }
    let g = |p: f64| certainty_equivalent(family, theta, &x.shifted(p)).unwrap() - target;
    let (mut lo, mut hi) = (0.0, (y.max() - x.min()).max(0.0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * span(x, y) {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn coarse_grid(start: f64) -> GridSpec {
    GridSpec::new(start, 20.0, 0.05).unwrap()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn premium_antisymmetry_sign_and_limits(f in family(), x in lottery(4), y in lottery(4), theta in -20.0f64..20.0) {
        let s = span(&x, &y);
        let p = compensating_premium(f, theta, &x, &y).unwrap();
        let q = compensating_premium(f, theta, &y, &x).unwrap();
        prop_assert!((p + q).abs() <= 1e-10 * s, "{p} {q}");
        let gap = certainty_equivalent(f, theta, &y).unwrap() - certainty_equivalent(f, theta, &x).unwrap();
        if gap.abs() > 1e-9 * s {
            prop_assert_eq!(p > 0.0, gap > 0.0);
        }
        let (at_zero, at_inf) = premium_limits(&x, &y);
        prop_assert!((compensating_premium(f, 0.0, &x, &y).unwrap() - at_zero).abs() <= 1e-12 * s);
        prop_assert_eq!(compensating_premium(f, RiskParam::Infinite, &x, &y).unwrap(), at_inf);
        let large = match f {
            UtilityFamily::Cara => 1e6 / s,
            UtilityFamily::Crra => 1e6,
        };
        prop_assert!((compensating_premium(f, large, &x, &y).unwrap() - at_inf).abs() <= 2e-3 * s);
    }

    #[test]
    fn cara_premium_is_ce_difference(x in lottery(5), y in lottery(5), alpha in -20.0f64..20.0) {
        let f = UtilityFamily::Cara;
        let p = compensating_premium(f, alpha, &x, &y).unwrap();
        let d = certainty_equivalent(f, alpha, &y).unwrap() - certainty_equivalent(f, alpha, &x).unwrap();
        prop_assert!((p - d).abs() <= 1e-10 * span(&x, &y));
    }

    #[test]
    fn premium_matches_bisection(f in family(), x in lottery(4), y in lottery(4), theta in -20.0f64..20.0) {
        let p = compensating_premium(f, theta, &x, &y).unwrap();
        let b = bisection_premium(f, theta, &x, &y);
        prop_assert!((p - b).abs() <= 1e-8, "{p} {b}");
    }

    #[test]
    fn pi_and_ce_models_agree_under_cara(
        x in lottery(4),
        y in lottery(4),
        alpha in -20.0f64..20.0,
        lambda in 0.0f64..5.0,
        kappa in 0.0f64..1.0,
    ) {
        let params = ModelParams::new(alpha, lambda, kappa).unwrap();
        let f = UtilityFamily::Cara;
        let pi = choice_prob_pair(ModelKind::PiRum, f, &params, &x, &y).unwrap();
        let ce = choice_prob_pair(ModelKind::CeRum, f, &params, &x, &y).unwrap();
        prop_assert!((pi - ce).abs() <= 1e-10);
    }

    #[test]
    fn pi_model_is_logistic_in_the_premium(f in family(), x in lottery(4), y in lottery(4), theta in -20.0f64..20.0, lambda in 0.0f64..5.0) {
        let params = ModelParams::new(theta, lambda, 0.0).unwrap();
        let p = choice_prob_pair(ModelKind::PiRum, f, &params, &x, &y).unwrap();
        let pi = compensating_premium(f, theta, &x, &y).unwrap();
        prop_assert!((p - logistic(-lambda * pi)).abs() <= 1e-12);
    }

    #[test]
    fn ce_translation_and_scale_invariance(x in lottery(5), c in -30.0f64..30.0, k in 0.1f64..10.0, theta in -20.0f64..20.0) {
        let cara = UtilityFamily::Cara;
        let moved = certainty_equivalent(cara, theta, &x.shifted(c)).unwrap();
        prop_assert!((moved - certainty_equivalent(cara, theta, &x).unwrap() - c).abs() <= 1e-10 * (1.0 + x.max().abs() + c.abs()));
        let crra = UtilityFamily::Crra;
        let scaled = certainty_equivalent(crra, theta, &x.scaled(k).unwrap()).unwrap();
        prop_assert!((scaled - k * certainty_equivalent(crra, theta, &x).unwrap()).abs() <= 1e-10 * k * x.max());
    }

    #[test]
    fn ce_bounds_and_risk_neutral_mean(f in family(), x in lottery(5), theta in -20.0f64..20.0) {
        let ce = certainty_equivalent(f, theta, &x).unwrap();
        prop_assert!(x.min() <= ce && ce <= x.max());
        prop_assert!((certainty_equivalent(f, 0.0, &x).unwrap() - x.mean()).abs() <= 1e-12 * x.max());
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn binary_pairs_with_narrower_safe_option_are_pi_ordered(
        f in family(),
        p in 0.05f64..0.95,
        lo_x in 0.5f64..20.0,
        width_x in 1.0f64..30.0,
        frac in 0.0f64..0.95,
        shift in 0.0f64..1.0,
    ) {
        let (a, b) = (lo_x, lo_x + width_x);
        let width_y = frac * width_x;
        let c = a + shift * (width_x - width_y);
        let d = c + width_y;
        prop_assume!(d - c < b - a);
        let x = Lottery::binary(b, a, p).unwrap();
        let y = Lottery::binary(d, c, p).unwrap();
        let v = classify_pair(f, &x, &y, &coarse_grid(-20.0), None).unwrap();
        prop_assert!(v.pi_ordered && v.omega_ordered, "{x} | {y}: {v:?}");
    }

    #[test]
    fn degenerate_safe_option_is_pi_ordered(f in family(), x in lottery(4), y in 0.5f64..50.0) {
        let v = classify_pair(f, &x, &Lottery::degenerate(y), &coarse_grid(-20.0), None).unwrap();
        prop_assert!(v.pi_ordered, "{x} vs {y}: {v:?}");
    }

    #[test]
    fn independent_spreads_are_pi_ordered(
        f in family(),
        y in lottery(3),
        spread in prop::collection::vec((0.1f64..10.0, 0.1f64..1.0), 1..=2),
    ) {
        // a two-point zero-mean noise per entry, summed independently
        let mut s_out = vec![0.0];
        let mut s_prob = vec![1.0];
        for (size, tilt) in spread {
            let (up, down) = (size * tilt, size);
            let q = down / (up + down);
            let mut out = Vec::new();
            let mut prob = Vec::new();
            for (o, w) in s_out.iter().zip(&s_prob) {
                out.push(o + up);
                prob.push(w * q);
                out.push(o - down);
                prob.push(w * (1.0 - q));
            }
            s_out = out;
            s_prob = prob;
        }
        let mut xo = Vec::new();
        let mut xp = Vec::new();
        for (yo, yw) in y.iter() {
            for (so, sw) in s_out.iter().zip(&s_prob) {
                xo.push(yo + so);
                xp.push(yw * sw);
            }
        }
        let floor = xo.iter().copied().fold(f64::INFINITY, f64::min);
        let lift = if floor <= 0.5 { 0.5 - floor } else { 0.0 };
        let x = Lottery::new(xo.iter().map(|o| o + lift).collect(), xp).unwrap();
        let y = y.shifted(lift);
        let start = match f {
            UtilityFamily::Cara => -20.0,
            UtilityFamily::Crra => 0.0,
        };
        let v = classify_pair(f, &x, &y, &coarse_grid(start), None).unwrap();
        prop_assert!(v.pi_ordered, "{x} | {y}: {v:?}");
    }

    #[test]
    fn pi_model_is_monotone_on_ordered_pairs(
        f in family(),
        x in lottery(3),
        y in lottery(2),
        lambda in 0.01f64..5.0,
        kappa in 0.0f64..0.49,
    ) {
        let grid = coarse_grid(-20.0);
        let v = classify_pair(f, &x, &y, &grid, None).unwrap();
        prop_assume!(v.pi_ordered);
        for kind in [ModelKind::PiRum, ModelKind::CumPiRum] {
            let probs: Vec<f64> = grid
                .nodes()
                .into_iter()
                .map(|t| choice_prob_pair(kind, f, &ModelParams::new(t, lambda, kappa).unwrap(), &x, &y).unwrap())
                .collect();
            prop_assert!(probs.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{kind}");
        }
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn pchip_preserves_monotone_data(steps in prop::collection::vec((0.01f64..2.0, 0.0f64..3.0), 2..12), q in 0.0f64..1.0) {
        let mut xs = vec![0.0];
        let mut ys = vec![0.0];
        for (dx, dy) in &steps {
            xs.push(xs.last().unwrap() + dx);
            ys.push(ys.last().unwrap() + dy);
        }
        let last = *xs.last().unwrap();
        let interp = pirum_core::pchip::Pchip::new(xs.clone(), ys.clone()).unwrap();
        let samples: Vec<f64> = (0..=200).map(|i| interp.eval(last * i as f64 / 200.0)).collect();
        prop_assert!(samples.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        let t = q * last;
        let k = xs.iter().rposition(|&x| x <= t).unwrap();
        let v = interp.eval(t);
        prop_assert!(v >= ys[k] - 1e-12 && v <= ys[(k + 1).min(ys.len() - 1)] + 1e-12);
        prop_assert_eq!(interp.eval(last + 5.0), *ys.last().unwrap());
    }

    #[test]
    fn menu_probabilities_sum_to_one(
        f in family(),
        menu in prop::collection::vec(lottery(3), 2..5),
        theta in -20.0f64..20.0,
        lambda in 0.0f64..10.0,
    ) {
        let menu = pirum_core::Menu::new(menu).unwrap();
        let params = ModelParams::new(theta, lambda, 0.0).unwrap();
        for kind in [ModelKind::EuRum, ModelKind::CeRum, ModelKind::PiRum, ModelKind::CumPiRum, ModelKind::ConEu] {
            let p = pirum_core::choice_prob_menu(kind, f, &params, &menu).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
