use proptest::prelude::*;

use fdp_core::accountant::{budget_quantum, DeductionMode, GdpAccountant, RegimeConfig, Streams};
use fdp_core::clt::{band_lower, band_upper, clt_band, CltParameters};
use fdp_core::compose::grid_for;
use fdp_core::curves::{gaussian_tradeoff, invert, subsampled_gaussian_minus, subsampled_gaussian_plus, symmetrize};
use fdp_core::filters::{gdp_delta, gdp_to_dp, rdp_to_dp, rdp_to_dp_tight};
use fdp_core::plrv::{get_approx, inv_budg, Regime};
use fdp_core::profiles::{profile_to_tradeoff, tradeoff_to_profile};
use fdp_core::{DensityPair, Tolerances, TradeoffCurve};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, ..ProptestConfig::default() }
}

fn assert_tradeoff(f: &TradeoffCurve) {
    f.validate(&Tolerances::default()).unwrap();
    for (a, v) in f.points() {
        assert!(v <= 1.0 - a + 1e-12 && v >= -1e-12, "f({a}) = {v}");
    }
    assert!(f.values().windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn sampled_curves_are_tradeoff_functions(q in 0.0f64..=1.0, mu in 0.0f64..4.0) {
        assert_tradeoff(&gaussian_tradeoff(mu).unwrap());
        assert_tradeoff(&subsampled_gaussian_minus(q, mu).unwrap());
        assert_tradeoff(&subsampled_gaussian_plus(q, mu).unwrap());
    }

    #[test]
    fn gaussian_family_is_ordered(a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (f, g) = (gaussian_tradeoff(lo).unwrap(), gaussian_tradeoff(hi).unwrap());
        for (x, y) in f.values().iter().zip(g.values()) {
            prop_assert!(x + 1e-12 >= *y);
        }
    }

    #[test]
    fn inverse_swaps_the_subsampled_pair(q in 0.05f64..0.95, mu in 0.2f64..3.0) {
        let minus = subsampled_gaussian_minus(q, mu).unwrap();
        let plus = subsampled_gaussian_plus(q, mu).unwrap();
        prop_assert!(invert(&minus).sup_distance(&plus) < 1e-3);
        let s = symmetrize(&minus);
        prop_assert!(s.is_symmetric(1e-3));
        for (x, y) in s.values().iter().zip(minus.values()) {
            prop_assert!(*x <= y + 1e-9);
        }
    }

    #[test]
    fn profiles_are_valid_and_round_trip(q in 0.0f64..=1.0, mu in 0.1f64..3.0) {
        let f = subsampled_gaussian_minus(q, mu).unwrap();
        let grid = grid_for(&[DensityPair::mixture(q, mu, 1.0).unwrap()]);
        let h = tradeoff_to_profile(&f, &grid);
        for (&g, &v) in h.gammas().iter().zip(h.values()) {
            prop_assert!(v >= (1.0 - g).max(0.0) - 1e-12 && v <= 1.0 + 1e-12);
        }
        prop_assert!(h.values().windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let back = profile_to_tradeoff(&h).unwrap();
        prop_assert!(back.sup_distance(&f) < 1e-3);
    }
}

proptest! {
    #![proptest_config(cases(256))]

    #[test]
    fn inv_budg_inverts_get_approx(
        full in any::<bool>(),
        q in 0.001f64..=1.0,
        sigma in 0.5f64..8.0,
        budget in 1e-6f64..2.0,
    ) {
        let regime = if full { Regime::Full } else { Regime::Small };
        let mu = inv_budg(regime, q, sigma, budget).unwrap();
        let back = get_approx(regime, q, sigma, mu).unwrap();
        prop_assert!(((back - budget) / budget).abs() < 1e-9, "{back} vs {budget}");
    }

    #[test]
    fn get_approx_increases_in_mu(q in 0.001f64..=1.0, sigma in 0.5f64..8.0, a in 0.0f64..3.0, b in 0.0f64..3.0) {
        for regime in [Regime::Small, Regime::Full] {
            let (x, y) = (get_approx(regime, q, sigma, a).unwrap(), get_approx(regime, q, sigma, b).unwrap());
            prop_assert_eq!(a <= b, x <= y);
        }
    }

    #[test]
    fn gdp_epsilon_inverts_delta(mu in 0.01f64..5.0, log_delta in -12.0f64..-1.0) {
        let delta = 10f64.powf(log_delta);
        let eps = gdp_to_dp(mu, delta).unwrap();
        prop_assert!(eps >= 0.0);
        let d = gdp_delta(mu, eps);
        prop_assert!(d <= delta * (1.0 + 1e-9));
        if eps > 0.0 {
            prop_assert!((d - delta).abs() <= 1e-9 * delta);
        }
    }

    #[test]
    fn tight_conversion_never_exceeds_standard(order in 1.01f64..256.0, rdp in 0.0f64..10.0, log_delta in -12.0f64..-0.5) {
        let delta = 10f64.powf(log_delta);
        let t = rdp_to_dp_tight(order, rdp, delta).unwrap();
        prop_assert!(t >= 0.0 && t <= rdp_to_dp(order, rdp, delta).unwrap());
    }

    #[test]
    fn band_brackets_the_gaussian(mu in 0.0f64..4.0, delta in 0.0f64..0.5, a in 0.0f64..=1.0) {
        let (lo, hi) = (band_lower(mu, delta, a), band_upper(mu, delta, a));
        let g = fdp_core::curves::gaussian_value(mu, a);
        prop_assert!(lo <= g + 1e-15 && g <= hi + 1e-15);
    }

    #[test]
    fn quantum_multiples_are_exact(budget in 1e-9f64..1e3, k in 0u64..1_000_000) {
        let u = budget_quantum(budget);
        let d = (k as f64 * u).min(budget);
        prop_assert_eq!((budget - d) + d, budget);
    }
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn clt_width_is_monotone(v in 0.01f64..4.0, r1 in 0.0f64..0.36, r2 in 0.0f64..0.36, k1 in 0.0f64..0.25, k2 in 0.0f64..0.25) {
        let sv = v.sqrt();
        let width = |r: f64, k: f64| {
            let p = CltParameters { rho: r * sv, kappa: k * v, ..CltParameters::new(v / 2.0, v / 2.0, v) };
            clt_band(&p).unwrap()
        };
        let (a, b) = (width(r1.min(r2), k1.min(k2)), width(r1.max(r2), k1.max(k2)));
        prop_assert!(a.delta <= b.delta);
        prop_assert!(a.width() <= b.width() + 1e-12);
        prop_assert!((a.mu - sv).abs() <= 1e-15 * sv);
    }

    #[test]
    fn conservation_holds_every_step(
        seed in any::<u64>(),
        budget in 1e-4f64..0.2,
        lazy in any::<bool>(),
        sched in proptest::collection::vec((0.0f64..=0.1, 0.5f64..3.0, 0.1f64..2.0), 1..200),
    ) {
        let mode = if lazy { DeductionMode::Lazy } else { DeductionMode::Eager };
        let mut acc = GdpAccountant::new(RegimeConfig::small(0.1, 0.5), budget, mode).unwrap();
        let mut streams = Streams::new(seed);
        let grads = vec![vec![1.0, 1.0]; 4];
        for &(q, sigma, clip) in &sched {
            let out = acc.step(q, sigma, clip, &grads, &mut streams).unwrap();
            prop_assert_eq!(acc.conservation_error(), 0.0);
            prop_assert!(acc.remaining() >= 0.0);
            if out.halted {
                break;
            }
        }
        acc.flush();
        prop_assert_eq!(acc.spent() + acc.remaining(), budget);
    }
}
