use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use fdp_core::compose::{blackwell_chain_check, compose_factors, gdp_compose, grid_for, tensor_curves, Factor, PairedCurve};
use fdp_core::counterexample::Counterexample;
use fdp_core::curves::gaussian_tradeoff;
use fdp_core::filters::{fdp_filter, gdp_filter};
use fdp_core::profiles::{epsilon_delta, profile_from_pair, profile_to_tradeoff};
use fdp_core::{DensityPair, GammaGrid};

fn gaussian_budget(mu: f64) -> fdp_core::PrivacyProfile {
    let pair = DensityPair::gaussian(mu, 1.0).unwrap();
    profile_from_pair(&pair, &grid_for(&[pair])).unwrap()
}

#[test]
fn gaussian_tensor_is_gaussian() {
    let g1 = PairedCurve::from_factor(&Factor::Gaussian { mu: 1.0 }).unwrap();
    let prod = tensor_curves(&g1, &g1).unwrap();
    assert!(prod.curve.sup_distance(&gaussian_tradeoff(2f64.sqrt()).unwrap()) <= 2e-3);
    let three = tensor_curves(&g1, &prod).unwrap();
    assert!(three.curve.sup_distance(&gaussian_tradeoff(3f64.sqrt()).unwrap()) <= 2e-3);
    assert_eq!(gdp_compose(&[3.0, 4.0]).unwrap(), 5.0);
}

#[test]
fn composed_profile_matches_gaussian_closed_form() {
    let mus = [0.5, 0.8, 0.3];
    let grid = GammaGrid::standard();
    let factors: Vec<Factor> = mus.iter().map(|&mu| Factor::Gaussian { mu }).collect();
    let h = compose_factors(&factors, &grid).unwrap().base;
    let total = gdp_compose(&mus).unwrap();
    let pair = DensityPair::gaussian(total, 1.0).unwrap();
    for eps in [0.0, 0.3, 1.0, 2.5] {
        let want = pair.hockey_stick_closed_form(f64::exp(eps));
        let got = epsilon_delta(&h, eps).unwrap();
        assert!((got - want).abs() < 2e-5, "ε={eps}: {got} vs {want}");
    }
}

#[test]
fn fdp_and_gdp_filters_agree_on_gaussian_sequences() {
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    for _ in 0..25 {
        let mu_b = rng.random_range(0.5..2.5);
        let mus: Vec<f64> = (0..rng.random_range(1..5)).map(|_| rng.random_range(0.1..1.5)).collect();
        let factors: Vec<Factor> = mus.iter().map(|&mu| Factor::Gaussian { mu }).collect();
        let f = fdp_filter(&gaussian_budget(mu_b), &factors).unwrap();
        let g = gdp_filter(mu_b, &mus).unwrap();
        assert_eq!(f.decision, g.decision, "μ_B={mu_b} μ={mus:?}");
    }
}

#[test]
fn chain_predicate() {
    let family: Vec<_> = [0.2, 0.7, 1.0, 2.0].iter().map(|&m| gaussian_tradeoff(m).unwrap()).collect();
    let report = blackwell_chain_check(&family, 1e-9).unwrap();
    assert!(report.chain && report.violations.is_empty());

    let ce = Counterexample::standard().unwrap();
    let branches = [profile_to_tradeoff(&ce.branch_a).unwrap(), profile_to_tradeoff(&ce.branch_b).unwrap()];
    let report = blackwell_chain_check(&branches, 1e-9).unwrap();
    assert!(!report.chain);
    assert_eq!(report.violations.len(), 1);
    assert_eq!(report.violations[0].2.len(), 1);
}
