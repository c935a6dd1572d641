//! One PASS/FAIL line per acceptance criterion. Scenario criteria run the
//! `fdp` binary on the checked-in configs; the rest call the library.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::Value;

use fdp_core::accountant::{DeductionMode, GdpAccountant, IndividualAccountant, RegimeConfig, Streams};
use fdp_core::clt::{clt_band, CltParameters};
use fdp_core::compose::{blackwell_chain_check, grid_for, tensor_curves, Factor, PairedCurve};
use fdp_core::counterexample::Counterexample;
use fdp_core::curves::{gaussian_tradeoff, subsampled_gaussian_minus, subsampled_gaussian_plus};
use fdp_core::filters::{fdp_filter, gdp_filter};
use fdp_core::io::read_table_file;
use fdp_core::plrv::exp_moment_identities;
use fdp_core::profiles::{profile_from_pair, profile_to_tradeoff, tradeoff_to_profile};
use fdp_core::{DensityPair, TradeoffCurve};

type Check = Result<(bool, String), String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Check,
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

/// Runs a subcommand on a scenario file and returns its output directory.
fn fdp(cmd: &str, cfg: &str) -> Result<tempfile::TempDir, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_fdp"))
        .args([cmd, "--config"])
        .arg(scenario(cfg))
        .arg("--out")
        .arg(dir.path())
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`fdp {cmd}` on {cfg} exited with {:?}: {}{}",
            out.status.code(),
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(dir)
}

fn json(dir: &tempfile::TempDir, name: &str) -> Result<Value, String> {
    let bytes = std::fs::read(dir.path().join(name)).map_err(|e| e.to_string())?;
    serde_json::from_slice(&bytes).map_err(|e| e.to_string())
}

fn num(v: &Value, key: &str) -> Result<f64, String> {
    v[key].as_f64().ok_or_else(|| format!("missing number `{key}`"))
}

fn err(e: impl ToString) -> String {
    e.to_string()
}

fn gaussian_identity() -> Check {
    let g1 = PairedCurve::from_factor(&Factor::Gaussian { mu: 1.0 }).map_err(err)?;
    let prod = tensor_curves(&g1, &g1).map_err(err)?;
    let d = prod.curve.sup_distance(&gaussian_tradeoff(2f64.sqrt()).map_err(err)?);
    Ok((d <= 2e-3, format!("sup |G1⊗G1 − G√2| = {d:.3e} (≤ 2e-3)")))
}

fn random_curve(rng: &mut ChaCha20Rng) -> Result<(TradeoffCurve, Vec<DensityPair>), String> {
    let member = |rng: &mut ChaCha20Rng| -> Result<(TradeoffCurve, DensityPair), String> {
        let mu = rng.random_range(0.2..3.0);
        let q = rng.random_range(0.05..1.0);
        Ok(match rng.random_range(0..3) {
            0 => (gaussian_tradeoff(mu).map_err(err)?, DensityPair::gaussian(mu, 1.0).map_err(err)?),
            1 => (subsampled_gaussian_minus(q, mu).map_err(err)?, DensityPair::mixture(q, mu, 1.0).map_err(err)?),
            _ => (subsampled_gaussian_plus(q, mu).map_err(err)?, DensityPair::mixture(q, mu, 1.0).map_err(err)?.swapped()),
        })
    };
    let (f, p) = member(rng)?;
    if rng.random_bool(0.5) {
        return Ok((f, vec![p]));
    }
    let (g, p2) = member(rng)?;
    let w = rng.random_range(0.1..0.9);
    let alpha = f.alpha().to_vec();
    let values = f.values().iter().zip(g.values()).map(|(a, b)| w * a + (1.0 - w) * b).collect();
    Ok((TradeoffCurve::from_samples(alpha.into(), values).map_err(err)?, vec![p, p2]))
}

fn duality_round_trip() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (f, pairs) = random_curve(&mut rng)?;
        // A convex mixture has no more privacy loss than its worst member.
        let grid = pairs.iter().map(|p| grid_for(&[*p])).max_by(|a, b| a.max().total_cmp(&b.max())).unwrap();
        let back = profile_to_tradeoff(&tradeoff_to_profile(&f, &grid)).map_err(err)?;
        worst = worst.max(back.sup_distance(&f));
    }
    Ok((worst <= 1e-3, format!("max sup error of f → H → f over 20 curves = {worst:.3e} (≤ 1e-3)")))
}

fn counterexample() -> Check {
    let d = fdp("counterexample", "counterexample.cfg")?;
    let w = json(&d, "witness.json")?;
    let (g0, gap, sym) = (num(&w, "gamma0")?, num(&w, "gap")?, num(&w, "sym_gap")?);
    let ok = (1.34..=1.39).contains(&g0) && gap > 1e-4 && sym > 1e-4;
    Ok((ok, format!("γ₀ = {g0:.6} ∈ [1.34, 1.39], gap = {gap:.4e}, symmetrized gap = {sym:.4e} (> 1e-4)")))
}

fn moments() -> Check {
    let header = ["q", "sigma", "rel_err_mean", "rel_err_var", "ratio_mean_over_var"];
    let d0 = fdp("moments", "moments_regime0.cfg")?;
    let d1 = fdp("moments", "moments_regime1.cfg")?;
    let r0 = read_table_file(&d0.path().join("moments_regime0.csv"), &header).map_err(err)?;
    let r1 = read_table_file(&d1.path().join("moments_regime1.csv"), &header).map_err(err)?;
    let at = |rows: &[Vec<f64>], q: f64, s: f64| -> Result<Vec<f64>, String> {
        rows.iter().find(|r| r[0] == q && r[1] == s).cloned().ok_or_else(|| format!("no row for q={q}, σ={s}"))
    };
    let base = at(&r0, 0.01, 1.0)?;
    let mut ok = base[2] <= 0.05 && base[3] <= 0.05;
    let mut ratios = vec![base[4]];
    for s in [1.0, 2.0] {
        let (lo, hi) = (at(&r0, 0.01, s)?, at(&r0, 0.1, s)?);
        ok &= hi[2] > lo[2] && hi[3] > lo[3];
    }
    let full: Vec<Vec<f64>> = [1.0, 2.0, 4.0, 8.0].iter().map(|&s| at(&r1, 0.95, s)).collect::<Result<_, _>>()?;
    ok &= full.windows(2).all(|w| w[1][2] < w[0][2] && w[1][3] < w[0][3]);
    ratios.extend(full.iter().map(|r| r[4]));
    ok &= ratios.iter().all(|r| (0.45..=0.55).contains(r));
    let (rmin, rmax) = ratios.iter().fold((1.0f64, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    Ok((
        ok,
        format!(
            "rel err mean {:.2}%, var {:.3}% at (0.01,1,1); q-trend and σ-trend hold: {}; ratios ∈ [{rmin:.3}, {rmax:.3}]",
            100.0 * base[2],
            100.0 * base[3],
            ok
        ),
    ))
}

fn exp_identities() -> Check {
    let mut worst = 0.0f64;
    for q in [0.001, 0.01, 0.1, 0.5, 1.0] {
        for s in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let (a, b) = exp_moment_identities(q, 1.0, s).map_err(err)?;
            worst = worst.max((a - 1.0).abs()).max((b - 1.0).abs());
        }
    }
    Ok((worst <= 1e-6, format!("max |E[e^{{∓L}}] − 1| over 5×5 lattice = {worst:.3e} (≤ 1e-6)")))
}

fn filter_comparison() -> Check {
    let d = fdp("compare-filters", "compare_filters.cfg")?;
    let s = json(&d, "summary.json")?;
    let (b, mu) = (num(&s, "B")?, num(&s, "mu")?);
    let rows = s["rows"].as_array().ok_or("missing rows")?;
    let (mut lo, mut hi, mut std_lo, mut std_hi) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
    let mut below = true;
    for r in rows {
        let (g, t, st) = (num(r, "eps_gdp")?, num(r, "eps_rdp")?, num(r, "eps_rdp_standard")?);
        below &= g < t;
        let gap = (t - g) / t;
        lo = lo.min(gap);
        hi = hi.max(gap);
        std_lo = std_lo.min((st - g) / st);
        std_hi = std_hi.max((st - g) / st);
    }
    let ok = (0.045..=0.055).contains(&b)
        && (0.30..=0.33).contains(&mu)
        && mu == (2.0 * b).sqrt()
        && below
        && !rows.is_empty()
        && lo >= 0.03
        && hi <= 0.20;
    Ok((
        ok,
        format!(
            "B = {b:.6}, μ = {mu:.6}, GDP below RDP at all {} δ: {below}, gap ∈ [{:.1}%, {:.1}%] (standard conversion [{:.1}%, {:.1}%])",
            rows.len(),
            100.0 * lo,
            100.0 * hi,
            100.0 * std_lo,
            100.0 * std_hi
        ),
    ))
}

fn gaussian_budget(mu: f64) -> Result<fdp_core::PrivacyProfile, String> {
    let pair = DensityPair::gaussian(mu, 1.0).map_err(err)?;
    profile_from_pair(&pair, &grid_for(&[pair])).map_err(err)
}

fn filter_consistency() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let (mut agree, mut cont) = (0, 0);
    for _ in 0..200 {
        let mu_b = rng.random_range(0.5..2.5);
        let mus: Vec<f64> = (0..rng.random_range(1..5)).map(|_| rng.random_range(0.1..1.5)).collect();
        let factors: Vec<Factor> = mus.iter().map(|&mu| Factor::Gaussian { mu }).collect();
        let f = fdp_filter(&gaussian_budget(mu_b)?, &factors).map_err(err)?;
        let g = gdp_filter(mu_b, &mus).map_err(err)?;
        agree += usize::from(f.decision == g.decision);
        cont += usize::from(g.is_continue());
    }
    Ok((agree == 200, format!("{agree}/200 decisions agree ({cont} continue)")))
}

fn accountant_state_machine() -> Check {
    let mut mismatches = 0;
    let mut conserved = true;
    let mut steps = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(1000 + seed);
        let full = rng.random_bool(0.3);
        let config = if full { RegimeConfig::full(0.9, 1.0) } else { RegimeConfig::small(0.1, 0.5) };
        let budget = rng.random_range(0.001..0.5);
        let points = rng.random_range(1..6);
        let mut a2 = GdpAccountant::new(config, budget, DeductionMode::Lazy).map_err(err)?;
        let mut a3 = IndividualAccountant::homogeneous(config, budget, points).map_err(err)?;
        let (mut s2, mut s3) = (Streams::new(seed), Streams::new(seed));
        for _ in 0..rng.random_range(1..400) {
            let q = if full { rng.random_range(0.9..=1.0) } else { rng.random_range(0.0..=0.1) };
            let sigma = rng.random_range(config.sigma_floor..4.0);
            let clip = rng.random_range(0.5..2.0);
            let grads = vec![vec![2.0 * clip, clip]; points];
            let o2 = a2.step(q, sigma, clip, &grads, &mut s2).map_err(err)?;
            let o3 = a3.step(q, sigma, clip, &grads, &mut s3).map_err(err)?;
            conserved &= a2.conservation_error() == 0.0;
            let (mut f2, mut f3) = (a2.clone(), a3.clone());
            f2.flush();
            f3.flush().map_err(err)?;
            conserved &= f2.conservation_error() == 0.0;
            steps += 1;
            if o2.noisy_sum != o3.noisy_sum || f3.budgets().iter().any(|&b| b != f2.remaining()) {
                mismatches += 1;
            }
            if o2.halted {
                break;
            }
        }
    }
    let mut cli_conserved = true;
    for cfg in ["accountant_regime0.cfg", "accountant_regime1.cfg"] {
        let s = json(&fdp("accountant-run", cfg)?, "summary.json")?;
        cli_conserved &= num(&s, "conservation_error")? == 0.0;
    }
    let ok = mismatches == 0 && conserved && cli_conserved;
    Ok((
        ok,
        format!(
            "100 schedules, {steps} steps: conservation exact: {}, pooled/per-point mismatches: {mismatches}",
            conserved && cli_conserved
        ),
    ))
}

fn chain_predicate() -> Check {
    let family: Vec<TradeoffCurve> =
        [0.1, 0.5, 1.0, 1.5, 2.0, 3.0].iter().map(|&m| gaussian_tradeoff(m)).collect::<Result<_, _>>().map_err(err)?;
    let gauss = blackwell_chain_check(&family, 1e-9).map_err(err)?;
    let ce = Counterexample::standard().map_err(err)?;
    let branches = [profile_to_tradeoff(&ce.branch_a).map_err(err)?, profile_to_tradeoff(&ce.branch_b).map_err(err)?];
    let split = blackwell_chain_check(&branches, 1e-9).map_err(err)?;
    let crossings: Vec<f64> = split.violations.iter().flat_map(|v| v.2.clone()).collect();
    let ok = gauss.chain && !split.chain && crossings.len() == 1;
    Ok((ok, format!("Gaussian family chain: {}; branches chain: {}, crossings at α = {crossings:.4?}", gauss.chain, split.chain)))
}

fn clt_band_shape() -> Check {
    let mut exact = true;
    for b in [1e-4, 0.01, 0.049377, 0.5, 3.0] {
        let band = clt_band(&CltParameters::new(b, b, 2.0 * b)).map_err(err)?;
        exact &= (band.mu - (2.0 * b).sqrt()).abs() <= 2.0 * f64::EPSILON * band.mu;
    }
    let v = 0.1f64;
    let sv = v.sqrt();
    let axis = |i: usize, top: f64| top * (i + 1) as f64 / 10.0;
    let mut widths = [[0.0; 10]; 10];
    for (i, row) in widths.iter_mut().enumerate() {
        for (j, w) in row.iter_mut().enumerate() {
            let p = CltParameters { rho: axis(i, sv / std::f64::consts::E), kappa: axis(j, v / 4.0), ..CltParameters::new(v / 2.0, v / 2.0, v) };
            *w = clt_band(&p).map_err(err)?.width();
        }
    }
    let mono_rho = (0..10).all(|j| (1..10).all(|i| widths[i][j] >= widths[i - 1][j]));
    let mono_kappa = (0..10).all(|i| (1..10).all(|j| widths[i][j] >= widths[i][j - 1]));
    let s = json(&fdp("accountant-run", "accountant_regime0.cfg")?, "summary.json")?;
    let cert_mu = num(&s["clt"], "mu")?;
    let run_exact = (cert_mu - (2.0 * num(&s, "consumed")?).sqrt()).abs() <= 2.0 * f64::EPSILON * cert_mu;
    let ok = exact && run_exact && mono_rho && mono_kappa;
    Ok((
        ok,
        format!(
            "μ = √(2B) to machine precision: {}; width monotone in ρ: {mono_rho}, in κ: {mono_kappa} (10×10, ρ/√v ≤ 1/e)",
            exact && run_exact
        ),
    ))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "Gaussian composition identity", limit: Duration::from_secs(10), run: gaussian_identity },
        Criterion { id: 2, name: "duality round trip", limit: Duration::from_secs(60), run: duality_round_trip },
        Criterion { id: 3, name: "counterexample reproduction", limit: Duration::from_secs(300), run: counterexample },
        Criterion { id: 4, name: "moment approximations", limit: Duration::from_secs(120), run: moments },
        Criterion { id: 5, name: "exp-moment identities", limit: Duration::from_secs(60), run: exp_identities },
        Criterion { id: 6, name: "filter comparison scenario", limit: Duration::from_secs(300), run: filter_comparison },
        Criterion { id: 7, name: "filter consistency", limit: Duration::from_secs(120), run: filter_consistency },
        Criterion { id: 8, name: "accountant state machine", limit: Duration::from_secs(60), run: accountant_state_machine },
        Criterion { id: 9, name: "Blackwell chain predicate", limit: Duration::from_secs(60), run: chain_predicate },
        Criterion { id: 10, name: "CLT band", limit: Duration::from_secs(10), run: clt_band_shape },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.run)();
        let took = start.elapsed();
        let (ok, detail) = match result {
            Ok((ok, d)) => (ok && took <= c.limit, d),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!(
            "{} {:>2} {}: {detail} [{:.1}s, limit {}s]",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            took.as_secs_f64(),
            c.limit.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
