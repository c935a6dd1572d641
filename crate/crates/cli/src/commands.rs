//! Subcommand bodies. Each returns whether its internal assertions held.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::json;

use fdp_core::accountant::{
    clt_certificate, run_comparison_scenario, ComparisonConfig, DeductionMode, GdpAccountant, IndividualAccountant,
    RegimeConfig, Streams,
};
use fdp_core::compose::{compose_factors, grid_for, Factor};
use fdp_core::counterexample::{BranchSide, Counterexample, CounterexampleConfig};
use fdp_core::filters::{compare_profiles, fdp_filter_with, FDP_FILTER_TOL};
use fdp_core::io::{fmt_sig, write_curve, write_epsilon_delta, write_profile, write_table_file};
use fdp_core::plrv::{approx_error_curves, Regime};
use fdp_core::profiles::{profile_from_pair, profile_to_tradeoff};
use fdp_core::{DensityPair, PrivacyProfile};

use crate::config::{parse_f64, parse_gradient, parse_schedule, Config};

fn report(ok: bool, what: &str) -> bool {
    println!("{} {what}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn side(v: &str) -> Result<BranchSide> {
    match v {
        "above" => Ok(BranchSide::Above),
        "at_or_below" => Ok(BranchSide::AtOrBelow),
        _ => bail!("branch_a_side must be `above` or `at_or_below`, got {v:?}"),
    }
}

pub fn counterexample(cfg: &Config, out: &Path) -> Result<bool> {
    cfg.restrict(&[
        "rate",
        "sigma",
        "mu_first",
        "split_y",
        "branch_a_mu2",
        "branch_a_mu3",
        "branch_b_mu2",
        "branch_b_mu3",
        "branch_a_side",
        "gamma_max",
        "gamma_limit",
    ])?;
    let d = CounterexampleConfig::default();
    let config = CounterexampleConfig {
        rate: cfg.f64_or("rate", d.rate)?,
        sigma: cfg.f64_or("sigma", d.sigma)?,
        mu_first: cfg.f64_or("mu_first", d.mu_first)?,
        split_y: cfg.f64_or("split_y", d.split_y)?,
        branch_a: (cfg.f64_or("branch_a_mu2", d.branch_a.0)?, cfg.f64_or("branch_a_mu3", d.branch_a.1)?),
        branch_b: (cfg.f64_or("branch_b_mu2", d.branch_b.0)?, cfg.f64_or("branch_b_mu3", d.branch_b.1)?),
        branch_a_side: cfg.str("branch_a_side").map(side).transpose()?.unwrap_or(d.branch_a_side),
        gamma_max: cfg.f64_or("gamma_max", d.gamma_max)?,
    };
    let limit = cfg.f64_or("gamma_limit", 1e4)?;
    let ce = if config == d { Counterexample::standard()?.clone() } else { Counterexample::compute(config)? };
    let w = ce.witness()?;

    let fig3: Vec<Vec<f64>> = ce.fig3_rows(limit).iter().map(|r| r.to_vec()).collect();
    write_table_file(&out.join("fig3.csv"), &["gamma", "H_branch_a", "H_branch_b"], &fig3)?;
    let fig4: Vec<Vec<f64>> = ce.fig4_rows(limit).iter().map(|r| r.to_vec()).collect();
    write_table_file(&out.join("fig4.csv"), &["gamma", "H_tight", "H_adapt", "H_tight_sym", "H_adapt_sym"], &fig4)?;
    fs::write(out.join("gamma0.txt"), fmt_sig(w.gamma0) + "\n")?;
    write_json(
        &out.join("witness.json"),
        &json!({
            "gamma0": w.gamma0,
            "H_adapt": w.adaptive,
            "H_tight": w.budget_tight,
            "gap": w.gap,
            "H_adapt_sym": w.sym_adaptive,
            "H_tight_sym": w.sym_budget_tight,
            "sym_gap": w.sym_gap,
        }),
    )?;
    println!("gamma0 = {}", fmt_sig(w.gamma0));
    println!("H_adapt(gamma0) - H_tight(gamma0) = {}", fmt_sig(w.gap));
    println!("symmetrized gap = {}", fmt_sig(w.sym_gap));
    Ok(report(w.gap > 0.0 && w.sym_gap > 0.0, "counterexample: H_adapt(gamma0) > H_tight(gamma0)"))
}

pub fn moments(cfg: &Config, out: &Path) -> Result<bool> {
    cfg.restrict(&["regime", "q", "sigma", "mu"])?;
    let regime = Regime::from_flag(cfg.usize_or("regime", 0)?.try_into().map_err(|_| anyhow!("regime must be 0 or 1"))?)?;
    let default_q: &[f64] = match regime {
        Regime::Small => &[0.001, 0.005, 0.01, 0.05, 0.1, 0.2],
        Regime::Full => &[0.8, 0.85, 0.9, 0.95, 0.99, 1.0],
    };
    let q = cfg.list_or("q", default_q)?;
    let sigma = cfg.list_or("sigma", &[1.0, 2.0, 4.0, 8.0])?;
    let mu = cfg.f64_or("mu", 1.0)?;
    if q.is_empty() || sigma.is_empty() {
        bail!("q and sigma lists must be non-empty");
    }
    let rows = approx_error_curves(regime, mu, &q, &sigma)?;
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.q, r.sigma, r.rel_err_mean, r.rel_err_var, r.ratio_mean_over_var])
        .collect();
    let name = format!("moments_regime{}.csv", regime.flag());
    write_table_file(
        &out.join(&name),
        &["q", "sigma", "rel_err_mean", "rel_err_var", "ratio_mean_over_var"],
        &table,
    )?;
    println!("wrote {} rows to {name}", rows.len());
    let finite = table.iter().flatten().all(|x| x.is_finite());
    Ok(report(finite, "moments: all errors finite"))
}

fn regime_config(cfg: &Config, default: RegimeConfig) -> Result<RegimeConfig> {
    let regime = match cfg.str("regime") {
        None => default.regime,
        Some(v) => Regime::from_flag(v.parse().map_err(|e| anyhow!("regime {v:?}: {e}"))?)?,
    };
    let q_bar_default = if regime == default.regime {
        default.q_bar
    } else if regime == Regime::Small {
        0.1
    } else {
        0.9
    };
    Ok(RegimeConfig {
        regime,
        q_bar: cfg.f64_or("q_bar", q_bar_default)?,
        sigma_floor: cfg.f64_or("sigma_floor", default.sigma_floor)?,
        guard_c: cfg.f64_or("guard_c", default.guard_c)?,
    })
}

const RUN_KEYS: [&str; 14] = [
    "regime",
    "q_bar",
    "sigma_floor",
    "guard_c",
    "B",
    "T",
    "q",
    "sigma_schedule",
    "clip",
    "seed",
    "points",
    "gradient",
    "delta_grid",
    "mode",
];

pub fn compare_filters(cfg: &Config, out: &Path) -> Result<bool> {
    cfg.restrict(&RUN_KEYS[..13])?;
    let d = ComparisonConfig::standard();
    let steps = cfg.usize_or("T", d.sigmas.len())?;
    let config = ComparisonConfig {
        regime: regime_config(cfg, d.regime)?,
        budget: cfg.f64_or("B", d.budget)?,
        q: cfg.f64_or("q", d.q)?,
        sigmas: match cfg.str("sigma_schedule") {
            Some(v) => parse_schedule(v, steps)?,
            None => parse_schedule("sine:1.5:150", steps)?,
        },
        clip: cfg.f64_or("clip", d.clip)?,
        points: cfg.usize_or("points", d.points)?,
        gradients: cfg.str("gradient").map(parse_gradient).transpose()?.unwrap_or(d.gradients),
        seed: cfg.u64_or("seed", d.seed)?,
        deltas: cfg.list_or("delta_grid", &d.deltas)?,
        orders: d.orders,
    };
    let r = run_comparison_scenario(&config)?;
    let rows: Vec<Vec<f64>> = r.rows.iter().map(|x| vec![x.delta, x.eps_gdp, x.eps_rdp]).collect();
    write_table_file(&out.join("compare_filters.csv"), &["delta", "eps_gdp", "eps_rdp"], &rows)?;
    write_json(
        &out.join("summary.json"),
        &json!({
            "B": r.consumed,
            "mu": r.mu,
            "steps_gdp": r.steps_gdp,
            "steps_rdp": r.steps_rdp,
            "halted": r.halted,
            "total_slack": r.total_slack,
            "rows": r.rows.iter().map(|x| json!({
                "delta": x.delta,
                "eps_gdp": x.eps_gdp,
                "eps_rdp": x.eps_rdp,
                "eps_rdp_standard": x.eps_rdp_standard,
                "best_order": x.best_order,
            })).collect::<Vec<_>>(),
        }),
    )?;
    println!("steps = {} (RDP {}), B = {}, mu = {}", r.steps_gdp, r.steps_rdp, fmt_sig(r.consumed), fmt_sig(r.mu));
    for x in &r.rows {
        println!(
            "delta {:.3e}: eps_gdp {:.4} eps_rdp {:.4} ({:+.1}%)",
            x.delta,
            x.eps_gdp,
            x.eps_rdp,
            100.0 * (x.eps_gdp / x.eps_rdp - 1.0)
        );
    }
    let below = r.rows.iter().all(|x| x.eps_gdp < x.eps_rdp);
    let same = r.steps_rdp == r.steps_gdp;
    Ok(report(below && same, "compare-filters: GDP epsilon below RDP epsilon at equal step counts"))
}

/// `gaussian μ` or `subsampled q μ`.
fn parse_factor(v: &str) -> Result<Factor> {
    let p: Vec<&str> = v.split_whitespace().collect();
    match p.as_slice() {
        ["gaussian", mu] => Ok(Factor::Gaussian { mu: parse_f64(mu)? }),
        ["subsampled", q, mu] => Ok(Factor::Subsampled { rate: parse_f64(q)?, mu: parse_f64(mu)? }),
        _ => bail!("unknown factor descriptor {v:?} (gaussian MU | subsampled Q MU)"),
    }
}

fn parse_factors(v: &str) -> Result<Vec<Factor>> {
    if v.trim() == "none" {
        return Ok(Vec::new());
    }
    v.split(';').filter(|s| !s.trim().is_empty()).map(parse_factor).collect()
}

pub fn compose(cfg: &Config, out: &Path) -> Result<bool> {
    cfg.restrict(&["factors", "budget", "expect", "tol"])?;
    let factors = parse_factors(cfg.str("factors").unwrap_or("none"))?;
    let budget_spec = cfg.str("budget").ok_or_else(|| anyhow!("missing key `budget`"))?;
    let tol = cfg.f64_or("tol", FDP_FILTER_TOL)?;
    let mut pairs = factors.iter().map(Factor::pair).collect::<fdp_core::Result<Vec<DensityPair>>>()?;
    let budget: PrivacyProfile = if budget_spec.trim() == "tight" {
        Counterexample::standard()?.budget_tight.clone()
    } else {
        let f = parse_factor(budget_spec)?;
        pairs.push(f.pair()?);
        profile_from_pair(&f.pair()?, &grid_for(&pairs))?
    };
    let decision = fdp_filter_with(&budget, &factors, tol)?;
    let composed = compose_factors(&factors, budget.grid());
    if let Ok(c) = &composed {
        debug_assert_eq!(compare_profiles(&budget, c, tol), decision);
        write_profile(fs::File::create(out.join("profile.csv"))?, &c.base)?;
        write_epsilon_delta(fs::File::create(out.join("eps_delta.csv"))?, &c.base)?;
        write_curve(fs::File::create(out.join("curve.csv"))?, &profile_to_tradeoff(&c.base)?)?;
    }
    let verdict = if decision.is_continue() { "continue" } else { "halt" };
    write_json(
        &out.join("decision.json"),
        &json!({
            "decision": verdict,
            "margin": decision.margin,
            "tolerance": tol,
            "factors": factors,
            "budget": budget_spec,
            "grid_overflow": composed.is_err(),
        }),
    )?;
    println!("decision = {verdict}, margin = {}", fmt_sig(decision.margin));
    match cfg.str("expect") {
        None => Ok(true),
        Some(e @ ("continue" | "halt")) => Ok(report(e == verdict, &format!("compose: expected {e}"))),
        Some(e) => bail!("expect must be `continue` or `halt`, got {e:?}"),
    }
}

pub fn accountant_run(cfg: &Config, out: &Path) -> Result<bool> {
    let mut keys = RUN_KEYS.to_vec();
    keys.retain(|k| *k != "delta_grid");
    keys.push("C");
    cfg.restrict(&keys)?;
    let regime = regime_config(cfg, RegimeConfig::small(0.1, 0.5))?;
    let budget = cfg.f64_or("B", 0.05)?;
    let steps = cfg.usize_or("T", 1000)?;
    let q = cfg.f64_or("q", if regime.regime == Regime::Small { 0.01 } else { 1.0 })?;
    let sigmas = parse_schedule(cfg.str("sigma_schedule").unwrap_or("constant:1.5"), steps)?;
    let clip = cfg.f64_or("clip", 1.0)?;
    let points = cfg.usize_or("points", 100)?;
    let grads = parse_gradient(cfg.str("gradient").unwrap_or("random:2:4"))?;
    let seed = cfg.u64_or("seed", 0)?;
    let c = cfg.f64_or("C", 1.0)?;
    let mode = cfg.str("mode").unwrap_or("lazy");

    let mut streams = Streams::new(seed);
    if mode == "individual" {
        let mut acc = IndividualAccountant::homogeneous(regime, budget, points)?;
        let mut rows = Vec::new();
        for (t, &sigma) in sigmas.iter().enumerate() {
            let g = grads.generate(t + 1, points, &mut streams.gradients);
            let o = acc.step(q, sigma, clip, &g, &mut streams)?;
            let (lo, hi) = acc.budgets().iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
            rows.push(vec![(t + 1) as f64, o.sampled as f64, lo, hi]);
            if o.halted {
                break;
            }
        }
        acc.flush()?;
        write_table_file(&out.join("steps.csv"), &["t", "sampled", "min_budget", "max_budget"], &rows)?;
        let nonneg = acc.budgets().iter().all(|&b| b >= 0.0);
        let monotone = rows.windows(2).all(|w| w[1][2] <= w[0][2] && w[1][3] <= w[0][3]);
        write_json(
            &out.join("summary.json"),
            &json!({ "mode": mode, "steps": acc.steps(), "budgets": acc.budgets() }),
        )?;
        println!("steps = {}", acc.steps());
        return Ok(report(nonneg && monotone, "accountant-run: individual budgets non-negative and non-increasing"));
    }

    let mode = match mode {
        "lazy" => DeductionMode::Lazy,
        "eager" => DeductionMode::Eager,
        m => bail!("mode must be lazy, eager or individual, got {m:?}"),
    };
    let other = if mode == DeductionMode::Lazy { DeductionMode::Eager } else { DeductionMode::Lazy };
    let mut acc = GdpAccountant::new(regime, budget, mode)?;
    let mut twin = GdpAccountant::new(regime, budget, other)?;
    let mut twin_streams = streams.clone();
    for w in &acc.warnings {
        eprintln!("warning: {w}");
    }
    let mut rows = Vec::new();
    let mut conserved = true;
    for (t, &sigma) in sigmas.iter().enumerate() {
        let g = grads.generate(t + 1, points, &mut streams.gradients);
        let o = acc.step(q, sigma, clip, &g, &mut streams)?;
        twin.step(q, sigma, clip, &g, &mut twin_streams)?;
        conserved &= acc.conservation_error() == 0.0;
        let r = acc.history().last().expect("step recorded");
        rows.push(vec![(t + 1) as f64, r.q, r.sigma, r.clip, r.budget_clip, r.realized_mu, r.deduction, acc.consumed(), o.sampled as f64]);
        if o.halted {
            break;
        }
    }
    acc.flush();
    twin.flush();
    write_table_file(
        &out.join("steps.csv"),
        &["t", "q", "sigma", "clip", "budget_clip", "realized_mu", "deduction", "consumed", "sampled"],
        &rows,
    )?;
    let certificate = clt_certificate(&acc, c);
    let cert_json = match &certificate {
        Ok(cert) => json!({ "mu": cert.mu(), "phi": cert.phi(), "delta": cert.delta(), "rho": cert.params.rho, "kappa": cert.params.kappa, "C": c }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    write_json(
        &out.join("summary.json"),
        &json!({
            "mode": format!("{mode:?}").to_lowercase(),
            "steps": acc.steps(),
            "halted": acc.is_halted(),
            "consumed": acc.spent(),
            "remaining": acc.remaining(),
            "mu": (2.0 * acc.spent()).sqrt(),
            "total_slack": acc.history().iter().map(|r| r.slack).sum::<f64>(),
            "conservation_error": acc.conservation_error(),
            "warnings": acc.warnings,
            "clt": cert_json,
        }),
    )?;
    println!("steps = {}, halted = {}, consumed = {}", acc.steps(), acc.is_halted(), fmt_sig(acc.spent()));
    match &certificate {
        Ok(cert) => println!("clt: mu = {}, delta = {} (C = {c})", fmt_sig(cert.mu()), fmt_sig(cert.delta())),
        Err(e) => println!("clt: {e}"),
    }
    let agree = acc.spent() == twin.spent() && acc.steps() == twin.steps();
    Ok(report(
        conserved && agree && acc.remaining() >= 0.0,
        "accountant-run: budget conserved, lazy and eager deduction agree",
    ))
}
