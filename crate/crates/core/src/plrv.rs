//! Moments of the privacy loss `L = ln P/Q` for the subsampled Gaussian pair
//! P = (1−q)·N(0,σ²) + q·N(μ,σ²), Q = N(0,σ²), their small-q and q→1
//! approximations, and the Rényi divergence of the pair.

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_finite, Error, Result};
use crate::pair::DensityPair;
use crate::quad::{integrate, QuadSettings};

/// Which approximation applies: small sampling rates or rates near one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// q → 0.
    Small,
    /// q → 1.
    Full,
}

impl Regime {
    pub fn from_flag(flag: u8) -> Result<Self> {
        match flag {
            0 => Ok(Regime::Small),
            1 => Ok(Regime::Full),
            other => domain(format!("regime flag must be 0 or 1, got {other}")),
        }
    }

    pub fn flag(self) -> u8 {
        match self {
            Regime::Small => 0,
            Regime::Full => 1,
        }
    }
}

/// PLRV moments under P and Q. Third moments are absolute central moments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean_p: f64,
    pub mean_q: f64,
    pub var_p: f64,
    pub var_q: f64,
    pub abs3_p: f64,
    pub abs3_q: f64,
}

fn check(q: f64, mu: f64, sigma: f64) -> Result<()> {
    ensure_finite("q", q)?;
    ensure_finite("mu", mu)?;
    ensure_finite("sigma", sigma)?;
    if !(0.0..=1.0).contains(&q) {
        return domain(format!("q must lie in [0,1], got {q}"));
    }
    if mu < 0.0 {
        return domain(format!("mu must be non-negative, got {mu}"));
    }
    if sigma <= 0.0 {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    Ok(())
}

fn moment_settings() -> QuadSettings {
    QuadSettings { abs_tol: 1e-16, rel_tol: 1e-11, max_subdivisions: 20_000 }
}

/// `∫ w(y)·h(L(y))` over the pair's domain, where `w` is `p` or `q`.
fn expect(pair: &DensityPair, under_p: bool, h: impl Fn(f64) -> f64) -> Result<f64> {
    let (lo, hi) = pair.domain();
    let (mu, _) = pair.mu_sigma();
    let f = |y: f64| {
        let lw = if under_p { pair.log_p(y) } else { pair.log_q(y) };
        lw.exp() * h(pair.log_lr(y))
    };
    Ok(integrate(f, &[lo, 0.0, 0.5 * mu, mu, hi], moment_settings())?.value)
}

/// Moments of L under P and Q by adaptive quadrature on [−12σ, μ+12σ].
pub fn exact_moments(q: f64, mu: f64, sigma: f64) -> Result<MomentSummary> {
    check(q, mu, sigma)?;
    let pair = DensityPair::mixture(q, mu, sigma)?;
    if pair.is_trivial() {
        return Ok(MomentSummary { mean_p: 0.0, mean_q: 0.0, var_p: 0.0, var_q: 0.0, abs3_p: 0.0, abs3_q: 0.0 });
    }
    let mean_p = expect(&pair, true, |l| l)?;
    let mean_q = expect(&pair, false, |l| l)?;
    let var_p = expect(&pair, true, |l| (l - mean_p).powi(2))?;
    let var_q = expect(&pair, false, |l| (l - mean_q).powi(2))?;
    let abs3_p = expect(&pair, true, |l| (l - mean_p).abs().powi(3))?;
    let abs3_q = expect(&pair, false, |l| (l - mean_q).abs().powi(3))?;
    Ok(MomentSummary { mean_p, mean_q, var_p, var_q, abs3_p, abs3_q })
}

/// `(E_P[e^{−L}], E_Q[e^{L}])`, both equal to one in exact arithmetic.
pub fn exp_moment_identities(q: f64, mu: f64, sigma: f64) -> Result<(f64, f64)> {
    check(q, mu, sigma)?;
    let pair = DensityPair::mixture(q, mu, sigma)?;
    Ok((expect(&pair, true, |l| (-l).exp())?, expect(&pair, false, f64::exp)?))
}

/// Leading-order mean of L under P.
///
/// `mu` is the sensitivity in units where the noise standard deviation is
/// `sigma`; the accountant passes σ as a noise-to-clip ratio with μ = 1 for a full clip.
pub fn get_approx(regime: Regime, q: f64, sigma: f64, mu: f64) -> Result<f64> {
    check(q, mu, sigma)?;
    let r = mu * mu / (sigma * sigma);
    Ok(match regime {
        Regime::Small => 0.5 * q * q * r.exp_m1(),
        Regime::Full => 0.5 * q * q * r,
    })
}

/// Leading-order variance of L under P.
pub fn approx_variance(regime: Regime, q: f64, sigma: f64, mu: f64) -> Result<f64> {
    Ok(2.0 * get_approx(regime, q, sigma, mu)?)
}

/// The μ for which [`get_approx`] equals `budget`.
pub fn inv_budg(regime: Regime, q: f64, sigma: f64, budget: f64) -> Result<f64> {
    ensure_finite("budget", budget)?;
    check(q, 0.0, sigma)?;
    if budget < 0.0 {
        return domain(format!("budget must be non-negative, got {budget}"));
    }
    if q == 0.0 {
        return domain("inv_budg needs q > 0");
    }
    Ok(match regime {
        Regime::Small => sigma * (2.0 * budget / (q * q)).ln_1p().sqrt(),
        Regime::Full => sigma * (2.0 * budget).sqrt() / q,
    })
}

/// Leading-order bound on the absolute third moment.
pub fn third_moment_bounds(regime: Regime, q: f64, sigma: f64, mu: f64) -> Result<f64> {
    check(q, mu, sigma)?;
    let r = mu * mu / (sigma * sigma);
    Ok(match regime {
        Regime::Small => q.powi(3) * ((3.0 * r).exp() + 3.0 * r.exp() + 1.0),
        Regime::Full => (2.0 - q.powi(3)) * (8.0 / std::f64::consts::PI).sqrt() * (mu / sigma).powi(3),
    })
}

/// One cell of an approximation-error table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub q: f64,
    pub sigma: f64,
    pub rel_err_mean: f64,
    pub rel_err_var: f64,
    pub ratio_mean_over_var: f64,
}

/// Relative errors of the approximate mean and variance against quadrature.
pub fn approx_error_curves(regime: Regime, mu: f64, q_list: &[f64], sigma_list: &[f64]) -> Result<Vec<ErrorRow>> {
    let mut rows = Vec::with_capacity(q_list.len() * sigma_list.len());
    for &q in q_list {
        for &sigma in sigma_list {
            check(q, mu, sigma)?;
            if q == 0.0 || mu == 0.0 {
                return domain("error curves need q > 0 and mu > 0");
            }
            let m = exact_moments(q, mu, sigma)?;
            let am = get_approx(regime, q, sigma, mu)?;
            let av = approx_variance(regime, q, sigma, mu)?;
            rows.push(ErrorRow {
                q,
                sigma,
                rel_err_mean: (m.mean_p - am).abs() / am.abs(),
                rel_err_var: (m.var_p - av).abs() / av.abs(),
                ratio_mean_over_var: m.mean_p / m.var_p,
            });
        }
    }
    Ok(rows)
}

/// `(1/(α−1)) ln E_Q[(P/Q)^α]` for the subsampled pair with unit sensitivity.
///
/// The integrand is evaluated relative to its maximum, so large orders do
/// not overflow; an error is returned only if the result is not finite.
pub fn renyi_divergence(q: f64, sigma: f64, order: f64) -> Result<f64> {
    check(q, 1.0, sigma)?;
    ensure_finite("order", order)?;
    if order <= 1.0 {
        return domain(format!("Rényi order must exceed 1, got {order}"));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    let pair = DensityPair::mixture(q, 1.0, sigma)?;
    let (lo, _) = pair.domain();
    // q·(p/q)^α peaks near y = α for the N(1,σ²) component.
    let hi = order.max(1.0) + 12.0 * sigma;
    let log_f = |y: f64| pair.log_q(y) + order * pair.log_lr(y);
    let scan = 4000;
    let peak = (0..=scan)
        .map(|i| log_f(lo + (hi - lo) * i as f64 / scan as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    let settings = QuadSettings { abs_tol: 1e-14, rel_tol: 1e-12, max_subdivisions: 20_000 };
    let r = integrate(|y| (log_f(y) - peak).exp(), &[lo, 0.0, 0.5, order, hi], settings)?;
    let value = (r.value.ln() + peak) / (order - 1.0);
    if !value.is_finite() {
        return Err(Error::Numerical {
            message: format!("Rényi divergence at order {order} is not finite"),
            achieved: r.abs_error,
        });
    }
    Ok(value.max(0.0))
}
