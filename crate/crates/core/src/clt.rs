//! Approximate-GDP bands for fully adaptive compositions from summed
//! conditional moments of the privacy loss.

use serde::{Deserialize, Serialize};

use crate::curves::{gaussian_value, TradeoffCurve};
use crate::error::{domain, ensure_finite, Error, Result};

/// Summed conditional moments of a composition and the constant `C`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltParameters {
    pub m1: f64,
    pub m2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub v: f64,
    pub kappa: f64,
    pub rho: f64,
    #[serde(default = "default_c")]
    pub c: f64,
}

fn default_c() -> f64 {
    1.0
}

impl CltParameters {
    /// Parameters with `η₁ = η₂ = κ = ρ = 0` and `C = 1`.
    pub fn new(m1: f64, m2: f64, v: f64) -> Self {
        Self { m1, m2, eta1: 0.0, eta2: 0.0, v, kappa: 0.0, rho: 0.0, c: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("m1", self.m1),
            ("m2", self.m2),
            ("eta1", self.eta1),
            ("eta2", self.eta2),
            ("v", self.v),
            ("kappa", self.kappa),
            ("rho", self.rho),
            ("C", self.c),
        ] {
            ensure_finite(name, x)?;
        }
        if self.v <= 0.0 {
            return domain(format!("v > 0 fails: v = {}", self.v));
        }
        if self.eta1 < 0.0 || self.eta2 < 0.0 {
            return domain("η₁ ≥ 0 and η₂ ≥ 0 required");
        }
        if self.kappa < 0.0 || self.rho < 0.0 || self.c < 0.0 {
            return domain("κ, ρ and C must be non-negative");
        }
        if 4.0 * self.rho * self.rho > self.v {
            return domain(format!("4ρ² ≤ v fails: 4ρ² = {:.6e}, v = {:.6e}", 4.0 * self.rho * self.rho, self.v));
        }
        if 4.0 * self.kappa > self.v {
            return domain(format!("4κ ≤ v fails: 4κ = {:.6e}, v = {:.6e}", 4.0 * self.kappa, self.v));
        }
        Ok(())
    }
}

fn be(kappa: f64, rho: f64, c: f64) -> f64 {
    let r = if rho > 0.0 { rho * rho.ln().abs() } else { 0.0 };
    c * (r + kappa.sqrt())
}

/// `C(ρ|ln ρ| + √κ)` for κ ∈ [0, ¼] and ρ ∈ (0, ½].
///
/// Increasing in κ everywhere, but in ρ only up to 1/e.
pub fn berry_esseen_bound(kappa: f64, rho: f64, c: f64) -> Result<f64> {
    ensure_finite("kappa", kappa)?;
    ensure_finite("rho", rho)?;
    ensure_finite("C", c)?;
    if !(0.0..=0.25).contains(&kappa) {
        return domain(format!("κ must lie in [0, 1/4], got {kappa}"));
    }
    if !(rho > 0.0 && rho <= 0.5) {
        return domain(format!("ρ must lie in (0, 1/2], got {rho}"));
    }
    Ok(be(kappa, rho, c))
}

/// `μ`, `φ`, `Δ` and the envelope curves `G_{μ+φ}(α+Δ)−Δ ≤ f ≤ G_{μ−φ}(α−Δ)+Δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct CltBand {
    pub mu: f64,
    pub phi: f64,
    pub delta: f64,
    pub lower: TradeoffCurve,
    pub upper: TradeoffCurve,
}

impl CltBand {
    /// Rows `(α, lower, upper)` on the shared α-grid.
    pub fn rows(&self) -> Vec<[f64; 3]> {
        self.lower
            .alpha()
            .iter()
            .zip(self.lower.values())
            .zip(self.upper.values())
            .map(|((&a, &l), &u)| [a, l, u])
            .collect()
    }

    /// Largest gap `upper − lower` over the grid.
    pub fn width(&self) -> f64 {
        self.rows().iter().map(|r| r[2] - r[1]).fold(0.0, f64::max)
    }
}

/// Lower envelope value at α.
pub fn band_lower(mu: f64, delta: f64, a: f64) -> f64 {
    let x = (a + delta).min(1.0);
    (gaussian_value(mu, x) - delta).clamp(0.0, 1.0)
}

/// Upper envelope value at α. A negative `mu` is treated as zero.
pub fn band_upper(mu: f64, delta: f64, a: f64) -> f64 {
    let x = (a - delta).max(0.0);
    (gaussian_value(mu.max(0.0), x) + delta).clamp(0.0, 1.0)
}

pub fn clt_band(params: &CltParameters) -> Result<CltBand> {
    params.validate()?;
    let sv = params.v.sqrt();
    let mu = (params.m1 + params.m2) / sv;
    let phi = (params.eta1 + params.eta2) / sv;
    let delta = be(params.kappa / params.v, params.rho / sv, params.c);
    if !mu.is_finite() || !delta.is_finite() {
        return Err(Error::Numerical { message: "CLT band parameters are not finite".into(), achieved: f64::NAN });
    }
    let lower = TradeoffCurve::from_fn(|a| band_lower(mu + phi, delta, a));
    let upper = TradeoffCurve::from_fn(|a| band_upper(mu - phi, delta, a));
    Ok(CltBand { mu, phi, delta, lower, upper })
}
