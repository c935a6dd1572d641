//! One-dimensional distribution pairs (P, Q) and their privacy loss `L = ln P/Q`.
//!
//! Every pair here has a likelihood ratio that is monotone in y, so the PLRV
//! distribution functions reduce to normal CDFs at a single level-set point.

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_finite, Result};
use crate::normal;

/// Half-width of the integration domain in units of σ.
pub const DOMAIN_SIGMAS: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairKind {
    /// P = N(μ,σ²), Q = N(0,σ²).
    Gaussian { mu: f64, sigma: f64 },
    /// P = (1−q)·N(0,σ²) + q·N(μ,σ²), Q = N(0,σ²).
    Mixture { rate: f64, mu: f64, sigma: f64 },
}

/// A pair of densities on the real line. `swapped` exchanges the roles of P
/// and Q.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityPair {
    pub kind: PairKind,
    #[serde(default)]
    pub swapped: bool,
}

impl DensityPair {
    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        ensure_finite("mu", mu)?;
        ensure_finite("sigma", sigma)?;
        if mu < 0.0 || sigma <= 0.0 {
            return domain(format!("gaussian pair needs mu ≥ 0 and sigma > 0, got ({mu}, {sigma})"));
        }
        Ok(Self { kind: PairKind::Gaussian { mu, sigma }, swapped: false })
    }

    pub fn mixture(rate: f64, mu: f64, sigma: f64) -> Result<Self> {
        ensure_finite("rate", rate)?;
        ensure_finite("mu", mu)?;
        ensure_finite("sigma", sigma)?;
        if !(0.0..=1.0).contains(&rate) || mu < 0.0 || sigma <= 0.0 {
            return domain(format!(
                "mixture pair needs rate in [0,1], mu ≥ 0 and sigma > 0, got ({rate}, {mu}, {sigma})"
            ));
        }
        Ok(Self { kind: PairKind::Mixture { rate, mu, sigma }, swapped: false })
    }

    /// The same pair with P and Q exchanged.
    pub fn swapped(self) -> Self {
        Self { swapped: !self.swapped, ..self }
    }

    pub(crate) fn mu_sigma(&self) -> (f64, f64) {
        match self.kind {
            PairKind::Gaussian { mu, sigma } | PairKind::Mixture { mu, sigma, .. } => (mu, sigma),
        }
    }

    /// True when P = Q, so that L ≡ 0.
    pub fn is_trivial(&self) -> bool {
        match self.kind {
            PairKind::Gaussian { mu, .. } => mu == 0.0,
            PairKind::Mixture { rate, mu, .. } => rate == 0.0 || mu == 0.0,
        }
    }

    /// Integration interval covering both densities to 12σ.
    pub fn domain(&self) -> (f64, f64) {
        let (mu, sigma) = self.mu_sigma();
        (-DOMAIN_SIGMAS * sigma, mu + DOMAIN_SIGMAS * sigma)
    }

    fn base_log_p(&self, y: f64) -> f64 {
        match self.kind {
            PairKind::Gaussian { mu, sigma } => normal::ln_pdf((y - mu) / sigma) - sigma.ln(),
            PairKind::Mixture { .. } => self.base_log_q(y) + self.base_log_lr(y),
        }
    }

    fn base_log_q(&self, y: f64) -> f64 {
        let (_, sigma) = self.mu_sigma();
        normal::ln_pdf(y / sigma) - sigma.ln()
    }

    fn base_log_lr(&self, y: f64) -> f64 {
        match self.kind {
            PairKind::Gaussian { mu, sigma } => (mu * y - 0.5 * mu * mu) / (sigma * sigma),
            PairKind::Mixture { rate, mu, sigma } => {
                let z = (mu * y - 0.5 * mu * mu) / (sigma * sigma);
                ln_mix(rate, z)
            }
        }
    }

    pub fn log_p(&self, y: f64) -> f64 {
        if self.swapped { self.base_log_q(y) } else { self.base_log_p(y) }
    }

    pub fn log_q(&self, y: f64) -> f64 {
        if self.swapped { self.base_log_p(y) } else { self.base_log_q(y) }
    }

    /// `L(y) = ln p(y) − ln q(y)`.
    pub fn log_lr(&self, y: f64) -> f64 {
        let l = self.base_log_lr(y);
        if self.swapped { -l } else { l }
    }

    /// Whether L is increasing in y (false means non-increasing).
    pub fn lr_increasing(&self) -> bool {
        !self.swapped
    }

    /// The point y where the unswapped log-ratio equals `l`. Returns −∞ when
    /// the ratio exceeds `l` everywhere and +∞ when it never reaches it.
    fn base_level(&self, l: f64) -> f64 {
        let (mu, sigma) = self.mu_sigma();
        let z = match self.kind {
            PairKind::Gaussian { .. } => l,
            PairKind::Mixture { rate, .. } => {
                if rate == 1.0 {
                    l
                } else {
                    let floor = (1.0 - rate).ln();
                    if l <= floor {
                        return f64::NEG_INFINITY;
                    }
                    // e^z = 1 + (e^l − 1)/rate, written to stay accurate near l = 0
                    // and for large l.
                    let t = (l - floor).exp_m1();
                    ((1.0 - rate) / rate).ln() + t.ln()
                }
            }
        };
        (sigma * sigma * z + 0.5 * mu * mu) / mu
    }

    /// The level-set point `L(y) = l`, if the ratio is non-constant.
    pub fn level_point(&self, l: f64) -> Option<f64> {
        if self.is_trivial() {
            return None;
        }
        Some(self.base_level(if self.swapped { -l } else { l }))
    }

    /// Unswapped P(L ≤ l) and P(L > l).
    fn base_p(&self, l: f64) -> (f64, f64) {
        let y = self.base_level(l);
        let (mu, sigma) = self.mu_sigma();
        match self.kind {
            PairKind::Gaussian { .. } => {
                let x = (y - mu) / sigma;
                (normal::cdf(x), normal::sf(x))
            }
            PairKind::Mixture { rate, .. } => {
                let (x0, x1) = (y / sigma, (y - mu) / sigma);
                (
                    (1.0 - rate) * normal::cdf(x0) + rate * normal::cdf(x1),
                    (1.0 - rate) * normal::sf(x0) + rate * normal::sf(x1),
                )
            }
        }
    }

    /// Unswapped Q(L ≤ l) and Q(L > l).
    fn base_q(&self, l: f64) -> (f64, f64) {
        let y = self.base_level(l);
        let (_, sigma) = self.mu_sigma();
        (normal::cdf(y / sigma), normal::sf(y / sigma))
    }

    fn trivial_split(l: f64) -> (f64, f64) {
        if l >= 0.0 { (1.0, 0.0) } else { (0.0, 1.0) }
    }

    /// `(P(L ≤ l), P(L > l))`, each computed directly to keep tail precision.
    pub fn plrv_p(&self, l: f64) -> (f64, f64) {
        if self.is_trivial() {
            return Self::trivial_split(l);
        }
        if self.swapped {
            // L = −L₀ and P = Q₀.
            let (le, gt) = self.base_q(-l);
            (gt, le)
        } else {
            self.base_p(l)
        }
    }

    /// `(Q(L ≤ l), Q(L > l))`.
    pub fn plrv_q(&self, l: f64) -> (f64, f64) {
        if self.is_trivial() {
            return Self::trivial_split(l);
        }
        if self.swapped {
            let (le, gt) = self.base_p(-l);
            (gt, le)
        } else {
            self.base_q(l)
        }
    }

    /// `D_γ[P‖Q] = P(L > ln γ) − γ·Q(L > ln γ)` from the PLRV tails.
    pub fn hockey_stick_closed_form(&self, gamma: f64) -> f64 {
        if gamma <= 0.0 {
            return 1.0;
        }
        let l = gamma.ln();
        let v = self.plrv_p(l).1 - gamma * self.plrv_q(l).1;
        v.clamp((1.0 - gamma).max(0.0), 1.0)
    }
}

/// `ln(1 − r + r·e^z)` without overflow.
fn ln_mix(rate: f64, z: f64) -> f64 {
    if z > 1.0 {
        z + (rate + (1.0 - rate) * (-z).exp()).ln()
    } else {
        (rate * z.exp_m1()).ln_1p()
    }
}
