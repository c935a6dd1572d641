//! Stopping rules over realized privacy parameters.

use serde::{Deserialize, Serialize};

use crate::compose::{compose_factors, ComposedProfile, Factor};
use crate::error::{domain, ensure_finite, Error, Result};
use crate::normal;
use crate::profiles::PrivacyProfile;

/// Slack granted to the profile comparison of [`fdp_filter`].
///
/// Linear interpolation of a convex profile between grid knots overestimates
/// a composite by up to about 1e-5 on the standard grid.
pub const FDP_FILTER_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Continue,
    Halt,
}

/// A filter verdict with the slack of its governing inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub decision: Decision,
    /// Negative exactly when the inequality fails by more than the tolerance.
    pub margin: f64,
}

impl FilterDecision {
    fn from_margin(margin: f64, tol: f64) -> Self {
        let decision = if margin >= -tol { Decision::Continue } else { Decision::Halt };
        Self { decision, margin }
    }

    pub fn is_continue(&self) -> bool {
        self.decision == Decision::Continue
    }
}

/// `CONT` iff `H₁⊗…⊗H_t ≤ H_B` on the budget's γ-grid, up to [`FDP_FILTER_TOL`].
pub fn fdp_filter(budget: &PrivacyProfile, realized: &[Factor]) -> Result<FilterDecision> {
    fdp_filter_with(budget, realized, FDP_FILTER_TOL)
}

pub fn fdp_filter_with(budget: &PrivacyProfile, realized: &[Factor], tol: f64) -> Result<FilterDecision> {
    match compose_factors(realized, budget.grid()) {
        Ok(composed) => Ok(compare_profiles(budget, &composed, tol)),
        // The composite keeps mass past the end of a grid on which the budget
        // has none, so the budget is exceeded there.
        Err(Error::GridTooShort { tail, tail_tol, .. }) if budget.tail() <= budget.tail_tol() => {
            Ok(FilterDecision { decision: Decision::Halt, margin: tail_tol.min(budget.tail()) - tail })
        }
        Err(e) => Err(e),
    }
}

/// Pointwise comparison of a composed profile against a budget on the same grid.
pub fn compare_profiles(budget: &PrivacyProfile, composed: &ComposedProfile, tol: f64) -> FilterDecision {
    let margin = budget
        .values()
        .iter()
        .zip(composed.base.values())
        .map(|(b, h)| b - h)
        .fold(f64::INFINITY, f64::min);
    FilterDecision::from_margin(margin, tol)
}

/// `CONT` iff `Σ μᵢ² ≤ μ_B²`.
pub fn gdp_filter(mu_budget: f64, realized_mus: &[f64]) -> Result<FilterDecision> {
    ensure_finite("mu_budget", mu_budget)?;
    if mu_budget < 0.0 || realized_mus.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
        return domain("GDP parameters must be finite and non-negative");
    }
    let spent: f64 = realized_mus.iter().map(|m| m * m).sum();
    Ok(FilterDecision::from_margin(mu_budget * mu_budget - spent, 0.0))
}

/// `CONT` iff `Σ εᵢ(α) ≤ ε_B` at a fixed order α.
pub fn rdp_filter(order: f64, epsilon_budget: f64, realized_rdp: &[f64]) -> Result<FilterDecision> {
    ensure_finite("order", order)?;
    if order <= 1.0 {
        return domain(format!("Rényi order must exceed 1, got {order}"));
    }
    let spent: f64 = realized_rdp.iter().sum();
    Ok(FilterDecision::from_margin(epsilon_budget - spent, 0.0))
}

fn check_conversion(order: f64, delta: f64) -> Result<()> {
    ensure_finite("order", order)?;
    if order <= 1.0 {
        return domain(format!("Rényi order must exceed 1, got {order}"));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return domain(format!("δ must lie in (0, 1], got {delta}"));
    }
    Ok(())
}

/// `ε = ε_RDP + ln(1/δ)/(α−1)`.
pub fn rdp_to_dp(order: f64, rdp_epsilon: f64, delta: f64) -> Result<f64> {
    check_conversion(order, delta)?;
    Ok(rdp_epsilon + (1.0 / delta).ln() / (order - 1.0))
}

/// `ε = ε_RDP + ln((α−1)/α) − (ln δ + ln α)/(α−1)`, the sharper conversion
/// used by common RDP accountants. Never larger than [`rdp_to_dp`] for δ < 1.
pub fn rdp_to_dp_tight(order: f64, rdp_epsilon: f64, delta: f64) -> Result<f64> {
    check_conversion(order, delta)?;
    let eps = rdp_epsilon + ((order - 1.0) / order).ln() - (delta.ln() + order.ln()) / (order - 1.0);
    Ok(eps.max(0.0).min(rdp_to_dp(order, rdp_epsilon, delta)?))
}

/// `δ(ε) = Φ(−ε/μ + μ/2) − e^ε Φ(−ε/μ − μ/2)` of μ-GDP.
pub fn gdp_delta(mu: f64, epsilon: f64) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    let a = normal::cdf(-epsilon / mu + mu / 2.0);
    let b = (epsilon + normal::ln_cdf(-epsilon / mu - mu / 2.0)).exp();
    (a - b).max(0.0)
}

/// Smallest ε ≥ 0 with `gdp_delta(μ, ε) ≤ δ`, by bisection.
pub fn gdp_to_dp(mu: f64, delta: f64) -> Result<f64> {
    ensure_finite("mu", mu)?;
    if mu < 0.0 || !(delta > 0.0 && delta < 1.0) {
        return domain(format!("need μ ≥ 0 and δ ∈ (0,1), got μ = {mu}, δ = {delta}"));
    }
    if gdp_delta(mu, 0.0) <= delta {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while gdp_delta(mu, hi) > delta {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gdp_delta(mu, mid) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// `{1.5, 2, 3, …, 64}`.
pub fn default_rdp_orders() -> Vec<f64> {
    std::iter::once(1.5).chain((2..=64).map(f64::from)).collect()
}

/// Which RDP→DP conversion to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conversion {
    Standard,
    Tight,
}

/// Smallest ε over the order grid and the order attaining it.
pub fn best_epsilon(orders: &[f64], rdp: &[f64], delta: f64, conversion: Conversion) -> Result<(f64, f64)> {
    if orders.is_empty() || orders.len() != rdp.len() {
        return domain("order grid and RDP curve must be non-empty and of equal length");
    }
    let mut best = (f64::INFINITY, orders[0]);
    for (&a, &e) in orders.iter().zip(rdp) {
        let eps = match conversion {
            Conversion::Standard => rdp_to_dp(a, e, delta)?,
            Conversion::Tight => rdp_to_dp_tight(a, e, delta)?,
        };
        if eps < best.0 {
            best = (eps, a);
        }
    }
    Ok(best)
}

/// Multi-order RDP filter: continues while some order still certifies
/// `(ε_B, δ)` after the conversion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdpFilter {
    pub orders: Vec<f64>,
    pub spent: Vec<f64>,
    pub epsilon_budget: f64,
    pub delta: f64,
    pub conversion: Conversion,
}

impl RdpFilter {
    pub fn new(orders: Vec<f64>, epsilon_budget: f64, delta: f64, conversion: Conversion) -> Result<Self> {
        if orders.is_empty() || orders.iter().any(|&a| !(a > 1.0) || !a.is_finite()) {
            return domain("orders must be finite and exceed 1");
        }
        check_conversion(orders[0], delta)?;
        let spent = vec![0.0; orders.len()];
        Ok(Self { orders, spent, epsilon_budget, delta, conversion })
    }

    /// Decision if a step with per-order costs `step` were added.
    pub fn check(&self, step: &[f64]) -> Result<FilterDecision> {
        if step.len() != self.orders.len() {
            return domain("step costs must match the order grid");
        }
        let total: Vec<f64> = self.spent.iter().zip(step).map(|(a, b)| a + b).collect();
        let (eps, _) = best_epsilon(&self.orders, &total, self.delta, self.conversion)?;
        Ok(FilterDecision::from_margin(self.epsilon_budget - eps, 0.0))
    }

    /// Adds the step if the filter allows it.
    pub fn try_step(&mut self, step: &[f64]) -> Result<FilterDecision> {
        let d = self.check(step)?;
        if d.is_continue() {
            for (s, c) in self.spent.iter_mut().zip(step) {
                *s += c;
            }
        }
        Ok(d)
    }

    pub fn epsilon(&self) -> Result<f64> {
        Ok(best_epsilon(&self.orders, &self.spent, self.delta, self.conversion)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::grid_for;
    use crate::grid::GammaGrid;
    use crate::pair::DensityPair;
    use crate::profiles::profile_from_pair;

    fn gaussian_budget(mu: f64) -> PrivacyProfile {
        let pair = DensityPair::gaussian(mu, 1.0).unwrap();
        profile_from_pair(&pair, &grid_for(&[pair])).unwrap()
    }

    #[test]
    fn gdp_examples() {
        assert!(gdp_filter(0.0, &[]).unwrap().is_continue());
        let d = gdp_filter(5.0, &[3.0, 4.0]).unwrap();
        assert!(d.is_continue());
        assert_eq!(d.margin, 0.0);
        assert!(!gdp_filter(5.0, &[3.0, 4.0, 0.1]).unwrap().is_continue());
        assert!(gdp_filter(1.0, &[-0.1]).is_err());
    }

    #[test]
    fn fdp_examples() {
        let g = |mu| Factor::Gaussian { mu };
        assert!(fdp_filter(&PrivacyProfile::identity(GammaGrid::standard()), &[]).unwrap().is_continue());
        assert!(fdp_filter(&gaussian_budget(1.5), &[g(1.0), g(1.0)]).unwrap().is_continue());
        let d = fdp_filter(&gaussian_budget(2f64.sqrt()), &[g(1.0), g(1.0)]).unwrap();
        assert!(d.is_continue() && d.margin.abs() < 1e-4, "{d:?}");
        assert!(!fdp_filter(&gaussian_budget(1.3), &[g(1.0), g(1.0)]).unwrap().is_continue());
    }

    #[test]
    fn grid_overflow_halts() {
        let d = fdp_filter(&gaussian_budget(0.5), &[Factor::Gaussian { mu: 5.0 }]).unwrap();
        assert!(!d.is_continue());
    }

    #[test]
    fn rdp_examples() {
        assert!(rdp_filter(2.0, 1.0, &[]).unwrap().is_continue());
        let d = rdp_filter(2.0, 1.0, &[0.25, 0.75]).unwrap();
        assert!(d.is_continue() && d.margin == 0.0);
        assert!(!rdp_filter(2.0, 1.0, &[0.5, 0.75]).unwrap().is_continue());
        assert!(rdp_filter(1.0, 1.0, &[]).is_err());
    }

    #[test]
    fn conversions() {
        assert_eq!(rdp_to_dp(4.0, 0.7, 1.0).unwrap(), 0.7);
        let orders = default_rdp_orders();
        assert_eq!(orders.len(), 64);
        let eps: Vec<f64> = orders.iter().map(|&a| rdp_to_dp(a, 0.0, 1e-5).unwrap()).collect();
        assert!(eps.windows(2).all(|w| w[1] < w[0]));
        for &a in &orders {
            assert!(rdp_to_dp_tight(a, 0.3, 1e-5).unwrap() <= rdp_to_dp(a, 0.3, 1e-5).unwrap());
        }
    }

    #[test]
    fn gdp_conversion_inverts_delta() {
        for mu in [0.1, 0.314, 1.0, 3.0] {
            for delta in [1e-7, 1e-5, 1e-3] {
                let eps = gdp_to_dp(mu, delta).unwrap();
                assert!((gdp_delta(mu, eps) - delta).abs() < 1e-12 * delta.max(1e-3), "{mu} {delta}");
            }
        }
        let pair = DensityPair::gaussian(1.0, 1.0).unwrap();
        assert!((gdp_delta(1.0, 0.7) - pair.hockey_stick_closed_form(0.7f64.exp())).abs() < 1e-14);
    }

    #[test]
    fn rdp_filter_counts_steps() {
        let orders = vec![2.0, 8.0];
        let mut f = RdpFilter::new(orders, 2.0, 1e-5, Conversion::Standard).unwrap();
        let step = [0.01, 0.04];
        let mut n = 0;
        while f.try_step(&step).unwrap().is_continue() {
            n += 1;
        }
        // order 8: 0.04 n + ln(1e5)/7 ≤ 2 ⟹ n ≤ 8.88
        assert_eq!(n, 8);
    }
}
