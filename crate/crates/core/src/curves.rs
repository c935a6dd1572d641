//! Trade-off functions sampled on an α-grid.
//!
//! A [`TradeoffCurve`] is the piecewise-linear interpolant of its samples.
//! Constructors, inversion, symmetrisation, the Δ-divergence and Blackwell
//! comparisons all operate on that interpolant.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_finite, Result};
use crate::grid::{alpha_grid, Tolerances};
use crate::normal;
use crate::pwl::{interp, lower_convex_envelope};

/// Trade-off function `f: [0,1] → [0,1]` sampled on a strictly increasing grid
/// that contains both 0 and 1.
#[derive(Clone, Debug, PartialEq)]
pub struct TradeoffCurve {
    alpha: Arc<[f64]>,
    value: Vec<f64>,
}

/// Outcome of a Blackwell comparison `f1` vs `f2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BlackwellOrder {
    /// `f1 ≤ f2` pointwise.
    LessEq,
    /// `f1 ≥ f2` pointwise: `f1` is the harder testing problem.
    GreaterEq,
    Equal,
    /// Neither dominates; the α locations where `f1 − f2` changes sign.
    Incomparable { crossings: Vec<f64> },
}

impl TradeoffCurve {
    /// Builds a curve from samples. Values are clamped into [0,1].
    pub fn from_samples(alpha: Arc<[f64]>, value: Vec<f64>) -> Result<Self> {
        if alpha.len() != value.len() {
            return domain(format!(
                "grid has {} points but {} values were given",
                alpha.len(),
                value.len()
            ));
        }
        if alpha.len() < 2 || alpha[0] != 0.0 || alpha[alpha.len() - 1] != 1.0 {
            return domain("α-grid must start at 0 and end at 1");
        }
        if alpha.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("α-grid must be strictly increasing");
        }
        if value.iter().any(|v| !v.is_finite()) {
            return domain("curve values must be finite");
        }
        let value = value.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(Self { alpha, value })
    }

    /// Samples `f` on the standard α-grid.
    pub fn from_fn(f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn_on(alpha_grid(), f)
    }

    pub fn from_fn_on(alpha: Arc<[f64]>, f: impl Fn(f64) -> f64) -> Self {
        let value = alpha.iter().map(|&a| f(a).clamp(0.0, 1.0)).collect();
        Self { alpha, value }
    }

    /// The perfectly private curve `Id(α) = 1 − α`.
    pub fn identity() -> Self {
        Self::from_fn(|a| 1.0 - a)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn values(&self) -> &[f64] {
        &self.value
    }

    pub(crate) fn alpha_shared(&self) -> Arc<[f64]> {
        self.alpha.clone()
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    /// Piecewise-linear evaluation; α is clamped to [0,1].
    pub fn eval(&self, a: f64) -> f64 {
        interp(&self.alpha, &self.value, a.clamp(0.0, 1.0))
    }

    pub fn resample(&self, alpha: Arc<[f64]>) -> Self {
        if Arc::ptr_eq(&alpha, &self.alpha) || *alpha == *self.alpha {
            return self.clone();
        }
        Self::from_fn_on(alpha, |a| self.eval(a))
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.alpha.iter().copied().zip(self.value.iter().copied()).collect()
    }

    /// `sup_α |self − other|`, evaluated on the union of both grids.
    pub fn sup_distance(&self, other: &TradeoffCurve) -> f64 {
        let a = self.alpha.iter().map(|&x| (self.eval(x) - other.eval(x)).abs());
        let b = other.alpha.iter().map(|&x| (self.eval(x) - other.eval(x)).abs());
        a.chain(b).fold(0.0, f64::max)
    }

    /// Checks the trade-off function axioms on the samples.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        for (i, w) in self.value.windows(2).enumerate() {
            if w[1] > w[0] + tol.convex {
                return domain(format!("curve increases at α={}", self.alpha[i + 1]));
            }
        }
        for i in 1..self.len() - 1 {
            let (a0, a1, a2) = (self.alpha[i - 1], self.alpha[i], self.alpha[i + 1]);
            let w = (a2 - a1) / (a2 - a0);
            let chord = w * self.value[i - 1] + (1.0 - w) * self.value[i + 1];
            if self.value[i] > chord + tol.convex {
                return domain(format!("curve is not convex at α={a1}"));
            }
        }
        for (a, v) in self.alpha.iter().zip(&self.value) {
            if *v > 1.0 - a + tol.grid {
                return domain(format!("curve exceeds 1 − α at α={a}"));
            }
        }
        Ok(())
    }

    /// True when the curve is invariant under reflection across y = x.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        invert(self).sup_distance(self) <= tol
    }
}

/// Closed form `G_μ(α) = Φ(Φ⁻¹(1−α) − μ)`.
pub fn gaussian_value(mu: f64, a: f64) -> f64 {
    if a <= 0.0 {
        return 1.0;
    }
    if a >= 1.0 {
        return 0.0;
    }
    // Φ⁻¹(1−α) = −Φ⁻¹(α) keeps precision for α near 1.
    normal::sf(normal::quantile(a) + mu)
}

fn check_mu(mu: f64) -> Result<()> {
    ensure_finite("mu", mu)?;
    if mu < 0.0 {
        return domain(format!("mu must be non-negative, got {mu}"));
    }
    Ok(())
}

fn check_rate(q: f64) -> Result<()> {
    ensure_finite("q", q)?;
    if !(0.0..=1.0).contains(&q) {
        return domain(format!("sampling rate must lie in [0,1], got {q}"));
    }
    Ok(())
}

/// `G_μ`, the trade-off function of N(0,1) vs N(μ,1).
pub fn gaussian_tradeoff(mu: f64) -> Result<TradeoffCurve> {
    check_mu(mu)?;
    if mu == 0.0 {
        return Ok(TradeoffCurve::identity());
    }
    Ok(TradeoffCurve::from_fn(|a| gaussian_value(mu, a)))
}

/// `SG⁺_{q,μ}(α) = (1−q)(1−α) + q·G_μ(α)`.
pub fn subsampled_gaussian_plus(q: f64, mu: f64) -> Result<TradeoffCurve> {
    check_rate(q)?;
    check_mu(mu)?;
    if q == 0.0 || mu == 0.0 {
        return Ok(TradeoffCurve::identity());
    }
    Ok(TradeoffCurve::from_fn(|a| {
        (1.0 - q) * (1.0 - a) + q * gaussian_value(mu, a)
    }))
}

/// `SG⁻_{q,μ} = (SG⁺_{q,μ})⁻¹`, the remove-adjacency curve of the subsampled
/// Gaussian mechanism.
///
/// Evaluated pointwise as the trade-off of the mixture against N(0,1): for
/// each α the rejection threshold t with `P_mix(y < t) = α` is found by
/// bisection and the value is `Φ(−t)`.
pub fn subsampled_gaussian_minus(q: f64, mu: f64) -> Result<TradeoffCurve> {
    check_rate(q)?;
    check_mu(mu)?;
    if q == 0.0 || mu == 0.0 {
        return Ok(TradeoffCurve::identity());
    }
    Ok(TradeoffCurve::from_fn(|a| subsampled_minus_value(q, mu, a)))
}

fn subsampled_minus_value(q: f64, mu: f64, a: f64) -> f64 {
    if a <= 0.0 {
        return 1.0;
    }
    if a >= 1.0 {
        return 0.0;
    }
    // Φ(t−μ) ≤ P_mix(y < t) ≤ Φ(t) brackets the threshold. Compare on the
    // smaller tail to keep relative precision.
    let excess = |t: f64| {
        if a <= 0.5 {
            (1.0 - q) * normal::cdf(t) + q * normal::cdf(t - mu) - a
        } else {
            (1.0 - a) - ((1.0 - q) * normal::sf(t) + q * normal::sf(t - mu))
        }
    };
    let z = normal::quantile(a);
    let (mut lo, mut hi) = (z, z + mu);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    normal::sf(0.5 * (lo + hi))
}

/// Reflection of the graph across y = x, resampled on the same α-grid.
pub fn invert(f: &TradeoffCurve) -> TradeoffCurve {
    // Swapped graph: x = f(α) ascending, y = α descending. Where f is flat the
    // generalised inverse takes the smallest α.
    let mut xs: Vec<f64> = Vec::with_capacity(f.len() + 2);
    let mut ys: Vec<f64> = Vec::with_capacity(f.len() + 2);
    for i in (0..f.len()).rev() {
        let (x, y) = (f.value[i], f.alpha[i]);
        match xs.last() {
            Some(&last) if x <= last => {
                let n = ys.len();
                ys[n - 1] = ys[n - 1].min(y);
            }
            _ => {
                xs.push(x);
                ys.push(y);
            }
        }
    }
    if xs[0] > 0.0 {
        xs.insert(0, 0.0);
        ys.insert(0, 1.0);
    }
    if *xs.last().unwrap() < 1.0 {
        xs.push(1.0);
        ys.push(0.0);
    }
    TradeoffCurve::from_fn_on(f.alpha_shared(), |a| interp(&xs, &ys, a))
}

/// `sym(f)`: lower convex envelope of `min(f, f⁻¹)`.
pub fn symmetrize(f: &TradeoffCurve) -> TradeoffCurve {
    let inv = invert(f);
    let pts: Vec<(f64, f64)> = f
        .alpha
        .iter()
        .zip(f.value.iter().zip(inv.values()))
        .map(|(&a, (&v, &w))| (a, v.min(w)))
        .collect();
    let env = lower_convex_envelope(&pts).expect("α-grid is strictly increasing");
    TradeoffCurve::from_fn_on(f.alpha_shared(), |a| env.eval(a))
}

/// Pointwise minimum of a family, followed by the lower convex envelope
/// (`ce inf`). All curves are evaluated on the first curve's grid.
pub fn convex_envelope_of_min(family: &[TradeoffCurve]) -> Result<TradeoffCurve> {
    let Some(first) = family.first() else {
        return domain("ce inf needs at least one curve");
    };
    let pts: Vec<(f64, f64)> = first
        .alpha
        .iter()
        .map(|&a| {
            let m = family.iter().map(|f| f.eval(a)).fold(f64::INFINITY, f64::min);
            (a, m)
        })
        .collect();
    let env = lower_convex_envelope(&pts)?;
    Ok(TradeoffCurve::from_fn_on(first.alpha_shared(), |a| env.eval(a)))
}

const FEASIBILITY_SLACK: f64 = 1e-12;

fn band_feasible(f1: &TradeoffCurve, f2: &TradeoffCurve, delta: f64) -> bool {
    let one_side = |a: &TradeoffCurve, b: &TradeoffCurve| {
        b.alpha
            .iter()
            .zip(&b.value)
            .filter(|(&x, _)| x + delta <= 1.0)
            .all(|(&x, &v)| a.eval(x + delta) - delta <= v + FEASIBILITY_SLACK)
    };
    one_side(f1, f2) && one_side(f2, f1)
}

/// Smallest Δ ≥ 0 with `f1(α+Δ) − Δ ≤ f2(α)` and `f2(α+Δ) − Δ ≤ f1(α)` on the grid.
pub fn delta_divergence(f1: &TradeoffCurve, f2: &TradeoffCurve) -> f64 {
    if band_feasible(f1, f2, 0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if band_feasible(f1, f2, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    hi
}

/// Pointwise comparison with tolerance `tol`. Crossings of an incomparable
/// pair are refined by bisection to 1e-6 in α.
pub fn blackwell_compare(f1: &TradeoffCurve, f2: &TradeoffCurve, tol: f64) -> BlackwellOrder {
    let f2 = f2.resample(f1.alpha_shared());
    let diff: Vec<f64> = f1.value.iter().zip(&f2.value).map(|(a, b)| a - b).collect();
    let max = diff.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = diff.iter().copied().fold(f64::INFINITY, f64::min);
    if max <= tol && min >= -tol {
        return BlackwellOrder::Equal;
    }
    if min >= -tol {
        return BlackwellOrder::GreaterEq;
    }
    if max <= tol {
        return BlackwellOrder::LessEq;
    }

    let g = |a: f64| f1.eval(a) - f2.eval(a);
    let mut crossings = Vec::new();
    let mut last: Option<(usize, f64)> = None;
    for (i, &d) in diff.iter().enumerate() {
        if d.abs() <= tol {
            continue;
        }
        let s = d.signum();
        if let Some((j, prev)) = last {
            if s != prev {
                let (mut lo, mut hi) = (f1.alpha[j], f1.alpha[i]);
                while hi - lo > 1e-6 {
                    let mid = 0.5 * (lo + hi);
                    if g(mid).signum() == prev {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                crossings.push(0.5 * (lo + hi));
            }
        }
        last = Some((i, s));
    }
    BlackwellOrder::Incomparable { crossings }
}

/// Whether `G_μ(α+Δ) − Δ ≤ f(α) ≤ G_μ(α−Δ) + Δ` holds on every grid α,
/// with the arguments of `G_μ` clamped to [0,1].
pub fn approx_gdp_check(f: &TradeoffCurve, mu: f64, delta: f64) -> Result<bool> {
    check_mu(mu)?;
    ensure_finite("delta", delta)?;
    if !(0.0..=1.0).contains(&delta) {
        return domain(format!("delta must lie in [0,1], got {delta}"));
    }
    Ok(f.alpha.iter().zip(&f.value).all(|(&a, &v)| {
        let lower = gaussian_value(mu, (a + delta).min(1.0)) - delta;
        let upper = gaussian_value(mu, (a - delta).max(0.0)) + delta;
        lower <= v + FEASIBILITY_SLACK && v <= upper + FEASIBILITY_SLACK
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn gaussian_endpoints_and_identity() {
        let g0 = gaussian_tradeoff(0.0).unwrap();
        assert_eq!(g0, TradeoffCurve::identity());
        for mu in [0.3, 1.0, 4.0] {
            let g = gaussian_tradeoff(mu).unwrap();
            assert_eq!(g.eval(0.0), 1.0);
            assert_eq!(g.eval(1.0), 0.0);
            g.validate(&tol()).unwrap();
        }
    }

    #[test]
    fn constructors_reject_bad_arguments() {
        assert!(gaussian_tradeoff(-1.0).is_err());
        assert!(gaussian_tradeoff(f64::NAN).is_err());
        assert!(subsampled_gaussian_plus(1.5, 1.0).is_err());
        assert!(subsampled_gaussian_minus(-0.1, 1.0).is_err());
    }

    #[test]
    fn subsampled_degenerate_cases() {
        assert_eq!(subsampled_gaussian_plus(0.0, 3.0).unwrap(), TradeoffCurve::identity());
        assert_eq!(
            subsampled_gaussian_plus(1.0, 1.0).unwrap(),
            gaussian_tradeoff(1.0).unwrap()
        );
        assert_eq!(subsampled_gaussian_plus(0.5, 1.0).unwrap().eval(0.0), 1.0);
        let id = TradeoffCurve::identity();
        assert!(subsampled_gaussian_minus(0.0, 1.0).unwrap().sup_distance(&id) < 1e-15);
        let m = subsampled_gaussian_minus(1.0, 1.0).unwrap();
        assert!(m.sup_distance(&gaussian_tradeoff(1.0).unwrap()) < 1e-4);
    }

    #[test]
    fn invert_is_an_involution() {
        let f = subsampled_gaussian_plus(0.5, 2.0).unwrap();
        let back = invert(&invert(&f));
        assert!(back.sup_distance(&f) <= 2.0 * tol().grid);
        let id = TradeoffCurve::identity();
        assert!(invert(&id).sup_distance(&id) < 1e-15);
        let g = gaussian_tradeoff(1.3).unwrap();
        assert!(invert(&g).sup_distance(&g) < 1e-4);
    }

    #[test]
    fn invert_handles_flat_segments() {
        // f(α) = max(0, 1 − 2α): flat at zero on [0.5, 1].
        let f = TradeoffCurve::from_fn(|a| (1.0 - 2.0 * a).max(0.0));
        let inv = invert(&f);
        assert!((inv.eval(0.0) - 0.5).abs() < 1e-12);
        assert!((inv.eval(0.5) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn symmetrize_fixed_points() {
        let g = gaussian_tradeoff(1.0).unwrap();
        assert!(symmetrize(&g).sup_distance(&g) < 1e-4);
        let id = TradeoffCurve::identity();
        assert!(symmetrize(&id).sup_distance(&id) < 1e-15);
        let f = subsampled_gaussian_minus(0.5, 1.3).unwrap();
        let s = symmetrize(&f);
        assert!(s.is_symmetric(2e-4));
        assert!(symmetrize(&s).sup_distance(&s) < 2e-4);
        let inv = invert(&f);
        for (i, &a) in f.alpha().iter().enumerate() {
            assert!(s.values()[i] <= f.eval(a).min(inv.eval(a)) + 1e-12);
        }
        s.validate(&tol()).unwrap();
    }

    #[test]
    fn delta_divergence_basics() {
        let g = gaussian_tradeoff(1.0).unwrap();
        assert_eq!(delta_divergence(&g, &g), 0.0);
        let h = gaussian_tradeoff(2.0).unwrap();
        let d1 = delta_divergence(&g, &h);
        let d2 = delta_divergence(&h, &g);
        assert!(d1 > 0.0);
        assert!((d1 - d2).abs() < 1e-12);
    }

    #[test]
    fn blackwell_orders_gaussians() {
        let g1 = gaussian_tradeoff(1.0).unwrap();
        let g2 = gaussian_tradeoff(2.0).unwrap();
        assert_eq!(blackwell_compare(&g1, &g2, 1e-9), BlackwellOrder::GreaterEq);
        assert_eq!(blackwell_compare(&g2, &g1, 1e-9), BlackwellOrder::LessEq);
        assert_eq!(blackwell_compare(&g1, &g1, 1e-9), BlackwellOrder::Equal);
    }

    #[test]
    fn blackwell_finds_a_crossing() {
        // A curve that is tighter than G_1 near α=0 but looser elsewhere.
        let g = gaussian_tradeoff(1.0).unwrap();
        let f = subsampled_gaussian_minus(0.5, 3.0).unwrap();
        match blackwell_compare(&g, &f, 1e-9) {
            BlackwellOrder::Incomparable { crossings } => {
                assert!(!crossings.is_empty());
                for c in crossings {
                    assert!((g.eval(c) - f.eval(c)).abs() < 1e-4);
                }
            }
            other => panic!("expected crossing, got {other:?}"),
        }
    }

    #[test]
    fn approx_gdp_examples() {
        let g = gaussian_tradeoff(1.0).unwrap();
        assert!(approx_gdp_check(&g, 1.0, 0.0).unwrap());
        assert!(!approx_gdp_check(&TradeoffCurve::identity(), 3.0, 0.0).unwrap());
        assert!(approx_gdp_check(&g, 1.0, 1.5).is_err());
    }

    #[test]
    fn from_samples_validates_shape() {
        let grid: Arc<[f64]> = vec![0.0, 0.5, 1.0].into();
        assert!(TradeoffCurve::from_samples(grid.clone(), vec![1.0, 0.5]).is_err());
        assert!(TradeoffCurve::from_samples(vec![0.1, 1.0].into(), vec![1.0, 0.0]).is_err());
        let c = TradeoffCurve::from_samples(grid, vec![1.0, 0.4, 0.0]).unwrap();
        assert_eq!(c.eval(0.25), 0.7);
    }
}
