//! Privacy profiles `H(γ) = D_γ[P‖Q]` and their duality with trade-off curves.


use crate::curves::TradeoffCurve;
use crate::error::{domain, ensure_finite, Error, Result};
use crate::grid::{alpha_grid, GammaGrid, Tolerances};
use crate::pair::DensityPair;
use crate::pwl::{interp, min_affine};
use crate::quad::{integrate, QuadSettings};

/// Convex, non-increasing `H: [0,∞) → [0,1]` sampled on a [`GammaGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct PrivacyProfile {
    grid: GammaGrid,
    values: Vec<f64>,
    tail_tol: f64,
}


impl PrivacyProfile {
    /// Builds a profile; values are clamped into `[[1−γ]₊, 1]`.
    pub fn new(grid: GammaGrid, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return domain(format!(
                "γ-grid has {} points but {} values were given",
                grid.len(),
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return domain("profile values must be finite");
        }
        let values = grid
            .values()
            .iter()
            .zip(values)
            .map(|(&g, v)| v.clamp((1.0 - g).max(0.0), 1.0))
            .collect();
        Ok(Self {
            grid,
            values,
            tail_tol: Tolerances::default().tail,
        })
    }

    /// The perfectly private profile `[1−γ]₊`.
    pub fn identity(grid: GammaGrid) -> Self {
        let values = grid.values().iter().map(|&g| (1.0 - g).max(0.0)).collect();
        Self::new(grid, values).expect("identity profile is valid")
    }

    pub fn with_tail_tol(mut self, tail_tol: f64) -> Self {
        self.tail_tol = tail_tol;
        self
    }

    pub fn grid(&self) -> &GammaGrid {
        &self.grid
    }

    pub fn gammas(&self) -> &[f64] {
        self.grid.values()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    /// `H(γ_max)`.
    pub fn tail(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Errors when the profile still carries mass at the end of its grid.
    pub fn check_tail(&self) -> Result<()> {
        if self.tail() > self.tail_tol {
            return Err(Error::GridTooShort {
                gamma_max: self.grid.max(),
                tail: self.tail(),
                tail_tol: self.tail_tol,
            });
        }
        Ok(())
    }

    /// Interpolated value. Beyond the grid the last value is held when it is
    /// below the tail tolerance.
    pub fn eval(&self, gamma: f64) -> Result<f64> {
        ensure_finite("gamma", gamma)?;
        if gamma < 0.0 {
            return domain(format!("gamma must be non-negative, got {gamma}"));
        }
        if gamma > self.grid.max() {
            self.check_tail()?;
            return Ok(self.tail());
        }
        Ok(interp(self.gammas(), &self.values, gamma))
    }

    /// Interpolated value, holding `H(γ_max)` beyond the grid unconditionally.
    pub fn eval_clamped(&self, gamma: f64) -> f64 {
        interp(self.gammas(), &self.values, gamma.max(0.0))
    }

    /// Checks the profile axioms on the samples.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        if (self.values[0] - 1.0).abs() > tol.convex {
            return domain(format!("H(0) = {} differs from 1", self.values[0]));
        }
        let g = self.gammas();
        for i in 1..self.values.len() {
            if self.values[i] > self.values[i - 1] + tol.convex {
                return domain(format!("profile increases at γ={}", g[i]));
            }
            if self.values[i] < (1.0 - g[i]).max(0.0) - tol.convex {
                return domain(format!("profile falls below [1−γ]₊ at γ={}", g[i]));
            }
        }
        for i in 1..self.values.len() - 1 {
            let w = (g[i + 1] - g[i]) / (g[i + 1] - g[i - 1]);
            let chord = w * self.values[i - 1] + (1.0 - w) * self.values[i + 1];
            if self.values[i] > chord + tol.convex {
                return domain(format!("profile is not convex at γ={}", g[i]));
            }
        }
        Ok(())
    }

    /// Largest pointwise difference on the shared grid.
    pub fn sup_distance(&self, other: &PrivacyProfile) -> f64 {
        self.gammas()
            .iter()
            .zip(&self.values)
            .map(|(&g, &v)| (v - other.eval_clamped(g)).abs())
            .fold(0.0, f64::max)
    }

    /// Pointwise maximum with another profile on this profile's grid.
    pub fn max_with(&self, other: &PrivacyProfile) -> PrivacyProfile {
        let values = self
            .gammas()
            .iter()
            .zip(&self.values)
            .map(|(&g, &v)| v.max(other.eval_clamped(g)))
            .collect();
        Self { values, ..self.clone() }
    }
}

/// `∫ [p − γq]₊` by adaptive quadrature, split at the level set `p = γq`.
pub fn hockey_stick(pair: &DensityPair, gamma: f64) -> Result<f64> {
    hockey_stick_with(pair, gamma, QuadSettings::default())
}

pub fn hockey_stick_with(pair: &DensityPair, gamma: f64, settings: QuadSettings) -> Result<f64> {
    ensure_finite("gamma", gamma)?;
    if gamma < 0.0 {
        return domain(format!("gamma must be non-negative, got {gamma}"));
    }
    if gamma == 0.0 {
        return Ok(1.0);
    }
    if pair.is_trivial() {
        return Ok((1.0 - gamma).max(0.0));
    }
    let (lo, hi) = pair.domain();
    let mut bps = vec![lo, hi];
    let ln_g = gamma.ln();
    if let Some(y) = pair.level_point(ln_g) {
        if y > lo && y < hi {
            bps.push(y);
        }
    }
    // Only the side where L > ln γ contributes.
    let integrand = |y: f64| {
        let lp = pair.log_p(y);
        let lq = pair.log_q(y);
        if lp - lq > ln_g {
            lp.exp() - gamma * lq.exp()
        } else {
            0.0
        }
    };
    let r = integrate(integrand, &bps, settings)?;
    Ok(r.value.clamp((1.0 - gamma).max(0.0), 1.0))
}

/// Hockey-stick divergences of `pair` on every point of `grid`.
pub fn profile_from_pair(pair: &DensityPair, grid: &GammaGrid) -> Result<PrivacyProfile> {
    let values = grid
        .values()
        .iter()
        .map(|&g| hockey_stick(pair, g))
        .collect::<Result<Vec<_>>>()?;
    PrivacyProfile::new(grid.clone(), values)
}

/// `H(γ) = 1 − min_α (α + γ f(α))`, exact for the piecewise-linear curve.
pub fn tradeoff_to_profile(f: &TradeoffCurve, grid: &GammaGrid) -> PrivacyProfile {
    // Points (x, y) = (f(α), α) sorted by x; flat runs keep the smallest α.
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(f.len());
    for (&a, &v) in f.alpha().iter().zip(f.values()).rev() {
        match pts.last_mut() {
            Some(last) if v <= last.0 => last.1 = last.1.min(a),
            _ => pts.push((v, a)),
        }
    }
    let m = min_affine(&pts, grid.values());
    let values = m.into_iter().map(|v| 1.0 - v).collect();
    PrivacyProfile::new(grid.clone(), values).expect("conjugate of a valid curve is finite")
}

/// `f(α) = max(0, sup_γ (1 − α − H(γ))/γ)` on the standard α-grid.
pub fn profile_to_tradeoff(h: &PrivacyProfile) -> Result<TradeoffCurve> {
    h.check_tail()?;
    // Lines (1 − H_j − α)/γ_j: intercept (1−H_j)/γ_j, slope −1/γ_j.
    // As min_j (y_j + α x_j) with x_j = 1/γ_j, y_j = −(1−H_j)/γ_j.
    let mut pts: Vec<(f64, f64)> = h
        .gammas()
        .iter()
        .zip(h.values())
        .skip(1)
        .map(|(&g, &v)| (1.0 / g, -(1.0 - v) / g))
        .collect();
    pts.reverse();
    let alpha = alpha_grid();
    let m = min_affine(&pts, &alpha);
    let values = alpha
        .iter()
        .zip(m)
        .map(|(&a, v)| (-v).clamp(0.0, 1.0 - a))
        .collect();
    TradeoffCurve::from_samples(alpha, values)
}

/// `Ĥ(γ) = 1 − γ + γ H(1/γ)` with `Ĥ(0) = 1`.
pub fn hat(h: &PrivacyProfile) -> PrivacyProfile {
    let g = h.gammas();
    let mut values = Vec::with_capacity(g.len());
    values.push(1.0);
    for i in 1..g.len() {
        let j = h.grid.reciprocal_index(i);
        values.push(1.0 - g[i] + g[i] * h.values[j]);
    }
    PrivacyProfile::new(h.grid.clone(), values).expect("reflection of a valid profile is finite")
}

/// `sym(H) = max(H, Ĥ)`.
pub fn symmetrize_profile(h: &PrivacyProfile) -> PrivacyProfile {
    h.max_with(&hat(h))
}

/// `δ(ε) = H(e^ε)`.
pub fn epsilon_delta(h: &PrivacyProfile, epsilon: f64) -> Result<f64> {
    ensure_finite("epsilon", epsilon)?;
    let gamma = epsilon.exp();
    let g = h.gammas();
    if gamma < g[1] || gamma > h.grid.max() {
        return Err(Error::Range(format!(
            "ε = {epsilon} maps to γ = {gamma:e}, outside [{:e}, {:e}]",
            g[1],
            h.grid.max()
        )));
    }
    h.eval(gamma)
}
