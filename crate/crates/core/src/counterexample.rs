//! The three-step adaptive composition that defeats the natural f-DP filter.
//!
//! Step 1 releases a subsampled Gaussian output y₁. Depending on y₁ the
//! analyst continues with one of two fixed two-step branches. Each branch
//! alone fits the tightest budget that admits both, but the adaptive
//! composite does not near the calibration point γ₀ where the branch
//! profiles cross.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::compose::{tensor_at, tensor_profiles, tensor_switched, RegimeSwitch};
use crate::error::{domain, Result};
use crate::grid::{GammaGrid, GAMMA_STANDARD_MAX};
use crate::pair::DensityPair;
use crate::profiles::{profile_from_pair, symmetrize_profile, PrivacyProfile};

/// Which side of the step-1 split runs branch A.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchSide {
    /// Branch A for y₁ ≤ split, i.e. where `p₁ ≤ q₁`.
    AtOrBelow,
    /// Branch A for y₁ > split, i.e. where `p₁ > q₁`.
    Above,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleConfig {
    pub rate: f64,
    pub sigma: f64,
    pub mu_first: f64,
    pub split_y: f64,
    /// (μ₂, μ₃) of branch A.
    pub branch_a: (f64, f64),
    /// (μ₂, μ₃) of branch B.
    pub branch_b: (f64, f64),
    pub branch_a_side: BranchSide,
    pub gamma_max: f64,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self {
            rate: 0.5,
            sigma: 1.0,
            mu_first: 1.3,
            split_y: 0.65,
            branch_a: (2.25, 2.25),
            branch_b: (0.1, 10.0),
            branch_a_side: BranchSide::Above,
            gamma_max: 1e60,
        }
    }
}

/// All profiles of the construction on one shared γ-grid.
#[derive(Clone, Debug)]
pub struct Counterexample {
    pub config: CounterexampleConfig,
    pub grid: GammaGrid,
    pub first: DensityPair,
    /// Branch A composite `H_{2×3,1}`.
    pub branch_a: PrivacyProfile,
    /// Branch B composite `H_{2×3,2}`.
    pub branch_b: PrivacyProfile,
    /// `max(H₁⊗H_{2×3,1}, H₁⊗H_{2×3,2})`.
    pub budget_tight: PrivacyProfile,
    pub adaptive: PrivacyProfile,
    third_a: PrivacyProfile,
    third_b: PrivacyProfile,
    split_l: f64,
}

/// Returns the third-step profile and the two-step composite.
fn branch(
    config: &CounterexampleConfig,
    mus: (f64, f64),
    grid: &GammaGrid,
) -> Result<(PrivacyProfile, PrivacyProfile)> {
    let second = DensityPair::mixture(config.rate, mus.0, config.sigma)?;
    let third = DensityPair::mixture(config.rate, mus.1, config.sigma)?;
    let h3 = profile_from_pair(&third, grid)?;
    let h23 = tensor_profiles(&second, &h3)?;
    Ok((h3, h23))
}

impl Counterexample {
    pub fn compute(config: CounterexampleConfig) -> Result<Self> {
        if !(config.gamma_max >= GAMMA_STANDARD_MAX) {
            return domain("gamma_max must be at least the standard grid maximum");
        }
        let grid = GammaGrid::extended(config.gamma_max);
        let first = DensityPair::mixture(config.rate, config.mu_first, config.sigma)?;
        let (third_a, branch_a) = branch(&config, config.branch_a, &grid)?;
        let (third_b, branch_b) = branch(&config, config.branch_b, &grid)?;
        let tight_a = tensor_profiles(&first, &branch_a)?;
        let tight_b = tensor_profiles(&first, &branch_b)?;
        let budget_tight = tight_a.max_with(&tight_b);
        let split_l = first.log_lr(config.split_y);
        let mut ce = Self {
            config,
            grid,
            first,
            branch_a,
            branch_b,
            budget_tight,
            adaptive: tight_a,
            third_a,
            third_b,
            split_l,
        };
        ce.adaptive = tensor_switched(&ce.first, ce.switch())?;
        Ok(ce)
    }

    /// The default construction, computed once per process.
    pub fn standard() -> Result<&'static Counterexample> {
        static CE: OnceLock<Counterexample> = OnceLock::new();
        if let Some(ce) = CE.get() {
            return Ok(ce);
        }
        let ce = Self::compute(CounterexampleConfig::default())?;
        Ok(CE.get_or_init(|| ce))
    }

    fn switch(&self) -> RegimeSwitch<'_> {
        // L₁ is increasing in y₁, so y₁ ≤ split ⟺ L₁ ≤ L₁(split).
        let (below, above) = match self.config.branch_a_side {
            BranchSide::AtOrBelow => (&self.branch_a, &self.branch_b),
            BranchSide::Above => (&self.branch_b, &self.branch_a),
        };
        RegimeSwitch { threshold: self.split_l, below, above }
    }

    /// `H_{2×3,1}(γ)` evaluated exactly (not interpolated).
    pub fn branch_a_at(&self, gamma: f64) -> Result<f64> {
        self.branch_at(self.config.branch_a.0, &self.third_a, gamma)
    }

    pub fn branch_b_at(&self, gamma: f64) -> Result<f64> {
        self.branch_at(self.config.branch_b.0, &self.third_b, gamma)
    }

    fn branch_at(&self, m2: f64, third: &PrivacyProfile, gamma: f64) -> Result<f64> {
        let second = DensityPair::mixture(self.config.rate, m2, self.config.sigma)?;
        tensor_at(&second, RegimeSwitch::uniform(third), gamma)
    }

    pub fn adaptive_at(&self, gamma: f64) -> Result<f64> {
        tensor_at(&self.first, self.switch(), gamma)
    }

    pub fn budget_tight_at(&self, gamma: f64) -> Result<f64> {
        let a = tensor_at(&self.first, RegimeSwitch::uniform(&self.branch_a), gamma)?;
        let b = tensor_at(&self.first, RegimeSwitch::uniform(&self.branch_b), gamma)?;
        Ok(a.max(b))
    }

    /// Calibration point: the crossing of `H_{2×3,1}` and `H_{2×3,2}`,
    /// bracketed on the grid and refined by bisection on exact values.
    pub fn gamma0(&self) -> Result<f64> {
        let g = self.grid.values();
        let diff: Vec<f64> = self
            .branch_a
            .values()
            .iter()
            .zip(self.branch_b.values())
            .map(|(a, b)| a - b)
            .collect();
        let tol = 1e-9;
        let mut prev: Option<usize> = None;
        let mut bracket = None;
        for i in 1..g.len() {
            if diff[i].abs() <= tol {
                continue;
            }
            if let Some(j) = prev {
                if diff[j].signum() != diff[i].signum() {
                    bracket = Some((g[j], g[i], diff[j].signum()));
                    break;
                }
            }
            prev = Some(i);
        }
        let Some((mut lo, mut hi, sign_lo)) = bracket else {
            return domain("branch profiles do not cross");
        };
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let d = self.branch_a_at(mid)? - self.branch_b_at(mid)?;
            if d.signum() == sign_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Symmetrised value `max(H(γ), 1 − γ + γ H(1/γ))` of an exactly evaluated profile.
    pub fn symmetrized_at(h: impl Fn(f64) -> Result<f64>, gamma: f64) -> Result<f64> {
        if gamma == 0.0 {
            return h(0.0);
        }
        Ok(h(gamma)?.max(1.0 - gamma + gamma * h(1.0 / gamma)?))
    }

    /// The witness: gap `H_adapt(γ₀) − H_{B,tight}(γ₀)` and the same for the
    /// symmetrised profiles.
    pub fn witness(&self) -> Result<Witness> {
        let gamma0 = self.gamma0()?;
        let adapt = self.adaptive_at(gamma0)?;
        let tight = self.budget_tight_at(gamma0)?;
        let sym_adapt = Self::symmetrized_at(|g| self.adaptive_at(g), gamma0)?;
        let sym_tight = Self::symmetrized_at(|g| self.budget_tight_at(g), gamma0)?;
        Ok(Witness {
            gamma0,
            adaptive: adapt,
            budget_tight: tight,
            gap: adapt - tight,
            sym_adaptive: sym_adapt,
            sym_budget_tight: sym_tight,
            sym_gap: sym_adapt - sym_tight,
        })
    }

    /// Rows `(γ, H_{2×3,1}, H_{2×3,2})` for γ up to `gamma_limit`.
    pub fn fig3_rows(&self, gamma_limit: f64) -> Vec<[f64; 3]> {
        let g = self.grid.values();
        (0..g.len())
            .filter(|&i| g[i] <= gamma_limit)
            .map(|i| [g[i], self.branch_a.values()[i], self.branch_b.values()[i]])
            .collect()
    }

    /// Rows `(γ, H_{B,tight}, H_adapt, sym H_{B,tight}, sym H_adapt)`.
    pub fn fig4_rows(&self, gamma_limit: f64) -> Vec<[f64; 5]> {
        let g = self.grid.values();
        let st = symmetrize_profile(&self.budget_tight);
        let sa = symmetrize_profile(&self.adaptive);
        (0..g.len())
            .filter(|&i| g[i] <= gamma_limit)
            .map(|i| {
                [
                    g[i],
                    self.budget_tight.values()[i],
                    self.adaptive.values()[i],
                    st.values()[i],
                    sa.values()[i],
                ]
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub gamma0: f64,
    pub adaptive: f64,
    pub budget_tight: f64,
    pub gap: f64,
    pub sym_adaptive: f64,
    pub sym_budget_tight: f64,
    pub sym_gap: f64,
}

/// `H_adapt(γ)` for the default construction.
pub fn adaptive_profile_example(gamma: f64) -> Result<f64> {
    Counterexample::standard()?.adaptive_at(gamma)
}
