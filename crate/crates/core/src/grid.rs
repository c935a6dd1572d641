//! Sampling grids and numerical tolerances shared by curves and profiles.

use std::sync::{Arc, OnceLock};

/// Numerical tolerances. All defaults can be overridden per call site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Slack on second differences when checking convexity.
    pub convex: f64,
    /// Sup-norm tolerance for curve equality.
    pub grid: f64,
    /// Absolute tolerance for quadrature.
    pub integration: f64,
    /// Largest profile value allowed at the end of a γ-grid.
    pub tail: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            convex: 1e-9,
            grid: 1e-4,
            integration: 1e-10,
            tail: 1e-8,
        }
    }
}

pub const ALPHA_UNIFORM_POINTS: usize = 4001;
pub const ALPHA_REFINED_POINTS: usize = 32;
pub const ALPHA_REFINED_FLOOR: f64 = 1e-9;

/// The standard α-grid: 4001 uniform points on [0,1] plus 32 geometric points
/// down to 1e-9 at each end.
pub fn alpha_grid() -> Arc<[f64]> {
    static GRID: OnceLock<Arc<[f64]>> = OnceLock::new();
    GRID.get_or_init(|| build_alpha_grid(ALPHA_UNIFORM_POINTS, ALPHA_REFINED_POINTS, ALPHA_REFINED_FLOOR).into())
        .clone()
}

pub fn build_alpha_grid(uniform: usize, refined: usize, floor: f64) -> Vec<f64> {
    let step = 1.0 / (uniform - 1) as f64;
    let mut grid: Vec<f64> = (0..uniform).map(|i| i as f64 * step).collect();
    if refined > 0 {
        let top = 0.8 * step;
        let ratio = (top / floor).ln() / (refined.max(2) - 1) as f64;
        for k in 0..refined {
            let a = floor * (ratio * k as f64).exp();
            grid.push(a);
            grid.push(1.0 - a);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// A γ-grid `{0} ∪ {exp(t_i)}` where the `t_i` form a lattice symmetric
/// about 0 with an odd number of points, so that γ = 1 is a knot. Symmetry makes the grid closed under γ ↦ 1/γ by index reflection.
#[derive(Clone, Debug)]
pub struct GammaGrid {
    values: Arc<[f64]>,
    log_step: f64,
}

impl PartialEq for GammaGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.values, &other.values) || self.values == other.values
    }
}

pub const GAMMA_STANDARD_POINTS: usize = 2001;
pub const GAMMA_STANDARD_MAX: f64 = 1e4;

impl GammaGrid {
    /// `{0}` plus 2001 log-spaced points on [1e-4, 1e4]; γ = 1 is the middle knot.
    pub fn standard() -> Self {
        static GRID: OnceLock<GammaGrid> = OnceLock::new();
        GRID.get_or_init(|| Self::symmetric(GAMMA_STANDARD_POINTS, GAMMA_STANDARD_MAX))
            .clone()
    }

    /// The standard lattice extended with the same log-step until it reaches
    /// `gamma_max`. Used for profiles whose mass sits far beyond γ = 1e4.
    pub fn extended(gamma_max: f64) -> Self {
        let base = Self::standard();
        let h = base.log_step;
        let t_std = GAMMA_STANDARD_MAX.ln();
        let extra = ((gamma_max.ln() - t_std) / h).ceil().max(0.0) as usize;
        Self::lattice(GAMMA_STANDARD_POINTS + 2 * extra, h)
    }

    /// `n` log-spaced points symmetric on [1/gamma_max, gamma_max], plus 0.
    pub fn symmetric(n: usize, gamma_max: f64) -> Self {
        assert!(n >= 3 && n % 2 == 1 && gamma_max > 1.0);
        let h = 2.0 * gamma_max.ln() / (n - 1) as f64;
        Self::lattice(n, h)
    }

    fn lattice(n: usize, h: f64) -> Self {
        let centre = (n - 1) as f64 / 2.0;
        let mut values = Vec::with_capacity(n + 1);
        values.push(0.0);
        values.extend((0..n).map(|i| ((i as f64 - centre) * h).exp()));
        Self {
            values: values.into(),
            log_step: h,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Spacing of the log-lattice.
    pub fn log_step(&self) -> f64 {
        self.log_step
    }

    /// Index of `1/γ_i` for `i ≥ 1`.
    pub fn reciprocal_index(&self, i: usize) -> usize {
        debug_assert!(i >= 1);
        self.values.len() - i
    }

    /// Rebuilds a grid from stored values (e.g. a CSV file), checking that it
    /// is a symmetric log-lattice.
    pub fn from_values(values: Vec<f64>) -> Option<Self> {
        if values.len() < 4 || values[0] != 0.0 || values.len() % 2 == 1 {
            return None;
        }
        let n = values.len() - 1;
        if !(values[n] > 1.0) {
            return None;
        }
        let h = (values[n].ln() - values[1].ln()) / (n - 1) as f64;
        let rebuilt = Self::symmetric(n, values[n]);
        let close = rebuilt
            .values
            .iter()
            .zip(&values)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * a.max(1.0));
        close.then(|| Self {
            values: values.into(),
            log_step: h,
        })
    }
}
