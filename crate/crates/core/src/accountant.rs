//! Approximate fully adaptive GDP accounting for DP-SGD style loops:
//! a filter that shrinks the clipping bound as the budget runs out, a
//! per-datapoint variant, and a synthetic harness that drives both.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::clt::{clt_band, CltBand, CltParameters};
use crate::error::{domain, ensure_finite, Error, Result};
use crate::filters::{best_epsilon, default_rdp_orders, gdp_to_dp, Conversion, RdpFilter};
use crate::plrv::{exact_moments, get_approx, inv_budg, renyi_divergence, MomentSummary, Regime};

/// Regime of the sampling rates and the floor on noise multipliers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeConfig {
    pub regime: Regime,
    /// `q̄`: upper bound on q in the small regime, lower bound in the full one.
    pub q_bar: f64,
    /// `σ̄`: smallest admissible noise multiplier.
    pub sigma_floor: f64,
    /// Constant `c` of the guard `1 − q̄ ≤ c/σ̄²` in the full regime.
    pub guard_c: f64,
}

impl RegimeConfig {
    pub fn small(q_bar: f64, sigma_floor: f64) -> Self {
        Self { regime: Regime::Small, q_bar, sigma_floor, guard_c: 1.0 }
    }

    pub fn full(q_bar: f64, sigma_floor: f64) -> Self {
        Self { regime: Regime::Full, q_bar, sigma_floor, guard_c: 1.0 }
    }

    /// Checks the configuration; returns a warning if the full-regime guard fails.
    pub fn validate(&self) -> Result<Option<String>> {
        ensure_finite("q_bar", self.q_bar)?;
        ensure_finite("sigma_floor", self.sigma_floor)?;
        if self.sigma_floor <= 0.0 {
            return domain("sigma floor must be positive");
        }
        match self.regime {
            Regime::Small if !(self.q_bar > 0.0 && self.q_bar < 0.2) => {
                domain(format!("small regime needs 0 < q̄ < 0.2, got {}", self.q_bar))
            }
            Regime::Full if !(self.q_bar > 0.8 && self.q_bar <= 1.0) => {
                domain(format!("full regime needs 0.8 < q̄ ≤ 1, got {}", self.q_bar))
            }
            Regime::Full if 1.0 - self.q_bar > self.guard_c / self.sigma_floor.powi(2) => Ok(Some(format!(
                "1 − q̄ = {:.3e} exceeds c/σ̄² = {:.3e}",
                1.0 - self.q_bar,
                self.guard_c / self.sigma_floor.powi(2)
            ))),
            _ => Ok(None),
        }
    }

    /// Rejects a step outside the regime's interval or below the noise floor.
    pub fn check_step(&self, q: f64, sigma: f64, clip: f64) -> Result<()> {
        ensure_finite("q", q)?;
        ensure_finite("sigma", sigma)?;
        ensure_finite("clip", clip)?;
        let ok = match self.regime {
            Regime::Small => (0.0..=self.q_bar).contains(&q),
            Regime::Full => (self.q_bar..=1.0).contains(&q),
        };
        if !ok {
            return domain(format!("q = {q} is outside the {:?} regime interval (q̄ = {})", self.regime, self.q_bar));
        }
        if sigma < self.sigma_floor {
            return domain(format!("σ = {sigma} is below the floor {}", self.sigma_floor));
        }
        if clip <= 0.0 {
            return domain(format!("clip must be positive, got {clip}"));
        }
        Ok(())
    }
}

/// When the budget deduction for a step is booked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeductionMode {
    /// At the start of the next step, or at halting.
    #[default]
    Lazy,
    /// Immediately after release.
    Eager,
}

/// Disjoint random streams for subsampling, noise and synthetic gradients.
#[derive(Clone, Debug)]
pub struct Streams {
    pub sampling: ChaCha20Rng,
    pub noise: ChaCha20Rng,
    pub gradients: ChaCha20Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        let stream = |k| {
            let mut r = ChaCha20Rng::seed_from_u64(seed);
            r.set_stream(k);
            r
        };
        Self { sampling: stream(1), noise: stream(2), gradients: stream(3) }
    }
}

/// Synthetic per-datapoint gradients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GradientSource {
    /// Every gradient is `norm·e₁`.
    ConstantNorm { norm: f64, dim: usize },
    /// Random directions with norm `initial/(1 + rate·t)`.
    DecayingNorm { initial: f64, rate: f64, dim: usize },
    /// Uniformly random directions with a fixed norm.
    RandomDirection { norm: f64, dim: usize },
}

impl GradientSource {
    pub fn dim(&self) -> usize {
        match *self {
            GradientSource::ConstantNorm { dim, .. }
            | GradientSource::DecayingNorm { dim, .. }
            | GradientSource::RandomDirection { dim, .. } => dim,
        }
    }

    /// Gradients of `n` datapoints at step `t` (1-based).
    pub fn generate(&self, t: usize, n: usize, rng: &mut ChaCha20Rng) -> Vec<Vec<f64>> {
        let random = |norm: f64, dim: usize, rng: &mut ChaCha20Rng| {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len > 0.0 {
                v.iter_mut().for_each(|x| *x *= norm / len);
            }
            v
        };
        (0..n)
            .map(|_| match *self {
                GradientSource::ConstantNorm { norm, dim } => {
                    let mut v = vec![0.0; dim];
                    if dim > 0 {
                        v[0] = norm;
                    }
                    v
                }
                GradientSource::DecayingNorm { initial, rate, dim } => {
                    random(initial / (1.0 + rate * t as f64), dim, rng)
                }
                GradientSource::RandomDirection { norm, dim } => random(norm, dim, rng),
            })
            .collect()
    }
}

fn norm(g: &[f64]) -> f64 {
    g.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales `g` onto the ball of radius `c`; returns the clipped vector and its norm.
fn clip_to(g: &[f64], c: f64) -> (Vec<f64>, f64) {
    let n = norm(g);
    if n <= c {
        (g.to_vec(), n)
    } else if c <= 0.0 {
        (vec![0.0; g.len()], 0.0)
    } else {
        let s = c / n;
        (g.iter().map(|x| x * s).collect(), c)
    }
}

/// Spacing of floats at `budget`. Every multiple of it up to `budget` is a
/// float, so budgets booked in these units add and subtract exactly.
pub fn budget_quantum(budget: f64) -> f64 {
    if !(budget > 0.0) || !budget.is_normal() {
        return f64::MIN_POSITIVE;
    }
    f64::from_bits(budget.to_bits() & 0x7ff0_0000_0000_0000) * f64::EPSILON
}

/// `d` rounded up to a multiple of `quantum`.
fn quantize(d: f64, quantum: f64) -> f64 {
    (d / quantum).ceil() * quantum
}

/// `C·invBudg(q, σ, B)`, infinite when nothing is sampled.
fn budget_clip(regime: Regime, q: f64, sigma: f64, clip: f64, budget: f64) -> Result<f64> {
    if q == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(clip * inv_budg(regime, q, sigma, budget.max(0.0))?)
}

fn release(
    clipped: &[Vec<f64>],
    dim: usize,
    q: f64,
    noise_sd: f64,
    streams: &mut Streams,
) -> (Vec<f64>, Vec<bool>) {
    let mut sum = vec![0.0; dim];
    let sampled: Vec<bool> = clipped.iter().map(|_| streams.sampling.random::<f64>() < q).collect();
    for (g, &s) in clipped.iter().zip(&sampled) {
        if s {
            sum.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
    }
    for x in sum.iter_mut() {
        let z: f64 = streams.noise.sample(StandardNormal);
        *x += noise_sd * z;
    }
    (sum, sampled)
}

/// One released step of the approximate GDP filter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub q: f64,
    pub sigma: f64,
    pub clip: f64,
    /// `C_{B,t}`.
    pub budget_clip: f64,
    /// `min(C_t, C_{B,t}) / C_t`, the sensitivity in noise units.
    pub realized_mu: f64,
    /// Deduction booked for this step.
    pub deduction: f64,
    /// `getApprox` at μ = 1 minus the booked deduction.
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub noisy_sum: Vec<f64>,
    pub sampled: usize,
    pub halted: bool,
}

/// Approximate GDP filter with budget-constrained clipping.
#[derive(Clone, Debug, PartialEq)]
pub struct GdpAccountant {
    pub config: RegimeConfig,
    pub mode: DeductionMode,
    budget: f64,
    quantum: f64,
    remaining: f64,
    spent: f64,
    pending: Option<f64>,
    history: Vec<StepRecord>,
    halted: bool,
    pub warnings: Vec<String>,
}

impl GdpAccountant {
    pub fn new(config: RegimeConfig, budget: f64, mode: DeductionMode) -> Result<Self> {
        ensure_finite("budget", budget)?;
        if budget < 0.0 {
            return domain(format!("budget must be non-negative, got {budget}"));
        }
        let warnings = config.validate()?.into_iter().collect();
        Ok(Self {
            config,
            mode,
            budget,
            quantum: budget_quantum(budget),
            remaining: budget,
            spent: 0.0,
            pending: None,
            history: Vec::new(),
            halted: false,
            warnings,
        })
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// `B_t`, excluding a deduction that is still pending.
    pub fn remaining(&self) -> f64 {
        self.remaining
    }

    /// Sum of booked deductions.
    pub fn spent(&self) -> f64 {
        self.spent
    }

    /// Spent plus pending.
    pub fn consumed(&self) -> f64 {
        self.spent + self.pending.unwrap_or(0.0)
    }

    pub fn steps(&self) -> usize {
        self.history.len()
    }

    pub fn history(&self) -> &[StepRecord] {
        &self.history
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    /// `|spent + B_t − B|`. Deductions are booked in units of
    /// [`budget_quantum`], so this is exactly zero.
    pub fn conservation_error(&self) -> f64 {
        (self.spent + self.remaining - self.budget).abs()
    }

    fn book(&mut self, d: f64) {
        let d = quantize(d, self.quantum).min(self.remaining);
        self.remaining -= d;
        self.spent += d;
        assert!(self.remaining >= 0.0, "remaining budget became negative");
    }

    /// Books a pending deduction.
    pub fn flush(&mut self) {
        if let Some(d) = self.pending.take() {
            self.book(d);
        }
    }

    /// Releases the noisy clipped sum of the Poisson-sampled gradients.
    pub fn step(
        &mut self,
        q: f64,
        sigma: f64,
        clip: f64,
        gradients: &[Vec<f64>],
        streams: &mut Streams,
    ) -> Result<StepOutput> {
        if self.halted {
            return Err(Error::Precondition("accountant has halted".into()));
        }
        self.config.check_step(q, sigma, clip)?;
        self.flush();
        let regime = self.config.regime;
        let cb = budget_clip(regime, q, sigma, clip, self.remaining)?;
        let c = clip.min(cb);
        let dim = gradients.first().map_or(0, Vec::len);
        let clipped: Vec<Vec<f64>> = gradients.iter().map(|g| clip_to(g, c).0).collect();
        let (noisy_sum, sampled) = release(&clipped, dim, q, sigma * clip, streams);
        let full = get_approx(regime, q, sigma, 1.0)?;
        let halted = cb <= clip;
        let realized_mu = c / clip;
        let d = if halted { get_approx(regime, q, sigma, realized_mu)? } else { full };
        let d = quantize(d, self.quantum).min(self.remaining);
        self.history.push(StepRecord {
            q,
            sigma,
            clip,
            budget_clip: cb,
            realized_mu,
            deduction: d,
            slack: full - d,
        });
        match (self.mode, halted) {
            (DeductionMode::Eager, _) | (DeductionMode::Lazy, true) => self.book(d),
            (DeductionMode::Lazy, false) => self.pending = Some(d),
        }
        self.halted = halted;
        Ok(StepOutput { noisy_sum, sampled: sampled.iter().filter(|&&s| s).count(), halted })
    }
}

/// Per-datapoint budgets and clipping.
#[derive(Clone, Debug, PartialEq)]
pub struct IndividualAccountant {
    pub config: RegimeConfig,
    initial: Vec<f64>,
    budgets: Vec<f64>,
    quanta: Vec<f64>,
    /// `(q, σ, ‖ḡ_j‖/C)` of the previous step.
    pending: Option<(f64, f64, Vec<f64>)>,
    steps: usize,
}

impl IndividualAccountant {
    pub fn new(config: RegimeConfig, budgets: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if budgets.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
            return domain("individual budgets must be finite and non-negative");
        }
        let quanta = budgets.iter().map(|&b| budget_quantum(b)).collect();
        Ok(Self { config, initial: budgets.clone(), budgets, quanta, pending: None, steps: 0 })
    }

    pub fn homogeneous(config: RegimeConfig, budget: f64, n: usize) -> Result<Self> {
        Self::new(config, vec![budget; n])
    }

    /// `B_{t,j}`, excluding pending deductions.
    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Books the deductions of the previous step.
    pub fn flush(&mut self) -> Result<()> {
        if let Some((q, sigma, mus)) = self.pending.take() {
            for ((b, u), mu) in self.budgets.iter_mut().zip(&self.quanta).zip(mus) {
                let d = quantize(get_approx(self.config.regime, q, sigma, mu)?, *u);
                *b -= d.min(*b);
            }
        }
        Ok(())
    }

    /// Releases the noisy sum with each point clipped to its own budget.
    pub fn step(
        &mut self,
        q: f64,
        sigma: f64,
        clip: f64,
        gradients: &[Vec<f64>],
        streams: &mut Streams,
    ) -> Result<StepOutput> {
        self.config.check_step(q, sigma, clip)?;
        if gradients.len() != self.budgets.len() {
            return domain(format!("expected {} gradients, got {}", self.budgets.len(), gradients.len()));
        }
        self.flush()?;
        let regime = self.config.regime;
        let mut clipped = Vec::with_capacity(gradients.len());
        let mut mus = Vec::with_capacity(gradients.len());
        for (g, &b) in gradients.iter().zip(&self.budgets) {
            let c = clip.min(budget_clip(regime, q, sigma, clip, b)?);
            let (v, n) = clip_to(g, c);
            clipped.push(v);
            mus.push(n / clip);
        }
        let dim = gradients.first().map_or(0, Vec::len);
        let (noisy_sum, sampled) = release(&clipped, dim, q, sigma * clip, streams);
        self.pending = Some((q, sigma, mus));
        self.steps += 1;
        let exhausted = self.budgets.iter().all(|&b| b <= 0.0);
        Ok(StepOutput { noisy_sum, sampled: sampled.iter().filter(|&&s| s).count(), halted: exhausted })
    }
}

/// `σ_t = base + sin(π/T · block·⌈t/block⌉)` for t = 1…T.
pub fn sine_block_schedule(steps: usize, base: f64, block: usize) -> Vec<f64> {
    let t_total = steps as f64;
    (1..=steps)
        .map(|t| {
            let k = t.div_ceil(block) * block;
            base + (std::f64::consts::PI / t_total * k as f64).sin()
        })
        .collect()
}

/// Inputs of the GDP versus RDP comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub regime: RegimeConfig,
    pub budget: f64,
    pub q: f64,
    pub sigmas: Vec<f64>,
    pub clip: f64,
    pub points: usize,
    pub gradients: GradientSource,
    pub seed: u64,
    pub deltas: Vec<f64>,
    pub orders: Vec<f64>,
}

impl ComparisonConfig {
    /// T = 3650, q = 0.01, σ_t = 1.5 + sin(π/T · 150⌈t/150⌉), B = 0.05.
    pub fn standard() -> Self {
        Self {
            regime: RegimeConfig::small(0.1, 0.5),
            budget: 0.05,
            q: 0.01,
            sigmas: sine_block_schedule(3650, 1.5, 150),
            clip: 1.0,
            points: 200,
            gradients: GradientSource::RandomDirection { norm: 2.0, dim: 4 },
            seed: 0,
            deltas: log_grid(1e-7, 1e-3, 13),
            orders: default_rdp_orders(),
        }
    }
}

/// `n` log-spaced points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub delta: f64,
    pub eps_gdp: f64,
    /// Tight conversion.
    pub eps_rdp: f64,
    /// `ε_RDP + ln(1/δ)/(α−1)`.
    pub eps_rdp_standard: f64,
    pub best_order: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub steps_gdp: usize,
    pub steps_rdp: usize,
    pub halted: bool,
    /// Accumulated budget `B`.
    pub consumed: f64,
    pub mu: f64,
    pub total_slack: f64,
    pub rows: Vec<ComparisonRow>,
}

/// Runs the GDP accountant over the schedule, then accounts the same
/// releases with RDP at every order.
pub fn run_comparison_scenario(config: &ComparisonConfig) -> Result<ComparisonReport> {
    let mut acc = GdpAccountant::new(config.regime, config.budget, DeductionMode::Lazy)?;
    let mut streams = Streams::new(config.seed);
    for (t, &sigma) in config.sigmas.iter().enumerate() {
        let grads = config.gradients.generate(t + 1, config.points, &mut streams.gradients);
        if acc.step(config.q, sigma, config.clip, &grads, &mut streams)?.halted {
            break;
        }
    }
    acc.flush();
    let consumed = acc.spent();
    let mu = (2.0 * consumed).sqrt();

    let orders = &config.orders;
    let mut cache: HashMap<(u64, u64), Vec<f64>> = HashMap::new();
    let mut steps = Vec::with_capacity(acc.steps());
    for r in acc.history() {
        let key = (r.sigma.to_bits(), r.realized_mu.to_bits());
        if !cache.contains_key(&key) {
            let cost = if r.realized_mu == 0.0 {
                vec![0.0; orders.len()]
            } else {
                orders
                    .iter()
                    .map(|&a| renyi_divergence(r.q, r.sigma / r.realized_mu, a))
                    .collect::<Result<Vec<_>>>()?
            };
            cache.insert(key, cost);
        }
        steps.push(cache[&key].clone());
    }
    let mut total = vec![0.0; orders.len()];
    for s in &steps {
        total.iter_mut().zip(s).for_each(|(a, b)| *a += b);
    }

    let mut rows = Vec::with_capacity(config.deltas.len());
    let mut steps_rdp = usize::MAX;
    for &delta in &config.deltas {
        let (eps_rdp, best_order) = best_epsilon(orders, &total, delta, Conversion::Tight)?;
        let (eps_rdp_standard, _) = best_epsilon(orders, &total, delta, Conversion::Standard)?;
        // The RDP budget is the tightest one that admits the same releases.
        let mut f = RdpFilter::new(orders.clone(), eps_rdp, delta, Conversion::Tight)?;
        let n = steps.iter().take_while(|s| f.try_step(s).map(|d| d.is_continue()).unwrap_or(false)).count();
        steps_rdp = steps_rdp.min(n);
        rows.push(ComparisonRow { delta, eps_gdp: gdp_to_dp(mu, delta)?, eps_rdp, eps_rdp_standard, best_order });
    }
    Ok(ComparisonReport {
        steps_gdp: acc.steps(),
        steps_rdp: if config.deltas.is_empty() { 0 } else { steps_rdp },
        halted: acc.is_halted(),
        consumed,
        mu,
        total_slack: acc.history().iter().map(|r| r.slack).sum(),
        rows,
    })
}

/// CLT parameters and band certified for a completed run.
#[derive(Clone, Debug, PartialEq)]
pub struct CltCertificate {
    pub params: CltParameters,
    pub band: CltBand,
}

impl CltCertificate {
    pub fn mu(&self) -> f64 {
        self.band.mu
    }

    pub fn phi(&self) -> f64 {
        self.band.phi
    }

    pub fn delta(&self) -> f64 {
        self.band.delta
    }
}

/// `m₁ = m₂ = B`, `v = 2B`, with `ρ` and `κ` from exact moments of the
/// realized steps.
pub fn clt_certificate(acc: &GdpAccountant, c: f64) -> Result<CltCertificate> {
    let b = acc.consumed();
    if !(b > 0.0) {
        return domain("no budget was consumed");
    }
    let v = 2.0 * b;
    let mut cache: HashMap<(u64, u64, u64), MomentSummary> = HashMap::new();
    let (mut sum_p, mut sum_q, mut rho) = (0.0, 0.0, 0.0f64);
    for r in acc.history() {
        if r.q == 0.0 || r.realized_mu == 0.0 {
            continue;
        }
        let key = (r.q.to_bits(), r.sigma.to_bits(), r.realized_mu.to_bits());
        let m = match cache.get(&key) {
            Some(m) => *m,
            None => {
                let m = exact_moments(r.q, r.realized_mu, r.sigma)?;
                cache.insert(key, m);
                m
            }
        };
        sum_p += m.var_p;
        sum_q += m.var_q;
        rho = rho.max(m.abs3_p / m.var_p).max(m.abs3_q / m.var_q);
    }
    let kappa = (sum_p - v).abs().max((sum_q - v).abs());
    if 4.0 * rho * rho > v {
        return Err(Error::Precondition(format!("regime too coarse: 4ρ² = {:.4e} exceeds v = {v:.4e}", 4.0 * rho * rho)));
    }
    if 4.0 * kappa > v {
        return Err(Error::Precondition(format!("regime too coarse: 4κ = {:.4e} exceeds v = {v:.4e}", 4.0 * kappa)));
    }
    let params = CltParameters { m1: b, m2: b, eta1: 0.0, eta2: 0.0, v, kappa, rho, c };
    Ok(CltCertificate { band: clt_band(&params)?, params })
}
