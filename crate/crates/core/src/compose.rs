//! Tensor products of privacy profiles and trade-off curves.
//!
//! `(H₁⊗H₂)(γ) = ∫ H₂(γ e^{−L}) dP` where `L = ln p₁/q₁`. With `H₂`
//! piecewise linear, `H₂(u) = a_k + b_k u` on each knot interval, so every
//! interval contributes `a_k·P(cell) + b_k·γ·Q(cell)` where the cell is the set
//! of y mapped into that interval. The cells are PLRV intervals, so the
//! integral is a finite sum of normal CDF differences. On a log-lattice the
//! cell boundaries for every output γ fall on one shared lattice in L, which
//! makes a full layer a discrete convolution.

use serde::{Deserialize, Serialize};

use crate::curves::{blackwell_compare, gaussian_tradeoff, subsampled_gaussian_minus, BlackwellOrder, TradeoffCurve};
use crate::error::{domain, ensure_finite, Error, Result};
use crate::grid::{GammaGrid, GAMMA_STANDARD_MAX};
use crate::pair::DensityPair;
use crate::profiles::{profile_from_pair, profile_to_tradeoff, tradeoff_to_profile, PrivacyProfile};
use crate::quad::{integrate, QuadSettings};

/// PLRV distribution functions at one point: P(L ≤ l), P(L > l), Q(L ≤ l), Q(L > l).
#[derive(Clone, Copy, Debug)]
struct Edge {
    cp: f64,
    sp: f64,
    cq: f64,
    sq: f64,
}

impl Edge {
    const BOTTOM: Edge = Edge { cp: 0.0, sp: 1.0, cq: 0.0, sq: 1.0 };
    const TOP: Edge = Edge { cp: 1.0, sp: 0.0, cq: 1.0, sq: 0.0 };

    fn at(pair: &DensityPair, l: f64) -> Edge {
        if l == f64::NEG_INFINITY {
            return Self::BOTTOM;
        }
        if l == f64::INFINITY {
            return Self::TOP;
        }
        let (cp, sp) = pair.plrv_p(l);
        let (cq, sq) = pair.plrv_q(l);
        Edge { cp, sp, cq, sq }
    }
}

/// Masses of the cell between two edges, differenced on whichever side of
/// the median keeps relative precision.
fn cell(lo: &Edge, hi: &Edge) -> (f64, f64) {
    let p = if hi.cp <= 0.5 { hi.cp - lo.cp } else { lo.sp - hi.sp };
    let q = if hi.cq <= 0.5 { hi.cq - lo.cq } else { lo.sq - hi.sq };
    (p.max(0.0), q.max(0.0))
}

/// Affine pieces `H(u) = a + b·u` of a profile: piece 0 covers `[0, γ₁]`,
/// piece k covers `[γ_k, γ_{k+1}]` and the last piece is the constant tail.
fn pieces(h: &PrivacyProfile) -> (Vec<f64>, Vec<f64>) {
    let g = h.gammas();
    let v = h.values();
    let n = g.len();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for k in 0..n - 1 {
        let slope = (v[k + 1] - v[k]) / (g[k + 1] - g[k]);
        b.push(slope);
        a.push(v[k] - slope * g[k]);
    }
    a.push(v[n - 1]);
    b.push(0.0);
    (a, b)
}

/// Which inner profile applies on each side of a PLRV threshold.
#[derive(Clone, Copy, Debug)]
pub struct RegimeSwitch<'a> {
    /// Cells with `L ≤ threshold` use `below`, the rest use `above`.
    pub threshold: f64,
    pub below: &'a PrivacyProfile,
    pub above: &'a PrivacyProfile,
}

impl<'a> RegimeSwitch<'a> {
    /// A single inner profile everywhere.
    pub fn uniform(inner: &'a PrivacyProfile) -> Self {
        Self { threshold: f64::INFINITY, below: inner, above: inner }
    }

    fn check(&self) -> Result<()> {
        if self.below.grid() != self.above.grid() {
            return domain("switched inner profiles must share a γ-grid");
        }
        if self.threshold.is_nan() {
            return domain("switch threshold must not be NaN");
        }
        Ok(())
    }

    fn tail(&self) -> f64 {
        self.below.tail().max(self.above.tail())
    }

    fn tail_tol(&self) -> f64 {
        self.below.tail_tol().min(self.above.tail_tol())
    }
}

struct Pieces {
    a_lo: Vec<f64>,
    b_lo: Vec<f64>,
    a_hi: Vec<f64>,
    b_hi: Vec<f64>,
}

impl Pieces {
    fn new(switch: &RegimeSwitch<'_>) -> Self {
        let (a_lo, b_lo) = pieces(switch.below);
        let (a_hi, b_hi) = pieces(switch.above);
        Self { a_lo, b_lo, a_hi, b_hi }
    }
}

/// Splits the cell `[lo, hi]` (in L) at the switch threshold and returns
/// (P_below, Q_below, P_above, Q_above).
fn split_cell(
    lo_l: f64,
    hi_l: f64,
    lo: &Edge,
    hi: &Edge,
    c: f64,
    at_c: &Edge,
) -> (f64, f64, f64, f64) {
    if hi_l <= c {
        let (p, q) = cell(lo, hi);
        (p, q, 0.0, 0.0)
    } else if lo_l >= c {
        let (p, q) = cell(lo, hi);
        (0.0, 0.0, p, q)
    } else {
        let (p0, q0) = cell(lo, at_c);
        let (p1, q1) = cell(at_c, hi);
        (p0, q0, p1, q1)
    }
}

fn tail_error(switch: &RegimeSwitch<'_>, gamma_max: f64, contribution: f64) -> Result<()> {
    if switch.tail() > switch.tail_tol() && contribution > switch.tail_tol() {
        return Err(Error::GridTooShort {
            gamma_max,
            tail: switch.tail(),
            tail_tol: switch.tail_tol(),
        });
    }
    Ok(())
}

/// Exact Fubini integral at a single γ, for any γ ≥ 0.
pub fn tensor_at(pair: &DensityPair, switch: RegimeSwitch<'_>, gamma: f64) -> Result<f64> {
    switch.check()?;
    ensure_finite("gamma", gamma)?;
    if gamma < 0.0 {
        return domain(format!("gamma must be non-negative, got {gamma}"));
    }
    if gamma == 0.0 {
        return Ok(1.0);
    }
    let g = switch.below.gammas();
    let n = g.len();
    let pcs = Pieces::new(&switch);
    let ln_g = gamma.ln();
    let c = switch.threshold;
    let at_c = Edge::at(pair, c);

    // Piece k maps to L ∈ [ln γ − ln γ_{k+1}, ln γ − ln γ_k]; walk k downwards
    // so L increases.
    let boundary = |k: usize| -> f64 {
        match k {
            0 => f64::INFINITY,
            k if k >= n => f64::NEG_INFINITY,
            k => ln_g - g[k].ln(),
        }
    };
    let mut total = 0.0;
    let mut hi_l = boundary(n);
    let mut hi = Edge::BOTTOM;
    for k in (0..n).rev() {
        let lo_l = hi_l;
        let lo = hi;
        hi_l = boundary(k);
        hi = Edge::at(pair, hi_l);
        let (p0, q0, p1, q1) = split_cell(lo_l, hi_l, &lo, &hi, c, &at_c);
        if k == n - 1 {
            let tail = pcs.a_lo[k] * p0 + pcs.a_hi[k] * p1;
            tail_error(&switch, g[n - 1], tail)?;
        }
        total += pcs.a_lo[k] * p0 + pcs.b_lo[k] * gamma * q0;
        total += pcs.a_hi[k] * p1 + pcs.b_hi[k] * gamma * q1;
    }
    Ok(total.clamp((1.0 - gamma).max(0.0), 1.0))
}

/// Exact Fubini integral on the full grid of the inner profile(s).
pub fn tensor_switched(pair: &DensityPair, switch: RegimeSwitch<'_>) -> Result<PrivacyProfile> {
    switch.check()?;
    let grid = switch.below.grid().clone();
    let g = grid.values();
    let n = g.len() - 1; // lattice points γ_1..γ_n
    let h = grid.log_step();
    let pcs = Pieces::new(&switch);
    let c = switch.threshold;
    let at_c = Edge::at(pair, c);

    // Lattice offsets m ∈ [1−n, n−1]; cell m is L ∈ [(m−1)h, mh].
    let off = n as isize - 1;
    let edges: Vec<Edge> = (-(off)..=off).map(|m| Edge::at(pair, m as f64 * h)).collect();
    let edge = |m: isize| -> &Edge { &edges[(m + off) as usize] };
    let cells: Vec<(f64, f64, f64, f64)> = (-(off) + 1..=off)
        .map(|m| {
            split_cell((m - 1) as f64 * h, m as f64 * h, edge(m - 1), edge(m), c, &at_c)
        })
        .collect();
    let cell_at = |m: isize| &cells[(m + off - 1) as usize];
    let nonzero = |m: &isize| {
        let (a, b, x, y) = *cell_at(*m);
        a != 0.0 || b != 0.0 || x != 0.0 || y != 0.0
    };
    let m_lo = (-(off) + 1..=off).find(nonzero).unwrap_or(1);
    let m_hi = (-(off) + 1..=off).rev().find(nonzero).unwrap_or(0);

    let mut values = vec![0.0; n + 1];
    values[0] = 1.0;
    let mut worst_tail: f64 = 0.0;
    for j in 1..=n {
        let gamma = g[j];
        let jj = j as isize;
        let (mut sa, mut sb) = (0.0, 0.0);

        // Piece 0: L ≥ (j−1)h.
        let (p0, q0, p1, q1) = split_cell(
            (jj - 1) as f64 * h,
            f64::INFINITY,
            edge(jj - 1),
            &Edge::TOP,
            c,
            &at_c,
        );
        sa += pcs.a_lo[0] * p0 + pcs.a_hi[0] * p1;
        sb += pcs.b_lo[0] * q0 + pcs.b_hi[0] * q1;

        // Constant tail: L < (j−n)h.
        let (p0, _, p1, _) = split_cell(
            f64::NEG_INFINITY,
            (jj - n as isize) as f64 * h,
            &Edge::BOTTOM,
            edge(jj - n as isize),
            c,
            &at_c,
        );
        let tail = pcs.a_lo[n] * p0 + pcs.a_hi[n] * p1;
        worst_tail = worst_tail.max(tail);
        sa += tail;

        // Interior pieces k = j − m with m in the support window.
        let k_lo = (jj - m_hi).max(1);
        let k_hi = (jj - m_lo).min(n as isize - 1);
        for k in k_lo..=k_hi {
            let (p0, q0, p1, q1) = *cell_at(jj - k);
            let k = k as usize;
            sa += pcs.a_lo[k] * p0 + pcs.a_hi[k] * p1;
            sb += pcs.b_lo[k] * q0 + pcs.b_hi[k] * q1;
        }
        values[j] = sa + gamma * sb;
    }
    tail_error(&switch, grid.max(), worst_tail)?;
    PrivacyProfile::new(grid, values)
}

/// `H₁ ⊗ H₂` where `H₁` is the profile of `pair`; the output lives on H₂'s grid.
pub fn tensor_profiles(pair: &DensityPair, inner: &PrivacyProfile) -> Result<PrivacyProfile> {
    tensor_switched(pair, RegimeSwitch::uniform(inner))
}

/// The same Fubini integral by adaptive Gauss–Kronrod quadrature over y,
/// split at the level sets where `γ e^{−L(y)}` crosses the inner knots.
pub fn tensor_at_quadrature(
    pair: &DensityPair,
    inner: &PrivacyProfile,
    gamma: f64,
    settings: QuadSettings,
) -> Result<f64> {
    ensure_finite("gamma", gamma)?;
    if gamma < 0.0 {
        return domain(format!("gamma must be non-negative, got {gamma}"));
    }
    if gamma == 0.0 {
        return Ok(1.0);
    }
    let (lo, hi) = pair.domain();
    let mut bps = vec![lo, hi];
    let ln_g = gamma.ln();
    for &k in &inner.gammas()[1..] {
        if let Some(y) = pair.level_point(ln_g - k.ln()) {
            if y > lo && y < hi {
                bps.push(y);
            }
        }
    }
    let f = |y: f64| {
        let lp = pair.log_p(y);
        let u = gamma * (pair.log_q(y) - lp).exp();
        inner.eval_clamped(u) * lp.exp()
    };
    let r = integrate(f, &bps, settings)?;
    Ok(r.value.clamp((1.0 - gamma).max(0.0), 1.0))
}

/// `√(Σ μᵢ²)`.
pub fn gdp_compose(mus: &[f64]) -> Result<f64> {
    for &m in mus {
        ensure_finite("mu", m)?;
        if m < 0.0 {
            return domain(format!("mu must be non-negative, got {m}"));
        }
    }
    Ok(mus.iter().map(|m| m * m).sum::<f64>().sqrt())
}

/// A mechanism whose output pair is known in closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Factor {
    /// μ-GDP: N(μ,1) vs N(0,1).
    Gaussian { mu: f64 },
    /// Remove-adjacency subsampled Gaussian with rate q and noise multiplier 1/μ.
    Subsampled { rate: f64, mu: f64 },
}

impl Factor {
    pub fn pair(&self) -> Result<DensityPair> {
        match *self {
            Factor::Gaussian { mu } => DensityPair::gaussian(mu, 1.0),
            Factor::Subsampled { rate, mu } => DensityPair::mixture(rate, mu, 1.0),
        }
    }

    pub fn curve(&self) -> Result<TradeoffCurve> {
        match *self {
            Factor::Gaussian { mu } => gaussian_tradeoff(mu),
            Factor::Subsampled { rate, mu } => subsampled_gaussian_minus(rate, mu),
        }
    }
}

/// A composed profile together with what produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct ComposedProfile {
    pub base: PrivacyProfile,
    /// Pair of the outermost factor, if any.
    pub representative_pair: Option<DensityPair>,
    /// Factors in composition order; empty for the identity.
    pub provenance: Vec<Factor>,
}

/// Smallest γ of the form 10^k above which the pair's profile is below `tol`.
pub fn required_gamma_max(pair: &DensityPair, tol: f64) -> f64 {
    let mut e = 0;
    while e < 300 && pair.hockey_stick_closed_form(10f64.powi(e)) > tol {
        e += 1;
    }
    10f64.powi(e)
}

/// The grid is closed under γ ↦ 1/γ, so both orientations of a pair set its
/// reach: the low end carries the swapped pair's tail.
fn reach(pair: &DensityPair) -> f64 {
    required_gamma_max(pair, 1e-12).max(required_gamma_max(&pair.swapped(), 1e-12))
}

/// A γ-grid long enough for the product of `pairs`: the standard grid,
/// extended when the product's privacy loss can exceed ln 1e4.
pub fn grid_for(pairs: &[DensityPair]) -> GammaGrid {
    let ln_sum: f64 = pairs.iter().map(|p| reach(p).ln()).sum();
    if ln_sum <= GAMMA_STANDARD_MAX.ln() {
        GammaGrid::standard()
    } else {
        GammaGrid::extended(ln_sum.exp())
    }
}

/// Composes factors right to left: the last factor's profile is computed by
/// quadrature and each earlier factor adds one Fubini layer.
pub fn compose_factors(factors: &[Factor], grid: &GammaGrid) -> Result<ComposedProfile> {
    let Some((last, rest)) = factors.split_last() else {
        return Ok(ComposedProfile {
            base: PrivacyProfile::identity(grid.clone()),
            representative_pair: None,
            provenance: Vec::new(),
        });
    };
    let mut h = profile_from_pair(&last.pair()?, grid)?;
    for f in rest.iter().rev() {
        h = tensor_profiles(&f.pair()?, &h)?;
    }
    Ok(ComposedProfile {
        base: h,
        representative_pair: Some(factors[0].pair()?),
        provenance: factors.to_vec(),
    })
}

/// A trade-off curve with optional exact descriptions used for composition.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedCurve {
    pub curve: TradeoffCurve,
    pub pair: Option<DensityPair>,
    /// A profile that represents the curve more accurately than its samples.
    pub profile: Option<PrivacyProfile>,
}

impl PairedCurve {
    pub fn from_pair(curve: TradeoffCurve, pair: DensityPair) -> Self {
        Self { curve, pair: Some(pair), profile: None }
    }

    pub fn bare(curve: TradeoffCurve) -> Self {
        Self { curve, pair: None, profile: None }
    }

    pub fn from_factor(f: &Factor) -> Result<Self> {
        Ok(Self::from_pair(f.curve()?, f.pair()?))
    }

    /// The curve's profile on `grid`, from the most accurate description.
    pub fn profile_on(&self, grid: &GammaGrid) -> Result<PrivacyProfile> {
        if let Some(h) = &self.profile {
            if h.grid() == grid {
                return Ok(h.clone());
            }
        }
        match &self.pair {
            Some(p) => profile_from_pair(p, grid),
            None => Ok(tradeoff_to_profile(&self.curve, grid)),
        }
    }

    fn gamma_max_hint(&self) -> f64 {
        match (&self.profile, &self.pair) {
            (Some(h), _) => h.grid().max(),
            (None, Some(p)) => reach(p),
            (None, None) => GAMMA_STANDARD_MAX,
        }
    }
}

/// `f₁ ⊗ f₂` through the profile domain. One side must carry a pair; the
/// result keeps its composed profile for further products.
pub fn tensor_curves(f1: &PairedCurve, f2: &PairedCurve) -> Result<PairedCurve> {
    let (outer, inner) = match (&f1.pair, &f2.pair) {
        (Some(p), _) => (*p, f2),
        (None, Some(p)) => (*p, f1),
        (None, None) => {
            return domain("tensor of two curves needs a representative pair on one side");
        }
    };
    let ln_max = f1.gamma_max_hint().ln() + f2.gamma_max_hint().ln();
    let grid = if ln_max <= GAMMA_STANDARD_MAX.ln() {
        GammaGrid::standard()
    } else {
        GammaGrid::extended(ln_max.exp())
    };
    let h = tensor_profiles(&outer, &inner.profile_on(&grid)?)?;
    let curve = profile_to_tradeoff(&h)?;
    Ok(PairedCurve { curve, pair: None, profile: Some(h) })
}

/// Outcome of [`blackwell_chain_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub chain: bool,
    /// Incomparable index pairs with the α locations of their crossings.
    pub violations: Vec<(usize, usize, Vec<f64>)>,
}

/// Whether a finite family is totally ordered in the Blackwell order.
pub fn blackwell_chain_check(family: &[TradeoffCurve], tol: f64) -> Result<ChainReport> {
    if family.is_empty() {
        return domain("chain check needs at least one curve");
    }
    let mut violations = Vec::new();
    for i in 0..family.len() {
        for j in i + 1..family.len() {
            if let BlackwellOrder::Incomparable { crossings } =
                blackwell_compare(&family[i], &family[j], tol)
            {
                violations.push((i, j, crossings));
            }
        }
    }
    Ok(ChainReport { chain: violations.is_empty(), violations })
}
