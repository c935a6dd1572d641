//! Piecewise-linear functions, lower convex envelopes and sampled conjugates.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Linear interpolation on sorted knots, clamped to the end values.
pub fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&k| k <= x);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let t = (x - x0) / (x1 - x0);
    ys[i - 1] + t * (ys[i] - ys[i - 1])
}

/// Piecewise-linear function through `(x[i], y[i])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn eval(&self, x: f64) -> f64 {
        interp(&self.x, &self.y, x)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Lower hull of points sorted by strictly increasing x (monotone chain).
/// Collinear interior points are dropped.
pub fn lower_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull
}

/// The greatest convex function below the interpolant of `points`.
pub fn lower_convex_envelope(points: &[(f64, f64)]) -> Result<PiecewiseLinear> {
    if points.len() < 2 {
        return domain(format!(
            "convex envelope needs at least 2 points, got {}",
            points.len()
        ));
    }
    for w in points.windows(2) {
        if !(w[1].0 > w[0].0) {
            return domain("convex envelope needs strictly increasing x");
        }
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return domain("convex envelope needs finite points");
    }
    let hull = lower_hull(points);
    Ok(PiecewiseLinear {
        x: hull.iter().map(|p| p.0).collect(),
        y: hull.iter().map(|p| p.1).collect(),
    })
}

/// For each slope `s` in `slopes` (ascending), returns `min_i (y_i + s x_i)`.
///
/// `points` must be sorted by increasing x. The minimum over a piecewise
/// linear function is attained at a vertex, so this is the exact conjugate of
/// the interpolant evaluated at `-s`.
pub fn min_affine(points: &[(f64, f64)], slopes: &[f64]) -> Vec<f64> {
    debug_assert!(slopes.windows(2).all(|w| w[0] <= w[1]));
    let hull = lower_hull(points);
    let value = |i: usize, s: f64| hull[i].1 + s * hull[i].0;
    let mut out = Vec::with_capacity(slopes.len());
    let mut ptr = hull.len() - 1;
    for &s in slopes {
        while ptr > 0 && value(ptr - 1, s) <= value(ptr, s) {
            ptr -= 1;
        }
        // The pointer only moves left; a larger slope can never favour the right.
        out.push(value(ptr, s));
    }
    out
}
