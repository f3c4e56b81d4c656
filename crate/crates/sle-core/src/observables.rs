//! Reparametrization-invariant functionals of curve traces.
//!
//! The reversal statement holds only up to reparametrization, so ensembles
//! are compared through functionals of the traced point set: left-passage
//! indicators on a reference grid, the real part at first reach of a fixed
//! height, minimal distances to marked points, and boundary-interval hit
//! indicators. Only the first-reach observable uses the traversal order, and
//! it is invariant under monotone reparametrization.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::params::SleParams;

/// Grid of reference data the observables are evaluated against.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableGrid {
    /// Reference points for left-passage and minimal distance.
    pub reference_points: Vec<Complex64>,
    /// Height for the first-reach observable.
    pub reach_height: f64,
    /// Open real intervals (a, b) for boundary-hit indicators.
    pub intervals: Vec<(f64, f64)>,
}

impl ObservableGrid {
    /// Default grid: reference points r·e^{iθ} for θ ∈ {π/4, π/2, 3π/4} and
    /// r ∈ {1/2, 1, 2}, reach height 1, and intervals between consecutive
    /// same-side force points of `p` plus an outer interval doubling the
    /// outermost point.
    pub fn default_for(p: &SleParams) -> Self {
        let mut reference_points = Vec::new();
        for &r in &[0.5, 1.0, 2.0] {
            for &theta in &[PI / 4.0, PI / 2.0, 3.0 * PI / 4.0] {
                reference_points.push(Complex64::new(r * theta.cos(), r * theta.sin()));
            }
        }
        let mut intervals = Vec::new();
        for side_points in [&p.left_points, &p.right_points] {
            for pair in side_points.windows(2) {
                let (lo, hi) = if pair[0] < pair[1] {
                    (pair[0], pair[1])
                } else {
                    (pair[1], pair[0])
                };
                intervals.push((lo, hi));
            }
            if let Some(&outer) = side_points.last() {
                let (lo, hi) = if outer > 0.0 {
                    (outer, 2.0 * outer)
                } else {
                    (2.0 * outer, outer)
                };
                intervals.push((lo, hi));
            }
        }
        ObservableGrid {
            reference_points,
            reach_height: 1.0,
            intervals,
        }
    }

    /// Number of scalar observables produced by `evaluate`.
    pub fn len(&self) -> usize {
        2 * self.reference_points.len() + 1 + self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Column names, aligned with the value layout of `evaluate`.
    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.len());
        for z in &self.reference_points {
            names.push(alloc::format!("left_passage({:.3},{:.3})", z.re, z.im));
        }
        names.push(alloc::format!("first_reach_re(y={})", self.reach_height));
        for z in &self.reference_points {
            names.push(alloc::format!("min_dist({:.3},{:.3})", z.re, z.im));
        }
        for (a, b) in &self.intervals {
            names.push(alloc::format!("interval_hit({a},{b})"));
        }
        names
    }
}

/// Observable values for one curve; booleans are 0/1, a missing first-reach
/// is NaN. `hit_tolerance` is the resolution-scaled tolerance the interval
/// indicators were decided at.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableVector {
    pub values: Vec<f64>,
    pub hit_tolerance: f64,
}

/// Deterministic functional of an ordered point set (traversal order is used
/// only by the first-reach observable).
pub fn evaluate(points: &[Complex64], grid: &ObservableGrid) -> ObservableVector {
    let mut values = Vec::with_capacity(grid.len());
    for &z in &grid.reference_points {
        values.push(if left_passage(points, z) { 1.0 } else { 0.0 });
    }
    values.push(first_reach_re(points, grid.reach_height));
    for &z in &grid.reference_points {
        values.push(min_dist(points, z));
    }
    let mut tol_report = 0.0_f64;
    for &(a, b) in &grid.intervals {
        let (hit, tol) = interval_approach(points, a, b);
        tol_report = tol_report.max(tol);
        values.push(if hit { 1.0 } else { 0.0 });
    }
    ObservableVector {
        values,
        hit_tolerance: tol_report,
    }
}

/// True when the curve passes to the left of `z`: the segment from `z` to a
/// landing point on the real axis far to the right of the hull crosses the
/// polyline an even number of times.
pub fn left_passage(points: &[Complex64], z: Complex64) -> bool {
    let mut radius = z.norm();
    for p in points {
        radius = radius.max(p.norm());
    }
    let landing = Complex64::new(2.0 * radius + 1.0, 0.0);
    let mut crossings = 0usize;
    for pair in points.windows(2) {
        if segments_intersect(z, landing, pair[0], pair[1]) {
            crossings += 1;
        }
    }
    crossings % 2 == 0
}

fn orient(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    (b.re - a.re) * (c.im - a.im) - (b.im - a.im) * (c.re - a.re)
}

fn segments_intersect(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    (o1 * o2 < 0.0) && (o3 * o4 < 0.0)
}

/// Real part of the curve when it first reaches imaginary height `y`,
/// linearly interpolated between the bracketing trace points; NaN when the
/// height is never reached.
pub fn first_reach_re(points: &[Complex64], y: f64) -> f64 {
    for (k, p) in points.iter().enumerate() {
        if p.im >= y {
            if k == 0 {
                return p.re;
            }
            let q = points[k - 1];
            let span = p.im - q.im;
            if span <= 0.0 {
                return p.re;
            }
            let s = (y - q.im) / span;
            return q.re + s * (p.re - q.re);
        }
    }
    f64::NAN
}

/// Minimal distance from the polyline to `z`.
pub fn min_dist(points: &[Complex64], z: Complex64) -> f64 {
    if points.is_empty() {
        return f64::NAN;
    }
    if points.len() == 1 {
        return (points[0] - z).norm();
    }
    let mut best = f64::INFINITY;
    for pair in points.windows(2) {
        best = best.min(point_segment_distance(z, pair[0], pair[1]));
    }
    best
}

fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a).re * ab.re + (p - a).im * ab.im) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// True iff the trace approaches the open interval (a, b) of the real axis
/// within the hit tolerance. Hitting is undecidable at finite resolution, so
/// the tolerance is resolution-scaled: twice the larger adjacent point
/// spacing at the closest approach.
pub fn interval_hit(points: &[Complex64], a: f64, b: f64) -> bool {
    interval_approach(points, a, b).0
}

/// Closest-approach decision together with the tolerance it was made at.
pub fn interval_approach(points: &[Complex64], a: f64, b: f64) -> (bool, f64) {
    debug_assert!(a < b);
    let dist = |p: &Complex64| {
        let dx = if p.re < a {
            a - p.re
        } else if p.re > b {
            p.re - b
        } else {
            0.0
        };
        (dx * dx + p.im * p.im).sqrt()
    };
    let mut best = f64::INFINITY;
    let mut best_idx = 0usize;
    for (k, p) in points.iter().enumerate() {
        let d = dist(p);
        if d < best {
            best = d;
            best_idx = k;
        }
    }
    if !best.is_finite() {
        return (false, 0.0);
    }
    let mut spacing = 0.0_f64;
    if best_idx > 0 {
        spacing = spacing.max((points[best_idx] - points[best_idx - 1]).norm());
    }
    if best_idx + 1 < points.len() {
        spacing = spacing.max((points[best_idx + 1] - points[best_idx]).norm());
    }
    let tol = 2.0 * spacing;
    (best <= tol, tol)
}
