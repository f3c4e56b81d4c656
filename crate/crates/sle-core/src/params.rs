//! Force-point parameter algebra.
//!
//! A chordal SLE_k(rho) configuration carries ordered force points on both
//! sides of the origin together with real weights. The degenerate points
//! 0^- and 0^+ are always present (index 0 on each side) and are represented
//! symbolically — never as tiny numeric offsets. Offsets are injected only by
//! the sampler.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Which side of the origin a force point lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// -1 for left, +1 for right; the direction the Loewner flow pushes
    /// boundary points relative to the driving value.
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Left => write!(f, "L"),
            Side::Right => write!(f, "R"),
        }
    }
}

/// An SLE_k(rho) parameter set.
///
/// `left_weights[j]` is rho^{j,L} with `left_weights[0]` attached to the
/// degenerate point 0^-; `left_points[j-1]` is x^{j,L} for j >= 1, stored in
/// index order so the sequence is strictly decreasing (toward -inf).
/// Mirrored on the right, where `right_points` is strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SleParams {
    pub kappa: f64,
    pub left_weights: Vec<f64>,
    pub left_points: Vec<f64>,
    pub right_weights: Vec<f64>,
    pub right_points: Vec<f64>,
}

/// A weighted (tilted) parameter set: an SLE_k(rho) base plus one power
/// parameter per non-degenerate force point. The degenerate powers are zero
/// by convention and are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedParams {
    pub base: SleParams,
    pub left_alphas: Vec<f64>,
    pub right_alphas: Vec<f64>,
}

/// Validation outcome; malformed input is reported distinctly from a
/// continuation-threshold violation.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamsError {
    /// Structural problem: bad kappa, list-length mismatch, wrong sign or
    /// non-strict ordering of force-point locations, non-finite entries.
    Malformed(String),
    /// Partial sum up to `index` on `side` fails the strict bound
    /// max(-2, kappa/2 - 4).
    Threshold {
        side: Side,
        index: usize,
        partial_sum: f64,
        bound: f64,
    },
}

impl fmt::Display for ParamsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamsError::Malformed(reason) => write!(f, "malformed parameters: {reason}"),
            ParamsError::Threshold {
                side,
                index,
                partial_sum,
                bound,
            } => write!(
                f,
                "partial weight sum {partial_sum} at ({side}, j={index}) violates the bound > {bound}"
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ParamsError {}

impl SleParams {
    /// Plain SLE_k with two degenerate force points of the given weights.
    pub fn two_sided(kappa: f64, rho_left: f64, rho_right: f64) -> Self {
        SleParams {
            kappa,
            left_weights: alloc::vec![rho_left],
            left_points: Vec::new(),
            right_weights: alloc::vec![rho_right],
            right_points: Vec::new(),
        }
    }

    pub fn weights(&self, side: Side) -> &[f64] {
        match side {
            Side::Left => &self.left_weights,
            Side::Right => &self.right_weights,
        }
    }

    /// Non-degenerate locations on a side, in index order (away from 0).
    pub fn points(&self, side: Side) -> &[f64] {
        match side {
            Side::Left => &self.left_points,
            Side::Right => &self.right_points,
        }
    }

    /// The strict lower bound max(-2, kappa/2 - 4) every partial weight sum
    /// must exceed.
    pub fn threshold_bound(&self) -> f64 {
        f64::max(-2.0, self.kappa / 2.0 - 4.0)
    }

    /// Smallest distance from the origin to a non-degenerate force point, or
    /// `None` when there is none. Used to scale the sampler's degenerate
    /// start offset.
    pub fn nearest_point_distance(&self) -> Option<f64> {
        self.left_points
            .iter()
            .chain(self.right_points.iter())
            .map(|x| x.abs())
            .fold(None, |acc, d| match acc {
                None => Some(d),
                Some(a) => Some(if d < a { d } else { a }),
            })
    }
}

fn check_side(side: Side, weights: &[f64], points: &[f64]) -> Result<(), ParamsError> {
    if weights.is_empty() {
        return Err(ParamsError::Malformed(format!(
            "side {side}: weight list must include the degenerate entry"
        )));
    }
    if weights.len() != points.len() + 1 {
        return Err(ParamsError::Malformed(format!(
            "side {side}: {} weights for {} non-degenerate points",
            weights.len(),
            points.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(ParamsError::Malformed(format!(
            "side {side}: non-finite weight"
        )));
    }
    let mut prev = 0.0_f64;
    for (j, &x) in points.iter().enumerate() {
        if !x.is_finite() {
            return Err(ParamsError::Malformed(format!(
                "side {side}: non-finite location x^{{{},{side}}}",
                j + 1
            )));
        }
        let ok = match side {
            Side::Left => x < prev,
            Side::Right => x > prev,
        };
        if !ok {
            return Err(ParamsError::Malformed(format!(
                "side {side}: location x^{{{},{side}}} = {x} breaks the strict ordering",
                j + 1
            )));
        }
        prev = x;
    }
    Ok(())
}

/// Check well-formedness and the continuation-threshold bound: every partial
/// sum of weights from the degenerate point outward must strictly exceed
/// max(-2, kappa/2 - 4). Reports the first (side, index) that violates it.
pub fn validate_params(p: &SleParams) -> Result<(), ParamsError> {
    if !(p.kappa > 0.0 && p.kappa <= 8.0) || !p.kappa.is_finite() {
        return Err(ParamsError::Malformed(format!(
            "kappa = {} outside (0, 8]",
            p.kappa
        )));
    }
    check_side(Side::Left, &p.left_weights, &p.left_points)?;
    check_side(Side::Right, &p.right_weights, &p.right_points)?;
    let bound = p.threshold_bound();
    for side in [Side::Left, Side::Right] {
        let mut partial = 0.0;
        for (j, &w) in p.weights(side).iter().enumerate() {
            partial += w;
            if !(partial > bound) {
                return Err(ParamsError::Threshold {
                    side,
                    index: j,
                    partial_sum: partial,
                    bound,
                });
            }
        }
    }
    Ok(())
}

/// The time-reversal transform.
///
/// Appends the implicit force point at infinity on each side, whose weight
/// makes the side sum to zero, then maps the configuration through
/// z ↦ -1/z with the convention -1/(±inf) = 0^∓ and swaps sides:
/// rho_hat^{i,L} = -rho^{l+1-i,R} at x_hat^{i,L} = -1/x^{l+1-i,R}, mirrored
/// for the right side, with power parameters
/// alpha_hat^{i,q} = rho_hat^{i,q} (kappa - 4) / (2 kappa) for i >= 1.
pub fn reverse_params(p: &SleParams) -> Result<TiltedParams, ParamsError> {
    validate_params(p)?;
    let alpha_coeff = (p.kappa - 4.0) / (2.0 * p.kappa);

    // Transforms one side's data into the opposite hatted side.
    let hat_side = |weights: &[f64], points: &[f64]| {
        let n = points.len();
        let side_sum: f64 = weights.iter().sum();
        // i = 0 picks up the (negated) weight of the appended point at
        // infinity, which lands on the hatted degenerate marker.
        let mut hat_weights = Vec::with_capacity(n + 1);
        hat_weights.push(side_sum);
        let mut hat_points = Vec::with_capacity(n);
        let mut hat_alphas = Vec::with_capacity(n);
        for i in 1..=n {
            let w = -weights[n + 1 - i];
            hat_weights.push(w);
            hat_points.push(-1.0 / points[n - i]);
            hat_alphas.push(w * alpha_coeff);
        }
        (hat_weights, hat_points, hat_alphas)
    };

    let (left_weights, left_points, left_alphas) = hat_side(&p.right_weights, &p.right_points);
    let (right_weights, right_points, right_alphas) = hat_side(&p.left_weights, &p.left_points);

    Ok(TiltedParams {
        base: SleParams {
            kappa: p.kappa,
            left_weights,
            left_points,
            right_weights,
            right_points,
        },
        left_alphas,
        right_alphas,
    })
}

/// Merge force points that have collided after a stopping time.
///
/// `left_positions`/`right_positions` give the current location of every
/// force point including the degenerate slot (index 0), e.g. the mapped-out
/// configuration V_tau - W_tau. Coincident points are merged into one with
/// the weights summed; points sitting at 0 merge into the degenerate marker.
pub fn merge_collided_points(
    p: &SleParams,
    left_positions: &[f64],
    right_positions: &[f64],
) -> Result<SleParams, ParamsError> {
    let merge_side = |side: Side, weights: &[f64], positions: &[f64]| {
        if positions.len() != weights.len() {
            return Err(ParamsError::Malformed(format!(
                "side {side}: {} positions for {} weights",
                positions.len(),
                weights.len()
            )));
        }
        let mut out_weights: Vec<f64> = alloc::vec![0.0];
        let mut out_points: Vec<f64> = Vec::new();
        let mut last = 0.0_f64;
        for (j, (&x, &w)) in positions.iter().zip(weights.iter()).enumerate() {
            if !x.is_finite() {
                return Err(ParamsError::Malformed(format!(
                    "side {side}: non-finite position at index {j}"
                )));
            }
            let outward = match side {
                Side::Left => x <= last,
                Side::Right => x >= last,
            };
            if !outward {
                return Err(ParamsError::Malformed(format!(
                    "side {side}: positions not ordered outward at index {j}"
                )));
            }
            if x == last {
                // collided with the previous point (or the origin cluster)
                *out_weights.last_mut().expect("nonempty") += w;
            } else {
                out_weights.push(w);
                out_points.push(x);
                last = x;
            }
        }
        Ok((out_weights, out_points))
    };

    let (left_weights, left_points) = merge_side(Side::Left, &p.left_weights, left_positions)?;
    let (right_weights, right_points) = merge_side(Side::Right, &p.right_weights, right_positions)?;
    Ok(SleParams {
        kappa: p.kappa,
        left_weights,
        left_points,
        right_weights,
        right_points,
    })
}

fn fmt_list(f: &mut fmt::Formatter<'_>, xs: &[f64]) -> fmt::Result {
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{x}")?;
    }
    Ok(())
}

impl fmt::Display for SleParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "kappa = {}; rho = (", self.kappa)?;
        fmt_list(f, &self.left_weights)?;
        write!(f, "; ")?;
        fmt_list(f, &self.right_weights)?;
        write!(f, ") at (0-")?;
        if !self.left_points.is_empty() {
            write!(f, ", ")?;
            fmt_list(f, &self.left_points)?;
        }
        write!(f, "; 0+")?;
        if !self.right_points.is_empty() {
            write!(f, ", ")?;
            fmt_list(f, &self.right_points)?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for TiltedParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}; alpha = (", self.base)?;
        fmt_list(f, &self.left_alphas)?;
        write!(f, "; ")?;
        fmt_list(f, &self.right_alphas)?;
        write!(f, ")")
    }
}
