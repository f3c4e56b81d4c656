//! Curve transforms and conformal weight factors.
//!
//! The weight attached to a force point x is |x (psi)'(x)| where psi maps the
//! complementary component containing x onto the half-plane, normalized to
//! send (first traced boundary point, x, last traced boundary point) to
//! (0, ±1, inf) — plus sign on the right, minus on the left. psi is built by
//! composing the mapping-out function g_T with the Mobius normalization, so
//! it reuses the chain's exact elementary maps and their derivatives.
//!
//! Boundary anchors are identified from the chain's collision record: the
//! first traced boundary point of x's component is the origin until some
//! force point between the origin and x is swallowed, after which it is the
//! prime end left by the most recent such swallow. The last traced point is
//! the curve end at infinity in every supported regime; configurations that
//! would trap a force point in a bounded pocket first swallow it, which is
//! reported, never silently approximated.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::loewner::{CurveTrace, LoewnerChain};
use crate::params::{Side, SleParams};

/// First traced boundary point of a component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaAnchor {
    /// The curve base at the origin (0^- or 0^+ depending on the side).
    Origin,
    /// The prime end created when force point `index` on this side was
    /// swallowed at the given capacity time.
    Collision { index: usize, time: f64 },
}

/// Evaluation record for one force point's conformal weight factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentRecord {
    pub side: Side,
    pub index: usize,
    pub x: f64,
    pub sigma: SigmaAnchor,
    /// Last traced boundary point; always the curve end at infinity in the
    /// supported geometry.
    pub xi_infinite: bool,
    /// |x (psi)'(x)|, the base factor before exponentiation.
    pub factor: f64,
    /// Relative change of the factor over the final capacity doubling
    /// (T/2 vs T), used as the truncation-error proxy.
    pub truncation_error: f64,
}

/// Full evaluation detail, including the Mobius ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFactor {
    pub record: ComponentRecord,
    /// a = g_t(sigma)
    pub anchor_image: f64,
    /// b = g_t(x)
    pub point_image: f64,
    /// g_t'(x)
    pub map_derivative: f64,
}

/// A normalized conformal map evaluated at one marked boundary point, enough
/// to drive the derivative chain rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPoint {
    pub preimage: f64,
    pub image: f64,
    pub derivative: f64,
}

impl MapPoint {
    /// |preimage * derivative|, the weight base factor of this map.
    pub fn base_factor(&self) -> f64 {
        (self.preimage * self.derivative).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    SwallowedForcePoint {
        side: Side,
        index: usize,
        time: f64,
    },
    /// sigma/xi identification failed (degenerate or disordered images).
    IdentificationFailure {
        side: Side,
        index: usize,
        reason: String,
    },
    BadIndex {
        side: Side,
        index: usize,
    },
    IncompatibleNesting {
        expected: f64,
        got: f64,
    },
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::SwallowedForcePoint { side, index, time } => write!(
                f,
                "force point ({side}, {index}) swallowed at capacity time {time}"
            ),
            GeometryError::IdentificationFailure { side, index, reason } => write!(
                f,
                "sigma/xi identification failed for ({side}, {index}): {reason}"
            ),
            GeometryError::BadIndex { side, index } => {
                write!(f, "no force point with index {index} on side {side}")
            }
            GeometryError::IncompatibleNesting { expected, got } => write!(
                f,
                "incompatible nesting: outer map marked at {got}, inner image is {expected}"
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GeometryError {}

/// The half-plane involution J(z) = -1/z.
pub fn j_map(z: Complex64) -> Complex64 {
    -z.inv()
}

/// Apply J pointwise to a trace. Samples at the origin map to the infinity
/// end and are dropped; timestamps of surviving samples are kept as labels.
pub fn apply_j(trace: &CurveTrace) -> CurveTrace {
    let mut points = Vec::with_capacity(trace.points.len());
    let mut times = Vec::with_capacity(trace.times.len());
    for (&p, &t) in trace.points.iter().zip(trace.times.iter()) {
        if p.re == 0.0 && p.im == 0.0 {
            continue;
        }
        points.push(j_map(p));
        times.push(t);
    }
    CurveTrace { points, times }
}

/// The time reversal of J∘curve: order-reversed image under J, capacity
/// timestamps discarded (the reversal statement holds up to
/// reparametrization). The forward start at the origin maps to the infinity
/// end and is dropped, so the reversed curve runs from near 0 toward
/// infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct ReversedCurve {
    pub points: Vec<Complex64>,
    /// Number of points in the forward trace this was derived from.
    pub source_len: usize,
}

pub fn reverse_curve(trace: &CurveTrace) -> ReversedCurve {
    let mut points = Vec::with_capacity(trace.points.len());
    for &p in trace.points.iter().rev() {
        if p.re == 0.0 && p.im == 0.0 {
            continue;
        }
        points.push(j_map(p));
    }
    ReversedCurve {
        points,
        source_len: trace.points.len(),
    }
}

fn factor_at(
    chain: &LoewnerChain,
    p: &SleParams,
    side: Side,
    index: usize,
    t: f64,
) -> Result<(f64, f64, f64, f64, SigmaAnchor), GeometryError> {
    let points = p.points(side);
    if index == 0 || index > points.len() {
        return Err(GeometryError::BadIndex { side, index });
    }
    let x = points[index - 1];

    let own = chain.flow_boundary_point(x, side, t);
    if let Some(tc) = own.first_collision {
        return Err(GeometryError::SwallowedForcePoint {
            side,
            index,
            time: tc,
        });
    }
    let b = own.value;
    let dphi = own.derivative;

    // nearest swallowed force point between the origin and x, else the
    // origin prime end itself
    let mut sigma = SigmaAnchor::Origin;
    let mut a = chain.flow_boundary_point(0.0, side, t).value;
    for j in (1..index).rev() {
        let flow = chain.flow_boundary_point(points[j - 1], side, t);
        if let Some(tc) = flow.first_collision {
            sigma = SigmaAnchor::Collision { index: j, time: tc };
            a = flow.value;
            break;
        }
    }

    let denom = (b - a) * side.sign();
    if !(denom > 0.0) || !denom.is_finite() || !dphi.is_finite() {
        return Err(GeometryError::IdentificationFailure {
            side,
            index,
            reason: format!("anchor image {a} does not precede point image {b}"),
        });
    }
    Ok((x.abs() * dphi / denom, a, b, dphi, sigma))
}

/// Evaluate the weight factor |x (psi)'(x)| for force point `index` on
/// `side`, truncating the curve at capacity time `t`. The truncation error
/// proxy compares against the evaluation at t/2.
pub fn component_weight_factor(
    chain: &LoewnerChain,
    p: &SleParams,
    side: Side,
    index: usize,
    t: f64,
) -> Result<WeightFactor, GeometryError> {
    let (factor, a, b, dphi, sigma) = factor_at(chain, p, side, index, t)?;
    let truncation_error = match factor_at(chain, p, side, index, t * 0.5) {
        Ok((half, _, _, _, _)) => (factor - half).abs() / factor.max(1e-300),
        Err(_) => f64::INFINITY,
    };
    let x = p.points(side)[index - 1];
    Ok(WeightFactor {
        record: ComponentRecord {
            side,
            index,
            x,
            sigma,
            xi_infinite: true,
            factor,
            truncation_error,
        },
        anchor_image: a,
        point_image: b,
        map_derivative: dphi,
    })
}

impl WeightFactor {
    /// The normalized map evaluated at the force point: psi(x) = ±1 and
    /// psi'(x) with the side's sign convention.
    pub fn map_point(&self) -> MapPoint {
        let sgn = self.record.side.sign();
        MapPoint {
            preimage: self.record.x,
            image: sgn,
            derivative: sgn * self.map_derivative / (self.point_image - self.anchor_image),
        }
    }

    /// Evaluate the normalized map psi at an interior point through the
    /// chain's forward map.
    pub fn eval_map(
        &self,
        chain: &LoewnerChain,
        z: Complex64,
        t: f64,
    ) -> Result<Complex64, crate::loewner::LoewnerError> {
        let g = chain.forward_map(z, t)?;
        let sgn = self.record.side.sign();
        Ok((g - self.anchor_image) * (sgn / (self.point_image - self.anchor_image)))
    }
}

/// Relative residual of the conformal-derivative chain rule
/// |x psi_comp'(x)| = |y psi_outer'(y)| * |x psi_inner'(x)| with
/// y the inner image of x. The outer map must be marked at the inner image.
pub fn chain_rule_check(
    composed: &MapPoint,
    outer: &MapPoint,
    inner: &MapPoint,
) -> Result<f64, GeometryError> {
    let scale = outer.preimage.abs().max(inner.image.abs()).max(1e-12);
    if (outer.preimage - inner.image).abs() > 1e-6 * scale {
        return Err(GeometryError::IncompatibleNesting {
            expected: inner.image,
            got: outer.preimage,
        });
    }
    let f_comp = composed.base_factor();
    let f_out = outer.base_factor();
    let f_in = inner.base_factor();
    Ok((f_comp - f_out * f_in).abs() / f_comp.max(1e-300))
}
