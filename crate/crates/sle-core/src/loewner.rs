//! Deterministic Loewner machinery.
//!
//! A chain is a finite sequence of elementary slit maps, each solving the
//! Loewner equation exactly over one step with the driving value frozen:
//!
//! ```text
//!   w ↦ W + sqrt((w - W)^2 + 4 dt)
//! ```
//!
//! with the square-root branch taken in the closed upper half-plane, and the
//! real branch chosen by the side of `W` for boundary points. Discretization
//! error therefore enters only through the driving interpolation, never the
//! per-step solve.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::params::Side;

/// One elementary slit map: capacity increment `dt` under frozen driving `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainStep {
    pub dt: f64,
    pub w: f64,
}

/// A composition of elementary slit maps (earliest step first).
#[derive(Debug, Clone, PartialEq)]
pub struct LoewnerChain {
    steps: Vec<ChainStep>,
    total_capacity: f64,
}

/// An ordered polyline of curve points in the closed upper half-plane with
/// their half-plane-capacity timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTrace {
    pub points: Vec<Complex64>,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoewnerError {
    /// The point enters the hull before the requested time.
    Swallowed { x: f64, time: f64 },
    /// Requested capacity time beyond the chain's total capacity.
    CapacityExceeded { requested: f64, total: f64 },
    /// Inverse-map branch produced a non-finite or lower-half-plane value.
    BranchFailure { step: usize },
    BadInput(String),
}

impl fmt::Display for LoewnerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoewnerError::Swallowed { x, time } => {
                write!(f, "boundary point {x} swallowed at capacity time {time}")
            }
            LoewnerError::CapacityExceeded { requested, total } => {
                write!(f, "capacity time {requested} exceeds chain total {total}")
            }
            LoewnerError::BranchFailure { step } => {
                write!(f, "inverse slit map branch failure at step {step}")
            }
            LoewnerError::BadInput(reason) => write!(f, "bad input: {reason}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for LoewnerError {}

/// Collision tolerance multiplier: a boundary point within `c sqrt(dt)` of
/// the driving value counts as hitting the hull, matching the scale of the
/// per-step hull growth (an elementary slit has height 2 sqrt(dt)).
pub const COLLISION_TOLERANCE: f64 = 2.0;

/// Square root with the branch taken in the closed upper half-plane.
pub fn sqrt_upper(c: Complex64) -> Complex64 {
    if c.re == 0.0 && c.im == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let r = (c.re * c.re + c.im * c.im).sqrt();
    let principal = if c.re >= 0.0 {
        let t = ((r + c.re) * 0.5).sqrt();
        Complex64::new(t, c.im / (2.0 * t))
    } else {
        let t = ((r - c.re) * 0.5).sqrt();
        let re = c.im.abs() / (2.0 * t);
        Complex64::new(re, if c.im >= 0.0 { t } else { -t })
    };
    if principal.im < 0.0 {
        -principal
    } else {
        principal
    }
}

/// Result of pushing a real boundary point through a chain with
/// absorption-and-push at collisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryImage {
    /// Image under the (absorbed) flow at the requested time.
    pub value: f64,
    /// First capacity time at which the point collided with the driving
    /// value, if it did.
    pub first_collision: Option<f64>,
    /// Product of per-step map derivatives; meaningful only while uncollided.
    pub derivative: f64,
}

impl LoewnerChain {
    pub fn new(steps: Vec<ChainStep>) -> Result<Self, LoewnerError> {
        let mut total = 0.0;
        for (i, s) in steps.iter().enumerate() {
            if !(s.dt > 0.0) || !s.dt.is_finite() {
                return Err(LoewnerError::BadInput(alloc::format!(
                    "step {i}: capacity increment {} must be positive",
                    s.dt
                )));
            }
            if !s.w.is_finite() {
                return Err(LoewnerError::BadInput(alloc::format!(
                    "step {i}: non-finite driving value"
                )));
            }
            total += s.dt;
        }
        Ok(LoewnerChain {
            steps,
            total_capacity: total,
        })
    }

    /// Constant driving split into `n` equal steps.
    pub fn constant(w: f64, total: f64, n: usize) -> Self {
        let n = n.max(1);
        let dt = total / n as f64;
        let steps = (0..n).map(|_| ChainStep { dt, w }).collect();
        LoewnerChain::new(steps).expect("constant chain is well-formed")
    }

    pub fn empty() -> Self {
        LoewnerChain {
            steps: Vec::new(),
            total_capacity: 0.0,
        }
    }

    pub fn steps(&self) -> &[ChainStep] {
        &self.steps
    }

    pub fn total_capacity(&self) -> f64 {
        self.total_capacity
    }

    /// Driving value in force at capacity time `t` (left-continuous at step
    /// boundaries; the initial value for `t = 0`).
    pub fn driving_at(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for s in &self.steps {
            if t < acc + s.dt {
                return s.w;
            }
            acc += s.dt;
        }
        self.steps.last().map_or(0.0, |s| s.w)
    }

    /// The configuration scaled by `a > 0`: capacities scale by `a^2`,
    /// driving values by `a`. Maps the hull `K` to `aK`.
    pub fn dilated(&self, a: f64) -> Self {
        let steps = self
            .steps
            .iter()
            .map(|s| ChainStep {
                dt: a * a * s.dt,
                w: a * s.w,
            })
            .collect();
        LoewnerChain::new(steps).expect("dilation preserves well-formedness")
    }

    /// Appends another chain after this one.
    pub fn concat(&self, other: &LoewnerChain) -> Self {
        let mut steps = self.steps.clone();
        steps.extend_from_slice(&other.steps);
        LoewnerChain::new(steps).expect("concatenation preserves well-formedness")
    }

    /// Merge consecutive steps into super-steps of capacity at most
    /// `target_dt`, keeping the driving value of each window's first step.
    /// Capacity is preserved exactly; only the driving interpolation
    /// coarsens. Tip tracing on the coarsened chain costs proportionally
    /// less.
    pub fn coarsened(&self, target_dt: f64) -> Self {
        let mut steps: Vec<ChainStep> = Vec::new();
        for s in &self.steps {
            match steps.last_mut() {
                Some(last) if last.dt + s.dt <= target_dt => last.dt += s.dt,
                _ => steps.push(*s),
            }
        }
        LoewnerChain::new(steps).expect("coarsening preserves well-formedness")
    }

    fn check_time(&self, t: f64) -> Result<(), LoewnerError> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(LoewnerError::BadInput(alloc::format!(
                "capacity time {t} must be nonnegative"
            )));
        }
        // allow for accumulation rounding at the right endpoint
        if t > self.total_capacity * (1.0 + 1e-12) + 1e-300 {
            return Err(LoewnerError::CapacityExceeded {
                requested: t,
                total: self.total_capacity,
            });
        }
        Ok(())
    }

    /// The mapping-out function g_t applied to an interior point, computed by
    /// composing the elementary slit maps (partial final step when `t` falls
    /// inside a step).
    pub fn forward_map(&self, z: Complex64, t: f64) -> Result<Complex64, LoewnerError> {
        self.check_time(t)?;
        if z.im < 0.0 {
            return Err(LoewnerError::BadInput(String::from(
                "point below the real axis",
            )));
        }
        if z.im == 0.0 {
            let (v, _) = self.forward_map_derivative(z.re, t)?;
            return Ok(Complex64::new(v, 0.0));
        }
        let mut w = z;
        let mut remaining = t;
        for (i, s) in self.steps.iter().enumerate() {
            if remaining <= 0.0 {
                break;
            }
            let dt = if s.dt < remaining { s.dt } else { remaining };
            let d = w - s.w;
            w = sqrt_upper(d * d + 4.0 * dt) + s.w;
            remaining -= dt;
            // An interior point keeps a strictly positive imaginary part;
            // collapse onto the axis means the point entered the hull.
            if !w.re.is_finite() || !w.im.is_finite() {
                return Err(LoewnerError::BranchFailure { step: i });
            }
            if w.im <= 0.0 {
                return Err(LoewnerError::Swallowed {
                    x: z.re,
                    time: t - remaining,
                });
            }
        }
        Ok(w)
    }

    /// Image and derivative of g_t at an unswallowed real boundary point.
    /// The derivative is the product of per-step factors
    /// (u - W) / sqrt((u - W)^2 + 4 dt) and is strictly positive.
    pub fn forward_map_derivative(&self, x: f64, t: f64) -> Result<(f64, f64), LoewnerError> {
        self.check_time(t)?;
        let img = self.flow_boundary_point(x, side_of(x), t);
        match img.first_collision {
            Some(tc) if tc <= t => Err(LoewnerError::Swallowed { x, time: tc }),
            _ => Ok((img.value, img.derivative)),
        }
    }

    /// Push a real boundary point through the chain up to capacity time `t`
    /// with absorption-and-push: on collision (sign change relative to the
    /// side, or within the collision tolerance) the point is re-seated at the
    /// driving value and carried along the slit base by the same step.
    pub fn flow_boundary_point(&self, x: f64, side: Side, t: f64) -> BoundaryImage {
        let mut u = x;
        let mut derivative = 1.0;
        let mut first_collision = None;
        let mut elapsed = 0.0;
        let sgn = side.sign();
        for s in &self.steps {
            let remaining = t - elapsed;
            if remaining <= 0.0 {
                break;
            }
            let dt = if s.dt < remaining { s.dt } else { remaining };
            let mut d = u - s.w;
            if d * sgn <= 0.0 || d.abs() < COLLISION_TOLERANCE * dt.sqrt() {
                if first_collision.is_none() {
                    first_collision = Some(elapsed);
                }
                d = 0.0;
                derivative = 0.0;
            }
            let root = (d * d + 4.0 * dt).sqrt();
            u = s.w + sgn * root;
            // derivative factor of u ↦ W + sign(d) sqrt(d^2 + 4 dt)
            derivative *= d.abs() / root;
            elapsed += dt;
        }
        BoundaryImage {
            value: u,
            first_collision,
            derivative,
        }
    }

    /// First capacity time at which g_t(x) collides with the driving value
    /// (within the collision tolerance), or `None` within the chain's total
    /// capacity.
    pub fn hull_swallow_time(&self, x: f64) -> Option<f64> {
        self.flow_boundary_point(x, side_of(x), self.total_capacity)
            .first_collision
    }

    /// Curve tip at each requested capacity time, from applying the inverse
    /// elementary maps in reverse step order. The trace always starts at the
    /// origin with timestamp zero.
    pub fn trace_curve(&self, times: &[f64]) -> Result<CurveTrace, LoewnerError> {
        let mut points = Vec::with_capacity(times.len() + 1);
        let mut out_times = Vec::with_capacity(times.len() + 1);
        points.push(Complex64::new(0.0, 0.0));
        out_times.push(0.0);
        let mut prev = 0.0;
        for &t in times {
            if t <= prev {
                continue;
            }
            self.check_time(t)?;
            points.push(self.tip_at(t)?);
            out_times.push(t);
            prev = t;
        }
        Ok(CurveTrace {
            points,
            times: out_times,
        })
    }

    fn tip_at(&self, t: f64) -> Result<Complex64, LoewnerError> {
        // locate the step containing t and the partial capacity inside it
        let mut acc = 0.0;
        let mut idx = self.steps.len();
        let mut partial = 0.0;
        for (i, s) in self.steps.iter().enumerate() {
            if t <= acc + s.dt {
                idx = i;
                partial = t - acc;
                break;
            }
            acc += s.dt;
        }
        if idx == self.steps.len() {
            // t lands at (or within rounding of) the total capacity
            idx = self.steps.len() - 1;
            partial = self.steps[idx].dt;
        }
        let mut z = Complex64::new(self.steps[idx].w, 0.0);
        for i in (0..=idx).rev() {
            let s = self.steps[i];
            let dt = if i == idx { partial } else { s.dt };
            let d = z - s.w;
            z = sqrt_upper(d * d - 4.0 * dt) + s.w;
            if !z.re.is_finite() || !z.im.is_finite() || z.im < -1e-12 {
                return Err(LoewnerError::BranchFailure { step: i });
            }
        }
        if z.im < 0.0 {
            z.im = 0.0;
        }
        Ok(z)
    }
}

fn side_of(x: f64) -> Side {
    if x < 0.0 {
        Side::Left
    } else {
        Side::Right
    }
}

impl CurveTrace {
    /// Largest distance of a trace point from the origin.
    pub fn radius(&self) -> f64 {
        self.points
            .iter()
            .map(|p| (p.re * p.re + p.im * p.im).sqrt())
            .fold(0.0, f64::max)
    }
}
