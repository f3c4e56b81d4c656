//! Chordal SLE_k(rho) simulation primitives.
//!
//! The crate covers the full pipeline needed to compare the law of a
//! time-reversed chordal SLE_k(rho) curve against a conformally weighted
//! SLE_k(rho_hat) ensemble:
//!
//! * [`params`] — force-point parameter algebra: validation against the
//!   continuation-threshold bound and the reversal transform.
//! * [`loewner`] — deterministic Loewner machinery built from exact
//!   elementary slit maps: forward maps, boundary derivatives, curve tracing
//!   and swallow times.
//! * [`sampler`] — Euler–Maruyama integration of the driving SDE with force
//!   points, adaptive stepping near singularities and continuation-threshold
//!   detection.
//! * [`geometry`] — curve transforms (z ↦ -1/z, time reversal, dilation) and
//!   numerical evaluation of the normalized component maps and the
//!   conformal-derivative weight factors.
//! * [`observables`] — reparametrization-invariant functionals of traces used
//!   for distributional comparison.
//! * [`stats`] — self-normalized importance weights, effective sample size,
//!   weighted Kolmogorov–Smirnov tests with bootstrap calibration and the
//!   empirical normalizing constant.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the companion CLI
//! crate carries all IO, file formats and parallel orchestration.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod geometry;
pub mod loewner;
pub mod observables;
pub mod params;
pub mod sampler;
pub mod stats;

pub use params::{Side, SleParams, TiltedParams};
