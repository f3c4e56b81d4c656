//! Stochastic driving-path generation.
//!
//! Euler–Maruyama integration of the interacting SDE system
//!
//! ```text
//!   dW = sum_{i,q} rho^{i,q} / (W - V^{i,q}) dt + sqrt(kappa) dB
//!   dV^{i,q} = 2 / (V^{i,q} - W) dt
//! ```
//!
//! with the force-point images advanced by the exact per-step slit map (the
//! same elementary map the Loewner chain uses), degenerate points started at
//! ∓/+ epsilon0, step sizes shrunk quadratically near force points, and the
//! singular drift denominator floored. Collisions of a force-point image with
//! the driving value are resolved by absorption-and-push; a collision of a
//! cluster with cumulative weight <= -2 is the continuation threshold and
//! stops the path.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::loewner::{ChainStep, LoewnerChain, LoewnerError, COLLISION_TOLERANCE};
use crate::params::{Side, SleParams};

/// Step-size shrink factor: dt = min(dt_max, GAMMA * gap^2).
pub const DT_GAMMA: f64 = 0.1;
/// Step-size floor relative to dt_max.
pub const DT_FLOOR_FACTOR: f64 = 1e-6;

/// Sampler configuration. `epsilon0` is the absolute offset used to start the
/// degenerate force points 0^± at ∓/+ epsilon0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub total_capacity: f64,
    pub dt_max: f64,
    pub epsilon0: f64,
    pub delta_sing: f64,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(total_capacity: f64, dt_max: f64, seed: u64) -> Self {
        SamplerConfig {
            total_capacity,
            dt_max,
            epsilon0: 1e-4,
            delta_sing: 1e-9,
            seed,
        }
    }

    /// Default degenerate-start offset for a parameter set:
    /// 1e-4 * min(1, nearest non-degenerate |x|).
    pub fn default_epsilon0(p: &SleParams) -> f64 {
        1e-4 * p.nearest_point_distance().unwrap_or(1.0).min(1.0)
    }

    pub fn with_epsilon0(self, epsilon0: f64) -> Self {
        SamplerConfig { epsilon0, ..self }
    }
}

/// A sampled driving path: the grid, the driving values, the force-point
/// image trajectories per side (degenerate point first), the continuation
/// threshold time if hit, and the RNG provenance (master seed, trajectory).
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingPath {
    pub times: Vec<f64>,
    pub w: Vec<f64>,
    pub v_left: Vec<Vec<f64>>,
    pub v_right: Vec<Vec<f64>>,
    pub stopped_at: Option<f64>,
    pub seed: (u64, u64),
}

impl DrivingPath {
    pub fn total_capacity(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Transcribe into a Loewner chain of (dt, W-at-step-start) pairs.
    pub fn to_chain(&self) -> LoewnerChain {
        path_to_chain(self)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Counter-based per-trajectory stream: the key is derived from
/// (master seed, trajectory index), so ensembles are reproducible and
/// independent of generation order.
pub fn trajectory_rng(master_seed: u64, trajectory: u64) -> ChaCha12Rng {
    let mut state = master_seed;
    let mixed = splitmix64(&mut state) ^ trajectory.wrapping_mul(0xD1342543DE82EF95);
    let mut s = mixed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// Standard normal via the polar (Marsaglia) method.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen::<f64>() * 2.0 - 1.0;
        let v: f64 = rng.gen::<f64>() * 2.0 - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

struct SideState {
    rho: Vec<f64>,
    cum_rho: Vec<f64>,
    v: Vec<f64>,
    /// Points currently absorbed at the driving value: their dynamics is the
    /// exact push map, so they are excluded from the step-size rule until
    /// they separate again.
    in_contact: Vec<bool>,
    side: Side,
}

impl SideState {
    fn new(side: Side, weights: &[f64], points: &[f64], epsilon0: f64) -> Self {
        let mut v = Vec::with_capacity(weights.len());
        v.push(side.sign() * epsilon0);
        v.extend_from_slice(points);
        let mut cum = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in weights {
            acc += w;
            cum.push(acc);
        }
        SideState {
            rho: weights.to_vec(),
            cum_rho: cum,
            in_contact: alloc::vec![false; v.len()],
            v,
            side,
        }
    }
}

/// Sample one driving path. The parameter set is taken as given (callers
/// validate); a parameter set violating the continuation-threshold bound is
/// simply sampled until the threshold stops it.
pub fn sample_driving(p: &SleParams, cfg: &SamplerConfig, trajectory: u64) -> DrivingPath {
    let mut rng = trajectory_rng(cfg.seed, trajectory);
    let kappa = p.kappa;
    let sqrt_kappa = kappa.sqrt();
    let dt_floor = cfg.dt_max * DT_FLOOR_FACTOR;

    let mut sides = [
        SideState::new(Side::Left, &p.left_weights, &p.left_points, cfg.epsilon0),
        SideState::new(Side::Right, &p.right_weights, &p.right_points, cfg.epsilon0),
    ];

    let mut w = 0.0_f64;
    let mut t = 0.0_f64;
    let cap = cfg.total_capacity;
    let est_steps = (cap / cfg.dt_max) as usize + 64;

    let mut times = Vec::with_capacity(est_steps + 1);
    let mut w_out = Vec::with_capacity(est_steps + 1);
    let mut v_out: [Vec<Vec<f64>>; 2] = [
        (0..sides[0].v.len()).map(|_| Vec::with_capacity(est_steps + 1)).collect(),
        (0..sides[1].v.len()).map(|_| Vec::with_capacity(est_steps + 1)).collect(),
    ];
    let record =
        |t: f64, w: f64, sides: &[SideState; 2], times: &mut Vec<f64>, w_out: &mut Vec<f64>, v_out: &mut [Vec<Vec<f64>>; 2]| {
            times.push(t);
            w_out.push(w);
            for (k, side) in sides.iter().enumerate() {
                for (traj, &v) in v_out[k].iter_mut().zip(side.v.iter()) {
                    traj.push(v);
                }
            }
        };
    record(t, w, &sides, &mut times, &mut w_out, &mut v_out);

    let mut stopped_at = None;

    'outer: while t < cap {
        // adaptive step: quadratic in the gap to the nearest separated force
        // point; absorbed points ride the push map and do not shrink dt
        let mut dt = cfg.dt_max;
        for side in &sides {
            for (&v, &contact) in side.v.iter().zip(&side.in_contact) {
                if !contact {
                    let gap = w - v;
                    dt = dt.min(DT_GAMMA * gap * gap);
                }
            }
        }
        dt = dt.max(dt_floor);
        let mut at_end = false;
        if t + dt >= cap {
            dt = cap - t;
            at_end = true;
        }

        // Euler drift with the singular denominator floored in magnitude
        let mut drift = 0.0;
        for side in &sides {
            for (&rho, &v) in side.rho.iter().zip(side.v.iter()) {
                if rho != 0.0 {
                    let mut denom = w - v;
                    if denom.abs() < cfg.delta_sing {
                        denom = if denom < 0.0 { -cfg.delta_sing } else { cfg.delta_sing };
                    }
                    drift += rho / denom;
                }
            }
        }
        let w_new = w + drift * dt + sqrt_kappa * dt.sqrt() * standard_normal(&mut rng);

        // advance force-point images by the exact slit map frozen at w,
        // with absorption-and-push on contact
        let tol = COLLISION_TOLERANCE * dt.sqrt();
        for side in &mut sides {
            let sgn = side.side.sign();
            for (v, contact) in side.v.iter_mut().zip(side.in_contact.iter_mut()) {
                let mut d = *v - w;
                if d * sgn <= 0.0 || d.abs() < tol {
                    d = 0.0;
                    *contact = true;
                }
                *v = w + sgn * (d * d + 4.0 * dt).sqrt();
            }
        }

        let t_new = if at_end { cap } else { t + dt };

        // enforce the ordering invariant against the moved driving value;
        // a cluster with cumulative weight <= -2 caught by the driving is
        // the continuation threshold
        let release = 2.0 * tol;
        for side in &mut sides {
            let sgn = side.side.sign();
            for (j, (v, contact)) in side
                .v
                .iter_mut()
                .zip(side.in_contact.iter_mut())
                .enumerate()
            {
                if (*v - w_new) * sgn < 0.0 {
                    *v = w_new;
                    *contact = true;
                    if side.cum_rho[j] <= -2.0 && stopped_at.is_none() {
                        stopped_at = Some(t_new);
                    }
                } else if *contact && (*v - w_new) * sgn > release {
                    *contact = false;
                }
            }
        }

        w = w_new;
        t = t_new;
        record(t, w, &sides, &mut times, &mut w_out, &mut v_out);
        if stopped_at.is_some() {
            break 'outer;
        }
    }

    let [v_left, v_right] = v_out;
    DrivingPath {
        times,
        w: w_out,
        v_left,
        v_right,
        stopped_at,
        seed: (cfg.seed, trajectory),
    }
}

/// First grid time at which a force-point cluster with cumulative weight
/// <= -2 sits within the collision tolerance of the driving value.
pub fn detect_threshold(path: &DrivingPath, p: &SleParams) -> Option<f64> {
    let cum = |weights: &[f64]| -> Vec<f64> {
        let mut acc = 0.0;
        weights
            .iter()
            .map(|&w| {
                acc += w;
                acc
            })
            .collect()
    };
    let cum_left = cum(&p.left_weights);
    let cum_right = cum(&p.right_weights);

    for k in 1..path.times.len() {
        let dt = path.times[k] - path.times[k - 1];
        let tol = COLLISION_TOLERANCE * dt.max(0.0).sqrt();
        let w = path.w[k];
        for (cums, vs) in [(&cum_left, &path.v_left), (&cum_right, &path.v_right)] {
            for (j, &c) in cums.iter().enumerate() {
                if c <= -2.0 && j < vs.len() && (vs[j][k] - w).abs() <= tol {
                    return Some(path.times[k]);
                }
            }
        }
    }
    None
}

/// Transcribe a driving path into a Loewner chain; the capacity is the sum
/// of the grid increments.
pub fn path_to_chain(path: &DrivingPath) -> LoewnerChain {
    let mut steps = Vec::with_capacity(path.times.len().saturating_sub(1));
    for k in 1..path.times.len() {
        let dt = path.times[k] - path.times[k - 1];
        if dt > 0.0 {
            steps.push(ChainStep {
                dt,
                w: path.w[k - 1],
            });
        }
    }
    LoewnerChain::new(steps).expect("grid increments are positive")
}

/// Quadratically spaced capacity times on (0, T]: uniform in hull size
/// rather than capacity, so the early curve is resolved as finely as the
/// late curve relative to its own scale.
pub fn quadratic_times(total: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (1..=n)
        .map(|j| {
            let s = j as f64 / n as f64;
            total * s * s
        })
        .collect()
}

/// Convenience: sample, transcribe and trace in one call.
pub fn sample_traced(
    p: &SleParams,
    cfg: &SamplerConfig,
    trajectory: u64,
    trace_points: usize,
) -> Result<(DrivingPath, LoewnerChain, crate::loewner::CurveTrace), LoewnerError> {
    let path = sample_driving(p, cfg, trajectory);
    let chain = path.to_chain();
    let times = quadratic_times(chain.total_capacity(), trace_points);
    let trace = chain.trace_curve(&times)?;
    Ok((path, chain, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn plain(kappa: f64) -> SleParams {
        SleParams::two_sided(kappa, 0.0, 0.0)
    }

    #[test]
    fn zero_weights_give_brownian_driving() {
        // W_T / sqrt(kappa T) should have unit variance
        let kappa = 2.0;
        let total = 1.0;
        let cfg = SamplerConfig::new(total, 1e-3, 17);
        let n = 2000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for traj in 0..n {
            let path = sample_driving(&plain(kappa), &cfg, traj);
            let z = path.w.last().unwrap() / (kappa * total).sqrt();
            sum += z;
            sum2 += z * z;
        }
        let n = n as f64;
        let var = sum2 / n - (sum / n) * (sum / n);
        assert!((0.9..1.1).contains(&var), "variance {var}");
    }

    #[test]
    fn repelled_force_point_is_rarely_swallowed() {
        // kappa = 2, rho^{1,R} = kappa/2 - 2 + 0.5 = -0.5 at x = 1: the
        // partial sum stays >= kappa/2 - 2, so the curve a.s. avoids
        // (x^{1,R}, +inf); at finite dt allow a 1% discretization slip.
        let p = SleParams {
            kappa: 2.0,
            left_weights: vec![0.0],
            left_points: vec![],
            right_weights: vec![0.0, -0.5],
            right_points: vec![1.0],
        };
        let cfg = SamplerConfig::new(5.0, 1e-3, 3);
        let n = 2000;
        let mut swallowed = 0;
        for traj in 0..n {
            let path = sample_driving(&p, &cfg, traj);
            let last = *path.v_right[1].last().unwrap();
            let w_last = *path.w.last().unwrap();
            if last <= w_last {
                swallowed += 1;
            }
        }
        assert!(
            (swallowed as f64) < 0.01 * n as f64,
            "swallowed {swallowed} of {n}"
        );
    }

    #[test]
    fn ordering_invariant_holds_at_every_grid_time() {
        let p = SleParams {
            kappa: 3.0,
            left_weights: vec![0.5, -1.0],
            left_points: vec![-0.7],
            right_weights: vec![-0.5, 1.0],
            right_points: vec![1.3],
        };
        let cfg = SamplerConfig::new(2.0, 1e-3, 11);
        for traj in 0..20 {
            let path = sample_driving(&p, &cfg, traj);
            for k in 0..path.times.len() {
                let w = path.w[k];
                for j in 1..path.v_left.len() {
                    assert!(path.v_left[j][k] <= path.v_left[j - 1][k] + 1e-12);
                }
                assert!(path.v_left[0][k] <= w);
                assert!(w <= path.v_right[0][k]);
                for j in 1..path.v_right.len() {
                    assert!(path.v_right[j][k] >= path.v_right[j - 1][k] - 1e-12);
                }
            }
        }
    }

    #[test]
    fn threshold_stops_qualifying_clusters() {
        // deliberately invalid weights: the degenerate right cluster carries
        // -2.5 <= -2, so the first contact is the continuation threshold
        let p = SleParams {
            kappa: 2.0,
            left_weights: vec![0.0],
            left_points: vec![],
            right_weights: vec![-2.5],
            right_points: vec![],
        };
        let cfg = SamplerConfig::new(4.0, 1e-3, 5);
        let mut hit = 0;
        for traj in 0..50 {
            let path = sample_driving(&p, &cfg, traj);
            if let Some(ts) = path.stopped_at {
                hit += 1;
                assert!(ts <= path.total_capacity() + 1e-12);
                let detected = detect_threshold(&path, &p);
                assert!(detected.is_some(), "stop at {ts} not re-detected");
            }
        }
        assert!(hit > 0, "attractive cluster never hit the threshold");
    }

    #[test]
    fn near_threshold_weight_never_qualifies() {
        // rho^{0,R} = -1.9 > -2: no qualifying cluster exists, so the
        // threshold never fires; the contact fraction is an output of the
        // run, not an assertion.
        let p = SleParams {
            kappa: 2.0,
            left_weights: vec![0.0],
            left_points: vec![],
            right_weights: vec![-1.9],
            right_points: vec![],
        };
        let cfg = SamplerConfig::new(1.0, 1e-3, 29);
        let mut stopped = 0;
        for traj in 0..100 {
            let path = sample_driving(&p, &cfg, traj);
            assert_eq!(detect_threshold(&path, &p), None);
            if path.stopped_at.is_some() {
                stopped += 1;
            }
        }
        assert_eq!(stopped, 0);
    }

    #[test]
    fn far_cluster_within_short_horizon_never_triggers() {
        let p = SleParams {
            kappa: 2.0,
            left_weights: vec![0.0],
            left_points: vec![],
            right_weights: vec![0.0, -3.0],
            right_points: vec![50.0],
        };
        let cfg = SamplerConfig::new(0.5, 1e-3, 41);
        for traj in 0..10 {
            let path = sample_driving(&p, &cfg, traj);
            assert_eq!(path.stopped_at, None);
            assert_eq!(detect_threshold(&path, &p), None);
        }
    }

    #[test]
    fn chain_round_trip_preserves_capacity() {
        let p = plain(2.0);
        let cfg = SamplerConfig::new(1.5, 1e-3, 7);
        let path = sample_driving(&p, &cfg, 0);
        let chain = path.to_chain();
        let total = path.total_capacity();
        assert!((chain.total_capacity() - total).abs() <= 1e-12 * total);

        // empty path → empty chain
        let empty = DrivingPath {
            times: vec![0.0],
            w: vec![0.0],
            v_left: vec![vec![0.0]],
            v_right: vec![vec![0.0]],
            stopped_at: None,
            seed: (0, 0),
        };
        assert_eq!(empty.to_chain().steps().len(), 0);
    }

    #[test]
    fn constant_driving_path_reproduces_the_analytic_slit() {
        let n = 1000;
        let dt = 1e-3;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        let path = DrivingPath {
            w: vec![0.0; n + 1],
            v_left: vec![vec![-1e-4; n + 1]],
            v_right: vec![vec![1e-4; n + 1]],
            times,
            stopped_at: None,
            seed: (0, 0),
        };
        let chain = path.to_chain();
        let (g, _) = chain.forward_map_derivative(1.0, 1.0).unwrap();
        assert!((g - 5.0f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn trajectories_are_reproducible_and_order_independent() {
        let p = plain(4.0);
        let cfg = SamplerConfig::new(0.5, 1e-3, 123);
        let a = sample_driving(&p, &cfg, 42);
        let b = sample_driving(&p, &cfg, 42);
        assert_eq!(a, b);
        let c = sample_driving(&p, &cfg, 43);
        assert_ne!(a.w, c.w);
    }
}
