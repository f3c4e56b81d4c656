//! Weighted ensemble comparison.
//!
//! Self-normalized importance sampling throughout: the normalizing constant
//! of the tilted law is reported (as the mean unnormalized weight) but never
//! used by the tests, so adding a constant to all log-weights of an ensemble
//! changes nothing. Two-sample comparisons use the weighted
//! Kolmogorov–Smirnov statistic with a pooled bootstrap whose replicate
//! sizes are the effective sample sizes, so weight degeneracy inflates the
//! null spread instead of masquerading as a distributional discrepancy.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::geometry::ComponentRecord;
use crate::params::{Side, TiltedParams};
use crate::sampler::trajectory_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEnsemble {
    /// N rows of M observable values each (NaN marks a missing value).
    pub observables: Vec<Vec<f64>>,
    /// N log-weights; all zero for an unweighted ensemble.
    pub log_weights: Vec<f64>,
    /// Master seed the ensemble was generated from.
    pub master_seed: u64,
    /// Digest of the generating configuration.
    pub params_digest: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StatsError {
    /// Fewer than two samples, ragged rows, or a bad observable index.
    Malformed(alloc::string::String),
    /// All weights vanish.
    DegenerateWeights,
    /// Effective sample size below the configured floor; the comparison is
    /// inconclusive rather than failed.
    InsufficientEss { ess: f64, floor: f64 },
    /// A nonzero power parameter has no matching factor record.
    MissingRecord { side: Side, index: usize },
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::Malformed(reason) => write!(f, "malformed ensemble: {reason}"),
            StatsError::DegenerateWeights => write!(f, "all importance weights vanish"),
            StatsError::InsufficientEss { ess, floor } => {
                write!(f, "effective sample size {ess} below the floor {floor}")
            }
            StatsError::MissingRecord { side, index } => write!(
                f,
                "no factor record for force point ({side}, {index}) with nonzero alpha"
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for StatsError {}

impl WeightedEnsemble {
    pub fn new(
        observables: Vec<Vec<f64>>,
        log_weights: Vec<f64>,
        master_seed: u64,
        params_digest: u64,
    ) -> Result<Self, StatsError> {
        if observables.len() < 2 {
            return Err(StatsError::Malformed(alloc::format!(
                "need at least 2 samples, got {}",
                observables.len()
            )));
        }
        if observables.len() != log_weights.len() {
            return Err(StatsError::Malformed(alloc::format!(
                "{} rows vs {} log-weights",
                observables.len(),
                log_weights.len()
            )));
        }
        let m = observables[0].len();
        if observables.iter().any(|row| row.len() != m) {
            return Err(StatsError::Malformed(alloc::string::String::from(
                "ragged observable rows",
            )));
        }
        if log_weights.iter().any(|lw| !lw.is_finite()) {
            return Err(StatsError::Malformed(alloc::string::String::from(
                "non-finite log-weight",
            )));
        }
        Ok(WeightedEnsemble {
            observables,
            log_weights,
            master_seed,
            params_digest,
        })
    }

    pub fn unweighted(
        observables: Vec<Vec<f64>>,
        master_seed: u64,
        params_digest: u64,
    ) -> Result<Self, StatsError> {
        let n = observables.len();
        WeightedEnsemble::new(observables, alloc::vec![0.0; n], master_seed, params_digest)
    }

    pub fn len(&self) -> usize {
        self.observables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observables.is_empty()
    }

    pub fn n_observables(&self) -> usize {
        self.observables.first().map_or(0, Vec::len)
    }

    /// Weights normalized to sum to one (shift-invariant in the log domain).
    pub fn normalized_weights(&self) -> Vec<f64> {
        let max = self
            .log_weights
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut w: Vec<f64> = self.log_weights.iter().map(|lw| (lw - max).exp()).collect();
        let sum: f64 = w.iter().sum();
        for wi in &mut w {
            *wi /= sum;
        }
        w
    }
}

/// Sum of alpha^{i,q} * log(factor^{i,q}) over the records. Every nonzero
/// alpha must have a matching record.
pub fn rn_log_weight(records: &[ComponentRecord], tilted: &TiltedParams) -> Result<f64, StatsError> {
    let mut total = 0.0;
    for (side, alphas) in [
        (Side::Left, &tilted.left_alphas),
        (Side::Right, &tilted.right_alphas),
    ] {
        for (i, &alpha) in alphas.iter().enumerate() {
            let index = i + 1;
            if alpha == 0.0 {
                continue;
            }
            let record = records
                .iter()
                .find(|r| r.side == side && r.index == index)
                .ok_or(StatsError::MissingRecord { side, index })?;
            total += alpha * record.factor.ln();
        }
    }
    Ok(total)
}

/// Mean unnormalized weight with a bootstrap standard error; this estimates
/// the normalizing constant of the tilted law.
pub fn estimate_z(ensemble: &WeightedEnsemble, replicates: usize) -> Result<(f64, f64), StatsError> {
    let w: Vec<f64> = self_weights(ensemble)?;
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let mut rng = trajectory_rng(ensemble.master_seed ^ 0x5a5a_5a5a, ensemble.params_digest);
    let b = replicates.max(2);
    let mut acc = 0.0;
    let mut acc2 = 0.0;
    for _ in 0..b {
        let mut s = 0.0;
        for _ in 0..w.len() {
            s += w[rng.gen_range(0..w.len())];
        }
        let m = s / n;
        acc += m;
        acc2 += m * m;
    }
    let bf = b as f64;
    let var = (acc2 / bf - (acc / bf) * (acc / bf)).max(0.0);
    Ok((mean, var.sqrt()))
}

fn self_weights(ensemble: &WeightedEnsemble) -> Result<Vec<f64>, StatsError> {
    let w: Vec<f64> = ensemble.log_weights.iter().map(|lw| lw.exp()).collect();
    if w.iter().all(|&x| x == 0.0) {
        return Err(StatsError::DegenerateWeights);
    }
    Ok(w)
}

/// Effective sample size (sum w)^2 / sum w^2, shift-invariant in the
/// log-weights.
pub fn ess(ensemble: &WeightedEnsemble) -> f64 {
    let w = ensemble.normalized_weights();
    let sum2: f64 = w.iter().map(|x| x * x).sum();
    1.0 / sum2
}

/// Result of a weighted two-sample Kolmogorov–Smirnov comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub ess_a: f64,
    pub ess_b: f64,
}

/// Configuration of the bootstrap calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsConfig {
    pub bootstrap_replicates: usize,
    pub ess_floor: f64,
    pub seed: u64,
}

impl Default for KsConfig {
    fn default() -> Self {
        KsConfig {
            bootstrap_replicates: 500,
            ess_floor: 100.0,
            seed: 0,
        }
    }
}

/// Sup-distance between the self-normalized weighted empirical distribution
/// functions of one observable, with a pooled-bootstrap p-value. Missing
/// values (NaN) sort above every number, so a differing missing rate counts
/// as distance. Replicate samples are drawn from the ESS-weighted pooled
/// distribution with the per-ensemble effective sample sizes, which makes the
/// null spread match the information actually carried by the weights.
pub fn weighted_ks(
    a: &WeightedEnsemble,
    b: &WeightedEnsemble,
    observable: usize,
    cfg: &KsConfig,
) -> Result<KsOutcome, StatsError> {
    if observable >= a.n_observables() || observable >= b.n_observables() {
        return Err(StatsError::Malformed(alloc::format!(
            "observable index {observable} out of range"
        )));
    }
    let ess_a = ess(a);
    let ess_b = ess(b);
    let floor = cfg.ess_floor;
    if ess_a < floor || ess_b < floor {
        return Err(StatsError::InsufficientEss {
            ess: ess_a.min(ess_b),
            floor,
        });
    }

    let col = |e: &WeightedEnsemble| -> Vec<(f64, f64)> {
        let w = e.normalized_weights();
        let mut v: Vec<(f64, f64)> = e
            .observables
            .iter()
            .zip(w)
            .map(|(row, wi)| {
                let x = row[observable];
                (if x.is_nan() { f64::INFINITY } else { x }, wi)
            })
            .collect();
        v.sort_by(|p, q| p.0.total_cmp(&q.0));
        v
    };
    let xa = col(a);
    let xb = col(b);
    let statistic = weighted_ks_statistic(&xa, &xb);

    // pooled distribution, each side contributing in proportion to its
    // effective sample size
    let total_ess = ess_a + ess_b;
    let mut pooled: Vec<(f64, f64)> = Vec::with_capacity(xa.len() + xb.len());
    pooled.extend(xa.iter().map(|&(x, w)| (x, w * ess_a / total_ess)));
    pooled.extend(xb.iter().map(|&(x, w)| (x, w * ess_b / total_ess)));
    pooled.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut cdf = Vec::with_capacity(pooled.len());
    let mut acc = 0.0;
    for &(_, w) in &pooled {
        acc += w;
        cdf.push(acc);
    }
    let norm = acc;

    let m_a = (ess_a.round() as usize).max(2);
    let m_b = (ess_b.round() as usize).max(2);
    let mut rng = trajectory_rng(cfg.seed, a.params_digest ^ b.params_digest.rotate_left(17) ^ observable as u64);
    let mut exceed = 0usize;
    let breps = cfg.bootstrap_replicates.max(1);
    let mut sample_a = Vec::with_capacity(m_a);
    let mut sample_b = Vec::with_capacity(m_b);
    for _ in 0..breps {
        draw_sorted_from_cdf(&pooled, &cdf, norm, m_a, &mut rng, &mut sample_a);
        draw_sorted_from_cdf(&pooled, &cdf, norm, m_b, &mut rng, &mut sample_b);
        if unweighted_ks_sorted(&sample_a, &sample_b) >= statistic - 1e-15 {
            exceed += 1;
        }
    }
    let p_value = (1 + exceed) as f64 / (breps + 1) as f64;

    Ok(KsOutcome {
        statistic,
        p_value,
        ess_a,
        ess_b,
    })
}

/// Sup-distance of weighted ECDFs; inputs are sorted (value, weight) pairs
/// with weights summing to one.
fn weighted_ks_statistic(xa: &[(f64, f64)], xb: &[(f64, f64)]) -> f64 {
    let mut ia = 0;
    let mut ib = 0;
    let mut fa = 0.0;
    let mut fb = 0.0;
    let mut stat = 0.0_f64;
    while ia < xa.len() || ib < xb.len() {
        let cur = match (xa.get(ia), xb.get(ib)) {
            (Some(&(va, _)), Some(&(vb, _))) => va.min(vb),
            (Some(&(va, _)), None) => va,
            (None, Some(&(vb, _))) => vb,
            (None, None) => break,
        };
        while ia < xa.len() && xa[ia].0 <= cur {
            fa += xa[ia].1;
            ia += 1;
        }
        while ib < xb.len() && xb[ib].0 <= cur {
            fb += xb[ib].1;
            ib += 1;
        }
        stat = stat.max((fa - fb).abs());
    }
    stat.min(1.0)
}

/// Draw `m` values from the pooled weighted empirical distribution using
/// sorted uniforms (exponential spacings), so the output arrives sorted.
fn draw_sorted_from_cdf<R: Rng>(
    pooled: &[(f64, f64)],
    cdf: &[f64],
    norm: f64,
    m: usize,
    rng: &mut R,
    out: &mut Vec<f64>,
) {
    out.clear();
    // m+1 exponential spacings give m sorted uniforms
    let mut gaps = 0.0;
    let mut partial: Vec<f64> = Vec::with_capacity(m);
    for _ in 0..m {
        gaps -= rng.gen::<f64>().max(1e-300).ln();
        partial.push(gaps);
    }
    gaps -= rng.gen::<f64>().max(1e-300).ln();
    let mut idx = 0usize;
    for s in partial {
        let target = s / gaps * norm;
        while idx < cdf.len() - 1 && cdf[idx] < target {
            idx += 1;
        }
        out.push(pooled[idx].0);
    }
}

/// Two-sample KS distance of pre-sorted unweighted samples.
fn unweighted_ks_sorted(a: &[f64], b: &[f64]) -> f64 {
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let mut ia = 0;
    let mut ib = 0;
    let mut stat = 0.0_f64;
    while ia < a.len() || ib < b.len() {
        let cur = match (a.get(ia), b.get(ib)) {
            (Some(&va), Some(&vb)) => va.min(vb),
            (Some(&va), None) => va,
            (None, Some(&vb)) => vb,
            (None, None) => break,
        };
        while ia < a.len() && a[ia] <= cur {
            ia += 1;
        }
        while ib < b.len() && b[ib] <= cur {
            ib += 1;
        }
        stat = stat.max((ia as f64 / na - ib as f64 / nb).abs());
    }
    stat
}

/// Holm step-down correction: returns the adjusted p-values in the input
/// order. A family-level test rejects where the adjusted p is below the
/// level.
pub fn holm_adjust(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]));
    let mut adjusted = alloc::vec![0.0; m];
    let mut running = 0.0_f64;
    for (rank, &i) in order.iter().enumerate() {
        let scaled = ((m - rank) as f64 * p_values[i]).min(1.0);
        running = running.max(scaled);
        adjusted[i] = running;
    }
    adjusted
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn ens(values: Vec<f64>, log_weights: Vec<f64>, seed: u64) -> WeightedEnsemble {
        let rows = values.into_iter().map(|v| vec![v]).collect();
        WeightedEnsemble::new(rows, log_weights, seed, seed ^ 0xabc).unwrap()
    }

    #[test]
    fn ess_examples() {
        let e = ens(vec![0.0; 100], vec![0.0; 100], 1);
        assert!((ess(&e) - 100.0).abs() < 1e-9);

        let w = vec![1.0f64, 1.0, 2.0];
        let e = ens(vec![0.0; 3], w.iter().map(|x| x.ln()).collect(), 2);
        assert!((ess(&e) - 16.0 / 6.0).abs() < 1e-12);

        let mut lw = vec![0.0; 50];
        lw[0] = 30.0; // one dominant weight
        let e = ens(vec![0.0; 50], lw, 3);
        assert!((ess(&e) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn z_estimates() {
        let e = ens(vec![0.0; 10], vec![0.0; 10], 4);
        let (z, se) = estimate_z(&e, 500).unwrap();
        assert_eq!(z, 1.0);
        assert_eq!(se, 0.0);

        let e = ens(vec![0.0, 0.0], vec![1.0f64.ln(), 3.0f64.ln()], 5);
        let (z, _) = estimate_z(&e, 100).unwrap();
        assert!((z - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rn_log_weight_examples() {
        use crate::geometry::{ComponentRecord, SigmaAnchor};
        use crate::params::SleParams;
        let record = |side, index, factor| ComponentRecord {
            side,
            index,
            x: 1.0,
            sigma: SigmaAnchor::Origin,
            xi_infinite: true,
            factor,
            truncation_error: 0.0,
        };
        let base = SleParams {
            kappa: 2.0,
            left_weights: vec![0.0],
            left_points: vec![],
            right_weights: vec![0.0, 1.0],
            right_points: vec![1.0],
        };
        // all alphas zero → 0 without records
        let tilted = TiltedParams {
            base: base.clone(),
            left_alphas: vec![],
            right_alphas: vec![0.0],
        };
        assert_eq!(rn_log_weight(&[], &tilted).unwrap(), 0.0);

        // single factor 2 with alpha 1/2
        let tilted = TiltedParams {
            base,
            left_alphas: vec![],
            right_alphas: vec![0.5],
        };
        let lw = rn_log_weight(&[record(Side::Right, 1, 2.0)], &tilted).unwrap();
        assert!((lw - 0.5 * 2.0f64.ln()).abs() < 1e-15);
        // missing record for a nonzero alpha is an error
        assert!(matches!(
            rn_log_weight(&[], &tilted),
            Err(StatsError::MissingRecord { .. })
        ));
    }

    #[test]
    fn ks_statistic_edge_cases() {
        let cfg = KsConfig {
            bootstrap_replicates: 50,
            ess_floor: 2.0,
            seed: 9,
        };
        let vals: Vec<f64> = (0..200).map(|k| k as f64 / 200.0).collect();
        let a = ens(vals.clone(), vec![0.0; 200], 11);
        let out = weighted_ks(&a, &a, 0, &cfg).unwrap();
        assert_eq!(out.statistic, 0.0);

        // disjoint supports → statistic 1
        let b = ens(vals.iter().map(|v| v + 10.0).collect(), vec![0.0; 200], 12);
        let out = weighted_ks(&a, &b, 0, &cfg).unwrap();
        assert_eq!(out.statistic, 1.0);
        assert!(out.p_value < 0.05);
    }

    #[test]
    fn ks_statistic_is_symmetric_and_bounded() {
        let mut rng = crate::sampler::trajectory_rng(77, 0);
        let a = ens((0..300).map(|_| rng.gen::<f64>()).collect(), vec![0.0; 300], 13);
        let b = ens(
            (0..200).map(|_| rng.gen::<f64>() * 1.3).collect(),
            (0..200).map(|_| rng.gen::<f64>() * 0.2).collect(),
            14,
        );
        let cfg = KsConfig {
            bootstrap_replicates: 10,
            ess_floor: 2.0,
            seed: 1,
        };
        let ab = weighted_ks(&a, &b, 0, &cfg).unwrap();
        let ba = weighted_ks(&b, &a, 0, &cfg).unwrap();
        assert_eq!(ab.statistic, ba.statistic);
        assert!((0.0..=1.0).contains(&ab.statistic));
    }

    #[test]
    fn log_weight_shift_invariance() {
        let mut rng = crate::sampler::trajectory_rng(5, 5);
        let vals: Vec<f64> = (0..400).map(|_| rng.gen::<f64>()).collect();
        let lws: Vec<f64> = (0..400).map(|_| rng.gen::<f64>()).collect();
        let a = ens(vals.clone(), lws.clone(), 21);
        let shifted = ens(vals.clone(), lws.iter().map(|l| l + 123.25).collect(), 21);
        let reference = ens((0..400).map(|_| rng.gen::<f64>()).collect(), vec![0.0; 400], 22);
        let cfg = KsConfig::default();
        let out1 = weighted_ks(&a, &reference, 0, &cfg).unwrap();
        let out2 = weighted_ks(&shifted, &reference, 0, &cfg).unwrap();
        // the shift cancels inside exp(lw - max) up to one rounding step
        assert!((out1.statistic - out2.statistic).abs() <= 1e-12);
        assert!((out1.p_value - out2.p_value).abs() <= 2.0 / 501.0);
        assert!((ess(&a) - ess(&shifted)).abs() < 1e-9);
    }

    #[test]
    fn ess_floor_aborts_with_a_diagnostic() {
        let mut lw = vec![0.0; 50];
        lw[0] = 40.0;
        let a = ens(vec![0.0; 50], lw, 31);
        let b = ens(vec![0.0; 50], vec![0.0; 50], 32);
        let cfg = KsConfig::default();
        assert!(matches!(
            weighted_ks(&a, &b, 0, &cfg),
            Err(StatsError::InsufficientEss { .. })
        ));
    }

    /// Gaussian variates from the trajectory stream.
    fn normals(seed: u64, n: usize, sigma: f64) -> Vec<f64> {
        let mut rng = crate::sampler::trajectory_rng(seed, 0);
        (0..n)
            .map(|_| {
                // Box-Muller
                let u: f64 = rng.gen::<f64>().max(1e-12);
                let v: f64 = rng.gen();
                sigma
                    * (-2.0 * u.ln()).sqrt()
                    * (2.0 * core::f64::consts::PI * v).cos()
            })
            .collect()
    }

    #[test]
    fn calibration_under_the_null_is_not_anticonservative() {
        // two independent unit-weight ensembles from the same law: over 20
        // repetitions the fraction of p < 0.05 stays at or below 0.2
        let cfg = KsConfig {
            bootstrap_replicates: 300,
            ess_floor: 50.0,
            seed: 1234,
        };
        let mut rejections = 0;
        for rep in 0..20 {
            let a = ens(normals(1000 + rep, 500, 1.0), vec![0.0; 500], rep);
            let b = ens(normals(2000 + rep, 500, 1.0), vec![0.0; 500], 100 + rep);
            let out = weighted_ks(&a, &b, 0, &cfg).unwrap();
            if out.p_value < 0.05 {
                rejections += 1;
            }
        }
        assert!(rejections <= 4, "{rejections} rejections out of 20");
    }

    #[test]
    fn weighted_calibration_and_power() {
        // Ensemble B samples N(0, 1.2^2) but carries importance log-weights
        // toward N(0,1); the weighted comparison against a unit-weight
        // N(0,1) ensemble should pass, and dropping the weights should fail.
        let cfg = KsConfig {
            bootstrap_replicates: 400,
            ess_floor: 50.0,
            seed: 77,
        };
        let sigma = 1.2f64;
        let n = 1500;
        let mut pass = 0;
        let mut power = 0;
        for rep in 0..5 {
            let xa = normals(311 + rep, n, 1.0);
            let xb = normals(711 + rep, n, sigma);
            let lw: Vec<f64> = xb
                .iter()
                .map(|x| {
                    // log phi(x) - log phi_sigma(x)
                    -x * x / 2.0 + x * x / (2.0 * sigma * sigma) + sigma.ln()
                })
                .collect();
            let a = ens(xa, vec![0.0; n], 41 + rep);
            let b = ens(xb.clone(), lw, 51 + rep);
            let out = weighted_ks(&a, &b, 0, &cfg).unwrap();
            if out.p_value >= 0.05 {
                pass += 1;
            }
            let b_unweighted = ens(xb, vec![0.0; n], 61 + rep);
            let out = weighted_ks(&a, &b_unweighted, 0, &cfg).unwrap();
            if out.p_value < 0.05 {
                power += 1;
            }
        }
        assert!(pass >= 4, "weighted null passed only {pass} of 5");
        assert!(power >= 4, "unweighted alternative detected only {power} of 5");
    }

    #[test]
    fn holm_adjustment() {
        let p = vec![0.01, 0.04, 0.03, 0.005];
        let adj = holm_adjust(&p);
        // sorted: 0.005*4, 0.01*3, 0.03*2, 0.04*1 with running max
        assert!((adj[3] - 0.02).abs() < 1e-12);
        assert!((adj[0] - 0.03).abs() < 1e-12);
        assert!((adj[2] - 0.06).abs() < 1e-12);
        assert!((adj[1] - 0.06).abs() < 1e-12);
        // monotone in the input
        let single = holm_adjust(&[0.2]);
        assert_eq!(single, vec![0.2]);
    }
}
