//! Flat key=value run configuration.
//!
//! One config file drives a run; command-line `-s key=value` flags override
//! file keys. Lists are comma-separated. Degenerate force points are
//! implicit: `rho_left` has one more entry than `x_left`, the first being
//! the weight at 0^-; mirrored on the right.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use sle_core::sampler::SamplerConfig;
use sle_core::SleParams;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kappa: f64,
    pub rho_left: Vec<f64>,
    pub rho_right: Vec<f64>,
    pub x_left: Vec<f64>,
    pub x_right: Vec<f64>,

    pub total_capacity: f64,
    pub dt_max: f64,
    /// Degenerate-start offset; the default scales with the nearest force
    /// point.
    pub epsilon0: Option<f64>,
    pub delta_sing: f64,
    pub seed: u64,
    pub n_samples: usize,

    /// Curve-trace output points per sample.
    pub trace_points: usize,
    /// Tracing runs on a chain coarsened to `trace_coarsen * dt_max`
    /// capacity per super-step; weights always use the full chain.
    pub trace_coarsen: f64,
    pub bootstrap_replicates: usize,
    pub ess_floor: f64,
    /// Weight-truncation proxy target: flag the report when the median
    /// final-doubling change exceeds this.
    pub truncation_target: f64,
    pub out_dir: PathBuf,
    /// Number of paths dumped to CSV by the `sample`/`trace` commands.
    pub dump_paths: usize,

    /// Optional power parameters for the standalone `weights` command; when
    /// empty only factors are reported.
    pub alpha_left: Vec<f64>,
    pub alpha_right: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kappa: 2.0,
            rho_left: vec![0.0],
            rho_right: vec![0.0],
            x_left: vec![],
            x_right: vec![],
            total_capacity: 25.0,
            dt_max: 1e-3,
            epsilon0: None,
            delta_sing: 1e-9,
            seed: 1,
            n_samples: 2000,
            trace_points: 256,
            trace_coarsen: 4.0,
            bootstrap_replicates: 500,
            ess_floor: 100.0,
            truncation_target: 1e-3,
            out_dir: PathBuf::from("out"),
            dump_paths: 1,
            alpha_left: vec![],
            alpha_right: vec![],
        }
    }
}

fn parse_list(value: &str) -> Result<Vec<f64>> {
    let trimmed = value.trim();
    if trimmed.is_empty() {
        return Ok(vec![]);
    }
    trimmed
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .with_context(|| format!("bad number {part:?}"))
        })
        .collect()
}

impl RunConfig {
    /// Parse a config file body: `key = value` lines, `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key=value", lineno + 1))?;
            cfg.set(key.trim(), value.trim())
                .with_context(|| format!("line {}", lineno + 1))?;
        }
        Ok(cfg)
    }

    /// Apply one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "kappa" => self.kappa = value.parse()?,
            "rho_left" => self.rho_left = parse_list(value)?,
            "rho_right" => self.rho_right = parse_list(value)?,
            "x_left" => self.x_left = parse_list(value)?,
            "x_right" => self.x_right = parse_list(value)?,
            "T" => self.total_capacity = value.parse()?,
            "dt_max" => self.dt_max = value.parse()?,
            "epsilon0" => self.epsilon0 = Some(value.parse()?),
            "delta_sing" => self.delta_sing = value.parse()?,
            "seed" => self.seed = value.parse()?,
            "n_samples" => self.n_samples = value.parse()?,
            "trace_points" => self.trace_points = value.parse()?,
            "trace_coarsen" => self.trace_coarsen = value.parse()?,
            "bootstrap_replicates" => self.bootstrap_replicates = value.parse()?,
            "ess_floor" => self.ess_floor = value.parse()?,
            "truncation_target" => self.truncation_target = value.parse()?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "dump_paths" => self.dump_paths = value.parse()?,
            "alpha_left" => self.alpha_left = parse_list(value)?,
            "alpha_right" => self.alpha_right = parse_list(value)?,
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    pub fn params(&self) -> SleParams {
        SleParams {
            kappa: self.kappa,
            left_weights: self.rho_left.clone(),
            left_points: self.x_left.clone(),
            right_weights: self.rho_right.clone(),
            right_points: self.x_right.clone(),
        }
    }

    pub fn epsilon0_for(&self, p: &SleParams) -> f64 {
        self.epsilon0
            .unwrap_or_else(|| SamplerConfig::default_epsilon0(p))
    }

    pub fn sampler_config(&self, p: &SleParams, seed: u64) -> SamplerConfig {
        SamplerConfig {
            total_capacity: self.total_capacity,
            dt_max: self.dt_max,
            epsilon0: self.epsilon0_for(p),
            delta_sing: self.delta_sing,
            seed,
        }
    }

    /// Canonical text form of the effective configuration: sorted keys, one
    /// per line. The digest hashes this.
    pub fn canonical_string(&self) -> String {
        let list = |xs: &[f64]| {
            xs.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut pairs: BTreeMap<&str, String> = BTreeMap::new();
        pairs.insert("kappa", format!("{}", self.kappa));
        pairs.insert("rho_left", list(&self.rho_left));
        pairs.insert("rho_right", list(&self.rho_right));
        pairs.insert("x_left", list(&self.x_left));
        pairs.insert("x_right", list(&self.x_right));
        pairs.insert("T", format!("{}", self.total_capacity));
        pairs.insert("dt_max", format!("{}", self.dt_max));
        pairs.insert(
            "epsilon0",
            match self.epsilon0 {
                Some(e) => format!("{e}"),
                None => String::from("auto"),
            },
        );
        pairs.insert("delta_sing", format!("{}", self.delta_sing));
        pairs.insert("seed", format!("{}", self.seed));
        pairs.insert("n_samples", format!("{}", self.n_samples));
        pairs.insert("trace_points", format!("{}", self.trace_points));
        pairs.insert("trace_coarsen", format!("{}", self.trace_coarsen));
        pairs.insert(
            "bootstrap_replicates",
            format!("{}", self.bootstrap_replicates),
        );
        pairs.insert("ess_floor", format!("{}", self.ess_floor));
        pairs.insert("truncation_target", format!("{}", self.truncation_target));
        pairs.insert("alpha_left", list(&self.alpha_left));
        pairs.insert("alpha_right", list(&self.alpha_right));
        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// FNV-1a digest of the canonical configuration.
    pub fn digest(&self) -> u64 {
        fnv1a(self.canonical_string().as_bytes())
    }

    pub fn digest_hex(&self) -> String {
        format!("{:016x}", self.digest())
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lists_and_overrides() {
        let text = "\
# a run
kappa = 2.0
rho_right = 0, 1
x_right = 1
T = 5
seed = 7
";
        let mut cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.rho_right, vec![0.0, 1.0]);
        assert_eq!(cfg.x_right, vec![1.0]);
        cfg.set("seed", "9").unwrap();
        assert_eq!(cfg.seed, 9);
        assert!(cfg.set("bogus", "1").is_err());
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::parse("kappa=2\nseed=1").unwrap();
        let b = RunConfig::parse("kappa=2\nseed=2").unwrap();
        assert_ne!(a.digest(), b.digest());
        let c = RunConfig::parse("seed=1\nkappa=2").unwrap();
        assert_eq!(a.digest(), c.digest());
        // out_dir does not affect the digest
        let mut d = a.clone();
        d.out_dir = PathBuf::from("elsewhere");
        assert_eq!(a.digest(), d.digest());
    }
}
