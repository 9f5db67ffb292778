//! Monte Carlo simulation of the clustered network.
//!
//! The typical receiver sits at the origin. Its own cluster centre is at
//! `x0 = −y` with `y ~ N(0, σ² I)`; the serving device and the other members
//! of that cluster are placed around `x0`. Other clusters form a PPP of
//! density `λ_p` restricted to a disk around the origin. All links see unit
//! mean Rayleigh fading, and thermal noise is ignored.
//!
//! Trials are split into fixed-size chunks; chunk `c` draws from the ChaCha8
//! stream `c` of the master seed, so estimates do not depend on the number
//! of worker threads.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp1, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::NetworkConfig;
use crate::stochgeo::{check_rate_feasible, LaplaceArg};

const CHUNK: usize = 4096;

/// Sample mean with its 95% normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub half_width_95: f64,
    pub samples: usize,
    pub seed: u64,
}

impl McEstimate {
    fn from_moments(sum: f64, sum_sq: f64, samples: usize, seed: u64) -> Self {
        let n = samples as f64;
        let mean = sum / n;
        let var = if samples > 1 {
            ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self {
            mean,
            half_width_95: 1.96 * (var / n).sqrt(),
            samples,
            seed,
        }
    }
}

/// Trial count, seed and simulation disk radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub trials: usize,
    pub seed: u64,
    /// Defaults to `max(15σ, 5 / √(π λ_p))`.
    pub region_radius: Option<f64>,
}

impl McOptions {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            region_radius: None,
        }
    }

    pub fn with_region_radius(mut self, radius: f64) -> Self {
        self.region_radius = Some(radius);
        self
    }

    fn radius(&self, cfg: &NetworkConfig) -> f64 {
        self.region_radius.unwrap_or_else(|| default_region_radius(cfg))
    }

    fn check(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("Monte Carlo needs at least one trial".into()));
        }
        if let Some(r) = self.region_radius {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidArgument(format!("region radius must be > 0, got {r}")));
            }
        }
        Ok(())
    }
}

pub fn default_region_radius(cfg: &NetworkConfig) -> f64 {
    let by_density = if cfg.lambda_p > 0.0 {
        5.0 / (PI * cfg.lambda_p).sqrt()
    } else {
        0.0
    };
    (15.0 * cfg.sigma).max(by_density)
}

/// Runs `trials` independent draws of an `N`-vector and estimates each mean.
fn run_trials<const N: usize, F>(trials: usize, seed: u64, f: F) -> [McEstimate; N]
where
    F: Fn(&mut ChaCha8Rng) -> [f64; N] + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    let partial: Vec<([f64; N], [f64; N])> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(trials - c * CHUNK);
            let mut sum = [0.0; N];
            let mut sum_sq = [0.0; N];
            for _ in 0..count {
                let x = f(&mut rng);
                for j in 0..N {
                    sum[j] += x[j];
                    sum_sq[j] += x[j] * x[j];
                }
            }
            (sum, sum_sq)
        })
        .collect();
    let mut sum = [0.0; N];
    let mut sum_sq = [0.0; N];
    for (s, sq) in &partial {
        for j in 0..N {
            sum[j] += s[j];
            sum_sq[j] += sq[j];
        }
    }
    std::array::from_fn(|j| McEstimate::from_moments(sum[j], sum_sq[j], trials, seed))
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> [f64; 2] {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    [sigma * x, sigma * y]
}

fn uniform_in_disk(rng: &mut ChaCha8Rng, radius: f64) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    [r * phi.cos(), r * phi.sin()]
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("finite positive Poisson mean");
    d.sample(rng) as u64
}

fn fading(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(Exp1)
}

fn norm(p: [f64; 2]) -> f64 {
    p[0].hypot(p[1])
}

/// Parent points in a disk and the Gaussian offsets of their members.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRealization {
    pub centers: Vec<[f64; 2]>,
    /// Offsets of each cluster's members from its centre.
    pub members: Vec<Vec<[f64; 2]>>,
}

/// One realisation of the Thomas cluster process in a disk of `region_radius`.
pub fn sample_tcp(cfg: &NetworkConfig, region_radius: f64, seed: u64) -> Result<ClusterRealization> {
    cfg.validate()?;
    if !(region_radius.is_finite() && region_radius >= 0.0) {
        return Err(Error::InvalidArgument(format!("region radius must be >= 0, got {region_radius}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = poisson(&mut rng, cfg.lambda_p * PI * region_radius * region_radius);
    let mut centers = Vec::with_capacity(count as usize);
    let mut members = Vec::with_capacity(count as usize);
    for _ in 0..count {
        centers.push(uniform_in_disk(&mut rng, region_radius));
        let n = poisson(&mut rng, cfg.n_bar);
        members.push((0..n).map(|_| gaussian(&mut rng, cfg.sigma)).collect());
    }
    Ok(ClusterRealization { centers, members })
}

/// Interference at the origin from clusters of a PPP inside `radius`, each
/// with `Poisson(active_mean)` transmitters. Also returns the part due to
/// clusters inside `inner` (for truncation checks).
fn remote_interference(
    rng: &mut ChaCha8Rng,
    cfg: &NetworkConfig,
    radius: f64,
    inner: f64,
    active_mean: f64,
) -> (f64, f64) {
    let clusters = poisson(rng, cfg.lambda_p * PI * radius * radius);
    let mut total = 0.0;
    let mut within = 0.0;
    for _ in 0..clusters {
        let c = uniform_in_disk(rng, radius);
        let active = poisson(rng, active_mean);
        let mut part = 0.0;
        for _ in 0..active {
            let o = gaussian(rng, cfg.sigma);
            let d = norm([c[0] + o[0], c[1] + o[1]]);
            part += fading(rng) * d.powf(-cfg.alpha);
        }
        total += part;
        if norm(c) <= inner {
            within += part;
        }
    }
    (total, within)
}

/// Received power, relative to `P_d`, from `count` transmitters around `center`.
fn cluster_interference(rng: &mut ChaCha8Rng, cfg: &NetworkConfig, center: [f64; 2], count: u64) -> f64 {
    let mut sum = 0.0;
    for _ in 0..count {
        let o = gaussian(rng, cfg.sigma);
        let d = norm([center[0] + o[0], center[1] + o[1]]);
        sum += fading(rng) * d.powf(-cfg.alpha);
    }
    sum
}

/// Draws the representative cluster centre and the serving link.
/// Returns `(centre, signal)` with the signal relative to `P_d`.
fn serving_link(rng: &mut ChaCha8Rng, cfg: &NetworkConfig) -> ([f64; 2], f64) {
    let y = gaussian(rng, cfg.sigma);
    let center = [-y[0], -y[1]];
    let o = gaussian(rng, cfg.sigma);
    let r = norm([center[0] + o[0], center[1] + o[1]]);
    (center, fading(rng) * r.powf(-cfg.alpha))
}

fn covered(signal: f64, interference: f64, theta: f64) -> f64 {
    if signal > theta * interference {
        1.0
    } else {
        0.0
    }
}

/// Fraction of slots in which the typical D2D link has SIR above θ under
/// slotted ALOHA, i.e. `P(R_1 > R_0)`.
pub fn mc_prob_rate_exceeds(cfg: &NetworkConfig, r0_over_w1: f64, w1: f64, opts: &McOptions) -> Result<McEstimate> {
    cfg.validate()?;
    opts.check()?;
    if !(w1.is_finite() && w1 > 0.0) {
        return Err(Error::InvalidArgument(format!("w1 must be > 0, got {w1}")));
    }
    check_rate_feasible(cfg, r0_over_w1)?;
    let radius = opts.radius(cfg);
    let active = cfg.access_p * cfg.n_bar;
    let [est] = run_trials(opts.trials, opts.seed, |rng| {
        let (center, signal) = serving_link(rng, cfg);
        let intra_count = poisson(rng, active);
        let intra = cluster_interference(rng, cfg, center, intra_count);
        let (inter, _) = remote_interference(rng, cfg, radius, radius, active);
        [covered(signal, intra + inter, cfg.theta)]
    });
    Ok(est)
}

/// Same quantity as [`mc_prob_rate_exceeds`] estimated on one set of draws in
/// a disk of radius `2R` and in its sub-disk of radius `R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationCheck {
    pub radius: f64,
    pub at_radius: McEstimate,
    pub at_double_radius: McEstimate,
    /// Paired difference `(R) − (2R)`.
    pub difference: McEstimate,
}

pub fn mc_truncation_check(cfg: &NetworkConfig, r0_over_w1: f64, opts: &McOptions) -> Result<TruncationCheck> {
    cfg.validate()?;
    opts.check()?;
    check_rate_feasible(cfg, r0_over_w1)?;
    let radius = opts.radius(cfg);
    let active = cfg.access_p * cfg.n_bar;
    let [near, far, diff] = run_trials(opts.trials, opts.seed, |rng| {
        let (center, signal) = serving_link(rng, cfg);
        let intra_count = poisson(rng, active);
        let intra = cluster_interference(rng, cfg, center, intra_count);
        let (total, within) = remote_interference(rng, cfg, 2.0 * radius, radius, active);
        let a = covered(signal, intra + within, cfg.theta);
        let b = covered(signal, intra + total, cfg.theta);
        [a, b, a - b]
    });
    Ok(TruncationCheck {
        radius,
        at_radius: near,
        at_double_radius: far,
        difference: diff,
    })
}

/// Conditional-`k` coverage estimated under two intra-cluster models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalCoverageMc {
    /// Each of the `k − 1` cluster devices other than the server transmits
    /// with probability `p`.
    pub exact: McEstimate,
    /// `Poisson(p k)` transmitters around the cluster centre.
    pub poisson_approx: McEstimate,
}

pub fn mc_coverage_conditional(cfg: &NetworkConfig, k: usize, opts: &McOptions) -> Result<ConditionalCoverageMc> {
    cfg.validate()?;
    opts.check()?;
    if k == 0 {
        return Err(Error::InvalidArgument("conditional coverage needs k >= 1".into()));
    }
    let radius = opts.radius(cfg);
    let active = cfg.access_p * cfg.n_bar;
    let binomial = Binomial::new((k - 1) as u64, cfg.access_p)
        .map_err(|e| Error::InvalidArgument(format!("binomial thinning: {e}")))?;
    let [exact, approx] = run_trials(opts.trials, opts.seed, |rng| {
        let (center, signal) = serving_link(rng, cfg);
        let (inter, _) = remote_interference(rng, cfg, radius, radius, active);
        let n_exact = binomial.sample(rng);
        let exact_intra = cluster_interference(rng, cfg, center, n_exact);
        let n_approx = poisson(rng, cfg.access_p * k as f64);
        let approx_intra = cluster_interference(rng, cfg, center, n_approx);
        [
            covered(signal, exact_intra + inter, cfg.theta),
            covered(signal, approx_intra + inter, cfg.theta),
        ]
    });
    Ok(ConditionalCoverageMc {
        exact,
        poisson_approx: approx,
    })
}

/// Coverage when exactly one device per remote cluster transmits and the
/// representative cluster carries only the served link.
pub fn mc_coverage_single_link(cfg: &NetworkConfig, opts: &McOptions) -> Result<McEstimate> {
    cfg.validate()?;
    opts.check()?;
    let radius = opts.radius(cfg);
    let [est] = run_trials(opts.trials, opts.seed, |rng| {
        let (_, signal) = serving_link(rng, cfg);
        let clusters = poisson(rng, cfg.lambda_p * PI * radius * radius);
        let mut inter = 0.0;
        for _ in 0..clusters {
            let c = uniform_in_disk(rng, radius);
            inter += cluster_interference(rng, cfg, c, 1);
        }
        [covered(signal, inter, cfg.theta)]
    });
    Ok(est)
}

/// `E[exp(−s I)]` for the interference from all other clusters.
pub fn mc_laplace_inter(s: LaplaceArg, cfg: &NetworkConfig, opts: &McOptions) -> Result<McEstimate> {
    cfg.validate()?;
    opts.check()?;
    let radius = opts.radius(cfg);
    let a = s.value() * cfg.p_d;
    let active = cfg.access_p * cfg.n_bar;
    let [est] = run_trials(opts.trials, opts.seed, |rng| {
        let (inter, _) = remote_interference(rng, cfg, radius, radius, active);
        [(-a * inter).exp()]
    });
    Ok(est)
}

/// Geometry of the intra-cluster interferers in [`mc_laplace_intra`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntraGeometry {
    /// Interferer distances drawn independently from the Rayleigh law of the
    /// serving distance.
    IndependentDistances,
    /// Interferers placed around one shared cluster centre, as in the network.
    SharedCenter,
}

/// `E[exp(−s I)]` for intra-cluster interference from `Poisson(intensity)`
/// active devices.
pub fn mc_laplace_intra(
    s: LaplaceArg,
    cfg: &NetworkConfig,
    intensity: f64,
    geometry: IntraGeometry,
    opts: &McOptions,
) -> Result<McEstimate> {
    cfg.validate()?;
    opts.check()?;
    if !(intensity.is_finite() && intensity >= 0.0) {
        return Err(Error::InvalidArgument(format!("intensity must be >= 0, got {intensity}")));
    }
    let a = s.value() * cfg.p_d;
    let [est] = run_trials(opts.trials, opts.seed, |rng| {
        let count = poisson(rng, intensity);
        let inter = match geometry {
            IntraGeometry::SharedCenter => {
                let y = gaussian(rng, cfg.sigma);
                cluster_interference(rng, cfg, [-y[0], -y[1]], count)
            }
            IntraGeometry::IndependentDistances => {
                let mut sum = 0.0;
                for _ in 0..count {
                    let h = norm(gaussian(rng, std::f64::consts::SQRT_2 * cfg.sigma));
                    sum += fading(rng) * h.powf(-cfg.alpha);
                }
                sum
            }
        };
        [(-a * inter).exp()]
    });
    Ok(est)
}
