//! Network parameters, content library, caching policies and the
//! memory-filling placement sampler.

use crate::error::{Error, Result};

/// Physical-layer and geometry parameters of the clustered network.
///
/// All quantities are SI: densities per square metre, distances in metres,
/// powers in watts, bandwidth in hertz. `theta` is a linear SIR threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    /// Parent (cluster-centre) density, clusters per m².
    pub lambda_p: f64,
    /// Mean number of devices per cluster.
    pub n_bar: f64,
    /// Standard deviation of the Gaussian member displacement, metres.
    pub sigma: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Linear SIR threshold.
    pub theta: f64,
    /// D2D transmit power, watts.
    pub p_d: f64,
    /// BS transmit power, watts.
    pub p_b: f64,
    /// Total system bandwidth, Hz.
    pub w_total: f64,
    /// Slotted-ALOHA access probability.
    pub access_p: f64,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

impl NetworkConfig {
    /// Default operating point: 20 MHz, 43/23 dBm, σ = 10 m, α = 4,
    /// n̄ = 5, 20 clusters/km², θ = 0 dB, and the access probability set just
    /// above the threshold needed for R₀/W₁ = 0.1 bits/s/Hz.
    pub fn reference() -> Self {
        let theta = db_to_linear(0.0);
        Self {
            lambda_p: 20.0e-6,
            n_bar: 5.0,
            sigma: 10.0,
            alpha: 4.0,
            theta,
            p_d: dbm_to_watts(23.0),
            p_b: dbm_to_watts(43.0),
            w_total: 20.0e6,
            access_p: crate::stochgeo::access_probability_threshold(0.1, theta, 1e-6)
                .expect("default rate threshold is feasible"),
        }
    }

    pub fn lambda_p_per_km2(&self) -> f64 {
        self.lambda_p * 1e6
    }

    /// `log2(1 + θ)`, bits/s/Hz of a successful transmission.
    pub fn spectral_efficiency(&self) -> f64 {
        (1.0 + self.theta).log2()
    }

    /// `δ = 2 / α`.
    pub fn delta(&self) -> f64 {
        2.0 / self.alpha
    }

    pub fn validate(&self) -> Result<()> {
        let checks: [(bool, &str); 9] = [
            (self.lambda_p.is_finite() && self.lambda_p >= 0.0, "lambda_p must be >= 0"),
            (self.n_bar.is_finite() && self.n_bar >= 0.0, "n_bar must be >= 0"),
            (self.sigma.is_finite() && self.sigma > 0.0, "sigma must be > 0"),
            (self.alpha.is_finite() && self.alpha > 2.0, "alpha must exceed 2"),
            (self.theta.is_finite() && self.theta > 0.0, "theta must be > 0"),
            (self.p_d.is_finite() && self.p_d > 0.0, "p_d must be > 0"),
            (self.p_b.is_finite() && self.p_b > 0.0, "p_b must be > 0"),
            (self.w_total.is_finite() && self.w_total > 0.0, "w_total must be > 0"),
            ((0.0..=1.0).contains(&self.access_p), "access_p must lie in [0, 1]"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::InvalidArgument(format!("network config: {msg}"))),
            None => Ok(()),
        }
    }
}

/// Zipf request probabilities `q_i ∝ i^{-β}`, normalised to one.
pub fn zipf_popularity(n_files: usize, beta: f64) -> Result<Vec<f64>> {
    if n_files == 0 {
        return Err(Error::InvalidArgument("zipf_popularity: n_files must be >= 1".into()));
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "zipf_popularity: beta must be finite and >= 0, got {beta}"
        )));
    }
    let weights: Vec<f64> = (1..=n_files).map(|i| (i as f64).powf(-beta)).collect();
    let norm = neumaier_sum(weights.iter().copied());
    Ok(weights.into_iter().map(|w| w / norm).collect())
}

/// Compensated summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// The file catalogue shared by every device.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentLibrary {
    beta: Option<f64>,
    cache_size: usize,
    popularity: Vec<f64>,
    sizes_mbit: Vec<f64>,
}

impl ContentLibrary {
    /// Zipf-popularity library with every file of size `mean_size_mbit`.
    pub fn zipf(n_files: usize, beta: f64, cache_size: usize, mean_size_mbit: f64) -> Result<Self> {
        let popularity = zipf_popularity(n_files, beta)?;
        let mut lib = Self::from_parts(popularity, vec![mean_size_mbit; n_files], cache_size)?;
        lib.beta = Some(beta);
        Ok(lib)
    }

    /// 500 files, β = 1, M = 10, 5 Mbit each.
    pub fn reference() -> Self {
        Self::zipf(500, 1.0, 10, 5.0).expect("default library is valid")
    }

    /// Library with an explicit popularity vector and per-file sizes.
    pub fn from_parts(popularity: Vec<f64>, sizes_mbit: Vec<f64>, cache_size: usize) -> Result<Self> {
        let n = popularity.len();
        if n == 0 {
            return Err(Error::InvalidArgument("library must contain at least one file".into()));
        }
        if sizes_mbit.len() != n {
            return Err(Error::InvalidArgument(format!(
                "library has {n} popularities but {} sizes",
                sizes_mbit.len()
            )));
        }
        if cache_size == 0 || cache_size >= n {
            return Err(Error::InvalidArgument(format!(
                "cache size must satisfy 0 < M < N_f, got M = {cache_size}, N_f = {n}"
            )));
        }
        if popularity.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            return Err(Error::InvalidArgument("popularities must be finite and non-negative".into()));
        }
        let total = neumaier_sum(popularity.iter().copied());
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("popularities sum to {total}, expected 1")));
        }
        if sizes_mbit.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidArgument("file sizes must be positive".into()));
        }
        Ok(Self {
            beta: None,
            cache_size,
            popularity,
            sizes_mbit,
        })
    }

    pub fn with_sizes(mut self, sizes_mbit: Vec<f64>) -> Result<Self> {
        let beta = self.beta;
        self = Self::from_parts(self.popularity, sizes_mbit, self.cache_size)?;
        self.beta = beta;
        Ok(self)
    }

    pub fn n_files(&self) -> usize {
        self.popularity.len()
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn cache_size(&self) -> usize {
        self.cache_size
    }

    pub fn popularity(&self) -> &[f64] {
        &self.popularity
    }

    pub fn sizes_mbit(&self) -> &[f64] {
        &self.sizes_mbit
    }

    pub fn size_bits(&self, i: usize) -> f64 {
        self.sizes_mbit[i] * 1e6
    }

    pub fn mean_size_mbit(&self) -> f64 {
        neumaier_sum(self.sizes_mbit.iter().copied()) / self.n_files() as f64
    }

    pub fn mean_size_bits(&self) -> f64 {
        self.mean_size_mbit() * 1e6
    }
}

/// Per-file caching probabilities `b` with `0 ≤ b_i ≤ 1` and `Σ b_i = M`.
#[derive(Debug, Clone, PartialEq)]
pub struct CachingPolicy {
    b: Vec<f64>,
}

const POLICY_BOX_SLACK: f64 = 1e-12;
const POLICY_SUM_TOL: f64 = 1e-9;

impl CachingPolicy {
    pub fn new(b: Vec<f64>, cache_size: usize) -> Result<Self> {
        if let Some((i, v)) = b
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= -POLICY_BOX_SLACK && **v <= 1.0 + POLICY_BOX_SLACK))
        {
            return Err(Error::InvariantViolation(format!("b[{i}] = {v} is outside [0, 1]")));
        }
        let b: Vec<f64> = b.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let total = neumaier_sum(b.iter().copied());
        if (total - cache_size as f64).abs() > POLICY_SUM_TOL {
            return Err(Error::InvariantViolation(format!(
                "caching probabilities sum to {total}, expected {cache_size}"
            )));
        }
        Ok(Self { b })
    }

    /// `b_i = M / N_f` for every file.
    pub fn uniform(n_files: usize, cache_size: usize) -> Result<Self> {
        if n_files == 0 || cache_size > n_files {
            return Err(Error::InvalidArgument(format!(
                "uniform policy needs 0 < M <= N_f, got M = {cache_size}, N_f = {n_files}"
            )));
        }
        Self::new(vec![cache_size as f64 / n_files as f64; n_files], cache_size)
    }

    /// Policy proportional to the non-negative `weights`, clipped at one with
    /// the surplus redistributed over the unclipped files.
    pub fn proportional(weights: &[f64], cache_size: usize) -> Result<Self> {
        if weights.len() <= cache_size || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument(
                "proportional policy needs more files than cache slots and finite non-negative weights".into(),
            ));
        }
        Self::new(clip_proportional(weights, cache_size), cache_size)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.b
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn total(&self) -> f64 {
        neumaier_sum(self.b.iter().copied())
    }

    pub(crate) fn check_against(&self, lib: &ContentLibrary) -> Result<()> {
        if self.b.len() != lib.n_files() {
            return Err(Error::InvalidArgument(format!(
                "policy covers {} files, library has {}",
                self.b.len(),
                lib.n_files()
            )));
        }
        Ok(())
    }
}

/// The set of files stored by one device, zero-based and sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheRealization {
    pub cached: Vec<usize>,
}

/// Draws the content of one device cache.
///
/// The memory of `M` unit blocks is filled left to right by `b_1, …, b_N`
/// (a file may straddle two blocks). A single cut at offset `uniform_draw`
/// inside every block picks one file per block. Because `b_i ≤ 1`, no file
/// can be hit twice, and file `i` is hit with probability exactly `b_i`.
pub fn sample_cache_realization(policy: &CachingPolicy, uniform_draw: f64) -> Result<CacheRealization> {
    if !(0.0..1.0).contains(&uniform_draw) {
        return Err(Error::InvalidArgument(format!(
            "uniform draw must lie in [0, 1), got {uniform_draw}"
        )));
    }
    let b = policy.probabilities();
    let total = policy.total();
    let blocks = total.round() as usize;
    if blocks == 0 || (total - blocks as f64).abs() > POLICY_SUM_TOL {
        return Err(Error::InvariantViolation(format!(
            "policy total {total} is not a positive integer cache size"
        )));
    }
    // Rescale cut positions onto the realised filled length so rounding in Σb
    // can never push the last cut past the end of the memory.
    let scale = total / blocks as f64;
    let mut cached = Vec::with_capacity(blocks);
    let mut file = 0;
    let mut upper = b[0];
    for block in 0..blocks {
        let cut = (block as f64 + uniform_draw) * scale;
        while cut >= upper && file + 1 < b.len() {
            file += 1;
            upper += b[file];
        }
        cached.push(file);
    }
    cached.dedup();
    if cached.len() != blocks {
        return Err(Error::InvariantViolation(
            "placement produced a duplicate file; policy violates b_i <= 1".into(),
        ));
    }
    Ok(CacheRealization { cached })
}

/// Reference caching schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    /// `b_i ∝ q_i`, clipped at one with the surplus redistributed.
    ZipfProportional,
    /// Cache the `M` most popular files.
    Cpf,
}

pub fn baseline_policy(kind: BaselineKind, lib: &ContentLibrary) -> CachingPolicy {
    let m = lib.cache_size();
    let b = match kind {
        BaselineKind::Cpf => {
            let mut order: Vec<usize> = (0..lib.n_files()).collect();
            order.sort_by(|&i, &j| lib.popularity()[j].total_cmp(&lib.popularity()[i]).then(i.cmp(&j)));
            let mut b = vec![0.0; lib.n_files()];
            for &i in &order[..m] {
                b[i] = 1.0;
            }
            b
        }
        BaselineKind::ZipfProportional => clip_proportional(lib.popularity(), m),
    };
    CachingPolicy::new(b, m).expect("baseline policies are feasible by construction")
}

/// Scales non-negative `weights` to sum to `m`, clipping entries at one and
/// redistributing the clipped surplus proportionally until nothing exceeds one.
///
/// Zero-weight entries receive mass only if the positive ones cannot hold `m`.
pub(crate) fn clip_proportional(weights: &[f64], m: usize) -> Vec<f64> {
    let n = weights.len();
    let mut b = vec![0.0; n];
    let mut clipped = vec![false; n];
    let mut remaining = m as f64;
    loop {
        let free_weight = neumaier_sum((0..n).filter(|&i| !clipped[i]).map(|i| weights[i]));
        let free_count = clipped.iter().filter(|c| !**c).count();
        if free_count == 0 {
            break;
        }
        let mut newly_clipped = false;
        for i in 0..n {
            if clipped[i] {
                continue;
            }
            b[i] = if free_weight > 0.0 {
                remaining * weights[i] / free_weight
            } else {
                remaining / free_count as f64
            };
            if b[i] >= 1.0 {
                b[i] = 1.0;
                clipped[i] = true;
                newly_clipped = true;
            }
        }
        if !newly_clipped {
            break;
        }
        remaining = m as f64 - clipped.iter().filter(|c| **c).count() as f64;
        if remaining <= 0.0 {
            for i in 0..n {
                if !clipped[i] {
                    b[i] = 0.0;
                }
            }
            break;
        }
    }
    b
}
