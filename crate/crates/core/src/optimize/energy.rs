//! Energy minimisation for a cluster of `k` devices.

use super::{kkt_residual, water_fill, KktSolution};
use crate::error::{Error, Result};
use crate::model::{neumaier_sum, CachingPolicy, ContentLibrary, NetworkConfig};
use crate::stochgeo::{average_rate, bs_coverage, d2d_coverage_conditional};

/// Energy per transferred bit over D2D (`P_d / R_1`) and from the BS
/// (`P_b / R_2`), joules per bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyCosts {
    pub d2d: f64,
    pub bs: f64,
}

impl EnergyCosts {
    pub fn from_rates(cfg: &NetworkConfig, r1: f64, r2: f64) -> Result<Self> {
        if !(r1 > 0.0 && r2 > 0.0 && r1.is_finite() && r2.is_finite()) {
            return Err(Error::InvalidArgument(format!("rates must be positive, got R1 = {r1}, R2 = {r2}")));
        }
        Ok(Self {
            d2d: cfg.p_d / r1,
            bs: cfg.p_b / r2,
        })
    }

    fn gap(&self) -> f64 {
        self.bs - self.d2d
    }
}

/// Average D2D and BS rates when the band is split in half, with the D2D
/// coverage conditioned on `k` devices in the cluster.
pub fn equal_split_rates(cfg: &NetworkConfig, k: usize) -> Result<(f64, f64)> {
    let half = 0.5 * cfg.w_total;
    let r1 = average_rate(half, cfg.theta, &d2d_coverage_conditional(cfg, k)?)?;
    let r2 = average_rate(half, cfg.theta, &bs_coverage(cfg.theta, cfg.alpha)?)?;
    Ok((r1, r2))
}

/// `E(b | k) = k Σ q_i S_i [ (1−b_i)(1−(1−b_i)^{k−1}) P_d/R_1 + (1−b_i)^k P_b/R_2 ]`.
pub fn energy_conditional(b: &[f64], lib: &ContentLibrary, k: usize, costs: &EnergyCosts) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let per_file = b.iter().enumerate().map(|(i, &bi)| {
        let x = 1.0 - bi;
        let xk1 = x.powi(k as i32 - 1);
        lib.popularity()[i] * lib.size_bits(i) * (x * (1.0 - xk1) * costs.d2d + x * xk1 * costs.bs)
    });
    k as f64 * neumaier_sum(per_file)
}

/// Cluster-size average `Σ_k E(b|k) P(n = k)` with `n ~ Poisson(n̄)`.
pub fn average_energy(b: &[f64], lib: &ContentLibrary, n_bar: f64, costs: &EnergyCosts) -> f64 {
    if n_bar <= 0.0 {
        return 0.0;
    }
    let mut pmf = (-n_bar).exp();
    let mut mass = pmf;
    let mut total = 0.0;
    let mut k = 0usize;
    while 1.0 - mass > 1e-10 || (k as f64) < n_bar {
        k += 1;
        pmf *= n_bar / k as f64;
        mass += pmf;
        total += pmf * energy_conditional(b, lib, k, costs);
        if k > 10_000 {
            break;
        }
    }
    total
}

/// Diagonal of the Hessian of `E(b | k)`, `k²(k−1) q_i S_i (P_b/R_2 − P_d/R_1)(1−b_i)^{k−2}`.
/// Off-diagonal entries are zero.
pub fn energy_hessian_diagonal(b: &[f64], lib: &ContentLibrary, k: usize, costs: &EnergyCosts) -> Vec<f64> {
    let kf = k as f64;
    b.iter()
        .enumerate()
        .map(|(i, &bi)| {
            if k < 2 {
                return 0.0;
            }
            kf * kf * (kf - 1.0) * lib.popularity()[i] * lib.size_bits(i) * costs.gap() * (1.0 - bi).powi(k as i32 - 2)
        })
        .collect()
}

/// Minimises `E(b | k)` with rates `r1`, `r2`.
pub fn optimize_energy(cfg: &NetworkConfig, lib: &ContentLibrary, k: usize, r1: f64, r2: f64) -> Result<KktSolution> {
    optimize_energy_with_costs(lib, k, &EnergyCosts::from_rates(cfg, r1, r2)?)
}

pub fn optimize_energy_with_costs(lib: &ContentLibrary, k: usize, costs: &EnergyCosts) -> Result<KktSolution> {
    if k == 0 {
        return Err(Error::InvalidArgument("energy optimisation needs k >= 1".into()));
    }
    if !(costs.gap() > 0.0) {
        return Err(Error::ConvexityViolated {
            d2d_cost: costs.d2d,
            bs_cost: costs.bs,
        });
    }
    let m = lib.cache_size();
    let n = lib.n_files();
    let weight: Vec<f64> = (0..n).map(|i| lib.popularity()[i] * lib.size_bits(i)).collect();
    if k == 1 {
        return Ok(top_m_by_weight(lib, &weight, costs));
    }

    let kf = k as f64;
    let d2d = costs.d2d;
    let gap = costs.gap();
    // Marginal saving of caching more of file i: −∂E/∂b_i.
    let marginal = |i: usize, b: f64| kf * weight[i] * (d2d + kf * gap * (1.0 - b).powi(k as i32 - 1));
    let upper = (0..n).map(|i| marginal(i, 0.0)).fold(0.0, f64::max);
    let b_of = |i: usize, v: f64| {
        let w = weight[i];
        if v >= kf * w * (d2d + kf * gap) {
            0.0
        } else if v <= kf * w * d2d {
            1.0
        } else {
            let ratio = (v - kf * w * d2d) / (kf * kf * w * gap);
            (1.0 - ratio.powf(1.0 / (kf - 1.0))).clamp(0.0, 1.0)
        }
    };
    let fill = water_fill(n, m, upper, b_of);
    let residual = kkt_residual(&fill.b, fill.multiplier, upper, marginal);
    let objective = energy_conditional(&fill.b, lib, k, costs);
    Ok(KktSolution {
        policy: CachingPolicy::new(fill.b, m)?,
        multiplier: fill.multiplier,
        objective,
        iterations: fill.iterations,
        kkt_residual: residual,
        degenerate: false,
    })
}

/// With a single device no D2D exchange exists and the objective is linear:
/// cache the `M` files with the largest `q_i S_i`.
fn top_m_by_weight(lib: &ContentLibrary, weight: &[f64], costs: &EnergyCosts) -> KktSolution {
    let m = lib.cache_size();
    let mut order: Vec<usize> = (0..weight.len()).collect();
    order.sort_by(|&i, &j| weight[j].total_cmp(&weight[i]).then(i.cmp(&j)));
    let mut b = vec![0.0; weight.len()];
    for &i in &order[..m] {
        b[i] = 1.0;
    }
    let objective = energy_conditional(&b, lib, 1, costs);
    KktSolution {
        policy: CachingPolicy::new(b, m).expect("top-M selection is feasible"),
        multiplier: weight[order[m - 1]] * costs.bs,
        objective,
        iterations: 0,
        kkt_residual: 0.0,
        degenerate: true,
    }
}
