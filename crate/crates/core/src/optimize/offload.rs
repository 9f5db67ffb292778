//! Offloading-gain maximisation.

use super::{kkt_residual, water_fill, KktSolution};
use crate::error::{Error, Result};
use crate::model::{neumaier_sum, CachingPolicy, ContentLibrary, NetworkConfig};

/// Probability that a request is served in the cluster:
/// `Σ q_i b_i + q_i (1−b_i)(1−e^{−n̄ b_i}) P(R_1>R_0)`.
pub fn objective_offloading(b: &[f64], lib: &ContentLibrary, n_bar: f64, prob_r1: f64) -> f64 {
    neumaier_sum(b.iter().zip(lib.popularity()).map(|(&bi, &qi)| {
        qi * bi + qi * (1.0 - bi) * -(-n_bar * bi).exp_m1() * prob_r1
    }))
}

/// Partial derivative of the offloading objective with respect to `b_i`.
pub fn offloading_marginal(q: f64, b: f64, n_bar: f64, prob_r1: f64) -> f64 {
    let e = (-n_bar * b).exp();
    q + q * (n_bar * (1.0 - b) * e - (1.0 - e)) * prob_r1
}

fn interior_root(q: f64, v: f64, n_bar: f64, prob_r1: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if offloading_marginal(q, mid, n_bar, prob_r1) > v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Maximises the offloading gain over caching policies.
pub fn optimize_offloading(cfg: &NetworkConfig, lib: &ContentLibrary, prob_r1: f64) -> Result<KktSolution> {
    if !(0.0..=1.0).contains(&prob_r1) {
        return Err(Error::InvalidArgument(format!("prob_r1 must lie in [0, 1], got {prob_r1}")));
    }
    if !(cfg.n_bar.is_finite() && cfg.n_bar >= 0.0) {
        return Err(Error::InvalidArgument(format!("n_bar must be >= 0, got {}", cfg.n_bar)));
    }
    let q = lib.popularity();
    let n_bar = cfg.n_bar;
    let m = lib.cache_size();
    let upper = q.iter().map(|&qi| qi * (1.0 + n_bar * prob_r1)).fold(0.0, f64::max);

    let b_of = |i: usize, v: f64| {
        let qi = q[i];
        if v >= qi * (1.0 + n_bar * prob_r1) {
            0.0
        } else if v <= offloading_marginal(qi, 1.0, n_bar, prob_r1) {
            1.0
        } else {
            interior_root(qi, v, n_bar, prob_r1)
        }
    };
    let fill = water_fill(q.len(), m, upper, b_of);
    let residual = kkt_residual(&fill.b, fill.multiplier, upper, |i, b| {
        offloading_marginal(q[i], b, n_bar, prob_r1)
    });
    let objective = objective_offloading(&fill.b, lib, n_bar, prob_r1);
    Ok(KktSolution {
        policy: CachingPolicy::new(fill.b, m)?,
        multiplier: fill.multiplier,
        objective,
        iterations: fill.iterations,
        kkt_residual: residual,
        degenerate: prob_r1 == 0.0,
    })
}
