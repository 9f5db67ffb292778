//! Caching-probability optimizers: offloading gain and energy via KKT
//! water-filling, weighted delay via block coordinate descent.

pub mod delay;
pub mod energy;
pub mod offload;

pub use delay::{
    optimal_bandwidth, optimize_delay_bcd, service_coefficients, weighted_delay, BandwidthSplit, BcdOptions,
    BcdStep, BcdTrace, DelayProblem,
};
pub use energy::{
    average_energy, energy_conditional, energy_hessian_diagonal, equal_split_rates, optimize_energy,
    optimize_energy_with_costs, EnergyCosts,
};
pub use offload::{objective_offloading, offloading_marginal, optimize_offloading};

use crate::model::{neumaier_sum, CachingPolicy};

/// Result of a water-filling solve of `max Σ f_i(b_i)` (or `min`) subject to
/// `Σ b_i = M`, `0 ≤ b_i ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    pub policy: CachingPolicy,
    /// Multiplier of the equality constraint.
    pub multiplier: f64,
    pub objective: f64,
    /// Bisection steps on the multiplier.
    pub iterations: usize,
    /// Largest violation of stationarity / complementary slackness, relative
    /// to the multiplier bracket.
    pub kkt_residual: f64,
    /// The problem collapsed to a linear one and the solution is a ranking.
    pub degenerate: bool,
}

pub(crate) struct WaterFill {
    pub b: Vec<f64>,
    pub multiplier: f64,
    pub iterations: usize,
}

/// Bisects the multiplier `v` so that `Σ b_i(v) = m`, where `b_of(i, v)` is
/// non-increasing in `v`, equals one for `v < 0` and zero for `v >= upper`.
///
/// The last step interpolates between the two bracketing allocations, which
/// also splits mass correctly among files whose marginal value is flat.
pub(crate) fn water_fill<F>(n: usize, m: usize, upper: f64, b_of: F) -> WaterFill
where
    F: Fn(usize, f64) -> f64,
{
    let alloc = |v: f64| -> Vec<f64> { (0..n).map(|i| b_of(i, v)).collect() };
    let target = m as f64;
    let mut lo = -f64::MIN_POSITIVE - 1e-12 * upper;
    let mut hi = upper;
    let mut b_lo = alloc(lo);
    let mut b_hi = alloc(hi);
    let mut s_lo = neumaier_sum(b_lo.iter().copied());
    let mut s_hi = neumaier_sum(b_hi.iter().copied());
    let mut iterations = 0;
    while iterations < 400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let b_mid = alloc(mid);
        let s_mid = neumaier_sum(b_mid.iter().copied());
        if s_mid > target {
            lo = mid;
            b_lo = b_mid;
            s_lo = s_mid;
        } else if s_mid < target {
            hi = mid;
            b_hi = b_mid;
            s_hi = s_mid;
        } else {
            return WaterFill {
                b: b_mid,
                multiplier: mid,
                iterations,
            };
        }
    }
    let t = if s_lo > s_hi { (s_lo - target) / (s_lo - s_hi) } else { 0.0 };
    let b = b_lo
        .iter()
        .zip(&b_hi)
        .map(|(l, h)| (l + t * (h - l)).clamp(0.0, 1.0))
        .collect();
    WaterFill {
        b,
        multiplier: lo + t * (hi - lo),
        iterations,
    }
}

/// KKT residual for marginal values `h(i, b)` that are non-increasing in `b`.
pub(crate) fn kkt_residual<H>(b: &[f64], v: f64, scale: f64, h: H) -> f64
where
    H: Fn(usize, f64) -> f64,
{
    let worst = b
        .iter()
        .enumerate()
        .map(|(i, &bi)| {
            if bi <= 0.0 {
                (h(i, 0.0) - v).max(0.0)
            } else if bi >= 1.0 {
                (v - h(i, 1.0)).max(0.0)
            } else {
                (h(i, bi) - v).abs()
            }
        })
        .fold(0.0, f64::max);
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}
