//! Arrival-rate split, service rates and M/M/1 delays of the two request queues.

use crate::error::{Error, Queue, Result};
use crate::model::{neumaier_sum, CachingPolicy, ContentLibrary};

/// Load above which a queue is reported unstable.
pub const MAX_UTILISATION: f64 = 1.0 - 1e-9;

/// Arrival rates, req/s, of requests served over D2D (`zeta_1`), by the BS
/// (`zeta_2`) and from the requester's own cache (`zeta_3`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalRates {
    pub zeta_1: f64,
    pub zeta_2: f64,
    pub zeta_3: f64,
}

/// `Σ q_i ((1−b_i) − (1−b_i)^k)` and `Σ q_i (1−b_i)^k`: the fractions of
/// requests that go to the D2D and BS queues in a cluster of `k` devices.
pub(crate) fn load_fractions(b: &[f64], q: &[f64], k: usize) -> (f64, f64) {
    let d2d = neumaier_sum(b.iter().zip(q).map(|(&bi, &qi)| {
        let x = 1.0 - bi;
        qi * (x - x.powi(k as i32))
    }));
    let bs = neumaier_sum(b.iter().zip(q).map(|(&bi, &qi)| qi * (1.0 - bi).powi(k as i32)));
    (d2d, bs)
}

pub fn arrival_rates(policy: &CachingPolicy, lib: &ContentLibrary, k: usize, zeta_tot: f64) -> Result<ArrivalRates> {
    policy.check_against(lib)?;
    if k == 0 {
        return Err(Error::InvalidArgument("arrival rates need k >= 1".into()));
    }
    if !(zeta_tot.is_finite() && zeta_tot >= 0.0) {
        return Err(Error::InvalidArgument(format!("zeta_tot must be >= 0, got {zeta_tot}")));
    }
    let (d2d, bs) = load_fractions(policy.probabilities(), lib.popularity(), k);
    let zeta_1 = zeta_tot * d2d;
    let zeta_2 = zeta_tot * bs;
    Ok(ArrivalRates {
        zeta_1,
        zeta_2,
        zeta_3: (zeta_tot - zeta_1 - zeta_2).max(0.0),
    })
}

/// Service rate `P_c W log2(1+θ) / S̄`, req/s, for files of mean size `s_bar_mbit`.
pub fn service_rate(w: f64, theta: f64, coverage: f64, s_bar_mbit: f64) -> Result<f64> {
    if !(s_bar_mbit.is_finite() && s_bar_mbit > 0.0) {
        return Err(Error::InvalidArgument(format!("mean file size must be > 0, got {s_bar_mbit}")));
    }
    if !(w.is_finite() && w >= 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth must be >= 0, got {w}")));
    }
    if !(theta > 0.0 && (0.0..=1.0).contains(&coverage)) {
        return Err(Error::InvalidArgument("service rate needs theta > 0 and coverage in [0, 1]".into()));
    }
    Ok(coverage * w * (1.0 + theta).log2() / (s_bar_mbit * 1e6))
}

/// Mean number of requests in a queue, by the printed Pollaczek–Khinchine
/// expression `ρ + 2ρ² / (2ζ(1−ρ))` and by the M/M/1 result `ρ / (1−ρ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueLength {
    pub pollaczek_khinchine: f64,
    pub mm1: f64,
    /// The two expressions agree to 1e-9 relative.
    pub consistent: bool,
}

pub fn mean_queue_length(zeta: f64, mu: f64) -> Result<QueueLength> {
    check_rates(zeta, mu, Queue::D2d)?;
    let rho = zeta / mu;
    if rho == 0.0 {
        return Ok(QueueLength {
            pollaczek_khinchine: 0.0,
            mm1: 0.0,
            consistent: true,
        });
    }
    let pk = rho + 2.0 * rho * rho / (2.0 * zeta * (1.0 - rho));
    let mm1 = rho / (1.0 - rho);
    let consistent = (pk - mm1).abs() <= 1e-9 * mm1.abs().max(1.0);
    if !consistent {
        log::warn!("queue length formulas disagree at rho = {rho}: P-K form {pk}, M/M/1 {mm1}");
    }
    Ok(QueueLength {
        pollaczek_khinchine: pk,
        mm1,
        consistent,
    })
}

fn check_rates(zeta: f64, mu: f64, queue: Queue) -> Result<()> {
    if !(zeta.is_finite() && zeta >= 0.0 && mu.is_finite() && mu >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rates must be finite and >= 0, got arrival {zeta}, service {mu}"
        )));
    }
    if mu == 0.0 || zeta / mu > MAX_UTILISATION {
        return Err(Error::UnstableQueue {
            queue,
            arrival: zeta,
            service: mu,
        });
    }
    Ok(())
}

/// Mean sojourn time `1 / (μ − ζ)` of an M/M/1 queue.
pub fn per_queue_delay(zeta: f64, mu: f64) -> Result<f64> {
    queue_delay(zeta, mu, Queue::D2d)
}

pub(crate) fn queue_delay(zeta: f64, mu: f64, queue: Queue) -> Result<f64> {
    check_rates(zeta, mu, queue)?;
    Ok(1.0 / (mu - zeta))
}

/// Request-weighted delay `(ζ_1 D_1 + ζ_2 D_2) / ζ_tot`. A queue with no
/// arrivals contributes nothing regardless of its service rate.
pub fn combine_delays(zeta_tot: f64, zeta_1: f64, mu_1: f64, zeta_2: f64, mu_2: f64) -> Result<f64> {
    if zeta_tot == 0.0 {
        return Ok(0.0);
    }
    let part = |zeta: f64, mu: f64, queue: Queue| -> Result<f64> {
        if zeta == 0.0 {
            Ok(0.0)
        } else {
            Ok(zeta * queue_delay(zeta, mu, queue)?)
        }
    };
    Ok((part(zeta_1, mu_1, Queue::D2d)? + part(zeta_2, mu_2, Queue::Bs)?) / zeta_tot)
}

/// Full state of the two-queue model at a given policy and bandwidth split.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayModel {
    pub zeta_tot: f64,
    pub zeta_1: f64,
    pub zeta_2: f64,
    pub zeta_3: f64,
    pub mu_1: f64,
    pub mu_2: f64,
    pub rho_1: f64,
    pub rho_2: f64,
    pub w1: f64,
    pub w2: f64,
    pub stable_1: bool,
    pub stable_2: bool,
    /// Per-queue delays, `None` when the queue is unstable.
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    /// Weighted delay, `None` unless both queues with traffic are stable.
    pub d_weighted: Option<f64>,
}

impl DelayModel {
    /// `o1`, `o2` are the per-hertz service rates of the D2D and BS queues.
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate(
        policy: &CachingPolicy,
        lib: &ContentLibrary,
        k: usize,
        zeta_tot: f64,
        w1: f64,
        w_total: f64,
        o1: f64,
        o2: f64,
    ) -> Result<Self> {
        if !(w1 >= 0.0 && w1 <= w_total) {
            return Err(Error::InvalidArgument(format!("w1 = {w1} must lie in [0, {w_total}]")));
        }
        let rates = arrival_rates(policy, lib, k, zeta_tot)?;
        let w2 = w_total - w1;
        let mu_1 = o1 * w1;
        let mu_2 = o2 * w2;
        let rho = |z: f64, m: f64| if z == 0.0 { 0.0 } else { z / m };
        let rho_1 = rho(rates.zeta_1, mu_1);
        let rho_2 = rho(rates.zeta_2, mu_2);
        let stable_1 = rho_1 <= MAX_UTILISATION;
        let stable_2 = rho_2 <= MAX_UTILISATION;
        let d1 = queue_delay(rates.zeta_1, mu_1, Queue::D2d).ok();
        let d2 = queue_delay(rates.zeta_2, mu_2, Queue::Bs).ok();
        let d_weighted = combine_delays(zeta_tot, rates.zeta_1, mu_1, rates.zeta_2, mu_2).ok();
        Ok(Self {
            zeta_tot,
            zeta_1: rates.zeta_1,
            zeta_2: rates.zeta_2,
            zeta_3: rates.zeta_3,
            mu_1,
            mu_2,
            rho_1,
            rho_2,
            w1,
            w2,
            stable_1,
            stable_2,
            d1,
            d2,
            d_weighted,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_file() -> ContentLibrary {
        ContentLibrary::from_parts(vec![0.5, 0.5], vec![5.0, 5.0], 1).unwrap()
    }

    #[test]
    fn arrival_split_by_hand() {
        // q = [0.5, 0.5], b = [0.5, 0.5], k = 2: each file gives
        // (0.5 − 0.25) to D2D and 0.25 to the BS.
        let lib = single_file();
        let policy = CachingPolicy::new(vec![0.5, 0.5], 1).unwrap();
        let r = arrival_rates(&policy, &lib, 2, 2.0).unwrap();
        assert!((r.zeta_1 - 0.5).abs() < 1e-15);
        assert!((r.zeta_2 - 0.5).abs() < 1e-15);
        assert!((r.zeta_3 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn arrival_extremes() {
        let lib = ContentLibrary::from_parts(vec![1.0, 0.0], vec![5.0, 5.0], 1).unwrap();
        let all_self = CachingPolicy::new(vec![1.0, 0.0], 1).unwrap();
        let r = arrival_rates(&all_self, &lib, 3, 2.0).unwrap();
        assert_eq!((r.zeta_1, r.zeta_2, r.zeta_3), (0.0, 0.0, 2.0));
        let (d2d, bs) = load_fractions(&[0.0, 0.0], &[0.5, 0.5], 4);
        assert_eq!((d2d, bs), (0.0, 1.0));
    }

    #[test]
    fn service_rate_examples() {
        assert!((service_rate(10e6, 1.0, 0.5, 5.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(service_rate(10e6, 1.0, 0.0, 5.0).unwrap(), 0.0);
        let a = service_rate(3e6, 1.0, 0.7, 5.0).unwrap();
        let b = service_rate(6e6, 1.0, 0.7, 5.0).unwrap();
        assert_eq!(2.0 * a, b);
    }

    #[test]
    fn queue_length_formulas() {
        let l = mean_queue_length(1.0, 2.0).unwrap();
        assert!((l.pollaczek_khinchine - 1.0).abs() < 1e-15 && (l.mm1 - 1.0).abs() < 1e-15);
        assert!(l.consistent);
        let l = mean_queue_length(0.9, 1.0).unwrap();
        assert!((l.mm1 - 9.0).abs() < 1e-12);
        assert!((l.pollaczek_khinchine - 9.9).abs() < 1e-12);
        assert!(!l.consistent);
        assert_eq!(mean_queue_length(0.0, 1.0).unwrap().mm1, 0.0);
    }

    #[test]
    fn delays() {
        assert_eq!(per_queue_delay(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(per_queue_delay(1.0, 2.0).unwrap(), 1.0);
        assert!(matches!(per_queue_delay(1.0, 1.0), Err(Error::UnstableQueue { .. })));
        assert!(per_queue_delay(1.0 - 1e-12, 1.0).is_err());
    }

    #[test]
    fn combined_delay_examples() {
        assert_eq!(combine_delays(2.0, 1.0, 2.0, 1.0, 2.0).unwrap(), 1.0);
        assert_eq!(combine_delays(2.0, 0.0, 0.0, 0.0, 0.0).unwrap(), 0.0);
        let only_bs = combine_delays(2.0, 0.0, 0.0, 1.0, 3.0).unwrap();
        assert_eq!(only_bs, 1.0 * 0.5 / 2.0);
        assert!(matches!(
            combine_delays(2.0, 0.5, 1.0, 1.5, 1.0),
            Err(Error::UnstableQueue { queue: Queue::Bs, .. })
        ));
    }

    #[test]
    fn delay_model_fields() {
        let lib = single_file();
        let policy = CachingPolicy::new(vec![0.5, 0.5], 1).unwrap();
        let m = DelayModel::evaluate(&policy, &lib, 2, 2.0, 1.0, 3.0, 1.0, 1.0).unwrap();
        assert_eq!(m.w2, 2.0);
        assert!((m.zeta_1 + m.zeta_2 + m.zeta_3 - m.zeta_tot).abs() < 1e-12);
        assert!((m.rho_1 - 0.5).abs() < 1e-15 && (m.rho_2 - 0.25).abs() < 1e-15);
        assert!(m.stable_1 && m.stable_2);
        let expected = (0.5 * 2.0 + 0.5 * (1.0 / 1.5)) / 2.0;
        assert!((m.d_weighted.unwrap() - expected).abs() < 1e-15);
        let unstable = DelayModel::evaluate(&policy, &lib, 2, 2.0, 0.25, 3.0, 1.0, 1.0).unwrap();
        assert!(!unstable.stable_1 && unstable.d1.is_none() && unstable.d_weighted.is_none());
    }
}
