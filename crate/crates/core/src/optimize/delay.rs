//! Joint bandwidth split and caching policy minimising the weighted delay.
//!
//! With `x_i = 1 − b_i`, `A = Σ q_i (x_i − x_i^k)` and `B = Σ q_i x_i^k`, the
//! weighted delay is `D = A / (O_1 W_1 − ζ A) + B / (O_2 W_2 − ζ B)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{baseline_policy, clip_proportional, BaselineKind, CachingPolicy, ContentLibrary, NetworkConfig};
use crate::queueing::{combine_delays, load_fractions};
use crate::stochgeo::{bs_coverage, d2d_coverage_single_link};

const STABILITY_MARGIN: f64 = 1.0 - 1e-6;
const BARRIER_ROUNDS: usize = 8;
const NEWTON_ITERS: usize = 100;
const ARMIJO_C: f64 = 1e-4;

/// Everything the delay objective depends on besides `(b, W_1)`.
#[derive(Debug, Clone, Copy)]
pub struct DelayProblem<'a> {
    pub lib: &'a ContentLibrary,
    /// Devices in the cluster.
    pub k: usize,
    /// Total request rate, req/s.
    pub zeta_tot: f64,
    /// D2D service rate per hertz, req/s/Hz.
    pub o1: f64,
    /// BS service rate per hertz, req/s/Hz.
    pub o2: f64,
    pub w_total: f64,
}

/// Per-hertz service rates `P_c log2(1+θ) / S̄` of the D2D queue (single active
/// link per cluster) and of the BS queue.
pub fn service_coefficients(cfg: &NetworkConfig, lib: &ContentLibrary) -> Result<(f64, f64)> {
    let se = cfg.spectral_efficiency();
    let bits = lib.mean_size_bits();
    let p_cd = d2d_coverage_single_link(cfg)?.value;
    let p_cb = bs_coverage(cfg.theta, cfg.alpha)?.value;
    Ok((p_cd * se / bits, p_cb * se / bits))
}

impl<'a> DelayProblem<'a> {
    pub fn new(cfg: &NetworkConfig, lib: &'a ContentLibrary, k: usize, zeta_tot: f64) -> Result<Self> {
        let (o1, o2) = service_coefficients(cfg, lib)?;
        Self::with_coefficients(lib, k, zeta_tot, o1, o2, cfg.w_total)
    }

    pub fn with_coefficients(
        lib: &'a ContentLibrary,
        k: usize,
        zeta_tot: f64,
        o1: f64,
        o2: f64,
        w_total: f64,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("delay model needs k >= 1".into()));
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(zeta_tot.is_finite() && zeta_tot >= 0.0 && positive(o1) && positive(o2) && positive(w_total)) {
            return Err(Error::InvalidArgument(
                "delay model needs zeta_tot >= 0 and positive o1, o2, w_total".into(),
            ));
        }
        Ok(Self {
            lib,
            k,
            zeta_tot,
            o1,
            o2,
            w_total,
        })
    }

    fn loads(&self, b: &[f64]) -> (f64, f64) {
        load_fractions(b, self.lib.popularity(), self.k)
    }

    /// Bandwidth each queue needs just to be stable.
    fn minimum_bandwidths(&self, b: &[f64]) -> (f64, f64) {
        let (a, bs) = self.loads(b);
        (self.zeta_tot * a / self.o1, self.zeta_tot * bs / self.o2)
    }

    fn has_stable_split(&self, b: &[f64]) -> bool {
        let (n1, n2) = self.minimum_bandwidths(b);
        n1 + n2 < self.w_total
    }

    fn delay_at(&self, b: &[f64], w1: f64) -> Result<f64> {
        let (a, bs) = self.loads(b);
        let z = self.zeta_tot;
        combine_delays(z, z * a, self.o1 * w1, z * bs, self.o2 * (self.w_total - w1))
    }
}

/// Weighted delay `(ζ_1 D_1 + ζ_2 D_2) / ζ_tot` in seconds.
pub fn weighted_delay(problem: &DelayProblem<'_>, policy: &CachingPolicy, w1: f64) -> Result<f64> {
    policy.check_against(problem.lib)?;
    if !(0.0..=problem.w_total).contains(&w1) {
        return Err(Error::InvalidArgument(format!(
            "w1 = {w1} must lie in [0, {}]",
            problem.w_total
        )));
    }
    problem.delay_at(policy.probabilities(), w1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthSplit {
    pub w1: f64,
    /// No request reaches either queue; `w1` is set to half the band.
    pub degenerate: bool,
}

/// Delay-optimal D2D bandwidth for a fixed policy:
/// `W_1* = (ζA + ϖ (O_2 W − ζB)) / (O_1 + ϖ O_2)`, `ϖ = √(O_1 A / (O_2 B))`.
pub fn optimal_bandwidth(problem: &DelayProblem<'_>, policy: &CachingPolicy) -> Result<BandwidthSplit> {
    policy.check_against(problem.lib)?;
    split_for(problem, policy.probabilities())
}

fn split_for(problem: &DelayProblem<'_>, b: &[f64]) -> Result<BandwidthSplit> {
    let (a, bs) = problem.loads(b);
    let (need_1, need_2) = problem.minimum_bandwidths(b);
    let w = problem.w_total;
    if a == 0.0 && bs == 0.0 {
        return Ok(BandwidthSplit {
            w1: 0.5 * w,
            degenerate: true,
        });
    }
    if need_1 + need_2 >= w {
        return Err(Error::NoStableSplit {
            required: need_1 + need_2,
            available: w,
        });
    }
    let (o1, o2, z) = (problem.o1, problem.o2, problem.zeta_tot);
    let w1 = if a == 0.0 {
        need_1
    } else if bs == 0.0 {
        w
    } else {
        let varpi = (o1 * a / (o2 * bs)).sqrt();
        (z * a + varpi * (o2 * w - z * bs)) / (o1 + varpi * o2)
    };
    Ok(BandwidthSplit {
        w1: w1.clamp(need_1, w - need_2),
        degenerate: false,
    })
}

#[derive(Debug, Clone)]
pub struct BcdOptions {
    /// Random initial policies.
    pub restarts: usize,
    /// Relative change of the delay below which an iteration counts as converged.
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Replaces the reference starts (CPF, Zipf, uniform) when given.
    pub initial: Option<CachingPolicy>,
}

impl Default for BcdOptions {
    fn default() -> Self {
        Self {
            restarts: 16,
            tol: 1e-8,
            max_iters: 200,
            seed: 0,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcdStep {
    pub w1: f64,
    pub policy: CachingPolicy,
    pub delay: f64,
}

/// Iterates of the best start. `steps[0]` is the initial policy with its
/// optimal split; every later entry is one full BCD iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct BcdTrace {
    pub steps: Vec<BcdStep>,
    pub converged: bool,
    pub restarts_used: usize,
}

impl BcdTrace {
    pub fn best(&self) -> &BcdStep {
        self.steps.last().expect("a trace always holds its initial step")
    }

    pub fn iterations(&self) -> usize {
        self.steps.len() - 1
    }
}

/// Block coordinate descent: alternate the closed-form split with a local
/// barrier solve over the policy, from several starts, keeping the best.
pub fn optimize_delay_bcd(problem: &DelayProblem<'_>, opts: &BcdOptions) -> Result<BcdTrace> {
    if !(opts.tol >= 0.0) || opts.max_iters == 0 {
        return Err(Error::InvalidArgument("BCD needs tol >= 0 and max_iters >= 1".into()));
    }
    let lib = problem.lib;
    let m = lib.cache_size();

    let mut references = Vec::new();
    for b in [
        baseline_policy(BaselineKind::ZipfProportional, lib),
        CachingPolicy::uniform(lib.n_files(), m)?,
        baseline_policy(BaselineKind::Cpf, lib),
    ] {
        if problem.has_stable_split(b.probabilities()) {
            references.push(b);
        }
    }
    let anchor = match &opts.initial {
        Some(b) => {
            b.check_against(lib)?;
            if !problem.has_stable_split(b.probabilities()) {
                return Err(Error::InfeasibleLoad);
            }
            b.clone()
        }
        None => references.first().cloned().ok_or(Error::InfeasibleLoad)?,
    };

    let mut starts: Vec<Vec<f64>> = match &opts.initial {
        Some(b) => vec![b.probabilities().to_vec()],
        None => references.iter().map(|b| b.probabilities().to_vec()).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random_count = if opts.initial.is_some() {
        opts.restarts.saturating_sub(1)
    } else {
        opts.restarts
    };
    for _ in 0..random_count {
        let weights: Vec<f64> = (0..lib.n_files()).map(|_| rng.random::<f64>()).collect();
        starts.push(feasible_toward(problem, clip_proportional(&weights, m), anchor.probabilities()));
    }

    let runs: Vec<Result<BcdTrace>> = starts.par_iter().map(|b0| run_from(problem, b0, opts)).collect();
    let restarts_used = runs.len();
    let mut best: Option<BcdTrace> = None;
    let mut first_error = None;
    for run in runs {
        match run {
            Ok(trace) => {
                if best.as_ref().is_none_or(|b| trace.best().delay < b.best().delay) {
                    best = Some(trace);
                }
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    match best {
        Some(mut trace) => {
            trace.restarts_used = restarts_used;
            Ok(trace)
        }
        None => Err(first_error.unwrap_or(Error::InfeasibleLoad)),
    }
}

/// Moves `b` toward the stable `anchor` until a stable split exists.
fn feasible_toward(problem: &DelayProblem<'_>, b: Vec<f64>, anchor: &[f64]) -> Vec<f64> {
    let mut lambda = 0.0;
    loop {
        let mixed: Vec<f64> = b.iter().zip(anchor).map(|(x, y)| (1.0 - lambda) * x + lambda * y).collect();
        if problem.has_stable_split(&mixed) || lambda >= 1.0 {
            return mixed;
        }
        lambda = if lambda == 0.0 { 0.5 } else { 0.5 * (1.0 + lambda) };
        if lambda > 1.0 - 1e-6 {
            lambda = 1.0;
        }
    }
}

fn run_from(problem: &DelayProblem<'_>, b0: &[f64], opts: &BcdOptions) -> Result<BcdTrace> {
    let m = problem.lib.cache_size();
    let mut b = b0.to_vec();
    let mut w1 = split_for(problem, &b)?.w1;
    let mut delay = problem.delay_at(&b, w1)?;
    let mut steps = vec![BcdStep {
        w1,
        policy: CachingPolicy::new(b.clone(), m)?,
        delay,
    }];
    let mut converged = false;
    for _ in 0..opts.max_iters {
        if let Some(candidate) = solve_policy_block(problem, &b, w1) {
            if let Ok(d) = problem.delay_at(&candidate, w1) {
                if d <= delay {
                    b = candidate;
                }
            }
        }
        let next_w1 = split_for(problem, &b)?.w1;
        let next_delay = problem.delay_at(&b, next_w1)?.min(delay);
        let change = delay - next_delay;
        w1 = next_w1;
        delay = next_delay;
        steps.push(BcdStep {
            w1,
            policy: CachingPolicy::new(b.clone(), m)?,
            delay,
        });
        if change <= opts.tol * delay {
            converged = true;
            break;
        }
    }
    Ok(BcdTrace {
        steps,
        converged,
        restarts_used: 1,
    })
}

/// State of the log-barrier problem at one point.
struct BarrierPoint {
    value: f64,
    grad: Vec<f64>,
    diag: Vec<f64>,
    /// Rank-one Hessian terms `c u uᵀ`.
    rank_one: [(f64, Vec<f64>); 2],
}

struct PolicyBlock<'p, 'a> {
    problem: &'p DelayProblem<'a>,
    cap1: f64,
    cap2: f64,
    c1: f64,
    c2: f64,
}

impl PolicyBlock<'_, '_> {
    /// Barrier objective `t D − Σ ln b_i(1−b_i) − ln(cap_1 − ζA) − ln(cap_2 − ζB)`,
    /// or `None` outside the strictly feasible region.
    fn value(&self, b: &[f64], t: f64) -> Option<f64> {
        if b.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return None;
        }
        let (a, bs) = self.problem.loads(b);
        let z = self.problem.zeta_tot;
        let s1 = self.cap1 - z * a;
        let s2 = self.cap2 - z * bs;
        if !(s1 > 0.0 && s2 > 0.0) {
            return None;
        }
        let d = a / (self.c1 - z * a) + bs / (self.c2 - z * bs);
        let box_term: f64 = b.iter().map(|&x| x.ln() + (1.0 - x).ln()).sum();
        Some(t * d - box_term - s1.ln() - s2.ln())
    }

    fn point(&self, b: &[f64], t: f64) -> Option<BarrierPoint> {
        let value = self.value(b, t)?;
        let (a, bs) = self.problem.loads(b);
        let z = self.problem.zeta_tot;
        let k = self.problem.k as i32;
        let kf = k as f64;
        let g1 = self.c1 - z * a;
        let g2 = self.c2 - z * bs;
        let s1 = self.cap1 - z * a;
        let s2 = self.cap2 - z * bs;
        let f1p = self.c1 / (g1 * g1);
        let f2p = self.c2 / (g2 * g2);
        let f1pp = 2.0 * z * self.c1 / (g1 * g1 * g1);
        let f2pp = 2.0 * z * self.c2 / (g2 * g2 * g2);

        let n = b.len();
        let mut grad = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut da = vec![0.0; n];
        let mut db = vec![0.0; n];
        for i in 0..n {
            let q = self.problem.lib.popularity()[i];
            let x = 1.0 - b[i];
            let xk2 = if k >= 2 { x.powi(k - 2) } else { 0.0 };
            let xk1 = x.powi(k - 1);
            da[i] = q * (kf * xk1 - 1.0);
            db[i] = -q * kf * xk1;
            let curv = q * kf * (kf - 1.0) * xk2;
            let (daa, dbb) = (-curv, curv);
            let box_grad = -1.0 / b[i] + 1.0 / x;
            let box_curv = 1.0 / (b[i] * b[i]) + 1.0 / (x * x);
            grad[i] = t * (f1p * da[i] + f2p * db[i]) + box_grad + z * da[i] / s1 + z * db[i] / s2;
            let d = t * (f1p * daa + f2p * dbb) + box_curv + z * daa / s1 + z * dbb / s2;
            diag[i] = if d > box_curv { d } else { box_curv };
        }
        let c_a = t * f1pp + z * z / (s1 * s1);
        let c_b = t * f2pp + z * z / (s2 * s2);
        Some(BarrierPoint {
            value,
            grad,
            diag,
            rank_one: [(c_a, da), (c_b, db)],
        })
    }
}

/// Applies `(D + Σ c_j u_j u_jᵀ)^{-1}` to `y` by the Woodbury identity.
fn solve_diag_plus_rank_two(p: &BarrierPoint, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let z: Vec<f64> = (0..n).map(|i| y[i] / p.diag[i]).collect();
    let v: Vec<Vec<f64>> = p
        .rank_one
        .iter()
        .map(|(c, u)| u.iter().map(|x| c.max(0.0).sqrt() * x).collect())
        .collect();
    // M = I + Vᵀ D⁻¹ V, r = Vᵀ z
    let mut mat = [[1.0, 0.0], [0.0, 1.0]];
    let mut r = [0.0; 2];
    for a in 0..2 {
        r[a] = (0..n).map(|i| v[a][i] * z[i]).sum();
        for c in 0..2 {
            mat[a][c] += (0..n).map(|i| v[a][i] * v[c][i] / p.diag[i]).sum::<f64>();
        }
    }
    let det = mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0];
    let s = [
        (mat[1][1] * r[0] - mat[0][1] * r[1]) / det,
        (mat[0][0] * r[1] - mat[1][0] * r[0]) / det,
    ];
    (0..n)
        .map(|i| z[i] - (v[0][i] * s[0] + v[1][i] * s[1]) / p.diag[i])
        .collect()
}

/// Local solve of the policy block at fixed `w1`: log-barrier on the box and
/// both stability constraints, equality-constrained Newton steps with
/// backtracking. Returns `None` if `b` is not strictly feasible.
fn solve_policy_block(problem: &DelayProblem<'_>, b: &[f64], w1: f64) -> Option<Vec<f64>> {
    let n = b.len();
    let m = problem.lib.cache_size() as f64;
    let c1 = problem.o1 * w1;
    let c2 = problem.o2 * (problem.w_total - w1);
    let block = PolicyBlock {
        problem,
        cap1: STABILITY_MARGIN * c1,
        cap2: STABILITY_MARGIN * c2,
        c1,
        c2,
    };
    // Pull the start strictly inside the box without leaving Σb = M.
    let uniform = m / n as f64;
    let mut x: Vec<f64> = b.iter().map(|&v| (1.0 - 1e-9) * v + 1e-9 * uniform).collect();
    block.value(&x, 1.0)?;

    let d0 = problem.delay_at(&x, w1).ok()?.max(f64::MIN_POSITIVE);
    let barrier_terms = (2 * n + 2) as f64;
    let mut t = 10.0 * barrier_terms / d0;
    let ones = vec![1.0; n];
    for _ in 0..BARRIER_ROUNDS {
        for _ in 0..NEWTON_ITERS {
            let p = block.point(&x, t)?;
            let hg = solve_diag_plus_rank_two(&p, &p.grad);
            let h1 = solve_diag_plus_rank_two(&p, &ones);
            let nu = hg.iter().sum::<f64>() / h1.iter().sum::<f64>();
            let step: Vec<f64> = (0..n).map(|i| -(hg[i] - nu * h1[i])).collect();
            let slope: f64 = p.grad.iter().zip(&step).map(|(g, s)| g * s).sum();
            if -slope / 2.0 <= 1e-10 {
                break;
            }
            let mut s_max = f64::INFINITY;
            for i in 0..n {
                if step[i] > 0.0 {
                    s_max = s_max.min((1.0 - x[i]) / step[i]);
                } else if step[i] < 0.0 {
                    s_max = s_max.min(-x[i] / step[i]);
                }
            }
            let mut s = (0.99 * s_max).min(1.0);
            let mut accepted = false;
            while s > 1e-16 {
                let trial: Vec<f64> = (0..n).map(|i| x[i] + s * step[i]).collect();
                if let Some(v) = block.value(&trial, t) {
                    if v <= p.value + ARMIJO_C * s * slope {
                        x = trial;
                        accepted = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        t *= 10.0;
    }
    Some(x)
}
