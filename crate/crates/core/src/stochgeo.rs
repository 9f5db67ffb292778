//! Distance distributions, interference Laplace transforms and coverage
//! probabilities of the clustered network.
//!
//! With Rayleigh fading and a receiver at distance `r`, coverage reduces to
//! `L_I(s)` at `s = θ r^α / P_d`. The kernel of every transform is
//! `s P_d / (s P_d + u^α) = θ r^α / (θ r^α + u^α)`, so the code works with the
//! power-normalised argument `s P_d` internally.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::NetworkConfig;
use crate::quadrature::{integrate_with_breaks, FirstError, QuadOptions};
use crate::special::{bessel_i0e, gamma_reflection_product};

/// Span, in units of σ, beyond which Gaussian-type densities are treated as zero.
const GAUSS_SPAN: f64 = 12.0;

/// Laplace-domain argument `s`, in m^α / W.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LaplaceArg(f64);

impl LaplaceArg {
    pub fn new(s: f64) -> Result<Self> {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::InvalidArgument(format!("Laplace argument must be >= 0, got {s}")));
        }
        Ok(Self(s))
    }

    /// `s = θ r^α / P_d` for a receiver at distance `r`.
    pub fn at_distance(r: f64, theta: f64, alpha: f64, p_d: f64) -> Result<Self> {
        Self::new(theta * r.powf(alpha) / p_d)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoverageMethod {
    Analytic,
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageResult {
    pub value: f64,
    pub method: CoverageMethod,
    /// Set when the value is formal only, e.g. no device ever transmits.
    pub degenerate: bool,
}

impl CoverageResult {
    fn new(value: f64, method: CoverageMethod) -> Self {
        Self {
            value: value.clamp(0.0, 1.0),
            method,
            degenerate: false,
        }
    }
}

/// Density of the serving distance, Rayleigh with scale `√2 σ`.
pub fn serving_distance_pdf(r: f64, sigma: f64) -> f64 {
    if r < 0.0 {
        return 0.0;
    }
    let two_var = 2.0 * sigma * sigma;
    r / two_var * (-r * r / (2.0 * two_var)).exp()
}

/// Rice density of `u = |v e + N(0, σ² I)|`, evaluated with a scaled Bessel
/// function so large `u v / σ²` neither overflows nor underflows.
pub fn rice_pdf(u: f64, v: f64, sigma: f64) -> f64 {
    if u < 0.0 {
        return 0.0;
    }
    let var = sigma * sigma;
    let d = u - v;
    u / var * (-d * d / (2.0 * var)).exp() * bessel_i0e(u * v / var)
}

fn check_config(cfg: &NetworkConfig) -> Result<()> {
    cfg.validate()
}

fn inner_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-10,
        max_evals: 1_000_000,
    }
}

/// `φ(v) = E[ a / (a + U^α) ]` with `U ~ Rice(v, σ)` and `a = s P_d`.
fn rice_kernel_mean(a: f64, v: f64, sigma: f64, alpha: f64) -> Result<f64> {
    let lo = (v - GAUSS_SPAN * sigma).max(0.0);
    let hi = v + GAUSS_SPAN * sigma;
    let knee = a.powf(1.0 / alpha);
    let mut pts = vec![lo, hi];
    for x in [v, knee] {
        if x > lo && x < hi {
            pts.push(x);
        }
    }
    pts.sort_by(f64::total_cmp);
    let integrand = |u: f64| a / (a + u.powf(alpha)) * rice_pdf(u, v, sigma);
    Ok(integrate_with_breaks("inter-cluster kernel", integrand, &pts, &inner_opts())?.value)
}

/// Inter-cluster term `2π ∫ (1 − e^{−p n̄ φ(v)}) v dv` before multiplication by λ_p.
fn inter_exponent_per_density(a: f64, cfg: &NetworkConfig) -> Result<f64> {
    let m = cfg.access_p * cfg.n_bar;
    if a == 0.0 || m == 0.0 {
        return Ok(0.0);
    }
    let knee = a.powf(1.0 / cfg.alpha);
    let sigma = cfg.sigma;
    // Beyond v_max the integrand equals p n̄ a v^{1−α} to relative accuracy far
    // below the quadrature tolerance, so the tail is added in closed form.
    let v_max = 50.0 * sigma + 100.0 * knee;
    let mut pts = vec![0.0, knee, 2.0 * knee, v_max];
    let mut x = sigma;
    while x < v_max {
        pts.push(x);
        x *= 2.0;
    }
    pts.retain(|p| *p <= v_max);
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    let mut failure = FirstError::default();
    let outer = |v: f64| {
        let phi = failure.absorb(rice_kernel_mean(a, v, sigma, cfg.alpha));
        -(-m * phi).exp_m1() * v
    };
    let tail = m * a * v_max.powf(2.0 - cfg.alpha) / (cfg.alpha - 2.0);
    let opts = QuadOptions {
        abs_tol: 1e-12 * (tail + v_max),
        rel_tol: 1e-9,
        max_evals: 1_000_000,
    };
    let body = integrate_with_breaks("inter-cluster Laplace transform", outer, &pts, &opts)?;
    failure.into_result(2.0 * PI * (body.value + tail))
}

/// Laplace transform of the aggregate interference from all other clusters.
pub fn laplace_inter(s: LaplaceArg, cfg: &NetworkConfig) -> Result<f64> {
    check_config(cfg)?;
    let a = s.value() * cfg.p_d;
    if cfg.lambda_p == 0.0 {
        return Ok(1.0);
    }
    let exponent = cfg.lambda_p * inter_exponent_per_density(a, cfg)?;
    Ok((-exponent).exp())
}

/// `E[a / (a + H^α)]` with `H` Rayleigh of scale `√2 σ`.
fn intra_kernel_mean(a: f64, sigma: f64, alpha: f64) -> Result<f64> {
    let knee = a.powf(1.0 / alpha);
    let hi = 2.0 * GAUSS_SPAN * sigma;
    let mut pts = vec![0.0, 2.0 * sigma, hi];
    if knee < hi {
        pts.push(knee);
    }
    pts.sort_by(f64::total_cmp);
    let integrand = |h: f64| a / (a + h.powf(alpha)) * serving_distance_pdf(h, sigma);
    Ok(integrate_with_breaks("intra-cluster kernel", integrand, &pts, &inner_opts())?.value)
}

/// Laplace transform of intra-cluster interference, modelled as a Gaussian
/// PPP with `intensity` expected active interferers (`p n̄`, or `p k` when the
/// cluster size is conditioned on).
pub fn laplace_intra(s: LaplaceArg, p_d: f64, intensity: f64, sigma: f64, alpha: f64) -> Result<f64> {
    if !(intensity.is_finite() && intensity >= 0.0) {
        return Err(Error::InvalidArgument(format!("intensity must be >= 0, got {intensity}")));
    }
    if !(sigma > 0.0 && alpha > 2.0 && p_d > 0.0) {
        return Err(Error::InvalidArgument("laplace_intra needs sigma > 0, alpha > 2, p_d > 0".into()));
    }
    let a = s.value() * p_d;
    if a == 0.0 || intensity == 0.0 {
        return Ok(1.0);
    }
    Ok((-intensity * intra_kernel_mean(a, sigma, alpha)?).exp())
}

/// `∫ f_R(r) L_inter(s(r)) L_intra(s(r)) dr` with intra intensity `intensity`.
fn coverage_integral(cfg: &NetworkConfig, intensity: f64) -> Result<f64> {
    let sigma = cfg.sigma;
    let mut failure = FirstError::default();
    let integrand = |r: f64| {
        let pdf = serving_distance_pdf(r, sigma);
        if pdf == 0.0 {
            return 0.0;
        }
        let s = LaplaceArg(cfg.theta * r.powf(cfg.alpha) / cfg.p_d);
        let inter = failure.absorb(laplace_inter(s, cfg));
        let intra = failure.absorb(laplace_intra(s, cfg.p_d, intensity, sigma, cfg.alpha));
        pdf * inter * intra
    };
    let pts = [0.0, sigma, 2.0 * sigma, 4.0 * sigma, 8.0 * sigma, 16.0 * sigma];
    let opts = QuadOptions {
        abs_tol: 1e-10,
        rel_tol: 1e-8,
        max_evals: 100_000,
    };
    let value = integrate_with_breaks("coverage integral", integrand, &pts, &opts)?.value;
    failure.into_result(value)
}

/// `P(R_1 > R_0)`: probability that the D2D link from a randomly placed
/// cluster member sustains spectral rate `r0_over_w1`.
pub fn prob_rate_exceeds(cfg: &NetworkConfig, r0_over_w1: f64, w1: f64) -> Result<CoverageResult> {
    check_config(cfg)?;
    if !(w1.is_finite() && w1 > 0.0) {
        return Err(Error::InvalidArgument(format!("w1 must be > 0, got {w1}")));
    }
    check_rate_feasible(cfg, r0_over_w1)?;
    let value = coverage_integral(cfg, cfg.access_p * cfg.n_bar)?;
    Ok(CoverageResult::new(value, CoverageMethod::Analytic))
}

pub(crate) fn check_rate_feasible(cfg: &NetworkConfig, r0_over_w1: f64) -> Result<()> {
    if !(r0_over_w1.is_finite() && r0_over_w1 >= 0.0) {
        return Err(Error::InvalidArgument(format!("r0_over_w1 must be >= 0, got {r0_over_w1}")));
    }
    let se = cfg.spectral_efficiency();
    if cfg.access_p * se <= r0_over_w1 {
        return Err(Error::InfeasibleAccessProbability {
            access_p: cfg.access_p,
            r0_over_w1,
            spectral_efficiency: se,
        });
    }
    Ok(())
}

/// D2D coverage given `k` devices in the cluster, with the `k` intra-cluster
/// devices approximated by a Gaussian PPP of intensity `p k`.
pub fn d2d_coverage_conditional(cfg: &NetworkConfig, k: usize) -> Result<CoverageResult> {
    check_config(cfg)?;
    if k == 0 {
        return Err(Error::InvalidArgument("conditional coverage needs k >= 1".into()));
    }
    if cfg.access_p == 0.0 {
        return Ok(CoverageResult {
            value: 1.0,
            method: CoverageMethod::Analytic,
            degenerate: true,
        });
    }
    let value = coverage_integral(cfg, cfg.access_p * k as f64)?;
    Ok(CoverageResult::new(value, CoverageMethod::Analytic))
}

/// `₂F₁(1, −δ; 1−δ; −θ) = 1 + δ θ^δ ∫₀^θ x^{−δ} / (1 + x) dx`.
///
/// The substitution `x = y^{1/(1−δ)}` removes the endpoint singularity.
pub(crate) fn hyp2f1_coverage_denominator(theta: f64, delta: f64) -> Result<f64> {
    let e = 1.0 / (1.0 - delta);
    let upper = theta.powf(1.0 - delta);
    let integrand = |y: f64| e / (1.0 + y.powf(e));
    let mut pts = vec![0.0, upper];
    if upper > 1.0 {
        pts.insert(1, 1.0);
    }
    let opts = QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-13,
        max_evals: 1_000_000,
    };
    let integral = integrate_with_breaks("BS coverage", integrand, &pts, &opts)?.value;
    Ok(1.0 + delta * theta.powf(delta) * integral)
}

/// Coverage of a typical user served by its nearest BS in a PPP network with
/// Rayleigh fading and no noise: `1 / ₂F₁(1, −δ; 1−δ; −θ)`.
pub fn bs_coverage(theta: f64, alpha: f64) -> Result<CoverageResult> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::InvalidArgument(format!("theta must be > 0, got {theta}")));
    }
    if !(alpha.is_finite() && alpha > 2.0) {
        return Err(Error::InvalidArgument(format!("alpha must exceed 2, got {alpha}")));
    }
    if alpha == 4.0 {
        let root = theta.sqrt();
        return Ok(CoverageResult::new(1.0 / (1.0 + root * root.atan()), CoverageMethod::ClosedForm));
    }
    let denom = hyp2f1_coverage_denominator(theta, 2.0 / alpha)?;
    Ok(CoverageResult::new(1.0 / denom, CoverageMethod::Analytic))
}

/// Coverage when a single D2D link is active per cluster:
/// `1 / (1 + 4σ² π λ_p θ^δ Γ(1+δ) Γ(1−δ))`.
pub fn d2d_coverage_single_link(cfg: &NetworkConfig) -> Result<CoverageResult> {
    check_config(cfg)?;
    let delta = cfg.delta();
    let z = PI * cfg.lambda_p * cfg.theta.powf(delta) * gamma_reflection_product(delta);
    let four_var = 4.0 * cfg.sigma * cfg.sigma;
    Ok(CoverageResult::new(1.0 / (four_var * z + 1.0), CoverageMethod::ClosedForm))
}

/// Average rate `W log2(1 + θ) P_c`, bits/s.
pub fn average_rate(w: f64, theta: f64, coverage: &CoverageResult) -> Result<f64> {
    if !(w.is_finite() && w >= 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth must be >= 0, got {w}")));
    }
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::InvalidArgument(format!("theta must be > 0, got {theta}")));
    }
    Ok(w * (1.0 + theta).log2() * coverage.value)
}

/// Smallest access probability that keeps `P(R_1 > R_0)` positive, raised by a
/// relative margin `epsilon`: `p* = (1 + ε) R_0 / (W_1 log2(1+θ))`.
pub fn access_probability_threshold(r0_over_w1: f64, theta: f64, epsilon: f64) -> Result<f64> {
    if !(r0_over_w1.is_finite() && r0_over_w1 > 0.0) {
        return Err(Error::InvalidArgument(format!("r0_over_w1 must be > 0, got {r0_over_w1}")));
    }
    if !(theta.is_finite() && theta > 0.0 && epsilon >= 0.0) {
        return Err(Error::InvalidArgument("theta must be > 0 and epsilon >= 0".into()));
    }
    let se = (1.0 + theta).log2();
    let p = r0_over_w1 / se * (1.0 + epsilon);
    if p > 1.0 {
        return Err(Error::InfeasibleAccessProbability {
            access_p: p,
            r0_over_w1,
            spectral_efficiency: se,
        });
    }
    Ok(p)
}
