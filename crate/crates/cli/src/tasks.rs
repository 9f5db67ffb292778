//! Per-point evaluation of each task into CSV cells.

use clusterd2d::model::{baseline_policy, BaselineKind};
use clusterd2d::montecarlo::{
    mc_coverage_conditional, mc_coverage_single_link, mc_laplace_inter, mc_laplace_intra, mc_prob_rate_exceeds,
    IntraGeometry, McEstimate, McOptions,
};
use clusterd2d::optimize::{
    energy_conditional, equal_split_rates, objective_offloading, optimize_delay_bcd, optimize_energy,
    optimize_offloading, weighted_delay, BcdOptions, DelayProblem, EnergyCosts,
};
use clusterd2d::stochgeo::{
    d2d_coverage_conditional, d2d_coverage_single_link, laplace_inter, laplace_intra, prob_rate_exceeds, LaplaceArg,
};
use clusterd2d::Error;

use crate::scenario::{Point, Scenario, Task};

/// Outcome class of one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// The point lies outside the model's feasible region.
    Infeasible,
    /// A numerical routine failed.
    Error,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Infeasible => "infeasible",
            Status::Error => "error",
        }
    }

    fn of(e: &Error) -> Self {
        match e {
            Error::InfeasibleAccessProbability { .. }
            | Error::InfeasibleLoad
            | Error::NoStableSplit { .. }
            | Error::UnstableQueue { .. }
            | Error::ConvexityViolated { .. } => Status::Infeasible,
            _ => Status::Error,
        }
    }
}

/// Rows produced for one sweep point.
#[derive(Debug, Clone)]
pub struct PointRows {
    pub status: Status,
    pub rows: Vec<Vec<String>>,
    /// Validation rows whose check failed.
    pub failed_checks: usize,
}

/// Formats a finite number with the shortest round-trip representation;
/// non-finite values become empty cells.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        String::new()
    } else if x == 0.0 || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn columns(task: Task) -> &'static [&'static str] {
    match task {
        Task::Offload => &[
            "access_p",
            "prob_r1",
            "offload_pc",
            "offload_zipf",
            "offload_cpf",
            "kkt_residual",
            "status",
            "reason",
        ],
        Task::Energy => &[
            "k",
            "rate_d2d",
            "rate_bs",
            "energy_pc",
            "energy_zipf",
            "energy_cpf",
            "energy_all_bs",
            "degenerate",
            "status",
            "reason",
        ],
        Task::Delay => &[
            "k",
            "zeta_tot",
            "o1",
            "o2",
            "delay_bcd",
            "w1_fraction",
            "bcd_iterations",
            "converged",
            "delay_zipf_equal",
            "zipf_equal_stable",
            "improvement",
            "status",
            "reason",
        ],
        Task::Validate => &["quantity", "analytic", "mc_mean", "mc_hw95", "pass", "tolerance", "reason"],
    }
}

/// Cells for a point that could not be evaluated.
fn failed(task: Task, e: &Error) -> PointRows {
    let status = Status::of(e);
    let width = columns(task).len();
    let mut row = vec![String::new(); width];
    match task {
        Task::Validate => {
            row[0] = "point".into();
            row[4] = "false".into();
        }
        _ => row[width - 2] = status.name().into(),
    }
    row[width - 1] = e.to_string();
    PointRows {
        status,
        rows: vec![row],
        failed_checks: usize::from(task == Task::Validate),
    }
}

pub fn evaluate(task: Task, scenario: &Scenario, point: &clusterd2d::Result<Point>, index: usize) -> PointRows {
    let point = match point {
        Ok(p) => p,
        Err(e) => return failed(task, e),
    };
    let result = match task {
        Task::Offload => offload(point).map(single),
        Task::Energy => energy(scenario, point).map(single),
        Task::Delay => delay(scenario, point).map(single),
        Task::Validate => return validate(scenario, point, index),
    };
    result.unwrap_or_else(|e| failed(task, &e))
}

fn single(row: Vec<String>) -> PointRows {
    PointRows {
        status: Status::Ok,
        rows: vec![row],
        failed_checks: 0,
    }
}

fn ok_tail(mut row: Vec<String>) -> Vec<String> {
    row.push(Status::Ok.name().into());
    row.push(String::new());
    row
}

fn offload(point: &Point) -> clusterd2d::Result<Vec<String>> {
    let cfg = &point.cfg;
    let lib = &point.lib;
    let prob_r1 = prob_rate_exceeds(cfg, point.r0_over_w1, 0.5 * cfg.w_total)?.value;
    let pc = optimize_offloading(cfg, lib, prob_r1)?;
    let eval = |kind| objective_offloading(baseline_policy(kind, lib).probabilities(), lib, cfg.n_bar, prob_r1);
    Ok(ok_tail(vec![
        num(cfg.access_p),
        num(prob_r1),
        num(pc.objective),
        num(eval(BaselineKind::ZipfProportional)),
        num(eval(BaselineKind::Cpf)),
        num(pc.kkt_residual),
    ]))
}

fn energy(scenario: &Scenario, point: &Point) -> clusterd2d::Result<Vec<String>> {
    let cfg = &point.cfg;
    let lib = &point.lib;
    let k = scenario.traffic.k_energy;
    let (r1, r2) = equal_split_rates(cfg, k)?;
    let costs = EnergyCosts::from_rates(cfg, r1, r2)?;
    let pc = optimize_energy(cfg, lib, k, r1, r2)?;
    let eval = |kind| energy_conditional(baseline_policy(kind, lib).probabilities(), lib, k, &costs);
    let all_bs = energy_conditional(&vec![0.0; lib.n_files()], lib, k, &costs);
    Ok(ok_tail(vec![
        k.to_string(),
        num(r1),
        num(r2),
        num(pc.objective),
        num(eval(BaselineKind::ZipfProportional)),
        num(eval(BaselineKind::Cpf)),
        num(all_bs),
        pc.degenerate.to_string(),
    ]))
}

fn delay(scenario: &Scenario, point: &Point) -> clusterd2d::Result<Vec<String>> {
    let cfg = &point.cfg;
    let t = &scenario.traffic;
    let problem = DelayProblem::new(cfg, &point.lib, t.k_delay, t.zeta_tot)?;
    let opts = BcdOptions {
        restarts: scenario.solver.bcd_restarts,
        tol: scenario.solver.bcd_tol,
        max_iters: scenario.solver.bcd_max_iters,
        seed: scenario.seed,
        initial: None,
    };
    let trace = optimize_delay_bcd(&problem, &opts)?;
    let best = trace.best();
    let zipf = baseline_policy(BaselineKind::ZipfProportional, &point.lib);
    let zipf_delay = weighted_delay(&problem, &zipf, 0.5 * cfg.w_total).ok();
    Ok(ok_tail(vec![
        t.k_delay.to_string(),
        num(t.zeta_tot),
        num(problem.o1),
        num(problem.o2),
        num(best.delay),
        num(best.w1 / cfg.w_total),
        trace.iterations().to_string(),
        trace.converged.to_string(),
        opt(zipf_delay),
        zipf_delay.is_some().to_string(),
        opt(zipf_delay.map(|d| (d - best.delay) / best.delay)),
    ]))
}

/// Absolute tolerances of the analytic-vs-simulation checks.
const TOL_COVERAGE: f64 = 0.02;
const TOL_LAPLACE: f64 = 0.01;

/// Seed of the `j`-th simulation at sweep point `i`.
fn derive_seed(master: u64, i: usize, j: usize) -> u64 {
    let mut z = master ^ ((i as u64) << 32 | j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn validate(scenario: &Scenario, point: &Point, index: usize) -> PointRows {
    let cfg = &point.cfg;
    let trials = scenario.mc_trials;
    let opts = |j| McOptions::new(trials, derive_seed(scenario.seed, index, j));
    type Check<'a> = (String, f64, Box<dyn Fn() -> clusterd2d::Result<(f64, McEstimate)> + 'a>);
    let mut checks: Vec<Check<'_>> = vec![
        (
            "prob_rate_exceeds".into(),
            TOL_COVERAGE,
            Box::new(|| {
                let a = prob_rate_exceeds(cfg, point.r0_over_w1, 0.5 * cfg.w_total)?.value;
                Ok((a, mc_prob_rate_exceeds(cfg, point.r0_over_w1, 0.5 * cfg.w_total, &opts(0))?))
            }),
        ),
        (
            "d2d_coverage_single_link".into(),
            TOL_COVERAGE,
            Box::new(|| Ok((d2d_coverage_single_link(cfg)?.value, mc_coverage_single_link(cfg, &opts(1))?))),
        ),
    ];
    let mut ks = vec![scenario.traffic.k_energy, scenario.traffic.k_delay];
    ks.sort_unstable();
    ks.dedup();
    for (j, k) in ks.into_iter().enumerate() {
        checks.push((
            format!("d2d_coverage_conditional[k={k}]"),
            TOL_COVERAGE,
            Box::new(move || {
                let a = d2d_coverage_conditional(cfg, k)?.value;
                Ok((a, mc_coverage_conditional(cfg, k, &opts(2 + j))?.poisson_approx))
            }),
        ));
    }
    checks.push((
        "laplace_inter[r=2sigma]".into(),
        TOL_LAPLACE,
        Box::new(|| {
            let s = LaplaceArg::at_distance(2.0 * cfg.sigma, cfg.theta, cfg.alpha, cfg.p_d)?;
            Ok((laplace_inter(s, cfg)?, mc_laplace_inter(s, cfg, &opts(10))?))
        }),
    ));
    checks.push((
        "laplace_intra[r=sigma]".into(),
        TOL_LAPLACE,
        Box::new(|| {
            let s = LaplaceArg::at_distance(cfg.sigma, cfg.theta, cfg.alpha, cfg.p_d)?;
            let m = cfg.access_p * cfg.n_bar;
            let a = laplace_intra(s, cfg.p_d, m, cfg.sigma, cfg.alpha)?;
            Ok((a, mc_laplace_intra(s, cfg, m, IntraGeometry::IndependentDistances, &opts(11))?))
        }),
    ));

    let mut out = PointRows {
        status: Status::Ok,
        rows: Vec::with_capacity(checks.len()),
        failed_checks: 0,
    };
    for (name, tol, check) in checks {
        match check() {
            Ok((analytic, mc)) => {
                let pass = (analytic - mc.mean).abs() < tol;
                out.failed_checks += usize::from(!pass);
                out.rows.push(vec![
                    name,
                    num(analytic),
                    num(mc.mean),
                    num(mc.half_width_95),
                    pass.to_string(),
                    num(tol),
                    String::new(),
                ]);
            }
            Err(e) => {
                let status = Status::of(&e);
                if status == Status::Error || out.status == Status::Ok {
                    out.status = status;
                }
                out.failed_checks += 1;
                out.rows.push(vec![
                    name,
                    String::new(),
                    String::new(),
                    String::new(),
                    "false".into(),
                    num(tol),
                    e.to_string(),
                ]);
            }
        }
    }
    out
}
