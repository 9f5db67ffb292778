use std::fmt;

use thiserror::Error;

/// One of the two service queues of a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Queue {
    /// Requests served over D2D links.
    D2d,
    /// Requests served by the base station.
    Bs,
}

impl fmt::Display for Queue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Queue::D2d => f.write_str("D2D"),
            Queue::Bs => f.write_str("BS"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error(
        "quadrature did not converge for {what}: estimate {estimate:e}, error {error:e} after {evaluations} evaluations"
    )]
    NumericFailure {
        what: &'static str,
        estimate: f64,
        error: f64,
        evaluations: usize,
    },

    #[error(
        "access probability {access_p} cannot sustain rate threshold {r0_over_w1} bits/s/Hz at log2(1+theta) = {spectral_efficiency}"
    )]
    InfeasibleAccessProbability {
        access_p: f64,
        r0_over_w1: f64,
        spectral_efficiency: f64,
    },

    #[error("energy objective is not convex: P_b/R_2 = {bs_cost:e} must exceed P_d/R_1 = {d2d_cost:e}")]
    ConvexityViolated { d2d_cost: f64, bs_cost: f64 },

    #[error("{queue} queue is unstable: arrival rate {arrival} >= service rate {service}")]
    UnstableQueue {
        queue: Queue,
        arrival: f64,
        service: f64,
    },

    #[error("no bandwidth split stabilises both queues (needs {required:e} Hz of {available:e} Hz)")]
    NoStableSplit { required: f64, available: f64 },

    #[error("offered load cannot be stabilised by any tested caching policy")]
    InfeasibleLoad,
}

pub type Result<T> = std::result::Result<T, Error>;
