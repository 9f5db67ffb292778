//! Analytical model of a clustered D2D caching network: coverage and
//! interference of a Thomas cluster process, three caching optimizers
//! (offloading gain, energy, weighted queueing delay) and a Monte Carlo
//! simulator used to validate the analysis.

pub mod error;
pub mod model;
pub mod montecarlo;
pub mod optimize;
pub mod quadrature;
pub mod special;
pub mod queueing;
pub mod stochgeo;

pub use error::{Error, Queue, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use model::{
    baseline_policy, sample_cache_realization, zipf_popularity, BaselineKind, CacheRealization, CachingPolicy,
    ContentLibrary, NetworkConfig,
};
