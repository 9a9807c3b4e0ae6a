//! Quasi-arithmetic opinion pooling with respect to proper scoring rules.
//!
//! - [`scoring`]: rule families, expected reward `G`, exposure `g`, scores and
//!   Bregman divergences.
//! - [`pooling`]: QA pooling, exposure inversion and the Bregman-minimizing
//!   generalized pool.
//! - [`learning`]: online gradient descent over expert weights with regret
//!   accounting.
//! - [`analysis`]: max-min surplus checks, the pooling-axiom suite and
//!   convex-exposure probes.
//! - [`cli`]: file formats and command implementations behind the `qapool` binary.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod learning;
pub mod pooling;
pub mod roots;
pub mod sampling;
pub mod scoring;
pub mod simplex;

pub use error::{QaError, Result};
pub use pooling::{
    combine, generalized_pool, generalized_pool_with, invert_exposure, invert_exposure_generic,
    qa_pool, qa_pool_with, spherical_pool, tsallis_invert, GeneralizedOptions, Inversion,
    PoolMethod, PoolResult, WeightedForecast,
};
pub use scoring::{
    bregman, expected_reward, exposure, has_convex_exposure, score, DomainKind, ExposureVector,
    Family, Forecast, RuleSpec,
};
