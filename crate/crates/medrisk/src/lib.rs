//! Maximal mean squared error of sample-median variants on shrinking
//! gross-error neighborhoods, three independent ways:
//!
//! * [`asy`] -- closed-form higher-order expansions of n * maxMSE,
//! * [`exact`] -- numerical quadrature over order-statistic densities with
//!   binomial mixing over the contamination count,
//! * [`sim`] -- Monte Carlo on the thinned contamination model with
//!   reproducible parallel substreams.
//!
//! [`dist`] holds the ideal model F (a record of pure callables plus the
//! Taylor data of its density at the median), [`bounds`] the binomial tail
//! bounds and moments behind the thinning rule, and [`special`] the scalar
//! special functions everything is built on.
//!
//! The model: each of n observations is independently replaced with
//! probability r/sqrt(n) by an arbitrary contaminating draw, and samples in
//! which half or more of the observations are contaminated are discarded.
//! All risks are reported as n * MSE.

pub mod asy;
pub mod bounds;
pub mod dist;
pub mod exact;
pub mod sim;
pub mod special;

mod quad;

pub use asy::{ExpansionOrder, MedianVariant, RiskMethod, RiskResult};
pub use dist::IdealDistribution;
pub use exact::{ContaminationConfig, QuadratureSpec, Side};
