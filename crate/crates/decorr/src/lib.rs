//! Correlation-decay experiments for chaotic maps.
//!
//! The crate provides, end to end:
//!
//! * the concrete systems (planar quadratic map, intermittent circle and
//!   solenoid maps, the doubling oracle) with their metrics ([`systems`]);
//! * observables of prescribed modulus of continuity and an empirical
//!   modulus estimator ([`observables`]);
//! * return-time towers, induced from the circle maps or synthesized from a
//!   tail law, with cylinder partitions, diameter estimators, and the
//!   distortion check ([`tower`]);
//! * lag-covariance estimators on ambient systems and on towers, with an
//!   exact doubling-map oracle ([`correlation`]);
//! * parametric decay laws, the symbolic bound table, and least-squares
//!   rate fitting ([`rates`]).
//!
//! All numerics are generic over the scalar type via [`real::Real`]
//! (`f32` or `f64`); the aliases at the crate root fix `f64`, which every
//! binary and acceptance test uses.

pub mod correlation;
pub mod error;
pub mod observables;
pub mod rates;
pub mod real;
pub mod systems;
pub mod tower;

pub use error::{Error, Result};
pub use real::Real;

/// Seedable generator used by every sampling entry point, re-exported for
/// downstream binaries.
pub mod rng {
    pub use rand_chacha::rand_core::SeedableRng;
    pub use rand_chacha::ChaCha8Rng;
}

/// Concrete `f64` aliases for the main types.
pub type SystemSpec = systems::SystemSpec<f64>;
pub type Point = systems::Point<f64>;
pub type SeedBox = systems::SeedBox<f64>;
pub type ModulusClass = observables::ModulusClass<f64>;
pub type Observable = observables::Observable<f64>;
pub type Ensemble = correlation::Ensemble<f64>;
pub type CorrelationSeries = correlation::CorrelationSeries<f64>;
pub type TowerModel = tower::TowerModel<f64>;
pub type TowerState = tower::TowerState<f64>;
pub type TailLaw = tower::TailLaw<f64>;
pub type RateLaw = rates::RateLaw<f64>;
pub type RateModel = rates::RateModel<f64>;
