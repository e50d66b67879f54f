//! Delivery probability of cooperative relaying in Poisson fields of
//! ALOHA interferers.
//!
//! Three engines compute the same quantities by different routes:
//!
//! * [`analytic`]: inclusion-exclusion over success events with each joint
//!   probability obtained by plane quadrature of a PGFL exponent.
//! * [`retransmission`]: attempt-count laws, conditioning on sampled
//!   interferer layouts.
//! * [`montecarlo`]: event-level simulation of slots.
//!
//! Sweeps and simulations run on rayon when the `parallel` feature is on
//! (the default); [`Exec::Sequential`] forces a single thread.

pub mod analytic;
pub mod error;
pub mod exec;
pub mod montecarlo;
pub mod ppp;
pub mod quadrature;
pub mod retransmission;
pub mod rng;
pub mod scenario;
pub mod slot;
pub mod stats;
pub mod subset;

pub use analytic::{delivery_probability, DeliveryResult};
pub use error::{Error, Result};
pub use exec::Exec;
pub use montecarlo::{simulate_slot, MonteCarlo, SlotOutcome};
pub use ppp::{sample_ppp, PppRealization};
pub use quadrature::{integrate_plane, Integral, QuadratureSpec};
pub use retransmission::{AttemptDistribution, ConditionalSuccess, Retransmission};
pub use rng::SeedStream;
pub use scenario::{
    path_gain, reduced_threshold, ChannelParams, Combiner, Interference, LinkGains, PathLossLaw,
    Position, ReducedThresholds, Scenario,
};
pub use slot::{draw_slot, SlotDraw};
pub use stats::EstimateWithError;
pub use subset::SubsetMask;
