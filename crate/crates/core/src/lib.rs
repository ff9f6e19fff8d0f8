//! Bayesian consumption games under real-time electricity pricing.
//!
//! Consumers with Gaussian preferences choose their consumption each slot
//! while the price depends on total load. The crate computes the
//! Bayesian Nash equilibrium under private information, action sharing over
//! a communication graph and broadcast of the total load, tracks how beliefs
//! evolve across slots, and provides closed-form expectations together with
//! Monte Carlo ensembles to check them.
//!
//! ```
//! use rtp_game::{Behavior, Information, PreferencePrior, Scenario, SigmaCorrelation};
//!
//! let prior = PreferencePrior::sigma_correlated(5, 30.0, SigmaCorrelation::new(0.3, 4.0)?)?;
//! let scenario = Scenario::new(prior, Behavior::Selfish, Information::Broadcast).with_seed(1);
//! let report = rtp_game::ensemble(&scenario, 50)?;
//! assert_eq!(report.slots.len(), 5);
//! # Ok::<(), rtp_game::Error>(())
//! ```

pub mod beliefs;
pub mod equilibrium;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod montecarlo;
pub mod network;
pub mod scalar;

pub use beliefs::{
    filter_step, BeliefState, GameSchedule, ObservationMatrix, PublicBeliefs, SlotPlan,
};
pub use equilibrium::{
    closed_form_complete, closed_form_private, equilibrium_residual, solve_bne,
    ClosedFormCoefficients, ClosedFormInfo, StrategyCoefficients,
};
pub use error::{Error, Result};
pub use metrics::{analytic_report, corollary_ratios, AnalyticReport, CorollaryRatios};
pub use model::{
    behavior_constants, system_metrics, Behavior, BehaviorConstants, Information, PerSlot,
    PreferencePrior, PricingPolicy, RenewableForecast, Scenario, SigmaCorrelation, SimulationTrace,
    SlotRecord, SystemMetrics,
};
pub use montecarlo::{ensemble, run_time_zone, EnsembleReport, EnsembleStats};
pub use network::CommunicationGraph;
pub use scalar::Scalar;

pub type PricingPolicyF32 = PricingPolicy<f32>;
pub type RenewableForecastF32 = RenewableForecast<f32>;
pub type SigmaCorrelationF32 = SigmaCorrelation<f32>;
pub type BehaviorConstantsF32 = BehaviorConstants<f32>;
pub type ClosedFormCoefficientsF32 = ClosedFormCoefficients<f32>;
pub type AnalyticReportF32 = AnalyticReport<f32>;
pub type CorollaryRatiosF32 = CorollaryRatios<f32>;
