//! Two-user downlink NOMA with blind SIC classification: constellations,
//! channel drops, ML classification, analytical error probabilities, rate
//! formulas, power allocation, user scheduling, Monte Carlo oracles and an
//! experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod channel;
pub mod classifier;
pub mod constellation;
pub mod error;
pub mod harness;
pub mod montecarlo;
pub mod optimizer;
pub mod rates;
pub mod rng;
pub mod scheduler;

pub use analysis::{analytical_error_pair, combine_majority, q_function, ErrorProbabilities};
pub use channel::{drop_users, LinkState, UserDrop};
pub use classifier::{classify_multi, classify_single, Hypothesis, Observation};
pub use constellation::{make_qam, superpose, CompositeConstellation, Constellation, DecisionRegion, ModulationPair};
pub use error::{NomaError, Result};
pub use rates::{gain_lower_bound, gain_report, rate_nonsic, rate_oma, rate_sic, GainReport, PowerSplit, RatePair};
pub use harness::{Experiment, ExperimentConfig, SnrReference, Table, ValidationReport};
pub use montecarlo::{estimate_error_pair, exhaustive_schedule, grid_optimal_gamma, EstimateWithCI, PowerSearch, TrialConfig};
pub use optimizer::{allocate, gamma_classifier_boundary, gamma_rate_boundary, AllocationResult, Binding, PairingParams};
pub use scheduler::{schedule_proposed, schedule_strongest_strongest, schedule_strongest_weakest, SchedulingOutcome};
