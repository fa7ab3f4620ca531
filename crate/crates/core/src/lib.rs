//! Synthesis of household-coordinated daily activity chains with a
//! retrieval-augmented LLM loop, plus the statistics used to evaluate them.

pub mod domain;
pub mod eval;
pub mod feedback;
pub mod gateway;
pub mod household;
pub mod pipeline;
pub mod prompt;
pub mod record;
pub mod roster;
pub mod sampler;
pub mod scalar;
pub mod stats;
pub mod synthetic;

pub use domain::{
    chain_length, validate_chain, Activity, ActivityChain, ActivityType, AgentId, Household,
    HouseholdId, MinuteOfDay, Relationship, SocioProfile, Violation,
};
pub use record::{ChainRecord, WireActivity};
pub use scalar::Scalar;

/// Double-precision distribution, the default throughout the crate.
pub type DistributionF64 = stats::Distribution<f64>;
/// Single-precision distribution.
pub type DistributionF32 = stats::Distribution<f32>;
