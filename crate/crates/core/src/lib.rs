//! Randomized LP scheduling for quantum switches.
//!
//! A switch is a graph whose vertices are entanglement memories and whose
//! edges carry user requests. Each frame the scheduler solves a linear program
//! over the (capped) matching polytope with the request backlog as weights,
//! decomposes the fractional optimum into a lottery over matchings by column
//! generation, and draws one matching per slot. A single-node reference chain
//! lower-bounds how often memories are nonempty, which yields the coherence
//! factor: the fraction of the capacity region the policy provably stabilizes.
//!
//! Modules, bottom-up:
//!
//! * [`model`] instance, matching and edge-vector types
//! * [`matching`] exact max-weight matching and enumeration
//! * [`simplex`] dense simplex used by every LP in the crate
//! * [`scheduler`] the scheduling LPs with blossom separation, and the 2/3-scaled variant
//! * [`decomposition`] column generation into a matching lottery
//! * [`refchain`] reference chain, availability and coherence factor
//! * [`sim`] slot-level switch simulator and drift diagnostics
//! * [`experiments`] parameter sweeps and CSV output

pub mod decomposition;
pub mod experiments;
pub mod linalg;
pub mod matching;
pub mod model;
pub mod refchain;
pub mod scheduler;
pub mod sim;
pub mod simplex;

pub use decomposition::{decompose, sample_matching, MatchingMixture};
pub use matching::{enumerate_matchings, max_weight_matching, WeightedMatchingResult};
pub use model::{
    validate_instance, ArrivalKind, EdgeDemand, EdgeVector, Matching, NodeParams, RawInstance,
    SwitchInstance,
};
pub use refchain::{availability, coherence_factor, ChainAnalysis, ChainSpec};
pub use scheduler::{separate_blossom, solve_algorithm1, solve_algorithm2, LpSolution, Variant};

/// Crate-level error, wrapping each module's own error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Instance(#[from] model::InstanceError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Matching(#[from] matching::MatchingError),
    #[error(transparent)]
    Lp(#[from] simplex::LpError),
    #[error(transparent)]
    Schedule(#[from] scheduler::ScheduleError),
    #[error(transparent)]
    Decomposition(#[from] decomposition::DecompositionError),
    #[error(transparent)]
    Chain(#[from] refchain::ChainError),
    #[error(transparent)]
    Sim(#[from] sim::SimError),
    #[error(transparent)]
    Experiment(#[from] experiments::ExperimentError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
