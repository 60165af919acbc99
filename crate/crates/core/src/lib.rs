//! Simulation core for the crowd-labelling game.
//!
//! Agents label items for a mechanism that tries to tell informed, truthful
//! labellers apart from everyone else. Uninformed agents can coordinate on a
//! shared but uninformative "prejudice", which a mechanism that only looks at
//! agreement cannot distinguish from the truth. The crate covers:
//!
//! - [`probcore`]: label distributions, entropy, mutual information and the
//!   constraints a world has to satisfy;
//! - [`game`]: rosters, assignments, strategies and report generation;
//! - [`mechanisms`]: agreement-based and anchored identification rules and
//!   their Monte-Carlo evaluation;
//! - [`equilibrium`]: payoff estimation, deviation checks, best-response
//!   dynamics and the paired-scenario indistinguishability experiment.
//!
//! The crate is `no_std` (with `alloc`). Enable the `parallel` feature to run
//! trials on a rayon pool; results do not depend on the number of threads.
#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod equilibrium;
pub mod game;
pub mod mechanisms;
pub mod probcore;
pub mod stats;
mod trials;

pub type Label = usize;
pub type AgentId = usize;
pub type ItemId = usize;

pub use game::{
    generate_reports, make_assignment, truthful_informed_set, AgentRoster, AgentType, Assignment,
    GameConfig, GameError, PrejudiceMode, ReportMatrix, Reports, Strategy, StrategyProfile,
};
pub use probcore::{
    entropy, mutual_information, substream, validate_world, ConditionalTable, Distribution,
    JointTable, LabelSpace, ProbError, SimRng, StreamTag, ValidationReport, WorldDistribution,
};
