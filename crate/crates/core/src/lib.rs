//! Two agents, each observing its own private stream, race to identify which
//! of two hypotheses holds. Every iteration they update a Bayesian belief,
//! send each other a belief that is inverted with probability `1 - alpha`,
//! fuse what they receive, and stop once a posterior component falls to the
//! confidence threshold `beta`. When one agent stops the other must declare
//! at the same iteration.
//!
//! The crate provides the protocol itself ([`engine::run_trial`]), the
//! probability primitives it is built on ([`belief`], [`policy`]), a
//! deterministic parallel Monte Carlo harness ([`experiments`]) and
//! brute-force checks of the protocol's optimality and safety properties
//! ([`oracles`]).
//!
//! ```
//! use seqduel_core::{presets, engine::run_trial};
//!
//! let config = presets::table1_config(0.05);
//! let record = run_trial(&config, 7).unwrap();
//! let (a, b) = (record.tau_solo[0].unwrap(), record.tau_solo[1].unwrap());
//! assert_eq!(record.tau, a.min(b));
//! ```

pub mod belief;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod format;
pub mod oracles;
pub mod policy;
pub mod presets;

pub use belief::{bayes_update, bernoulli_entropy, kl_divergence, Belief, Hypothesis, ObservationModel, Prior};
pub use engine::{run_trial, Agent, ExperimentConfig, Initiator, TrialRecord, TrueState};
pub use error::{Error, Result};
pub use policy::{
    decide, expected_signal_distribution, fuse, signal, AgentPolicy, Decision, SignaledBelief, WSchedule,
};

// Compiles and runs the book's code listings as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/beliefs.md")]
    mod beliefs {}
    #[doc = include_str!("../../../book/src/signaling.md")]
    mod signaling {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
