//! The two-agent example: agents A and B observe a five-symbol alphabet, B
//! with far more discriminating likelihoods than A.

use crate::belief::{ObservationModel, Prior};
use crate::engine::ExperimentConfig;
use crate::policy::AgentPolicy;

pub const TABLE1_A_THETA0: [f64; 5] = [0.1, 0.2, 0.1, 0.3, 0.3];
pub const TABLE1_A_THETA1: [f64; 5] = [0.2, 0.15, 0.25, 0.2, 0.2];
pub const TABLE1_B_THETA0: [f64; 5] = [0.15, 0.25, 0.15, 0.25, 0.2];
pub const TABLE1_B_THETA1: [f64; 5] = [0.4, 0.05, 0.35, 0.1, 0.1];

pub fn table1_model_a() -> ObservationModel {
    ObservationModel::new(TABLE1_A_THETA0.to_vec(), TABLE1_A_THETA1.to_vec()).expect("valid preset")
}

pub fn table1_model_b() -> ObservationModel {
    ObservationModel::new(TABLE1_B_THETA0.to_vec(), TABLE1_B_THETA1.to_vec()).expect("valid preset")
}

/// Uniform prior, both agents on the optimal policy at `beta`, state of
/// nature drawn from the prior, seed 0.
pub fn table1_config(beta: f64) -> ExperimentConfig {
    let policy = AgentPolicy::optimal(beta).expect("beta must be a probability");
    ExperimentConfig::new(
        Prior::default(),
        table1_model_a(),
        table1_model_b(),
        policy.clone(),
        policy,
    )
}

/// Published mean stopping times for the preset: `(beta, tau, tau_solo_a, tau_solo_b)`.
pub const TABLE1_REFERENCE: [(f64, f64, f64, f64); 2] = [(0.05, 6.95, 19.70, 7.95), (0.01, 10.34, 30.52, 10.85)];

/// Published divergences `D(P(.|theta0) || P(.|theta1))` for agents A and B.
pub const TABLE1_REFERENCE_KL: [f64; 2] = [0.14, 0.496];

/// Relative band around the published stopping times.
pub const TAU_BAND: f64 = 0.15;

/// Absolute band around the published divergences.
pub const KL_BAND: f64 = 0.005;

/// Minimum fraction of trials in which B's own crossing precedes A's.
pub const B_FIRST_MIN_FRACTION: f64 = 0.8;

/// `reference * (1 -/+ band)`.
pub fn relative_band(reference: f64, band: f64) -> (f64, f64) {
    (reference * (1.0 - band), reference * (1.0 + band))
}
