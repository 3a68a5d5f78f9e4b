//! Per-agent policies: randomized belief signaling, convex belief fusion and
//! the two-threshold stopping rule.
//!
//! Everything here is a pure function. [`signal`] takes its coin as an
//! argument so the caller owns the random stream.

use crate::belief::{check_probability, Belief, Hypothesis};
use crate::error::{Error, Result};

/// The weight an agent puts on its own belief when fusing, per iteration.
#[derive(Clone, Debug, PartialEq)]
pub enum WSchedule {
    Constant(f64),
    /// `w` for iterations `1, 2, ...`; the last entry repeats past the end.
    PerStep(Vec<f64>),
}

impl WSchedule {
    /// Weight at the 1-based iteration `n`.
    pub fn weight(&self, n: u64) -> f64 {
        match self {
            WSchedule::Constant(w) => *w,
            WSchedule::PerStep(ws) => {
                let i = (n.saturating_sub(1) as usize).min(ws.len() - 1);
                ws[i]
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            WSchedule::Constant(w) => *w == 1.0,
            WSchedule::PerStep(ws) => ws.iter().all(|&w| w == 1.0),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            WSchedule::Constant(w) => check_probability("w", *w).map(drop),
            WSchedule::PerStep(ws) if ws.is_empty() => Err(Error::Config("w schedule must not be empty".into())),
            WSchedule::PerStep(ws) => ws.iter().try_for_each(|&w| check_probability("w", w).map(drop)),
        }
    }
}

impl Default for WSchedule {
    fn default() -> Self {
        WSchedule::Constant(1.0)
    }
}

/// Signaling, fusion and stopping parameters of one agent.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentPolicy {
    /// Probability of transmitting the true (uninverted) belief.
    pub alpha: f64,
    pub w: WSchedule,
    /// Stop and declare `theta1` once `p(theta0) <= t_theta0`.
    pub t_theta0: f64,
    /// Stop and declare `theta0` once `p(theta1) <= t_theta1`.
    pub t_theta1: f64,
    /// Target conditional probability of error.
    pub beta: f64,
}

impl AgentPolicy {
    pub fn new(alpha: f64, w: WSchedule, t_theta0: f64, t_theta1: f64, beta: f64) -> Result<Self> {
        let policy = AgentPolicy {
            alpha,
            w,
            t_theta0,
            t_theta1,
            beta,
        };
        policy.validate()?;
        Ok(policy)
    }

    /// `alpha = 0.5`, `w = 1`, both thresholds equal to `beta`.
    pub fn optimal(beta: f64) -> Result<Self> {
        Self::new(0.5, WSchedule::Constant(1.0), beta, beta, beta)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("alpha", self.alpha)?;
        check_probability("t_theta0", self.t_theta0)?;
        check_probability("t_theta1", self.t_theta1)?;
        check_probability("beta", self.beta)?;
        self.w.validate()
    }

    /// Fusion is the identity and both thresholds sit at `beta`.
    pub fn stops_on_own_belief(&self) -> bool {
        self.w.is_identity() && self.t_theta0 == self.beta && self.t_theta1 == self.beta
    }
}

/// A transmitted belief. It may or may not have been inverted; nothing in the
/// message says which.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignaledBelief(Belief);

impl SignaledBelief {
    pub fn new(belief: Belief) -> Self {
        SignaledBelief(belief)
    }

    pub fn belief(&self) -> Belief {
        self.0
    }

    pub fn p_theta1(&self) -> f64 {
        self.0.p_theta1()
    }

    pub fn min_component(&self) -> f64 {
        self.0.min_component()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Stop(Hypothesis),
}

impl Decision {
    pub fn is_stop(&self) -> bool {
        matches!(self, Decision::Stop(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            Decision::Continue => "continue",
            Decision::Stop(Hypothesis::Theta0) => "stop_theta0",
            Decision::Stop(Hypothesis::Theta1) => "stop_theta1",
        }
    }
}

/// Transmits `belief` unchanged when `coin < alpha`, else its inversion.
pub fn signal(belief: Belief, alpha: f64, coin: f64) -> SignaledBelief {
    if coin < alpha {
        SignaledBelief(belief)
    } else {
        SignaledBelief(belief.inverted())
    }
}

/// The receiver's view of the signal in expectation: the belief mixed with its
/// inversion in proportions `alpha : 1 - alpha`.
pub fn expected_signal_distribution(belief: Belief, alpha: f64) -> Belief {
    mixture(belief, alpha, 1.0 - alpha)
}

/// `truthful * b + inverted * swap(b)` with the two weights given separately,
/// so that swapping them swaps the components exactly.
pub(crate) fn mixture(belief: Belief, truthful: f64, inverted: f64) -> Belief {
    let (p0, p1) = (belief.p_theta0(), belief.p_theta1());
    Belief::from_masses(truthful * p0 + inverted * p1, truthful * p1 + inverted * p0)
}

/// Convex combination `w * own + (1 - w) * received`.
pub fn fuse(own: Belief, received: SignaledBelief, w: f64) -> Belief {
    if w == 1.0 {
        return own;
    }
    if w == 0.0 {
        return received.0;
    }
    let other = received.0;
    Belief::from_masses(
        w * own.p_theta0() + (1.0 - w) * other.p_theta0(),
        w * own.p_theta1() + (1.0 - w) * other.p_theta1(),
    )
}

/// Two-threshold stopping rule.
///
/// When both branches fire (only possible with `t_theta0 + t_theta1 >= 1`)
/// the branch for the smaller posterior wins, and an exact tie declares
/// `theta1`.
pub fn decide(fused: Belief, policy: &AgentPolicy) -> Decision {
    let (p0, p1) = (fused.p_theta0(), fused.p_theta1());
    let declare_theta1 = p0 <= policy.t_theta0;
    let declare_theta0 = p1 <= policy.t_theta1;
    match (declare_theta1, declare_theta0) {
        (true, false) => Decision::Stop(Hypothesis::Theta1),
        (false, true) => Decision::Stop(Hypothesis::Theta0),
        (false, false) => Decision::Continue,
        (true, true) if p1 < p0 => Decision::Stop(Hypothesis::Theta0),
        (true, true) => Decision::Stop(Hypothesis::Theta1),
    }
}

/// Forced declaration of the agent that did not initiate stopping: the argmax
/// of its belief, ties to `theta1`.
pub fn final_decision_nonstopper(own: Belief) -> Hypothesis {
    if own.p_theta0() <= own.p_theta1() {
        Hypothesis::Theta1
    } else {
        Hypothesis::Theta0
    }
}
