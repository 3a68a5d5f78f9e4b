//! One experiment of the two-agent protocol.
//!
//! Each iteration follows the same order: both agents observe, update their
//! local beliefs, exchange signals, fuse and test their stopping rule. The
//! first iteration at which either agent's rule fires ends the trial for both.
//! An agent that did not fire learns of the stop from the counterpart's
//! signal, whose smaller component is unaffected by inversion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::belief::{bayes_update, Belief, Hypothesis, ObservationModel, Prior};
use crate::error::{Error, Result};
use crate::policy::{decide, final_decision_nonstopper, fuse, signal, AgentPolicy, Decision, SignaledBelief};

/// Default cap on iterations per trial.
pub const DEFAULT_MAX_ITERATIONS: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Agent {
    A,
    B,
}

impl Agent {
    pub const ALL: [Agent; 2] = [Agent::A, Agent::B];

    pub fn index(self) -> usize {
        match self {
            Agent::A => 0,
            Agent::B => 1,
        }
    }

    pub fn other(self) -> Agent {
        match self {
            Agent::A => Agent::B,
            Agent::B => Agent::A,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Agent::A => "A",
            Agent::B => "B",
        }
    }
}

/// Which agent's own rule ended the trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Initiator {
    A,
    B,
    Both,
}

impl Initiator {
    pub fn includes(self, agent: Agent) -> bool {
        matches!(
            (self, agent),
            (Initiator::Both, _) | (Initiator::A, Agent::A) | (Initiator::B, Agent::B)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrueState {
    Fixed(Hypothesis),
    SampledFromPrior,
}

/// Per-sample cost `c` and wrong-declaration cost `c_hat`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Costs {
    pub continue_cost: f64,
    pub error_cost: f64,
}

impl Default for Costs {
    fn default() -> Self {
        Costs {
            continue_cost: 1.0,
            error_cost: 100.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub prior: Prior,
    pub model_a: ObservationModel,
    pub model_b: ObservationModel,
    pub policy_a: AgentPolicy,
    pub policy_b: AgentPolicy,
    pub costs_a: Costs,
    pub costs_b: Costs,
    pub true_state: TrueState,
    pub max_iterations: u64,
    pub seed: u64,
    /// Require both agents to share the same `beta`.
    pub fair_beta: bool,
}

impl ExperimentConfig {
    pub fn new(
        prior: Prior,
        model_a: ObservationModel,
        model_b: ObservationModel,
        policy_a: AgentPolicy,
        policy_b: AgentPolicy,
    ) -> Self {
        ExperimentConfig {
            prior,
            model_a,
            model_b,
            policy_a,
            policy_b,
            costs_a: Costs::default(),
            costs_b: Costs::default(),
            true_state: TrueState::SampledFromPrior,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            seed: 0,
            fair_beta: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.policy_a.validate()?;
        self.policy_b.validate()?;
        if self.fair_beta && self.policy_a.beta != self.policy_b.beta {
            return Err(Error::Config(format!(
                "agents must share beta (got {} and {})",
                self.policy_a.beta, self.policy_b.beta
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        for costs in [&self.costs_a, &self.costs_b] {
            for (what, value) in [("c", costs.continue_cost), ("c_hat", costs.error_cost)] {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(Error::InvalidPositive { what, value });
                }
            }
        }
        Ok(())
    }

    pub fn model(&self, agent: Agent) -> &ObservationModel {
        match agent {
            Agent::A => &self.model_a,
            Agent::B => &self.model_b,
        }
    }

    pub fn policy(&self, agent: Agent) -> &AgentPolicy {
        match agent {
            Agent::A => &self.policy_a,
            Agent::B => &self.policy_b,
        }
    }

    pub fn policy_mut(&mut self, agent: Agent) -> &mut AgentPolicy {
        match agent {
            Agent::A => &mut self.policy_a,
            Agent::B => &mut self.policy_b,
        }
    }

    pub fn costs(&self, agent: Agent) -> &Costs {
        match agent {
            Agent::A => &self.costs_a,
            Agent::B => &self.costs_b,
        }
    }

    /// Both agents stop on their own belief at a shared `beta`; the
    /// simultaneous-stop, `tau = min` and error-bound properties hold exactly.
    pub fn has_structural_guarantees(&self) -> bool {
        self.policy_a.stops_on_own_belief()
            && self.policy_b.stops_on_own_belief()
            && self.policy_a.beta == self.policy_b.beta
    }

    /// Sets `beta` for both agents and moves both thresholds with it.
    pub fn set_beta(&mut self, beta: f64) {
        for policy in [&mut self.policy_a, &mut self.policy_b] {
            policy.beta = beta;
            policy.t_theta0 = beta;
            policy.t_theta1 = beta;
        }
    }
}

/// Per-trial seed for trial `index` of a batch seeded with `base`.
pub fn trial_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index.wrapping_add(0x5EED)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent random streams of one trial: the state of nature, each agent's
/// observations and each agent's signaling coins.
#[derive(Clone, Debug)]
pub struct TrialStreams {
    truth: ChaCha8Rng,
    observations: [ChaCha8Rng; 2],
    coins: [ChaCha8Rng; 2],
}

impl TrialStreams {
    pub fn new(seed: u64) -> Self {
        let base = ChaCha8Rng::seed_from_u64(seed);
        let stream = |k: u64| {
            let mut rng = base.clone();
            rng.set_stream(k);
            rng
        };
        TrialStreams {
            truth: stream(0),
            observations: [stream(1), stream(2)],
            coins: [stream(3), stream(4)],
        }
    }

    pub fn true_state(&mut self, true_state: TrueState, prior: Prior) -> Hypothesis {
        match true_state {
            TrueState::Fixed(h) => h,
            TrueState::SampledFromPrior => prior.sample(self.truth.random()),
        }
    }

    pub fn observe(&mut self, agent: Agent, model: &ObservationModel, truth: Hypothesis) -> usize {
        model.sample(truth, self.observations[agent.index()].random())
    }

    pub fn coin(&mut self, agent: Agent) -> f64 {
        self.coins[agent.index()].random()
    }
}

/// Snapshot of one iteration, indexed by [`Agent::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub iteration: u64,
    pub belief: [Belief; 2],
    /// What each agent transmitted.
    pub signal: [SignaledBelief; 2],
    pub fused: [Belief; 2],
    /// Whether each agent saw the counterpart's signal cross its `beta`.
    pub detected: [bool; 2],
    pub decision: [Decision; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub true_state: Hypothesis,
    /// Shared stopping iteration (or `max_iterations` when truncated).
    pub tau: u64,
    pub truncated: bool,
    /// First iteration at which each agent's local belief alone reaches
    /// `beta`, following its observation stream past `tau` if needed.
    pub tau_solo: [Option<u64>; 2],
    pub initiator: Option<Initiator>,
    pub decision: [Hypothesis; 2],
    /// Mass each agent's local belief puts on the state it did not declare.
    pub conditional_error: [f64; 2],
    pub correct: [bool; 2],
    pub cost: [f64; 2],
    pub trajectory: Vec<Step>,
}

impl TrialRecord {
    pub fn tau_solo(&self, agent: Agent) -> Option<u64> {
        self.tau_solo[agent.index()]
    }

    pub fn decision(&self, agent: Agent) -> Hypothesis {
        self.decision[agent.index()]
    }

    pub fn conditional_error(&self, agent: Agent) -> f64 {
        self.conditional_error[agent.index()]
    }

    pub fn is_initiator(&self, agent: Agent) -> bool {
        self.initiator.is_some_and(|i| i.includes(agent))
    }

    /// Iteration at which `agent` stopped; identical for both agents.
    pub fn stop_iteration(&self, agent: Agent) -> u64 {
        self.trajectory
            .iter()
            .find(|s| s.decision[agent.index()].is_stop())
            .map_or(self.tau, |s| s.iteration)
    }
}

/// True iff the received signal shows a component at or below `beta`.
pub fn detect_counterpart_stop(signal: SignaledBelief, beta: f64) -> bool {
    signal.min_component() <= beta
}

/// `c * tau + c_hat * conditional_error` for `agent`.
pub fn evaluate_cost(record: &TrialRecord, continue_cost: f64, error_cost: f64, agent: Agent) -> f64 {
    continue_cost * record.tau as f64 + error_cost * record.conditional_error(agent)
}

/// Runs one trial with the random streams derived from `seed`.
pub fn run_trial(config: &ExperimentConfig, seed: u64) -> Result<TrialRecord> {
    config.validate()?;
    let mut streams = TrialStreams::new(seed);
    let truth = streams.true_state(config.true_state, config.prior);
    let policies = [&config.policy_a, &config.policy_b];
    let models = [&config.model_a, &config.model_b];

    let mut local = [config.prior.belief(); 2];
    let mut tau_solo = [None, None];
    let mut trajectory = Vec::new();
    let mut n = 0;

    let (last, own) = loop {
        n += 1;
        for agent in Agent::ALL {
            let i = agent.index();
            let symbol = streams.observe(agent, models[i], truth);
            local[i] = bayes_update(local[i], models[i], symbol)?;
            if tau_solo[i].is_none() && local[i].min_component() <= policies[i].beta {
                tau_solo[i] = Some(n);
            }
        }
        // Both signals are computed from this iteration's beliefs before
        // either agent acts on the other's.
        let sent = [
            signal(local[0], policies[0].alpha, streams.coin(Agent::A)),
            signal(local[1], policies[1].alpha, streams.coin(Agent::B)),
        ];
        let fused = [
            fuse(local[0], sent[1], policies[0].w.weight(n)),
            fuse(local[1], sent[0], policies[1].w.weight(n)),
        ];
        let step = Step {
            iteration: n,
            belief: local,
            signal: sent,
            fused,
            detected: [
                detect_counterpart_stop(sent[1], policies[0].beta),
                detect_counterpart_stop(sent[0], policies[1].beta),
            ],
            decision: [decide(fused[0], policies[0]), decide(fused[1], policies[1])],
        };
        let own = step.decision;
        if own.iter().any(Decision::is_stop) || n >= config.max_iterations {
            break (step, own);
        }
        trajectory.push(step);
    };

    let truncated = !own.iter().any(Decision::is_stop);
    let initiator = match (own[0].is_stop(), own[1].is_stop()) {
        (true, true) => Some(Initiator::Both),
        (true, false) => Some(Initiator::A),
        (false, true) => Some(Initiator::B),
        (false, false) => None,
    };
    let decision = [0, 1].map(|i| match own[i] {
        Decision::Stop(h) => h,
        Decision::Continue => final_decision_nonstopper(last.fused[i]),
    });
    let conditional_error = [0, 1].map(|i| local[i].prob(decision[i].other()));
    let tau = n;
    let mut last = last;
    last.decision = decision.map(Decision::Stop);
    trajectory.push(last);

    // Follow each observation stream alone until its own crossing.
    let mut m = n;
    while m < config.max_iterations && tau_solo.iter().any(Option::is_none) {
        m += 1;
        for agent in Agent::ALL {
            let i = agent.index();
            if tau_solo[i].is_some() {
                continue;
            }
            let symbol = streams.observe(agent, models[i], truth);
            local[i] = bayes_update(local[i], models[i], symbol)?;
            if local[i].min_component() <= policies[i].beta {
                tau_solo[i] = Some(m);
            }
        }
    }

    let costs = [&config.costs_a, &config.costs_b];
    Ok(TrialRecord {
        seed,
        true_state: truth,
        tau,
        truncated,
        tau_solo,
        initiator,
        decision,
        conditional_error,
        correct: decision.map(|d| d == truth),
        cost: [0, 1].map(|i| costs[i].continue_cost * tau as f64 + costs[i].error_cost * conditional_error[i]),
        trajectory,
    })
}
