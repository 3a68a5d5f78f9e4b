//! Monte Carlo batches over independent trials.
//!
//! Trial `i` of a batch always runs on [`trial_seed`]`(config.seed, i)`, and
//! per-trial results are folded into a [`Tally`] made only of integer counts
//! and maxima. Merging tallies is therefore commutative and associative, and
//! a summary does not depend on how many threads produced it.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::belief::Hypothesis;
use crate::engine::{run_trial, trial_seed, Agent, ExperimentConfig, Initiator, TrialRecord};
use crate::error::{Error, Result};
use crate::format::sig6;

/// Slack on the structural bounds, absorbing rounding in the belief views.
pub const BOUND_SLACK: f64 = 1e-12;

/// Header of the trajectory export.
pub const TRAJECTORY_HEADER: &str = "trial,iteration,agent,belief_theta1,min_component,signal_theta1,decision";

/// First structurally invalid trial of a batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Violation {
    pub trial: u64,
    pub seed: u64,
    pub kind: ViolationKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    /// Agents stopped at different iterations or `tau != min(tau_solo)`.
    Ordering,
    /// An initiator above `beta` or a non-initiator above one half.
    ErrorBound,
}

/// Order-independent accumulator of trial outcomes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tally {
    pub n_trials: u64,
    pub truncated: u64,
    pub tau_sum: u64,
    pub tau_sum_exclusive: u64,
    pub exclusive_trials: u64,
    pub tau_sum_by_state: [u64; 2],
    pub trials_by_state: [u64; 2],
    pub solo_sum: [u64; 2],
    pub solo_count: [u64; 2],
    pub wins: [u64; 2],
    pub wins_both: u64,
    pub initiator_declarations: u64,
    pub initiator_wrong: u64,
    pub noninitiator_declarations: u64,
    pub noninitiator_wrong: u64,
    pub max_initiator_error: f64,
    pub max_noninitiator_error: f64,
    /// Trials where B's solo crossing came strictly before A's, and so on.
    pub solo_first: [u64; 2],
    pub solo_tied: u64,
    pub checked: bool,
    pub ordering_violations: u64,
    pub bound_violations: u64,
    pub first_violation: Option<Violation>,
}

impl Tally {
    pub fn from_record(index: u64, record: &TrialRecord, beta: f64, check: bool) -> Self {
        let mut t = Tally {
            n_trials: 1,
            checked: check,
            ..Tally::default()
        };
        for agent in Agent::ALL {
            if let Some(solo) = record.tau_solo(agent) {
                t.solo_sum[agent.index()] = solo;
                t.solo_count[agent.index()] = 1;
            }
        }
        if let [Some(a), Some(b)] = record.tau_solo {
            match a.cmp(&b) {
                std::cmp::Ordering::Less => t.solo_first[0] = 1,
                std::cmp::Ordering::Greater => t.solo_first[1] = 1,
                std::cmp::Ordering::Equal => t.solo_tied = 1,
            }
        }
        let Some(initiator) = record.initiator else {
            t.truncated = 1;
            return t;
        };
        t.tau_sum = record.tau;
        let state = record.true_state.index();
        t.tau_sum_by_state[state] = record.tau;
        t.trials_by_state[state] = 1;
        match initiator {
            Initiator::A => t.wins[0] = 1,
            Initiator::B => t.wins[1] = 1,
            Initiator::Both => t.wins_both = 1,
        }
        if initiator != Initiator::Both {
            t.tau_sum_exclusive = record.tau;
            t.exclusive_trials = 1;
        }
        for agent in Agent::ALL {
            let wrong = u64::from(!record.correct[agent.index()]);
            let error = record.conditional_error(agent);
            if record.is_initiator(agent) {
                t.initiator_declarations += 1;
                t.initiator_wrong += wrong;
                t.max_initiator_error = t.max_initiator_error.max(error);
            } else {
                t.noninitiator_declarations += 1;
                t.noninitiator_wrong += wrong;
                t.max_noninitiator_error = t.max_noninitiator_error.max(error);
            }
        }
        if check {
            let kind = structural_violation(record, beta);
            match kind {
                Some(ViolationKind::Ordering) => t.ordering_violations = 1,
                Some(ViolationKind::ErrorBound) => t.bound_violations = 1,
                None => {}
            }
            t.first_violation = kind.map(|kind| Violation {
                trial: index,
                seed: record.seed,
                kind,
            });
        }
        t
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        self.checked = if self.n_trials == 0 {
            other.checked
        } else if other.n_trials == 0 {
            self.checked
        } else {
            self.checked && other.checked
        };
        self.n_trials += other.n_trials;
        self.truncated += other.truncated;
        self.tau_sum += other.tau_sum;
        self.tau_sum_exclusive += other.tau_sum_exclusive;
        self.exclusive_trials += other.exclusive_trials;
        for i in 0..2 {
            self.tau_sum_by_state[i] += other.tau_sum_by_state[i];
            self.trials_by_state[i] += other.trials_by_state[i];
            self.solo_sum[i] += other.solo_sum[i];
            self.solo_count[i] += other.solo_count[i];
            self.wins[i] += other.wins[i];
            self.solo_first[i] += other.solo_first[i];
        }
        self.wins_both += other.wins_both;
        self.solo_tied += other.solo_tied;
        self.initiator_declarations += other.initiator_declarations;
        self.initiator_wrong += other.initiator_wrong;
        self.noninitiator_declarations += other.noninitiator_declarations;
        self.noninitiator_wrong += other.noninitiator_wrong;
        self.max_initiator_error = self.max_initiator_error.max(other.max_initiator_error);
        self.max_noninitiator_error = self.max_noninitiator_error.max(other.max_noninitiator_error);
        self.ordering_violations += other.ordering_violations;
        self.bound_violations += other.bound_violations;
        self.first_violation = match (self.first_violation, other.first_violation) {
            (Some(a), Some(b)) => Some(if a.trial <= b.trial { a } else { b }),
            (a, b) => a.or(b),
        };
        self
    }
}

/// Checks simultaneous stopping, `tau = min(tau_solo)` and the two error
/// bounds on a finished (non-truncated) trial.
pub fn structural_violation(record: &TrialRecord, beta: f64) -> Option<ViolationKind> {
    let same_stop = record.stop_iteration(Agent::A) == record.stop_iteration(Agent::B);
    let min_solo = match record.tau_solo {
        [Some(a), Some(b)] => Some(a.min(b)),
        [Some(a), None] => Some(a),
        [None, Some(b)] => Some(b),
        [None, None] => None,
    };
    if !same_stop || min_solo != Some(record.tau) {
        return Some(ViolationKind::Ordering);
    }
    let bounds_hold = Agent::ALL.iter().all(|&agent| {
        let limit = if record.is_initiator(agent) { beta } else { 0.5 };
        record.conditional_error(agent) <= limit + BOUND_SLACK
    });
    (!bounds_hold).then_some(ViolationKind::ErrorBound)
}

/// Aggregate statistics of a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchSummary {
    pub n_trials: u64,
    pub beta: f64,
    /// Mean shared stopping time over finished trials.
    pub tau_avg: f64,
    /// As `tau_avg`, leaving out trials where both agents crossed together.
    pub tau_avg_exclusive: f64,
    /// `tau_avg` split by the true state.
    pub tau_avg_by_state: [f64; 2],
    pub tau_solo_a_avg: f64,
    pub tau_solo_b_avg: f64,
    pub wins_a: u64,
    pub wins_b: u64,
    pub wins_both: u64,
    /// Fraction of initiator declarations naming the wrong state.
    pub initiator_error_rate: f64,
    pub noninitiator_error_rate: f64,
    pub max_initiator_conditional_error: f64,
    pub max_noninitiator_conditional_error: f64,
    pub truncated_count: u64,
    pub solo_truncated: [u64; 2],
    pub solo_first_a: u64,
    pub solo_first_b: u64,
    pub solo_tied: u64,
    /// Whether the structural checks were applicable and ran.
    pub structural_checks: bool,
    pub ordering_violations: u64,
    pub bound_violations: u64,
    pub first_violation: Option<Violation>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

impl BatchSummary {
    pub fn from_tally(t: &Tally, beta: f64) -> Self {
        let finished = t.n_trials - t.truncated;
        BatchSummary {
            n_trials: t.n_trials,
            beta,
            tau_avg: ratio(t.tau_sum, finished),
            tau_avg_exclusive: ratio(t.tau_sum_exclusive, t.exclusive_trials),
            tau_avg_by_state: [0, 1].map(|i| ratio(t.tau_sum_by_state[i], t.trials_by_state[i])),
            tau_solo_a_avg: ratio(t.solo_sum[0], t.solo_count[0]),
            tau_solo_b_avg: ratio(t.solo_sum[1], t.solo_count[1]),
            wins_a: t.wins[0],
            wins_b: t.wins[1],
            wins_both: t.wins_both,
            initiator_error_rate: ratio(t.initiator_wrong, t.initiator_declarations),
            noninitiator_error_rate: ratio(t.noninitiator_wrong, t.noninitiator_declarations),
            max_initiator_conditional_error: t.max_initiator_error,
            max_noninitiator_conditional_error: t.max_noninitiator_error,
            truncated_count: t.truncated,
            solo_truncated: [0, 1].map(|i| t.n_trials - t.solo_count[i]),
            solo_first_a: t.solo_first[0],
            solo_first_b: t.solo_first[1],
            solo_tied: t.solo_tied,
            structural_checks: t.checked,
            ordering_violations: t.ordering_violations,
            bound_violations: t.bound_violations,
            first_violation: t.first_violation,
        }
    }

    pub fn has_violations(&self) -> bool {
        self.ordering_violations + self.bound_violations > 0
    }

    /// `key = value` lines with fixed key names and six significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut int = |k: &str, v: u64| writeln!(out, "{k} = {v}").unwrap();
        int("n_trials", self.n_trials);
        let mut lines: Vec<(&str, String)> = vec![
            ("beta", sig6(self.beta)),
            ("tau_avg", sig6(self.tau_avg)),
            ("tau_avg_exclusive", sig6(self.tau_avg_exclusive)),
            ("tau_avg_theta0", sig6(self.tau_avg_by_state[0])),
            ("tau_avg_theta1", sig6(self.tau_avg_by_state[1])),
            ("tau_solo_a_avg", sig6(self.tau_solo_a_avg)),
            ("tau_solo_b_avg", sig6(self.tau_solo_b_avg)),
        ];
        let counts = [
            ("wins_a", self.wins_a),
            ("wins_b", self.wins_b),
            ("wins_both", self.wins_both),
        ];
        lines.extend(counts.iter().map(|&(k, v)| (k, v.to_string())));
        lines.extend([
            ("initiator_error_rate", sig6(self.initiator_error_rate)),
            ("noninitiator_error_rate", sig6(self.noninitiator_error_rate)),
            (
                "max_initiator_conditional_error",
                sig6(self.max_initiator_conditional_error),
            ),
            (
                "max_noninitiator_conditional_error",
                sig6(self.max_noninitiator_conditional_error),
            ),
            ("truncated_count", self.truncated_count.to_string()),
            ("solo_truncated_a", self.solo_truncated[0].to_string()),
            ("solo_truncated_b", self.solo_truncated[1].to_string()),
            ("solo_first_a", self.solo_first_a.to_string()),
            ("solo_first_b", self.solo_first_b.to_string()),
            ("solo_tied", self.solo_tied.to_string()),
            ("structural_checks", self.structural_checks.to_string()),
            ("ordering_violations", self.ordering_violations.to_string()),
            ("bound_violations", self.bound_violations.to_string()),
            (
                "first_violation_seed",
                self.first_violation
                    .map_or_else(|| "none".to_string(), |v| v.seed.to_string()),
            ),
        ]);
        for (k, v) in lines {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }
}

/// Folds `n_trials` trials into a summary without keeping the records.
pub fn summarize(config: &ExperimentConfig, n_trials: u64) -> Result<BatchSummary> {
    config.validate()?;
    if n_trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let beta = config.policy_a.beta;
    let check = config.has_structural_guarantees();
    let tally = (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let record = run_trial(config, trial_seed(config.seed, i))?;
            Ok(Tally::from_record(i, &record, beta, check))
        })
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?;
    Ok(BatchSummary::from_tally(&tally, beta))
}

/// A batch with its per-trial records, in trial order.
#[derive(Clone, Debug)]
pub struct Batch {
    pub summary: BatchSummary,
    pub records: Vec<TrialRecord>,
}

pub fn run_batch(config: &ExperimentConfig, n_trials: u64) -> Result<Batch> {
    config.validate()?;
    if n_trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let beta = config.policy_a.beta;
    let check = config.has_structural_guarantees();
    let records = (0..n_trials)
        .into_par_iter()
        .map(|i| run_trial(config, trial_seed(config.seed, i)))
        .collect::<Result<Vec<_>>>()?;
    let tally = records
        .iter()
        .enumerate()
        .map(|(i, r)| Tally::from_record(i as u64, r, beta, check))
        .fold(Tally::default(), Tally::merge);
    Ok(Batch {
        summary: BatchSummary::from_tally(&tally, beta),
        records,
    })
}

/// Re-runs trial `index` of the batch defined by `config`.
pub fn batch_trial(config: &ExperimentConfig, index: u64) -> Result<TrialRecord> {
    run_trial(config, trial_seed(config.seed, index))
}

/// Per-iteration conditional error (smaller local belief component) of each
/// agent, up to and including the stopping iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySeries {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl TrajectorySeries {
    pub fn from_record(record: &TrialRecord) -> Self {
        let series = |i: usize| record.trajectory.iter().map(|s| s.belief[i].min_component()).collect();
        TrajectorySeries {
            a: series(0),
            b: series(1),
        }
    }

    pub fn agent(&self, agent: Agent) -> &[f64] {
        match agent {
            Agent::A => &self.a,
            Agent::B => &self.b,
        }
    }
}

/// Delimited trajectory rows for the selected records, one per
/// (trial, iteration, agent), under [`TRAJECTORY_HEADER`].
pub fn export_trajectories(records: &[TrialRecord], selection: &[usize]) -> Result<String> {
    if let Some(&index) = selection.iter().find(|&&i| i >= records.len()) {
        return Err(Error::MissingTrial {
            index,
            available: records.len(),
        });
    }
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for &trial in selection {
        for step in &records[trial].trajectory {
            for agent in Agent::ALL {
                let i = agent.index();
                writeln!(
                    out,
                    "{trial},{},{},{},{},{},{}",
                    step.iteration,
                    agent.name(),
                    sig6(step.belief[i].p_theta1()),
                    sig6(step.belief[i].min_component()),
                    sig6(step.signal[i].p_theta1()),
                    step.decision[i].label(),
                )
                .unwrap();
            }
        }
    }
    Ok(out)
}

/// Divergences between each agent's two conditional pmfs.
#[derive(Clone, Debug, PartialEq)]
pub struct KlReport {
    /// `D(P(.|theta0) || P(.|theta1))` per agent.
    pub theta0_theta1: [f64; 2],
    /// `D(P(.|theta1) || P(.|theta0))` per agent.
    pub theta1_theta0: [f64; 2],
    /// The agent with the larger `theta0 || theta1` divergence, if any.
    pub predicted_faster: Option<Agent>,
}

pub fn kl_report(config: &ExperimentConfig) -> KlReport {
    let theta0_theta1 = Agent::ALL.map(|a| config.model(a).kl_theta0_theta1());
    let theta1_theta0 = Agent::ALL.map(|a| config.model(a).kl_theta1_theta0());
    let predicted_faster = match theta0_theta1[0].partial_cmp(&theta0_theta1[1]) {
        Some(std::cmp::Ordering::Greater) => Some(Agent::A),
        Some(std::cmp::Ordering::Less) => Some(Agent::B),
        _ => None,
    };
    KlReport {
        theta0_theta1,
        theta1_theta0,
        predicted_faster,
    }
}

impl KlReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for agent in Agent::ALL {
            let i = agent.index();
            let name = agent.name().to_ascii_lowercase();
            writeln!(out, "kl_{name}_theta0_theta1 = {}", sig6(self.theta0_theta1[i])).unwrap();
            writeln!(out, "kl_{name}_theta1_theta0 = {}", sig6(self.theta1_theta0[i])).unwrap();
        }
        let faster = self.predicted_faster.map_or("none", Agent::name);
        writeln!(out, "predicted_faster = {faster}").unwrap();
        out
    }
}

/// Fraction of declared-state errors among `records` for `agent` given `h`.
pub fn empirical_error_rate(records: &[TrialRecord], agent: Agent, h: Option<Hypothesis>) -> f64 {
    let relevant: Vec<_> = records.iter().filter(|r| h.is_none_or(|h| r.true_state == h)).collect();
    let wrong = relevant.iter().filter(|r| !r.correct[agent.index()]).count();
    ratio(wrong as u64, relevant.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{ObservationModel, Prior};
    use crate::policy::AgentPolicy;
    use crate::presets;

    fn informative() -> ExperimentConfig {
        let model = ObservationModel::new(vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        let policy = AgentPolicy::optimal(0.05).unwrap();
        ExperimentConfig::new(Prior::default(), model.clone(), model, policy.clone(), policy)
    }

    #[test]
    fn single_trial_summary() {
        let config = informative();
        let batch = run_batch(&config, 1).unwrap();
        let s = &batch.summary;
        assert_eq!(s.n_trials, 1);
        assert_eq!(s.tau_avg, 1.0);
        assert_eq!(s.tau_solo_a_avg, 1.0);
        assert_eq!(s.tau_solo_b_avg, 1.0);
        assert_eq!(s.wins_both, 1);
        assert_eq!(s.initiator_error_rate, 0.0);
        assert!(s.noninitiator_error_rate.is_nan());
        assert_eq!(s.truncated_count, 0);
        assert!(s.structural_checks);
        assert_eq!(summarize(&config, 1).unwrap().to_text(), s.to_text());
    }

    #[test]
    fn counts_add_up() {
        let config = presets::table1_config(0.05);
        let s = summarize(&config, 3000).unwrap();
        assert_eq!(s.wins_a + s.wins_b + s.wins_both + s.truncated_count, s.n_trials);
        assert_eq!(s.solo_first_a + s.solo_first_b + s.solo_tied, s.n_trials);
        assert!(!s.has_violations());
        assert!(s.tau_avg <= s.tau_solo_a_avg.min(s.tau_solo_b_avg));
        assert!(s.wins_b > s.wins_a);
    }

    #[test]
    fn summary_ignores_thread_count() {
        let config = presets::table1_config(0.05);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let a = one.install(|| summarize(&config, 2000)).unwrap();
        let b = many.install(|| summarize(&config, 2000)).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        let c = many.install(|| run_batch(&config, 2000)).unwrap().summary;
        assert_eq!(a.to_text(), c.to_text());
    }

    #[test]
    fn violations_are_reported_with_seed() {
        let config = presets::table1_config(0.05);
        let mut record = batch_trial(&config, 4).unwrap();
        record.conditional_error = [0.2, 0.2];
        let t = Tally::from_record(4, &record, 0.05, true);
        let v = t.first_violation.unwrap();
        assert_eq!(v.seed, record.seed);
        assert_eq!(v.kind, ViolationKind::ErrorBound);
        record.tau += 1;
        assert_eq!(structural_violation(&record, 0.05), Some(ViolationKind::Ordering));
    }

    #[test]
    fn trajectory_export() {
        let batch = run_batch(&informative(), 2).unwrap();
        assert_eq!(
            export_trajectories(&batch.records, &[]).unwrap(),
            format!("{TRAJECTORY_HEADER}\n")
        );
        let csv = export_trajectories(&batch.records, &[1]).unwrap();
        let rows: Vec<_> = csv.lines().collect();
        assert_eq!(rows.len(), 3);
        let fields: Vec<_> = rows[1].split(',').collect();
        assert_eq!(&fields[..3], &["1", "1", "A"]);
        assert_eq!(fields[4], "0.00000");
        assert!(fields[6] == "stop_theta0" || fields[6] == "stop_theta1");
        assert_eq!(
            export_trajectories(&batch.records, &[2]),
            Err(Error::MissingTrial { index: 2, available: 2 })
        );
        let series = TrajectorySeries::from_record(&batch.records[0]);
        assert_eq!(series.a, vec![0.0]);
    }

    #[test]
    fn kl_report_predicts_b() {
        let config = presets::table1_config(0.05);
        let report = kl_report(&config);
        assert_eq!(report.predicted_faster, Some(Agent::B));
        assert!((report.theta0_theta1[0] - 0.14).abs() <= 0.005);
        assert!((report.theta0_theta1[1] - 0.496).abs() <= 0.005);
        let mut swapped = config.clone();
        std::mem::swap(&mut swapped.model_a, &mut swapped.model_b);
        let r2 = kl_report(&swapped);
        assert_eq!(r2.predicted_faster, Some(Agent::A));
        assert_eq!(r2.theta0_theta1, [report.theta0_theta1[1], report.theta0_theta1[0]]);
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(summarize(&informative(), 0).is_err());
    }
}
