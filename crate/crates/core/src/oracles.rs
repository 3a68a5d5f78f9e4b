//! Brute-force checks of the protocol's optimality and safety properties.
//!
//! These run independently of the engine's shortcuts: the signaling optimum is
//! found by exhaustive grid search, the fusion optimum by Monte Carlo over a
//! weight grid, and the martingale premise by exact summation over the
//! alphabet.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::belief::{bayes_update, Belief, ObservationModel, Prior};
use crate::engine::{trial_seed, Agent, ExperimentConfig, TrialRecord, TrialStreams};
use crate::error::{Error, Result};
use crate::experiments::{summarize, BOUND_SLACK};
use crate::format::sig6;
use crate::policy::{decide, fuse, mixture, signal, Decision};
use crate::presets;

/// Tolerance of the exact one-step expectation check.
pub const MARTINGALE_TOLERANCE: f64 = 1e-10;

/// Standard errors of separation a statistical claim needs.
pub const SEPARATION_SIGMAS: f64 = 3.0;

/// An objective evaluated over a strictly increasing parameter grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Index of the optimum (first on ties); `None` when the objective is flat.
    pub best_index: Option<usize>,
    /// Sign of each consecutive difference: -1, 0 or 1.
    pub slopes: Vec<i8>,
}

impl SweepResult {
    fn new(grid: Vec<f64>, values: Vec<f64>, best_index: Option<usize>) -> Self {
        let slopes = values
            .windows(2)
            .map(|w| match w[1].partial_cmp(&w[0]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            })
            .collect();
        SweepResult {
            grid,
            values,
            best_index,
            slopes,
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best_index.map(|i| self.grid[i])
    }

    pub fn is_flat(&self) -> bool {
        self.slopes.iter().all(|&s| s == 0)
    }

    /// Non-decreasing, then non-increasing.
    pub fn is_single_peaked(&self) -> bool {
        let first_down = self.slopes.iter().position(|&s| s < 0).unwrap_or(self.slopes.len());
        self.slopes[first_down..].iter().all(|&s| s <= 0)
    }
}

fn unit_grid(step: f64) -> Result<u64> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::GridStep(step));
    }
    let n = (1.0 / step).round();
    if (n * step - 1.0).abs() > 1e-9 {
        return Err(Error::GridStep(step));
    }
    Ok(n as u64)
}

/// Receiver-side objective `g(alpha)`: the smaller component of the expected
/// signal, i.e. the counterpart's error when it adopts the signal outright.
/// Maximised over `alpha in {0, step, ..., 1}`.
///
/// The weights `k / n` and `(n - k) / n` are formed separately, so
/// `g(alpha) == g(1 - alpha)` holds bit for bit on the grid. For the belief
/// `(0.5, 0.5)` the objective is flat and `best_index` is `None`.
pub fn oracle_alpha_sweep(belief: Belief, grid_step: f64) -> Result<SweepResult> {
    let n = unit_grid(grid_step)?;
    let nf = n as f64;
    let grid: Vec<f64> = (0..=n).map(|k| k as f64 / nf).collect();
    let values: Vec<f64> = (0..=n)
        .map(|k| mixture(belief, k as f64 / nf, (n - k) as f64 / nf).min_component())
        .collect();
    let mut result = SweepResult::new(grid, values, None);
    if !result.is_flat() {
        let best = result
            .values
            .iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v > result.values[best] { i } else { best });
        result.best_index = Some(best);
    }
    Ok(result)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Not enough trials to separate the candidates.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WSweepPoint {
    pub w: f64,
    pub finished: u64,
    pub truncated: u64,
    pub mean_tau: f64,
    pub std_error: f64,
    /// Fraction of the test agent's declarations naming the wrong state.
    pub error_rate: f64,
    /// `error_rate <= beta + 3 sigma` under a binomial at `beta`.
    pub meets_constraint: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WSweepReport {
    pub test_agent: Agent,
    pub beta: f64,
    pub points: Vec<WSweepPoint>,
    /// Mean stopping time over the grid, minimised over feasible points.
    pub sweep: SweepResult,
    pub verdict: Verdict,
    /// `(runner-up mean - mean at w = 1) / combined standard error`.
    pub separation: f64,
}

impl WSweepReport {
    pub fn point(&self, w: f64) -> Option<&WSweepPoint> {
        self.points.iter().find(|p| p.w == w)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("w,finished,truncated,mean_tau,std_error,error_rate,meets_constraint\n");
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                sig6(p.w),
                p.finished,
                p.truncated,
                sig6(p.mean_tau),
                sig6(p.std_error),
                sig6(p.error_rate),
                p.meets_constraint
            )
            .unwrap();
        }
        out
    }
}

#[derive(Clone, Debug, Default)]
struct Moments {
    finished: u64,
    truncated: u64,
    sum: u64,
    sum_sq: u128,
    wrong: u64,
}

impl Moments {
    fn merge(mut self, o: Moments) -> Moments {
        self.finished += o.finished;
        self.truncated += o.truncated;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self.wrong += o.wrong;
        self
    }
}

/// Monte Carlo over constant fusion weights for agent B; see
/// [`oracle_w_sweep_for`].
pub fn oracle_w_sweep(config: &ExperimentConfig, w_grid: &[f64], trials: u64, seed: u64) -> Result<WSweepReport> {
    oracle_w_sweep_for(config, Agent::B, w_grid, trials, seed)
}

/// Runs `trials` paths per weight. On each path the test agent fuses its own
/// belief with the counterpart's realised signal at weight `w` and stops the
/// first time its decision rule fires on the fused belief; the counterpart
/// signals at `alpha = 0.5`. Every weight sees the same paths.
///
/// The verdict passes when `w = 1` meets the error constraint and beats every
/// other feasible weight by at least three combined standard errors.
pub fn oracle_w_sweep_for(
    config: &ExperimentConfig,
    test_agent: Agent,
    w_grid: &[f64],
    trials: u64,
    seed: u64,
) -> Result<WSweepReport> {
    config.validate()?;
    let counterpart = test_agent.other();
    if config.policy(counterpart).alpha != 0.5 {
        return Err(Error::Config("the counterpart must signal with alpha = 0.5".into()));
    }
    if w_grid.iter().any(|w| !(0.0..=1.0).contains(w)) || w_grid.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::Config("w grid must be strictly increasing within [0, 1]".into()));
    }
    let Some(unit) = w_grid.iter().position(|&w| w == 1.0) else {
        return Err(Error::Config("w grid must contain 1".into()));
    };
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }

    let policy = config.policy(test_agent);
    let beta = policy.beta;
    let moments = (0..trials)
        .into_par_iter()
        .map(|i| {
            let s = trial_seed(seed, i);
            w_grid
                .iter()
                .map(|&w| sweep_path(config, test_agent, w, s))
                .collect::<Result<Vec<_>>>()
        })
        .try_reduce(
            || vec![Moments::default(); w_grid.len()],
            |a, b| Ok(a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect()),
        )?;

    let points: Vec<WSweepPoint> = w_grid
        .iter()
        .zip(&moments)
        .map(|(&w, m)| {
            let n = m.finished as f64;
            let mean = m.sum as f64 / n;
            let var = (m.sum_sq as f64 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
            let error_rate = m.wrong as f64 / n;
            let band = beta + SEPARATION_SIGMAS * (beta * (1.0 - beta) / n).sqrt();
            WSweepPoint {
                w,
                finished: m.finished,
                truncated: m.truncated,
                mean_tau: mean,
                std_error: (var / n).sqrt(),
                error_rate,
                meets_constraint: m.finished > 0 && error_rate <= band,
            }
        })
        .collect();

    let feasible: Vec<usize> = (0..points.len()).filter(|&i| points[i].meets_constraint).collect();
    let best_index = feasible
        .iter()
        .copied()
        .reduce(|b, i| if points[i].mean_tau < points[b].mean_tau { i } else { b });
    let sweep = SweepResult::new(w_grid.to_vec(), points.iter().map(|p| p.mean_tau).collect(), best_index);

    let reference = &points[unit];
    let separation = feasible
        .iter()
        .filter(|&&i| i != unit)
        .map(|&i| {
            let p = &points[i];
            (p.mean_tau - reference.mean_tau) / (p.std_error.powi(2) + reference.std_error.powi(2)).sqrt()
        })
        .fold(f64::INFINITY, f64::min);
    let verdict = if !reference.meets_constraint || separation <= -SEPARATION_SIGMAS {
        Verdict::Fail
    } else if separation >= SEPARATION_SIGMAS {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };

    Ok(WSweepReport {
        test_agent,
        beta,
        points,
        sweep,
        verdict,
        separation,
    })
}

fn sweep_path(config: &ExperimentConfig, test_agent: Agent, w: f64, seed: u64) -> Result<Moments> {
    let counterpart = test_agent.other();
    let mut streams = TrialStreams::new(seed);
    let truth = streams.true_state(config.true_state, config.prior);
    let (own_model, other_model) = (config.model(test_agent), config.model(counterpart));
    let mut own = config.prior.belief();
    let mut other = own;
    let policy = config.policy(test_agent);
    let alpha = config.policy(counterpart).alpha;
    for n in 1..=config.max_iterations {
        // Per-agent streams are independent, so w = 1 replays the engine's path.
        own = bayes_update(own, own_model, streams.observe(test_agent, own_model, truth))?;
        other = bayes_update(other, other_model, streams.observe(counterpart, other_model, truth))?;
        let received = signal(other, alpha, streams.coin(counterpart));
        let fused = fuse(own, received, w);
        if let Decision::Stop(h) = decide(fused, policy) {
            return Ok(Moments {
                finished: 1,
                sum: n,
                sum_sq: u128::from(n) * u128::from(n),
                wrong: u64::from(h != truth),
                ..Moments::default()
            });
        }
    }
    Ok(Moments {
        truncated: 1,
        ..Moments::default()
    })
}

/// Quantiles of conditional errors at stopping.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorDistribution {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

impl ErrorDistribution {
    fn from_values(mut v: Vec<f64>) -> Self {
        if v.is_empty() {
            return ErrorDistribution::default();
        }
        v.sort_by(f64::total_cmp);
        let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
        ErrorDistribution {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: q(0.5),
            p90: q(0.9),
            p99: q(0.99),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorBoundReport {
    pub beta: f64,
    pub checked: usize,
    pub skipped_truncated: usize,
    pub initiator: ErrorDistribution,
    pub noninitiator: ErrorDistribution,
}

/// Checks every finished record: initiators at or below `beta`, the other
/// agent at or below one half. The first violation is returned as an error
/// carrying the trial seed.
pub fn oracle_error_bounds(records: &[TrialRecord], beta: f64) -> Result<ErrorBoundReport> {
    let mut initiator = Vec::new();
    let mut noninitiator = Vec::new();
    let mut skipped = 0;
    for r in records {
        if r.truncated {
            skipped += 1;
            continue;
        }
        for agent in Agent::ALL {
            let error = r.conditional_error(agent);
            let (bound, limit, sink) = if r.is_initiator(agent) {
                ("initiator", beta, &mut initiator)
            } else {
                ("non-initiator", 0.5, &mut noninitiator)
            };
            if error > limit + BOUND_SLACK {
                return Err(Error::BoundViolation {
                    bound,
                    seed: r.seed,
                    error,
                    limit,
                });
            }
            sink.push(error);
        }
    }
    Ok(ErrorBoundReport {
        beta,
        checked: records.len() - skipped,
        skipped_truncated: skipped,
        initiator: ErrorDistribution::from_values(initiator),
        noninitiator: ErrorDistribution::from_values(noninitiator),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MartingaleReport {
    /// `(p_theta1, E[p_theta1 after one observation])` per grid belief.
    pub points: Vec<(f64, f64)>,
    pub max_deviation: f64,
}

/// One-step expectation of the posterior by exact summation over the
/// alphabet, weighting each symbol by its predictive probability.
pub fn one_step_expectation(model: &ObservationModel, belief: Belief) -> Result<f64> {
    let mut expected = 0.0;
    for s in 0..model.alphabet_size() {
        let weight = model.marginal(&belief, s);
        if weight == 0.0 {
            continue;
        }
        expected += weight * bayes_update(belief, model, s)?.p_theta1();
    }
    Ok(expected)
}

pub fn oracle_martingale(model: &ObservationModel, belief_grid: &[Belief]) -> Result<MartingaleReport> {
    let mut points = Vec::with_capacity(belief_grid.len());
    let mut max_deviation: f64 = 0.0;
    for &belief in belief_grid {
        let expected = one_step_expectation(model, belief)?;
        let deviation = (expected - belief.p_theta1()).abs();
        if deviation > MARTINGALE_TOLERANCE {
            return Err(Error::MartingaleMismatch {
                p_theta1: belief.p_theta1(),
                expected,
                deviation,
            });
        }
        max_deviation = max_deviation.max(deviation);
        points.push((belief.p_theta1(), expected));
    }
    Ok(MartingaleReport { points, max_deviation })
}

/// `n` beliefs with `p_theta1 = k / (n + 1)`, `k = 1..=n`.
pub fn interior_belief_grid(n: usize) -> Vec<Belief> {
    (1..=n)
        .map(|k| Belief::from_p_theta1(k as f64 / (n + 1) as f64).expect("interior point"))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossingReport {
    pub paths: u64,
    /// `(beta, paths whose posterior reached beta within the horizon)`.
    pub crossed: Vec<(f64, u64)>,
}

impl CrossingReport {
    pub fn fraction(&self, beta: f64) -> Option<f64> {
        self.crossed
            .iter()
            .find(|(b, _)| *b == beta)
            .map(|&(_, c)| c as f64 / self.paths as f64)
    }
}

/// Simulates single-agent posterior paths and counts, per `beta`, those whose
/// smaller component reaches `beta` within `max_iterations`.
pub fn oracle_finite_crossing(
    model: &ObservationModel,
    prior: Prior,
    betas: &[f64],
    paths: u64,
    max_iterations: u64,
    seed: u64,
) -> Result<CrossingReport> {
    let target = betas.iter().copied().fold(f64::INFINITY, f64::min);
    let counts = (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut streams = TrialStreams::new(trial_seed(seed, i));
            let truth = streams.true_state(crate::engine::TrueState::SampledFromPrior, prior);
            let mut belief = prior.belief();
            let mut lowest = belief.min_component();
            for _ in 0..max_iterations {
                if lowest <= target {
                    break;
                }
                belief = bayes_update(belief, model, streams.observe(Agent::A, model, truth))?;
                lowest = lowest.min(belief.min_component());
            }
            Ok(betas.iter().map(|&b| u64::from(lowest <= b)).collect::<Vec<_>>())
        })
        .try_reduce(
            || vec![0; betas.len()],
            |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()),
        )?;
    Ok(CrossingReport {
        paths,
        crossed: betas.iter().copied().zip(counts).collect(),
    })
}

/// Settings for [`run_suites`].
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOptions {
    pub quick: bool,
    pub seed: u64,
    /// The signaling parameter claimed optimal; anything but 0.5 must fail.
    pub claimed_alpha: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            quick: false,
            seed: 2024,
            claimed_alpha: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOutcome {
    pub suite: &'static str,
    pub claim: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Runs every verification suite on the two-agent preset with fixed seeds.
pub fn run_suites(options: &SuiteOptions) -> Result<Vec<SuiteOutcome>> {
    let trials: u64 = if options.quick { 10_000 } else { 100_000 };
    let sweep_trials: u64 = if options.quick { 2_000 } else { 10_000 };
    let paths: u64 = if options.quick { 2_000 } else { 10_000 };
    let mut outcomes = Vec::new();

    // Signaling optimum.
    let mut failure = None;
    for k in (1..=99).filter(|&k| k != 50) {
        let belief = Belief::from_p_theta1(k as f64 / 100.0)?;
        let sweep = oracle_alpha_sweep(belief, 0.01)?;
        let symmetric = (0..sweep.values.len()).all(|i| sweep.values[i] == sweep.values[sweep.values.len() - 1 - i]);
        if sweep.best() != Some(options.claimed_alpha) || !symmetric || !sweep.is_single_peaked() {
            failure = Some(format!(
                "belief p_theta1 = {}: argmax {:?}, claimed {}",
                k as f64 / 100.0,
                sweep.best(),
                options.claimed_alpha
            ));
            break;
        }
    }
    outcomes.push(SuiteOutcome {
        suite: "alpha-optimality",
        claim: "alpha = 0.5 maximises the counterpart's error",
        passed: failure.is_none(),
        detail: failure.unwrap_or_else(|| "98 beliefs x 101 alphas, argmax 0.5, symmetric".into()),
    });

    // Fusion optimum.
    let config = presets::table1_config(0.05);
    let report = oracle_w_sweep(&config, &[0.0, 0.25, 0.5, 0.75, 1.0], sweep_trials, options.seed)?;
    let means: Vec<String> = report
        .points
        .iter()
        .map(|p| format!("w={}:{}", p.w, sig6(p.mean_tau)))
        .collect();
    outcomes.push(SuiteOutcome {
        suite: "fusion-weight",
        claim: "w = 1 minimises stopping time under the error constraint",
        passed: report.verdict == Verdict::Pass,
        detail: format!(
            "{:?}, separation {} sigma, seed {} ({})",
            report.verdict,
            sig6(report.separation),
            options.seed,
            means.join(" ")
        ),
    });

    // Simultaneous stopping and error bounds, from the same batches.
    let mut ordering = Vec::new();
    let mut bounds = Vec::new();
    for beta in [0.05, 0.01] {
        let mut config = presets::table1_config(beta);
        config.seed = options.seed;
        let s = summarize(&config, trials)?;
        let seed = s.first_violation.map_or("none".to_string(), |v| v.seed.to_string());
        ordering.push((
            s.ordering_violations == 0 && s.truncated_count == 0,
            format!(
                "beta {beta}: {} trials, {} ordering violations (first seed {seed})",
                s.n_trials, s.ordering_violations
            ),
        ));
        bounds.push((
            s.bound_violations == 0,
            format!(
                "beta {beta}: max initiator error {}, max other {} (first seed {seed})",
                sig6(s.max_initiator_conditional_error),
                sig6(s.max_noninitiator_conditional_error)
            ),
        ));
    }
    for (suite, claim, results) in [
        (
            "simultaneous-stop",
            "both agents stop together at tau = min(tau_A, tau_B)",
            ordering,
        ),
        ("error-bounds", "initiator error <= beta, other agent <= 0.5", bounds),
    ] {
        outcomes.push(SuiteOutcome {
            suite,
            claim,
            passed: results.iter().all(|(ok, _)| *ok),
            detail: results.into_iter().map(|(_, d)| d).collect::<Vec<_>>().join("; "),
        });
    }

    // Martingale premise and finite crossing.
    let grid = interior_belief_grid(50);
    let mut detail = Vec::new();
    let mut passed = true;
    for (name, model) in [("A", presets::table1_model_a()), ("B", presets::table1_model_b())] {
        match oracle_martingale(&model, &grid) {
            Ok(r) => detail.push(format!("model {name}: max deviation {}", sig6(r.max_deviation))),
            Err(e) => {
                passed = false;
                detail.push(format!("model {name}: {e}"));
            }
        }
        let crossing = oracle_finite_crossing(
            &model,
            Prior::default(),
            &[0.1, 0.05, 0.01],
            paths,
            10_000,
            options.seed,
        )?;
        for &(beta, _) in &crossing.crossed {
            let f = crossing.fraction(beta).unwrap_or(0.0);
            if f < 0.999 {
                passed = false;
                detail.push(format!(
                    "model {name}: only {f} of paths reach {beta} (seed {})",
                    options.seed
                ));
            }
        }
    }
    outcomes.push(SuiteOutcome {
        suite: "martingale",
        claim: "posterior is a martingale and reaches beta in finite time",
        passed,
        detail: detail.join("; "),
    });
    Ok(outcomes)
}
