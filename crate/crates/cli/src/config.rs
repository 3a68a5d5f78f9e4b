//! Run configuration files.
//!
//! A TOML document; every validation error names the key and the line it
//! sits on.
//!
//! ```toml
//! prior_theta1 = 0.5
//! beta = 0.05
//! true_state = "prior"          # or "fixed:theta0" / "fixed:theta1"
//! max_iterations = 10000
//! trials = 10000
//! seed = 7
//!
//! [costs]
//! c_a = 1.0
//! c_hat_a = 100.0
//! c_b = 1.0
//! c_hat_b = 100.0
//!
//! [[agents]]                    # agent A, then agent B
//! alphabet = 5
//! pmf_theta0 = [0.1, 0.2, 0.1, 0.3, 0.3]
//! pmf_theta1 = [0.2, 0.15, 0.25, 0.2, 0.2]
//! alpha = 0.5
//! w = 1.0                       # or a per-iteration list
//! # t_theta0 / t_theta1 default to beta
//! ```

use std::fmt;
use std::ops::Range;

use serde::Deserialize;
use toml::Spanned;

use seqduel_core::engine::{Costs, DEFAULT_MAX_ITERATIONS};
use seqduel_core::{AgentPolicy, ExperimentConfig, Hypothesis, ObservationModel, Prior, TrueState, WSchedule};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config key `{}` (line {line}): {}", self.key, self.message),
            None => write!(f, "config key `{}`: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub prior_theta1: Spanned<f64>,
    pub agents: Spanned<Vec<AgentSection>>,
    pub beta: Spanned<f64>,
    #[serde(default)]
    pub costs: Option<Spanned<CostSection>>,
    #[serde(default)]
    pub true_state: Option<Spanned<String>>,
    #[serde(default)]
    pub max_iterations: Option<Spanned<u64>>,
    #[serde(default)]
    pub trials: Option<Spanned<u64>>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub alphabet: Spanned<usize>,
    pub pmf_theta0: Spanned<Vec<f64>>,
    pub pmf_theta1: Spanned<Vec<f64>>,
    #[serde(default)]
    pub alpha: Option<Spanned<f64>>,
    #[serde(default)]
    pub w: Option<Spanned<WField>>,
    #[serde(default)]
    pub t_theta0: Option<Spanned<f64>>,
    #[serde(default)]
    pub t_theta1: Option<Spanned<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum WField {
    Constant(f64),
    PerStep(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub c_a: f64,
    pub c_hat_a: f64,
    pub c_b: f64,
    pub c_hat_b: f64,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub beta: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub true_state: Option<TrueState>,
}

/// A validated configuration plus the batch size.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub trials: u64,
}

pub const DEFAULT_TRIALS: u64 = 10_000;

pub fn parse_true_state(s: &str) -> Option<TrueState> {
    match s {
        "prior" => Some(TrueState::SampledFromPrior),
        "fixed:theta0" | "theta0" => Some(TrueState::Fixed(Hypothesis::Theta0)),
        "fixed:theta1" | "theta1" => Some(TrueState::Fixed(Hypothesis::Theta1)),
        _ => None,
    }
}

struct Source<'a>(&'a str);

impl Source<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        self.0[..span.start.min(self.0.len())].matches('\n').count() + 1
    }

    fn err<T>(&self, key: impl Into<String>, span: Range<usize>, message: impl fmt::Display) -> Result<T, ConfigError> {
        Err(ConfigError {
            key: key.into(),
            line: Some(self.line(span)),
            message: message.to_string(),
        })
    }

    fn probability(&self, key: &str, value: &Spanned<f64>) -> Result<f64, ConfigError> {
        let v = *value.get_ref();
        if (0.0..=1.0).contains(&v) {
            Ok(v)
        } else {
            self.err(key, value.span(), format!("must be in [0, 1], got {v}"))
        }
    }
}

/// Guesses the key a TOML error refers to from its message.
fn key_from_message(message: &str) -> String {
    ["unknown field `", "missing field `"]
        .iter()
        .find_map(|prefix| {
            let start = message.find(prefix)? + prefix.len();
            let len = message[start..].find('`')?;
            Some(message[start..start + len].to_string())
        })
        .unwrap_or_else(|| "<document>".to_string())
}

pub fn parse(text: &str, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let src = Source(text);
    let file: RunConfigFile = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        ConfigError {
            key: key_from_message(&message),
            line: e.span().map(|s| src.line(s)),
            message,
        }
    })?;

    let prior_p = src.probability("prior_theta1", &file.prior_theta1)?;
    let prior = Prior::new(prior_p).expect("checked probability");
    let beta = match overrides.beta {
        Some(b) if (0.0..=1.0).contains(&b) => b,
        Some(b) => {
            return Err(ConfigError {
                key: "beta".into(),
                line: None,
                message: format!("--beta must be in [0, 1], got {b}"),
            })
        }
        None => src.probability("beta", &file.beta)?,
    };

    let agents = file.agents.get_ref();
    if agents.len() != 2 {
        return src.err(
            "agents",
            file.agents.span(),
            format!("expected exactly 2 agents, got {}", agents.len()),
        );
    }
    let mut models = Vec::with_capacity(2);
    let mut policies = Vec::with_capacity(2);
    for (i, agent) in agents.iter().enumerate() {
        let key = |k: &str| format!("agents[{i}].{k}");
        let alphabet = *agent.alphabet.get_ref();
        if alphabet == 0 {
            return src.err(key("alphabet"), agent.alphabet.span(), "must be positive");
        }
        for (name, pmf) in [("pmf_theta0", &agent.pmf_theta0), ("pmf_theta1", &agent.pmf_theta1)] {
            if pmf.get_ref().len() != alphabet {
                return src.err(
                    key(name),
                    pmf.span(),
                    format!("has {} entries but alphabet = {alphabet}", pmf.get_ref().len()),
                );
            }
        }
        let model = ObservationModel::new(agent.pmf_theta0.get_ref().clone(), agent.pmf_theta1.get_ref().clone())
            .or_else(|e| {
                use seqduel_core::Error as E;
                let (name, span) = match &e {
                    E::PmfEntry { which: "theta1", .. } | E::PmfSum { which: "theta1", .. } => {
                        ("pmf_theta1", agent.pmf_theta1.span())
                    }
                    E::UninformativeModel => ("pmf_theta1", agent.pmf_theta1.span()),
                    _ => ("pmf_theta0", agent.pmf_theta0.span()),
                };
                src.err(key(name), span, e)
            })?;
        models.push(model);

        let alpha = match &agent.alpha {
            Some(a) => src.probability(&key("alpha"), a)?,
            None => 0.5,
        };
        let w = match &agent.w {
            None => WSchedule::Constant(1.0),
            Some(spanned) => {
                let schedule = match spanned.get_ref() {
                    WField::Constant(w) => WSchedule::Constant(*w),
                    WField::PerStep(ws) => WSchedule::PerStep(ws.clone()),
                };
                let ws: Vec<f64> = match &schedule {
                    WSchedule::Constant(w) => vec![*w],
                    WSchedule::PerStep(ws) => ws.clone(),
                };
                if ws.is_empty() || ws.iter().any(|w| !(0.0..=1.0).contains(w)) {
                    return src.err(
                        key("w"),
                        spanned.span(),
                        "weights must be a non-empty set of values in [0, 1]",
                    );
                }
                schedule
            }
        };
        let threshold = |k: &str, v: &Option<Spanned<f64>>| match v {
            Some(t) => src.probability(&key(k), t),
            None => Ok(beta),
        };
        let t_theta0 = threshold("t_theta0", &agent.t_theta0)?;
        let t_theta1 = threshold("t_theta1", &agent.t_theta1)?;
        policies.push(AgentPolicy::new(alpha, w, t_theta0, t_theta1, beta).expect("fields checked above"));
    }

    let policy_b = policies.pop().expect("two agents");
    let policy_a = policies.pop().expect("two agents");
    let model_b = models.pop().expect("two agents");
    let model_a = models.pop().expect("two agents");
    let mut experiment = ExperimentConfig::new(prior, model_a, model_b, policy_a, policy_b);

    if let Some(costs) = &file.costs {
        let c = costs.get_ref();
        for (k, v) in [
            ("c_a", c.c_a),
            ("c_hat_a", c.c_hat_a),
            ("c_b", c.c_b),
            ("c_hat_b", c.c_hat_b),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return src.err(
                    format!("costs.{k}"),
                    costs.span(),
                    format!("must be finite and non-negative, got {v}"),
                );
            }
        }
        experiment.costs_a = Costs {
            continue_cost: c.c_a,
            error_cost: c.c_hat_a,
        };
        experiment.costs_b = Costs {
            continue_cost: c.c_b,
            error_cost: c.c_hat_b,
        };
    }

    experiment.true_state = match (&overrides.true_state, &file.true_state) {
        (Some(t), _) => *t,
        (None, Some(s)) => match parse_true_state(s.get_ref()) {
            Some(t) => t,
            None => {
                return src.err(
                    "true_state",
                    s.span(),
                    format!(
                        "expected `prior`, `fixed:theta0` or `fixed:theta1`, got `{}`",
                        s.get_ref()
                    ),
                )
            }
        },
        (None, None) => TrueState::SampledFromPrior,
    };

    experiment.max_iterations = match &file.max_iterations {
        Some(m) if *m.get_ref() == 0 => return src.err("max_iterations", m.span(), "must be at least 1"),
        Some(m) => *m.get_ref(),
        None => DEFAULT_MAX_ITERATIONS,
    };

    let trials = match (overrides.trials, &file.trials) {
        (Some(0), _) => {
            return Err(ConfigError {
                key: "trials".into(),
                line: None,
                message: "--trials must be at least 1".into(),
            })
        }
        (Some(n), _) => n,
        (None, Some(t)) if *t.get_ref() == 0 => return src.err("trials", t.span(), "must be at least 1"),
        (None, Some(t)) => *t.get_ref(),
        (None, None) => DEFAULT_TRIALS,
    };
    experiment.seed = overrides.seed.or(file.seed).unwrap_or(0);

    Ok(RunConfig { experiment, trials })
}
