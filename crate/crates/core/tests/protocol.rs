use proptest::prelude::*;
use seqduel_core::experiments::{batch_trial, run_batch, structural_violation, summarize};
use seqduel_core::oracles::{interior_belief_grid, one_step_expectation, oracle_martingale};
use seqduel_core::{
    bayes_update, bernoulli_entropy, kl_divergence, presets, run_trial, Agent, Belief, Hypothesis, Initiator,
    ObservationModel, TrueState,
};

fn model() -> impl Strategy<Value = ObservationModel> {
    (2usize..6)
        .prop_flat_map(|k| {
            (
                prop::collection::vec(0.01f64..1.0, k),
                prop::collection::vec(0.01f64..1.0, k),
            )
        })
        .prop_filter_map("uninformative", |(a, b)| {
            let sa: f64 = a.iter().sum();
            let sb: f64 = b.iter().sum();
            let a: Vec<f64> = a.iter().map(|x| x / sa).collect();
            let b: Vec<f64> = b.iter().map(|x| x / sb).collect();
            ObservationModel::new(a, b).ok()
        })
}

// Multiplies likelihoods in linear space and renormalizes every step.
fn linear_chain(p1: f64, model: &ObservationModel, symbols: &[usize]) -> f64 {
    let (mut m0, mut m1) = (1.0 - p1, p1);
    for &s in symbols {
        m0 *= model.pmf_theta0()[s];
        m1 *= model.pmf_theta1()[s];
        let z = m0 + m1;
        m0 /= z;
        m1 /= z;
    }
    m1
}

proptest! {
    #[test]
    fn log_and_linear_updates_agree(
        model in model(),
        p1 in 0.05f64..0.95,
        draws in prop::collection::vec(0.0f64..1.0, 1..100),
    ) {
        let symbols: Vec<usize> = draws.iter().map(|&u| model.sample(Hypothesis::Theta1, u)).collect();
        let mut belief = Belief::from_p_theta1(p1).unwrap();
        for &s in &symbols {
            belief = bayes_update(belief, &model, s).unwrap();
        }
        let expected = linear_chain(p1, &model, &symbols);
        prop_assert!((belief.p_theta1() - expected).abs() < 1e-9, "{} vs {}", belief.p_theta1(), expected);
    }

    #[test]
    fn posterior_is_a_martingale(model in model(), p1 in 0.001f64..0.999) {
        let belief = Belief::from_p_theta1(p1).unwrap();
        let e = one_step_expectation(&model, belief).unwrap();
        prop_assert!((e - p1).abs() < 1e-10);
    }

    #[test]
    fn kl_is_nonnegative(model in model()) {
        let kl = kl_divergence(model.pmf_theta0(), model.pmf_theta1()).unwrap();
        prop_assert!(kl > 0.0);
        prop_assert_eq!(kl_divergence(model.pmf_theta0(), model.pmf_theta0()).unwrap(), 0.0);
    }

    #[test]
    fn entropy_is_concave(x in 0.0f64..=1.0, y in 0.0f64..=1.0, t in 0.0f64..=1.0) {
        let h = |p: f64| bernoulli_entropy(p).unwrap();
        let mid = t * x + (1.0 - t) * y;
        prop_assert!(h(mid) + 1e-12 >= t * h(x) + (1.0 - t) * h(y));
    }

    #[test]
    fn table1_trials_respect_stopping_rules(seed in any::<u64>()) {
        let config = presets::table1_config(0.05);
        let record = run_trial(&config, seed).unwrap();
        prop_assert!(!record.truncated);
        prop_assert_eq!(structural_violation(&record, 0.05), None);
        let initiator = record.initiator.unwrap();
        let a = record.tau_solo(Agent::A).unwrap();
        let b = record.tau_solo(Agent::B).unwrap();
        prop_assert_eq!(record.tau, a.min(b));
        let expected = match a.cmp(&b) {
            std::cmp::Ordering::Less => Initiator::A,
            std::cmp::Ordering::Greater => Initiator::B,
            std::cmp::Ordering::Equal => Initiator::Both,
        };
        prop_assert_eq!(initiator, expected);
        prop_assert_eq!(record.trajectory.len() as u64, record.tau);
    }
}

#[test]
fn martingale_oracle_passes_on_table1_models() {
    let grid = interior_belief_grid(99);
    for model in [presets::table1_model_a(), presets::table1_model_b()] {
        let report = oracle_martingale(&model, &grid).unwrap();
        assert!(report.max_deviation < 1e-12, "{}", report.max_deviation);
    }
}

#[test]
fn batch_records_match_summary() {
    let config = presets::table1_config(0.05);
    let batch = run_batch(&config, 500).unwrap();
    let summary = summarize(&config, 500).unwrap();
    assert_eq!(batch.summary.to_text(), summary.to_text());
    let mean = batch.records.iter().map(|r| r.tau as f64).sum::<f64>() / 500.0;
    assert!((mean - summary.tau_avg).abs() < 1e-12);
    let again = batch_trial(&config, 123).unwrap();
    assert_eq!(again.tau, batch.records[123].tau);
    assert_eq!(again.seed, batch.records[123].seed);
}

#[test]
fn fixed_state_runs_only_that_state() {
    let mut config = presets::table1_config(0.05);
    config.true_state = TrueState::Fixed(Hypothesis::Theta0);
    let batch = run_batch(&config, 200).unwrap();
    assert!(batch.records.iter().all(|r| r.true_state == Hypothesis::Theta0));
    assert!(batch.summary.tau_avg_by_state[1].is_nan());
}
