use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use seqduel_core::engine::Agent;
use seqduel_core::experiments::{batch_trial, export_trajectories, kl_report, summarize, BatchSummary};
use seqduel_core::format::sig6;
use seqduel_core::oracles::{oracle_alpha_sweep, oracle_w_sweep_for, run_suites, SuiteOptions};
use seqduel_core::presets::{self, relative_band};
use seqduel_core::{Belief, ExperimentConfig, Hypothesis, TrueState};

use crate::config::{self, Overrides};
use crate::{AgentArg, ReproduceArgs, RunArgs, SweepCommand, TrueStateArg, VerifyArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INVARIANT: u8 = 3;
pub const EXIT_BAND: u8 = 4;

const DEFAULT_REPRODUCE_SEED: u64 = 7;

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<(), u8> {
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(dir.join(name), contents))
        .map_err(|e| {
            eprintln!("error: cannot write {}: {e}", dir.join(name).display());
            EXIT_IO
        })
}

fn violation_message(summary: &BatchSummary) -> Option<String> {
    let v = summary.first_violation?;
    Some(format!(
        "invariant violation ({:?}) in trial {} with seed {}; {} ordering and {} bound violations in total",
        v.kind, v.trial, v.seed, summary.ordering_violations, summary.bound_violations
    ))
}

pub fn run(args: RunArgs) -> u8 {
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read config {}: {e}", args.config.display());
            return EXIT_CONFIG;
        }
    };
    let overrides = Overrides {
        beta: args.beta,
        trials: args.trials,
        seed: args.common.seed,
        true_state: args.true_state.map(|t| match t {
            TrueStateArg::Theta0 => TrueState::Fixed(Hypothesis::Theta0),
            TrueStateArg::Theta1 => TrueState::Fixed(Hypothesis::Theta1),
            TrueStateArg::Prior => TrueState::SampledFromPrior,
        }),
    };
    let rc = match config::parse(&text, &overrides) {
        Ok(rc) => rc,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return EXIT_CONFIG;
        }
    };
    let summary = match summarize(&rc.experiment, rc.trials) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let text = summary.to_text();
    print!("{text}");

    if let Some(&index) = args.trajectories.iter().find(|&&i| i as u64 >= rc.trials) {
        eprintln!(
            "error: trajectory trial {index} is outside the batch of {} trials",
            rc.trials
        );
        return EXIT_CONFIG;
    }
    if let Some(dir) = &args.common.out {
        if let Err(code) = write_out(dir, "summary.toml", &text) {
            return code;
        }
        if !args.trajectories.is_empty() {
            let records: Result<Vec<_>, _> = args
                .trajectories
                .iter()
                .map(|&i| batch_trial(&rc.experiment, i as u64))
                .collect();
            let csv = records.and_then(|records| {
                let positions: Vec<usize> = (0..records.len()).collect();
                export_trajectories(&records, &positions)
            });
            let csv = match csv {
                // Rows carry positions in the selection; rewrite to batch indices.
                Ok(csv) => relabel_trials(&csv, &args.trajectories),
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_CONFIG;
                }
            };
            if let Err(code) = write_out(dir, "trajectories.csv", &csv) {
                return code;
            }
        }
    }

    if let Some(message) = violation_message(&summary) {
        eprintln!("error: {message}");
        return EXIT_INVARIANT;
    }
    EXIT_OK
}

fn relabel_trials(csv: &str, indices: &[usize]) -> String {
    let mut lines = csv.lines();
    let mut out = String::new();
    if let Some(header) = lines.next() {
        out.push_str(header);
        out.push('\n');
    }
    for line in lines {
        let (pos, rest) = line.split_once(',').expect("trajectory rows have columns");
        let pos: usize = pos.parse().expect("numeric trial column");
        writeln!(out, "{},{rest}", indices[pos]).unwrap();
    }
    out
}

pub fn sweep(cmd: SweepCommand) -> u8 {
    match cmd {
        SweepCommand::Alpha { belief, step } => {
            let belief = match Belief::from_p_theta1(belief) {
                Ok(b) => b,
                Err(e) => {
                    eprintln!("error: --belief: {e}");
                    return EXIT_CONFIG;
                }
            };
            let result = match oracle_alpha_sweep(belief, step) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: --step: {e}");
                    return EXIT_CONFIG;
                }
            };
            println!("alpha,g");
            for (a, g) in result.grid.iter().zip(&result.values) {
                println!("{},{}", sig6(*a), sig6(*g));
            }
            match result.best() {
                Some(a) => println!("# argmax = {}", sig6(a)),
                None => println!("# argmax = none (objective is flat)"),
            }
            println!("# single_peaked = {}", result.is_single_peaked());
            EXIT_OK
        }
        SweepCommand::W {
            config,
            grid,
            beta,
            trials,
            agent,
            common,
        } => {
            let mut experiment = match &config {
                None => presets::table1_config(0.05),
                Some(path) => {
                    let text = match fs::read_to_string(path) {
                        Ok(t) => t,
                        Err(e) => {
                            eprintln!("error: cannot read config {}: {e}", path.display());
                            return EXIT_CONFIG;
                        }
                    };
                    match config::parse(&text, &Overrides::default()) {
                        Ok(rc) => rc.experiment,
                        Err(e) => {
                            eprintln!("error: {}: {e}", path.display());
                            return EXIT_CONFIG;
                        }
                    }
                }
            };
            if let Some(beta) = beta {
                experiment.set_beta(beta);
            }
            let seed = common.seed.unwrap_or(experiment.seed);
            let agent = match agent {
                AgentArg::A => Agent::A,
                AgentArg::B => Agent::B,
            };
            let report = match oracle_w_sweep_for(&experiment, agent, &grid, trials, seed) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_CONFIG;
                }
            };
            let mut text = report.to_text();
            writeln!(text, "# test_agent = {}", agent.name()).unwrap();
            writeln!(text, "# verdict = {:?}", report.verdict).unwrap();
            writeln!(text, "# separation_sigmas = {}", sig6(report.separation)).unwrap();
            print!("{text}");
            if let Some(dir) = &common.out {
                if let Err(code) = write_out(dir, "w_sweep.csv", &text) {
                    return code;
                }
            }
            EXIT_OK
        }
    }
}

pub fn verify(args: VerifyArgs) -> u8 {
    let options = SuiteOptions {
        quick: args.quick,
        seed: args.common.seed.unwrap_or(SuiteOptions::default().seed),
        claimed_alpha: if args.inject_alpha_bug { 0.9 } else { 0.5 },
    };
    let outcomes = match run_suites(&options) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVARIANT;
        }
    };
    let mut text = String::new();
    writeln!(text, "{:<18} {:<6} {:<58} detail", "suite", "result", "claim").unwrap();
    for o in &outcomes {
        let result = if o.passed { "PASS" } else { "FAIL" };
        writeln!(text, "{:<18} {:<6} {:<58} {}", o.suite, result, o.claim, o.detail).unwrap();
    }
    print!("{text}");
    if let Some(dir) = &args.common.out {
        if let Err(code) = write_out(dir, "verify.txt", &text) {
            return code;
        }
    }
    if outcomes.iter().all(|o| o.passed) {
        EXIT_OK
    } else {
        EXIT_INVARIANT
    }
}

struct Row {
    metric: String,
    reference: f64,
    measured: f64,
    band: (f64, f64),
}

impl Row {
    fn ok(&self) -> bool {
        self.band.0 <= self.measured && self.measured <= self.band.1
    }
}

pub fn reproduce(args: ReproduceArgs) -> u8 {
    if args.trials == 0 {
        eprintln!("error: --trials must be at least 1");
        return EXIT_CONFIG;
    }
    let seed = args.common.seed.unwrap_or(DEFAULT_REPRODUCE_SEED);
    let mut out = String::new();
    let mut rows = Vec::new();
    let mut files: Vec<(String, String)> = Vec::new();

    let base = presets::table1_config(0.05);
    let kl = kl_report(&base);
    let kl_text = kl.to_text();
    writeln!(out, "# divergences (nats)\n{kl_text}").unwrap();
    files.push(("kl.txt".into(), kl_text));
    for agent in Agent::ALL {
        let reference = presets::TABLE1_REFERENCE_KL[agent.index()];
        rows.push(Row {
            metric: format!("kl_{}", agent.name().to_ascii_lowercase()),
            reference,
            measured: kl.theta0_theta1[agent.index()],
            band: (reference - presets::KL_BAND, reference + presets::KL_BAND),
        });
    }

    for &(beta, tau, tau_a, tau_b) in &presets::TABLE1_REFERENCE {
        let mut config: ExperimentConfig = presets::table1_config(beta);
        config.seed = seed;
        let summary = match summarize(&config, args.trials) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_INVARIANT;
            }
        };
        if let Some(message) = violation_message(&summary) {
            eprintln!("error: beta {beta}: {message}");
            return EXIT_INVARIANT;
        }
        let text = summary.to_text();
        writeln!(out, "# summary, beta = {beta}\n{text}").unwrap();
        files.push((format!("summary_beta_{beta}.toml"), text));
        for (metric, reference, measured) in [
            ("tau_avg", tau, summary.tau_avg),
            ("tau_solo_a_avg", tau_a, summary.tau_solo_a_avg),
            ("tau_solo_b_avg", tau_b, summary.tau_solo_b_avg),
        ] {
            rows.push(Row {
                metric: format!("{metric}@{beta}"),
                reference,
                measured,
                band: relative_band(reference, presets::TAU_BAND),
            });
        }
        if beta == 0.05 {
            let fraction = summary.solo_first_b as f64 / summary.n_trials as f64;
            rows.push(Row {
                metric: format!("b_first_fraction@{beta}"),
                reference: presets::B_FIRST_MIN_FRACTION,
                measured: fraction,
                band: (presets::B_FIRST_MIN_FRACTION, 1.0),
            });
            let records: Result<Vec<_>, _> = (0..2u64.min(args.trials)).map(|i| batch_trial(&config, i)).collect();
            let selection: Vec<usize> = (0..2usize.min(args.trials as usize)).collect();
            match records.and_then(|r| export_trajectories(&r, &selection)) {
                Ok(csv) => files.push((format!("trajectories_beta_{beta}.csv"), csv)),
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_INVARIANT;
                }
            }
        }
    }

    writeln!(
        out,
        "# comparison ({} trials, seed {seed})\n{:<24} {:>10} {:>10} {:>24}  status",
        args.trials, "metric", "reference", "measured", "band"
    )
    .unwrap();
    for row in &rows {
        let band = format!("[{}, {}]", sig6(row.band.0), sig6(row.band.1));
        writeln!(
            out,
            "{:<24} {:>10} {:>10} {:>24}  {}",
            row.metric,
            sig6(row.reference),
            sig6(row.measured),
            band,
            if row.ok() { "ok" } else { "MISS" }
        )
        .unwrap();
    }
    print!("{out}");
    if let Some(dir) = &args.common.out {
        files.push(("report.txt".into(), out.clone()));
        for (name, contents) in &files {
            if let Err(code) = write_out(dir, name, contents) {
                return code;
            }
        }
    }
    if rows.iter().all(Row::ok) {
        EXIT_OK
    } else {
        EXIT_BAND
    }
}
