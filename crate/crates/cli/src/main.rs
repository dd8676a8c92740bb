use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use qinsdel::channel::builtin_adversaries;
use qinsdel::experiment::{
    run_experiment, sync_string_for, verify_bounds_exhaustive, write_report, ExperimentConfig, Scheme,
};
use qinsdel::symbols::{Alphabet, MeasurementPolicy};
use qinsdel::sync_string::{construct_sync_string, parse_ratio, Rational};

#[derive(Parser)]
#[command(name = "qinsdel", version, about = "Insertion-deletion channel experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, ValueEnum)]
enum SchemeArg {
    Trivial,
    Sync,
    Qubit,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Scheme {
        match s {
            SchemeArg::Trivial => Scheme::Trivial,
            SchemeArg::Sync => Scheme::Sync,
            SchemeArg::Qubit => Scheme::Qubit,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum PolicyArg {
    Worst,
    Random,
    Fail,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded trials and write JSON-lines records plus a CSV summary.
    Run {
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        #[arg(long)]
        n: usize,
        #[arg(long, value_parser = ratio)]
        delta: Rational,
        #[arg(long, value_parser = ratio, default_value = "1/2")]
        epsilon: Rational,
        #[arg(long, default_value_t = 1)]
        c: u32,
        #[arg(long)]
        l: Option<usize>,
        /// One of the builtin adversaries (see `qinsdel adversaries`).
        #[arg(long)]
        adversary: String,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sync alphabet size for the sync scheme.
        #[arg(long)]
        alphabet: Option<u32>,
        #[arg(long, value_enum, default_value = "worst")]
        policy: PolicyArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the bounds on every noise pattern of a small instance.
    Verify {
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        budget: usize,
        #[arg(long, value_parser = ratio, default_value = "1/2")]
        epsilon: Rational,
        #[arg(long)]
        alphabet: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Construct a sync string and write it as text.
    Syncgen {
        #[arg(long)]
        n: usize,
        #[arg(long, value_parser = ratio)]
        epsilon: Rational,
        #[arg(long)]
        alphabet: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the builtin adversaries.
    Adversaries,
}

fn ratio(s: &str) -> Result<Rational, String> {
    parse_ratio(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            scheme,
            n,
            delta,
            epsilon,
            c,
            l,
            adversary,
            trials,
            seed,
            alphabet,
            policy,
            out,
        } => {
            let mut cfg = ExperimentConfig::new(scheme.into(), n, delta, &adversary);
            cfg.epsilon = epsilon;
            cfg.c = c;
            cfg.l = l;
            cfg.trials = trials;
            cfg.seed = seed;
            cfg.alphabet = alphabet;
            cfg.policy = match policy {
                PolicyArg::Worst => MeasurementPolicy::AdversarialWorstCase,
                PolicyArg::Random => MeasurementPolicy::UniformRandom,
                PolicyArg::Fail => MeasurementPolicy::AlwaysFail,
            };
            let report = run_experiment(&cfg)?;
            let csv = write_report(&report, &out).with_context(|| format!("writing {}", out.display()))?;
            let s = &report.summary;
            println!(
                "{} trials, {} violations, max halfErrors {}, mean halfErrors {:.3}",
                s.trials, s.violations, s.max_half_errors, s.mean_half_errors
            );
            println!("records: {}\nsummary: {}", out.display(), csv.display());
            Ok(s.violations == 0)
        }
        Command::Verify {
            scheme,
            n,
            budget,
            epsilon,
            alphabet,
            seed,
        } => {
            let scheme: Scheme = scheme.into();
            let sync = match scheme {
                Scheme::Sync => Some(sync_string_for(n, epsilon, alphabet, seed)?),
                _ => None,
            };
            let report = verify_bounds_exhaustive(scheme, n, budget, sync.as_ref())?;
            println!(
                "{} patterns, {} cases, max misdecodings {}, max halfErrors {}, {} counterexamples",
                report.patterns,
                report.cases,
                report.max_misdecodings,
                report.max_half_errors,
                report.counterexamples.len()
            );
            for ce in &report.counterexamples {
                println!("{}", describe(ce)?);
            }
            Ok(report.passed())
        }
        Command::Syncgen {
            n,
            epsilon,
            alphabet,
            seed,
            out,
        } => {
            let s = construct_sync_string(n, epsilon, Alphabet::new(alphabet)?, seed, 64)?;
            std::fs::write(&out, s.to_text()).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} symbols to {}", s.len(), out.display());
            Ok(true)
        }
        Command::Adversaries => {
            for a in builtin_adversaries() {
                println!("{}", a.name());
            }
            Ok(true)
        }
    }
}

fn describe(ce: &qinsdel::experiment::Counterexample) -> Result<String> {
    Ok(format!(
        "{} bound={} observed={} pattern={} fill={:?}",
        ce.check, ce.bound, ce.observed, ce.pattern, ce.fill
    ))
}
