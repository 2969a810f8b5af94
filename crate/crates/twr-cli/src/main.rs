//! `twr`: file-based front end for two-way regularized reconstruction.
//!
//! stdout carries machine-readable JSON only (the primary report of the
//! subcommand); human-facing text and structured errors go to stderr. Exit
//! codes: 0 success, 2 configuration error, 3 numeric failure, 4 I/O
//! failure.

mod commands;
mod config;
mod error;
mod model_io;
mod reports;

use commands::{cmd_compare, cmd_evaluate, cmd_reconstruct, cmd_simulate, cmd_tune};
use config::{
    load_config, CompareConfig, EvaluateConfig, Overrides, ReconstructConfig, SimulateConfig,
    TuneConfig,
};
use error::CliError;

const USAGE: &str = "usage: twr <command> --config <path.json> [overrides]

commands:
  simulate     build a forward operator, truth, and noisy data files
  reconstruct  invert one data set with one method
  tune         select penalty weights by cross-validation and GCV
  evaluate     score an estimate file against the truth file
  compare      score several methods over repeated noise draws

overrides (win over config-file fields where they apply):
  --mu1 <x>     spatial penalty weight
  --mu2 <x>     temporal penalty weight
  --method <m>  mne | twr | towr | sowr | mne+twr | mne+sowr
  --snr-db <x>  signal-to-noise ratio in dB (`inf` for noiseless)
  --seed <n>    noise seed (simulate), fold seed (tune), base seed (compare)
  --out <dir>   output directory

exit codes: 0 success, 2 config error, 3 numeric failure, 4 I/O failure.
stdout is the subcommand's report JSON; errors are JSON on stderr.
";

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(run(&args));
}

fn run(args: &[String]) -> i32 {
    if args.is_empty() {
        eprint!("{USAGE}");
        return 2;
    }
    if matches!(args[0].as_str(), "--help" | "-h" | "help") {
        eprint!("{USAGE}");
        return 0;
    }
    let command = args[0].as_str();
    match parse_overrides(&args[1..]).and_then(|ov| dispatch(command, ov)) {
        Ok(report) => {
            print!("{report}");
            0
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            err.exit_code()
        }
    }
}

fn parse_f64(flag: &str, token: &str) -> Result<f64, CliError> {
    token
        .parse()
        .map_err(|_| CliError::Config(format!("{flag} expects a number, got {token:?}")))
}

fn parse_u64(flag: &str, token: &str) -> Result<u64, CliError> {
    token
        .parse()
        .map_err(|_| CliError::Config(format!("{flag} expects a nonnegative integer, got {token:?}")))
}

fn parse_overrides(args: &[String]) -> Result<Overrides, CliError> {
    let mut ov = Overrides::default();
    let mut i = 0;
    while i < args.len() {
        let flag = args[i].as_str();
        let value = args
            .get(i + 1)
            .ok_or_else(|| CliError::Config(format!("{flag} needs a value")))?;
        match flag {
            "--config" => ov.config = Some(value.clone()),
            "--mu1" => ov.mu1 = Some(parse_f64(flag, value)?),
            "--mu2" => ov.mu2 = Some(parse_f64(flag, value)?),
            "--method" => ov.method = Some(value.clone()),
            "--snr-db" => ov.snr_db = Some(parse_f64(flag, value)?),
            "--seed" => ov.seed = Some(parse_u64(flag, value)?),
            "--out" => ov.out = Some(value.clone()),
            other => {
                return Err(CliError::Config(format!(
                    "unknown flag {other:?}; see `twr --help`"
                )));
            }
        }
        i += 2;
    }
    Ok(ov)
}

/// `--snr-db inf` means noiseless, which the configs spell as `null`.
fn snr_override(snr: f64) -> Option<f64> {
    if snr == f64::INFINITY {
        None
    } else {
        Some(snr)
    }
}

fn dispatch(command: &str, ov: Overrides) -> Result<String, CliError> {
    let config_path = ov.config.clone().ok_or_else(|| {
        CliError::Config(format!("`twr {command}` needs --config <path.json>"))
    })?;
    match command {
        "simulate" => {
            ov.reject_unused(command, &["--mu1", "--mu2", "--method"])?;
            let mut cfg: SimulateConfig = load_config(&config_path)?;
            if let Some(seed) = ov.seed {
                cfg.scenario.noise_seed = seed;
            }
            if let Some(snr) = ov.snr_db {
                cfg.scenario.snr_db = snr_override(snr);
            }
            if let Some(out) = ov.out {
                cfg.out = out;
            }
            cmd_simulate(cfg)
        }
        "reconstruct" => {
            ov.reject_unused(command, &["--snr-db", "--seed"])?;
            let mut cfg: ReconstructConfig = load_config(&config_path)?;
            if let Some(method) = ov.method {
                cfg.method = method;
            }
            if let Some(mu1) = ov.mu1 {
                cfg.solver.mu1 = mu1;
            }
            if let Some(mu2) = ov.mu2 {
                cfg.solver.mu2 = mu2;
            }
            if let Some(out) = ov.out {
                cfg.out = out;
            }
            cmd_reconstruct(cfg)
        }
        "tune" => {
            ov.reject_unused(command, &["--method", "--snr-db"])?;
            let mut cfg: TuneConfig = load_config(&config_path)?;
            if let Some(mu1) = ov.mu1 {
                cfg.solver.mu1 = mu1;
            }
            if let Some(mu2) = ov.mu2 {
                cfg.solver.mu2 = mu2;
            }
            if let Some(seed) = ov.seed {
                cfg.tuning.fold_seed = seed;
            }
            if let Some(out) = ov.out {
                cfg.out = out;
            }
            cmd_tune(cfg)
        }
        "evaluate" => {
            ov.reject_unused(command, &["--mu1", "--mu2", "--method", "--snr-db", "--seed"])?;
            let mut cfg: EvaluateConfig = load_config(&config_path)?;
            if let Some(out) = ov.out {
                cfg.out = out;
            }
            cmd_evaluate(cfg)
        }
        "compare" => {
            let mut cfg: CompareConfig = load_config(&config_path)?;
            if let Some(method) = ov.method {
                cfg.methods = vec![method];
            }
            if let Some(mu1) = ov.mu1 {
                cfg.solver.mu1 = mu1;
            }
            if let Some(mu2) = ov.mu2 {
                cfg.solver.mu2 = mu2;
            }
            if let Some(snr) = ov.snr_db {
                cfg.snr_db = snr_override(snr);
            }
            if let Some(seed) = ov.seed {
                cfg.base_seed = seed;
            }
            if let Some(out) = ov.out {
                cfg.out = out;
            }
            cmd_compare(cfg)
        }
        other => Err(CliError::Config(format!(
            "unknown command {other:?}; see `twr --help`"
        ))),
    }
}
