use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use serde_json::json;

mod commands;
mod config;
mod output;

use config::{Command, ExperimentConfig};

/// Invalid configuration. Exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// A computation that ran but did not produce a usable answer. Exit status 3.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

#[derive(Debug, Parser)]
#[command(name = "toriclab", version, about = "Failure-rate studies of square and rotated toric codes")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Run the experiment described by a JSON config (as found in any output sidecar).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,

    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true, env = "TORICLAB_WORKERS")]
    workers: Option<usize>,
}

fn load(cli: Cli) -> anyhow::Result<ExperimentConfig> {
    let cfg = match (cli.config, cli.command) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let doc: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            // a sidecar carries the config under "config"
            let doc = doc.get("config").cloned().unwrap_or(doc);
            let mut cfg: ExperimentConfig =
                serde_json::from_value(doc).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            if cli.workers.is_some() {
                cfg.workers = cli.workers;
            }
            cfg
        }
        (None, Some(command)) => ExperimentConfig { seed: cli.seed, out: cli.out, workers: cli.workers, command },
        (Some(_), Some(_)) => return Err(ConfigError("give either --config or a subcommand, not both".into()).into()),
        (None, None) => return Err(ConfigError("no subcommand given (try --help)".into()).into()),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(err: &anyhow::Error) -> (u8, &'static str) {
    if err.downcast_ref::<ConfigError>().is_some() {
        return (2, "config");
    }
    if err.downcast_ref::<NumericalFailure>().is_some() {
        return (3, "numerical");
    }
    if let Some(e) = err.downcast_ref::<toriclab::Error>() {
        use toriclab::Error::*;
        return match e {
            InvalidDistance(_) | InvalidVertex { .. } | InvalidProbability(_) | InvalidInput(_) | Unsupported(_)
            | GuardExceeded { .. } => (2, "config"),
            _ => (3, "numerical"),
        };
    }
    (1, "io")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load(cli).and_then(|cfg| {
        if let Some(w) = cfg.workers {
            rayon::ThreadPoolBuilder::new().num_threads(w).build_global()?;
        }
        commands::run(&cfg)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = exit_code(&err);
            eprintln!("{}", json!({ "error": kind, "message": format!("{err:#}"), "exit_code": code }));
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&ConfigError("x".into()).into()).0, 2);
        assert_eq!(exit_code(&NumericalFailure("x".into()).into()).0, 3);
        assert_eq!(exit_code(&toriclab::Error::InvalidDistance(3).into()).0, 2);
        assert_eq!(exit_code(&toriclab::Error::NoRoot("x".into()).into()).0, 3);
    }

    #[test]
    fn cli_parses_into_config() {
        let cli = Cli::parse_from(["toriclab", "mc", "--d", "4,6", "--p", "0.05", "--eta", "1e4", "--seed", "7"]);
        let cfg = load(cli).unwrap();
        assert_eq!(cfg.seed, 7);
        match cfg.command {
            Command::Mc(a) => {
                assert_eq!(a.d, vec![4, 6]);
                assert_eq!(a.eta, 10_000);
            }
            other => panic!("{other:?}"),
        }
    }
}
