use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use toriclab::{CodeGeometry, DecoderPolicy, NoiseParams, Orientation};

use crate::ConfigError;

/// Everything a run depends on. Written verbatim into every JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Thread count; `None` lets the pool decide. Never affects the data.
    pub workers: Option<usize>,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Command {
    /// Exhaustive failure counts at fixed weight (Tables I and II).
    Enumerate(EnumerateArgs),
    /// Closed-form minimum-weight counts and their bounds.
    Pathcount(PathcountArgs),
    /// Monte Carlo failure rates, per-p ansatz fits and crossings.
    Mc(McArgs),
    /// Monte Carlo plus the finite-size threshold fit.
    Threshold(ThresholdArgs),
    /// Low-p failure rate by splitting.
    Split(SplitArgs),
    /// Self-avoiding cycle counts and their size extrapolation.
    Walks(WalksArgs),
    /// Entropic failure model: bounds, p_c, ξ(p).
    Model(ModelArgs),
    /// Quick oracle checks.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Enumerate(_) => "enumerate",
            Command::Pathcount(_) => "pathcount",
            Command::Mc(_) => "mc",
            Command::Threshold(_) => "threshold",
            Command::Split(_) => "split",
            Command::Walks(_) => "walks",
            Command::Model(_) => "model",
            Command::Verify(_) => "verify",
        }
    }
}

/// Accepts `100000`, `1e5` and `1_000_000`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let t = s.replace('_', "");
    if let Ok(v) = t.parse::<u64>() {
        return Ok(v);
    }
    match t.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 => Ok(v as u64),
        _ => Err(format!("'{s}' is not a nonnegative integer")),
    }
}

fn parse_orientation(s: &str) -> Result<Orientation, String> {
    s.parse().map_err(|e: toriclab::Error| e.to_string())
}

fn parse_policy(s: &str) -> Result<DecoderPolicy, String> {
    s.parse().map_err(|e: toriclab::Error| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EnumerateArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_orientation, default_value = "rotated")]
    pub orientation: Vec<Orientation>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub d: Vec<usize>,
    /// Error weights; defaults to d/2.
    #[arg(long, value_delimiter = ',')]
    pub w: Vec<usize>,
    /// implemented, best, worst. best/worst exist only at w = d/2.
    #[arg(long, value_delimiter = ',', value_parser = parse_policy, default_value = "implemented")]
    pub policy: Vec<DecoderPolicy>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PathcountArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![4, 6, 8, 10, 12, 14, 16, 20, 24, 32, 40])]
    pub d: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct McArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_orientation, default_value = "square,rotated")]
    pub orientation: Vec<Orientation>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub d: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub p: Vec<f64>,
    /// Trials per (orientation, d, p).
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    pub eta: u64,
    /// Threshold used by the per-p ansatz fits.
    #[arg(long, default_value_t = 0.1035)]
    pub p_th: f64,
    #[arg(long, value_parser = parse_count, default_value = "1024")]
    pub chunk: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ThresholdArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_orientation, default_value = "square,rotated")]
    pub orientation: Vec<Orientation>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![8, 10, 12, 14, 16])]
    pub d: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.095, 0.0975, 0.1, 0.1025, 0.105])]
    pub p: Vec<f64>,
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    pub eta: u64,
    #[arg(long, value_parser = parse_count, default_value = "1024")]
    pub chunk: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SplitArgs {
    #[arg(long, value_parser = parse_orientation, default_value = "rotated")]
    pub orientation: Orientation,
    #[arg(long)]
    pub d: usize,
    /// Rate of the Monte Carlo anchor.
    #[arg(long, default_value_t = 0.05)]
    pub p_anchor: f64,
    /// Target rate.
    #[arg(long, default_value_t = 2e-4)]
    pub p0: f64,
    /// Largest ratio between neighbouring rates.
    #[arg(long, default_value_t = 2.0)]
    pub factor: f64,
    /// Monte Carlo trials for the anchor.
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    pub anchor_eta: u64,
    /// Proposals per chain.
    #[arg(long, value_parser = parse_count, default_value = "10000000")]
    pub steps: u64,
    #[arg(long, default_value_t = 0.05)]
    pub burn_in: f64,
    /// Record every k-th state; one sweep by default.
    #[arg(long, value_parser = parse_count)]
    pub thin: Option<u64>,
    #[arg(long, default_value_t = 32)]
    pub batches: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct WalksArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_orientation, default_value = "rotated")]
    pub orientation: Vec<Orientation>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub d: Vec<usize>,
    /// Longest cycle, in units of √(n/2).
    #[arg(long, default_value_t = 3.0)]
    pub lhat_max: f64,
    /// Walk samples per winding family.
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    pub samples: u64,
    /// Keep quadrupling the budget, up to `samples`, until σ/N̂ reaches this.
    #[arg(long)]
    pub rel: Option<f64>,
    /// l̂ values for the size extrapolation.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 1.5, 2.0, 2.5, 3.0])]
    pub lhat: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelOp {
    /// p below which the path-counting bound vanishes.
    ThresholdBound,
    /// p where the model with ξ = `--xi` stops decaying.
    CriticalP,
    /// ξ(p) from Monte Carlo failure rates.
    Xi,
    /// Path-counting upper bound on the failure rate.
    Bound,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub op: ModelOp,
    /// Connective constant.
    #[arg(long, default_value_t = toriclab::model::CONNECTIVE_CONSTANT)]
    pub c: f64,
    #[arg(long, default_value_t = 1.2471)]
    pub xi: f64,
    #[arg(long, value_parser = parse_orientation, default_value = "rotated")]
    pub orientation: Orientation,
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.02, 0.05, 0.08, 0.1])]
    pub p: Vec<f64>,
    /// Monte Carlo trials per p for `xi`.
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    pub eta: u64,
    /// Walk samples per winding family for N_con.
    #[arg(long, value_parser = parse_count, default_value = "1000000")]
    pub samples: u64,
    /// Use exhaustive cycle counts (small d only) for `bound`.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    /// Monte Carlo trials for the sampled checks.
    #[arg(long, value_parser = parse_count, default_value = "200000")]
    pub eta: u64,
}

fn check_geometry(o: Orientation, d: usize) -> Result<(), ConfigError> {
    CodeGeometry::new(o, d).map(|_| ()).map_err(|e| ConfigError(e.to_string()))
}

fn check_rate(p: f64) -> Result<(), ConfigError> {
    NoiseParams::new(p).map(|_| ()).map_err(|e| ConfigError(e.to_string()))
}

fn nonempty<T>(name: &str, v: &[T]) -> Result<(), ConfigError> {
    if v.is_empty() {
        return Err(ConfigError(format!("--{name} needs at least one value")));
    }
    Ok(())
}

fn positive(name: &str, v: u64) -> Result<(), ConfigError> {
    if v == 0 {
        return Err(ConfigError(format!("--{name} must be positive")));
    }
    Ok(())
}

fn grid(orientations: &[Orientation], ds: &[usize], ps: &[f64]) -> Result<(), ConfigError> {
    nonempty("orientation", orientations)?;
    nonempty("d", ds)?;
    nonempty("p", ps)?;
    for &o in orientations {
        for &d in ds {
            check_geometry(o, d)?;
        }
    }
    ps.iter().try_for_each(|&p| check_rate(p))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.workers == Some(0) {
            return Err(ConfigError("worker count must be positive".into()));
        }
        match &self.command {
            Command::Enumerate(a) => {
                nonempty("orientation", &a.orientation)?;
                nonempty("d", &a.d)?;
                nonempty("policy", &a.policy)?;
                for &o in &a.orientation {
                    for &d in &a.d {
                        check_geometry(o, d)?;
                        let n = o.qubit_count(d);
                        if let Some(&w) = a.w.iter().find(|&&w| w > n) {
                            return Err(ConfigError(format!("weight {w} exceeds n = {n}")));
                        }
                    }
                }
                Ok(())
            }
            Command::Pathcount(a) => {
                nonempty("d", &a.d)?;
                a.d.iter().try_for_each(|&d| check_geometry(Orientation::Rotated, d))
            }
            Command::Mc(a) => {
                grid(&a.orientation, &a.d, &a.p)?;
                positive("eta", a.eta)?;
                positive("chunk", a.chunk)?;
                check_rate(a.p_th)
            }
            Command::Threshold(a) => {
                grid(&a.orientation, &a.d, &a.p)?;
                positive("eta", a.eta)?;
                positive("chunk", a.chunk)
            }
            Command::Split(a) => {
                check_geometry(a.orientation, a.d)?;
                check_rate(a.p_anchor)?;
                check_rate(a.p0)?;
                if a.p0 > a.p_anchor {
                    return Err(ConfigError("--p0 must not exceed --p-anchor".into()));
                }
                if !(a.factor > 1.0) {
                    return Err(ConfigError("--factor must exceed 1".into()));
                }
                if !(0.0..1.0).contains(&a.burn_in) {
                    return Err(ConfigError("--burn-in must lie in [0, 1)".into()));
                }
                positive("anchor-eta", a.anchor_eta)?;
                positive("steps", a.steps)?;
                if a.thin == Some(0) {
                    return Err(ConfigError("--thin must be positive".into()));
                }
                Ok(())
            }
            Command::Walks(a) => {
                nonempty("orientation", &a.orientation)?;
                nonempty("d", &a.d)?;
                for &o in &a.orientation {
                    for &d in &a.d {
                        check_geometry(o, d)?;
                    }
                }
                positive("samples", a.samples)?;
                if !(a.lhat_max > 0.0) || a.lhat.iter().any(|&l| !(l > 0.0)) {
                    return Err(ConfigError("l̂ values must be positive".into()));
                }
                if a.rel.is_some_and(|r| !(r > 0.0)) {
                    return Err(ConfigError("--rel must be positive".into()));
                }
                Ok(())
            }
            Command::Model(a) => {
                if !(a.c > 1.0) || !(a.xi > 0.0) {
                    return Err(ConfigError("--c must exceed 1 and --xi must be positive".into()));
                }
                if matches!(a.op, ModelOp::Xi | ModelOp::Bound) {
                    grid(&[a.orientation], &[a.d], &a.p)?;
                    positive("eta", a.eta)?;
                    positive("samples", a.samples)?;
                }
                Ok(())
            }
            Command::Verify(a) => positive("eta", a.eta),
        }
    }
}
