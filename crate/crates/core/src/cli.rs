//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::deletion::{
    azuma_check, deletion_report, iid_device, prep, del, trial_rng, write_transcript, Attack, AzumaResult, Attacker,
    DeletionReport, IidWins, RoundModel, SimConfig,
};
use crate::error::{Error, Result};
use crate::fmt::{round9, sig9};
use crate::npa::{chsh_curve, default_grid, write_curve_csv, write_curve_json, NpaOptions};
use crate::rigidity::{depolarization_sweep, write_sweep_csv, write_sweep_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "locrand", version, about = "Local randomness bounds, Magic Square rigidity checks and certified deletion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Upper and lower bounds on Bob's guessing probability P2 against the CHSH score P1.
    #[command(after_help = "\
Columns:
  p1             CHSH winning probability the relaxation is pinned to
  upper_bound    certified NPA upper bound on P2, clipped at 1
  lower_bound    P2 of the shared-coin mixture of the optimal strategy and a
                 perfect classical strategy with the same P1
  level          NPA hierarchy level
  gap            solver gap between the certified bound and the primal value
  dual_residual  residual of the dual certificate before repair
JSON output adds `status` (Optimal, MaxIter, InfeasibleSuspected).")]
    ChshCurve {
        /// NPA level (1, 2 or 3).
        #[arg(long, default_value_t = 3)]
        level: usize,
        /// Comma-separated P1 values in [0.75, 0.853553]; defaults to 0.75, 0.7625, ..., 0.85.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Rigidity inequalities for the depolarized canonical Magic Square strategy.
    #[command(after_help = "\
Columns:
  p                  depolarizing probability
  delta              losing probability of the depolarized strategy
  max_anticomm_norm  largest ||(F_ab F_a'b' + F_a'b' F_ab) (x) I psi||
  max_prop_distance  largest trace distance between Bob's post-measurement
                     states for Alice's two outcomes
  guess_exact        best probability that Bob guesses another bit of
                     Alice's row after playing his column
  guess_bound        min(1, 1/2 + 9 sqrt(delta))")]
    RigiditySweep {
        /// Comma-separated depolarizing probabilities; defaults to 0, 0.005, ..., 0.2.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Monte-Carlo run of PREP and DEL against one attack.
    #[command(after_help = "\
JSON fields:
  N, eps, seed, trials, attack, device_loss   run parameters
  succ_rate              fraction of runs Alice accepts
  guess_rate_by_attack   fraction of accepted runs where Bob guesses m
                         (null when no run is accepted)
  theorem_bound          min(1, 1/2 + 9 sqrt(eps + N^-1/4) + e^(-sqrt(N)/2)/succ_rate)
  azuma                  martingale tail check for an i.i.d. device with the
                         same loss: violation_rate against bound e^(-N mu^2/2)
CSV output has one row with the scalar fields.
Attacks: honest, deterministic, iid-random, adaptive-halting, bayesian.")]
    DeletionSim {
        #[arg(long, default_value_t = 10_000)]
        rounds: usize,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        /// Azuma deviation; defaults to N^(-1/4).
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value = "honest")]
        attack: String,
        /// Per-round losing probability of the honest device.
        #[arg(long, default_value_t = 0.0)]
        device_loss: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the DEL transcript of trial 0 as JSON lines.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

/// Parses a comma-separated list of reals.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let items: Vec<&str> = s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::OutOfRange("empty grid".into()));
    }
    items
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::OutOfRange(format!("malformed grid value `{t}`")))
        })
        .collect()
}

fn default_sweep() -> Vec<f64> {
    (0..=40).map(|k| 0.005 * f64::from(k)).collect()
}

/// Writes `bytes` to `path` via a temporary file in the same directory, or
/// to stdout when no path is given.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
        Some(p) => {
            let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let name = p
                .file_name()
                .ok_or_else(|| Error::OutOfRange(format!("output path {} has no file name", p.display())))?;
            let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
            fs::write(&tmp, bytes)?;
            fs::rename(&tmp, p)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct AzumaOut {
    mu: f64,
    bound: f64,
    violation_rate: f64,
    tolerance: f64,
    succ_rate: f64,
}

impl AzumaOut {
    fn new(mu: f64, r: &AzumaResult) -> Self {
        Self {
            mu: round9(mu),
            bound: round9(r.bound),
            violation_rate: round9(r.violation_rate),
            tolerance: round9(r.tolerance),
            succ_rate: round9(r.succ as f64 / r.trials as f64),
        }
    }
}

#[derive(Serialize)]
struct SimOutput<'a> {
    #[serde(flatten)]
    report: &'a DeletionReport,
    azuma: AzumaOut,
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, sig9)
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completed {
    /// Problems to report; a nonempty list means a nonzero exit status.
    pub warnings: Vec<String>,
}

pub fn execute(cli: Cli) -> Result<Completed> {
    let mut warnings = Vec::new();
    match cli.command {
        Command::ChshCurve { level, grid, out, format } => {
            let grid = grid.as_deref().map_or_else(|| Ok(default_grid()), parse_grid)?;
            let points = chsh_curve(&grid, level, &NpaOptions::default())?;
            for p in &points {
                if !p.converged() {
                    warnings.push(format!("P1 = {}: solver stopped with status {:?}", sig9(p.p1), p.status));
                }
            }
            let mut buf = Vec::new();
            match format {
                Format::Csv => write_curve_csv(&points, &mut buf)?,
                Format::Json => write_curve_json(&points, &mut buf)?,
            }
            emit(out.as_deref(), &buf)?;
        }
        Command::RigiditySweep { grid, out, format } => {
            let ps = grid.as_deref().map_or_else(|| Ok(default_sweep()), parse_grid)?;
            let rows = depolarization_sweep(&ps)?;
            let mut buf = Vec::new();
            match format {
                Format::Csv => write_sweep_csv(&rows, &mut buf)?,
                Format::Json => write_sweep_json(&rows, &mut buf)?,
            }
            emit(out.as_deref(), &buf)?;
        }
        Command::DeletionSim {
            rounds,
            eps,
            mu,
            trials,
            attack,
            device_loss,
            seed,
            out,
            transcript,
            format,
        } => {
            let attack: Attack = attack.parse()?;
            let cfg = SimConfig::new(rounds, eps, trials, seed)?.with_device_loss(device_loss)?;
            let report = deletion_report(&cfg, attack)?;
            let mu = mu.unwrap_or_else(|| (rounds as f64).powf(-0.25));
            let azuma = azuma_check(&IidWins { win: 1.0 - device_loss }, rounds, eps, mu, trials, seed)?;
            if azuma.violation_rate > azuma.tolerance {
                warnings.push(format!(
                    "Azuma check: violation rate {} above tolerance {}",
                    sig9(azuma.violation_rate),
                    sig9(azuma.tolerance)
                ));
            }
            let guess = report.guess_rate_by_attack.get(attack.name()).copied().flatten();
            let mut buf = Vec::new();
            match format {
                Format::Json => {
                    serde_json::to_writer_pretty(&mut buf, &SimOutput { report: &report, azuma: AzumaOut::new(mu, &azuma) })?;
                    writeln!(buf)?;
                }
                Format::Csv => {
                    writeln!(buf, "N,eps,attack,trials,device_loss,succ_rate,guess_rate,theorem_bound,seed")?;
                    writeln!(
                        buf,
                        "{},{},{},{},{},{},{},{},{}",
                        report.n,
                        sig9(report.eps),
                        report.attack,
                        report.trials,
                        sig9(report.device_loss),
                        sig9(report.succ_rate),
                        opt(guess),
                        opt(report.theorem_bound),
                        report.seed
                    )?;
                }
            }
            emit(out.as_deref(), &buf)?;
            if let Some(path) = transcript {
                let model = std::sync::Arc::new(RoundModel::honest(device_loss)?);
                let mut rng = trial_rng(seed, 0);
                let (mut alice, bob) = iid_device(model.clone(), &mut rng);
                let p = prep(&mut alice, rounds, &mut rng)?;
                let mut bob = Attacker::new(attack, bob, model, rounds, eps, rand::SeedableRng::from_rng(&mut rng));
                let outcome = del(&p, &mut bob, eps)?;
                let mut lines = Vec::new();
                write_transcript(&outcome.transcript, &mut lines)?;
                emit(Some(&path), &lines)?;
            }
        }
    }
    Ok(Completed { warnings })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(done) if done.warnings.is_empty() => 0,
        Ok(done) => {
            for w in &done.warnings {
                eprintln!("warning: {w}");
            }
            3
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0.75, 0.8,0.85").unwrap(), vec![0.75, 0.8, 0.85]);
        assert!(parse_grid("").is_err());
        assert!(parse_grid(" , ").is_err());
        assert!(parse_grid("0.75,abc").is_err());
        assert!(parse_grid("0.75,nan").is_err());
    }

    #[test]
    fn default_sweep_points() {
        let s = default_sweep();
        assert_eq!(s.len(), 41);
        assert_eq!(s[0], 0.0);
        assert!((s[40] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn unknown_attack_is_an_error() {
        let cli = Cli::try_parse_from(["locrand", "deletion-sim", "--attack", "nope", "--rounds", "10", "--trials", "1"]).unwrap();
        let err = execute(cli).unwrap_err().to_string();
        assert!(err.contains("bayesian") && err.contains("honest"), "{err}");
    }
}
