//! Command-line surface of the `dalc` binary.
//!
//! Exit codes: 0 success, 1 usage, 2 validation or parse failure, 3 numerical
//! abort (or a failed built-in check), 4 I/O. Every failure ends with one line
//! on stderr of the form
//!
//! ```text
//! error: kind=<tag> exit=<code> detail="<message>"
//! ```

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{config_hash, parse_and_validate};
use crate::engine::run_experiment;
use crate::error::{Error, Result};
use crate::experiment::{ExperimentConfig, Mode};
use crate::io::{write_summary, write_timeseries, WeightsArtifact, SUMMARY_FILE, WEIGHTS_FILE};
use crate::metrics::{compute_metrics, Summary};
use crate::verify::run_builtin_checks;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "dalc",
    version,
    about = "Distributed adaptive learning control simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the learning phase and write CSVs, weights.json and summary.json.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `simulation.threads`.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Rerun with frozen weights from a previous `simulate`.
    Replay {
        config: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Validate a config without simulating.
    Check { config: PathBuf },
    /// Run the built-in invariant suite.
    Verify,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::SingularMass { .. }
        | Error::NumericalBlowup { .. }
        | Error::TorqueCapExceeded { .. } => EXIT_NUMERICAL,
        Error::Io { .. } | Error::EmptyLog => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

pub fn error_line(kind: &str, code: i32, detail: &str) -> String {
    let detail = detail
        .replace('\\', "\\\\")
        .replace('"', "\\\"")
        .replace('\n', " ");
    format!("error: kind={kind} exit={code} detail=\"{detail}\"")
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_and_validate(&text)
}

fn apply_threads(cfg: &mut ExperimentConfig, threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        cfg.threads = n;
        cfg.validate()?;
    }
    Ok(())
}

fn report(out: &mut dyn Write, summary: &Summary) {
    for a in &summary.agents {
        let settle = a
            .settling_time
            .map_or("none".to_string(), |t| format!("{t:.2}"));
        let _ = writeln!(
            out,
            "agent {}: settle_t={} sup_e={:.4} sup_tau={:.2} final_chi_tilde={:.3e}",
            a.agent, settle, a.sup_e, a.sup_tau, a.final_chi_tilde_norm
        );
    }
    let _ = writeln!(out, "within_caps={}", summary.within_caps);
}

fn finish_run(cfg: &ExperimentConfig, out_dir: &Path, out: &mut dyn Write) -> Result<()> {
    let result = run_experiment(cfg)?;
    write_timeseries(&result.log, out_dir)?;
    let summary = compute_metrics(&result.log, &cfg.metric_settings())?;
    write_summary(&summary, &out_dir.join(SUMMARY_FILE))?;
    if let Some(w) = &result.averaged_weights {
        WeightsArtifact::new(cfg, w).write(&out_dir.join(WEIGHTS_FILE))?;
    } else if matches!(cfg.mode, Mode::Learn) {
        let _ = writeln!(
            out,
            "note: averaging window saw no samples, no weights written"
        );
    }
    report(out, &summary);
    Ok(())
}

fn execute(command: Command, out: &mut dyn Write) -> Result<bool> {
    match command {
        Command::Simulate {
            config,
            out: dir,
            threads,
        } => {
            let mut cfg = load(&config)?;
            apply_threads(&mut cfg, threads)?;
            finish_run(&cfg, &dir, out)?;
            Ok(true)
        }
        Command::Replay {
            config,
            weights,
            out: dir,
            threads,
        } => {
            let mut cfg = load(&config)?;
            apply_threads(&mut cfg, threads)?;
            let w = WeightsArtifact::read(&weights)?.weights_for(&cfg)?;
            cfg.mode = Mode::Replay(w);
            cfg.validate()?;
            finish_run(&cfg, &dir, out)?;
            Ok(true)
        }
        Command::Check { config } => {
            let cfg = load(&config)?;
            let _ = writeln!(
                out,
                "ok: followers={} edges={} min_re_eig_h={:.6} config_hash={}",
                cfg.follower_count(),
                cfg.graph.edges().len(),
                cfg.graph.laplacian().min_real_eigenvalue_h(),
                config_hash(&cfg)
            );
            Ok(true)
        }
        Command::Verify => {
            let results = run_builtin_checks();
            for r in &results {
                let tag = if r.passed { "PASS" } else { "FAIL" };
                let _ = writeln!(out, "{tag} {}: {}", r.name, r.detail);
            }
            Ok(results.iter().all(|r| r.passed))
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn dispatch<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let _ = write!(err, "{e}");
            let first = e.to_string().lines().next().unwrap_or_default().to_string();
            let _ = writeln!(err, "{}", error_line("usage", EXIT_USAGE, &first));
            return EXIT_USAGE;
        }
    };
    match execute(cli.command, out) {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            let _ = writeln!(
                err,
                "{}",
                error_line(
                    "verify_failed",
                    EXIT_NUMERICAL,
                    "one or more built-in checks failed"
                )
            );
            EXIT_NUMERICAL
        }
        Err(e) => {
            let code = exit_code(&e);
            let _ = writeln!(err, "{}", error_line(e.kind(), code, &e.to_string()));
            code
        }
    }
}
