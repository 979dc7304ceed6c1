//! Command-line front end: argument parsing, configuration layering and
//! output writing around the commands in [`commands`] and [`verify`].

pub mod commands;
pub mod config;
pub mod verify;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::commands::Report;
use crate::config::{usage, Format, Settings, UsageError};

#[derive(Debug, Parser)]
#[command(name = "qwork", version, about = "TPM and Margenau-Hill work statistics: scans, tables and invariant checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sampled maximum MH/TPM moment gap against the coherence bound, over a coherence grid.
    BoundScan(CommonArgs),
    /// Variance difference MH - TPM over qubit pure states and rotation angles.
    VarianceMap(CommonArgs),
    /// Entropy production in both schemes for the thermal-coherent qubit family.
    EntropyScan(CommonArgs),
    /// Variance-ordering regions on an (a_x, tau) grid, with the sign check.
    Table1(CommonArgs),
    /// Randomized invariant checks; exits nonzero if any gating check fails.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Flat key=value file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Any command key, as key=value (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated suites to run (default: all).
    #[arg(long)]
    pub suite: Option<String>,
    /// Multiplies every tolerance; a negative value forces failures.
    #[arg(long, allow_hyphen_values = true)]
    pub tolerance_scale: Option<f64>,
}

impl CommonArgs {
    fn flags(&self) -> anyhow::Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| usage(format!("--set expects key=value, got '{kv}'")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        if let Some(x) = self.seed {
            out.push(("seed".into(), x.to_string()));
        }
        if let Some(x) = self.samples {
            out.push(("samples".into(), x.to_string()));
        }
        if let Some(x) = &self.out {
            out.push(("out".into(), x.display().to_string()));
        }
        if let Some(x) = self.format {
            out.push(("format".into(), x.to_string()));
        }
        Ok(out)
    }

    fn settings(&self, command: &str, keys: &[&str], extra: Vec<(String, String)>) -> anyhow::Result<Settings> {
        let mut flags = self.flags()?;
        flags.extend(extra);
        Settings::resolve(command, keys, self.config.as_deref(), &flags)
    }
}

/// Rendered command output plus whether the command succeeded.
pub struct Outcome {
    pub text: String,
    pub out: Option<PathBuf>,
    pub success: bool,
    pub summary: Option<String>,
}

fn finish<M: Serialize, R: Serialize>(s: &Settings, report: &Report<M, R>) -> anyhow::Result<Outcome> {
    Ok(Outcome { text: report.render(s.format()?)?, out: s.out(), success: true, summary: None })
}

pub fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    match &cli.command {
        Command::BoundScan(a) => {
            let s = a.settings("bound-scan", commands::BOUND_SCAN_KEYS, vec![])?;
            finish(&s, &commands::bound_scan(&s)?)
        }
        Command::VarianceMap(a) => {
            let s = a.settings("variance-map", commands::VARIANCE_MAP_KEYS, vec![])?;
            finish(&s, &commands::variance_map(&s)?)
        }
        Command::EntropyScan(a) => {
            let s = a.settings("entropy-scan", commands::ENTROPY_SCAN_KEYS, vec![])?;
            finish(&s, &commands::entropy_scan(&s)?)
        }
        Command::Table1(a) => {
            let s = a.settings("table1", commands::TABLE1_KEYS, vec![])?;
            finish(&s, &commands::table1(&s)?)
        }
        Command::Verify(v) => {
            let mut extra = Vec::new();
            if let Some(x) = &v.suite {
                extra.push(("suite".to_string(), x.clone()));
            }
            if let Some(x) = v.tolerance_scale {
                extra.push(("tolerance_scale".to_string(), x.to_string()));
            }
            let s = v.common.settings("verify", verify::VERIFY_KEYS, extra)?;
            let report = verify::verify(&s)?;
            let failed: Vec<&verify::CheckRow> = report.rows.iter().filter(|r| r.gating && !r.passed).collect();
            let mut summary = format!("verify: {} checks, {} failed", report.rows.len(), failed.len());
            if let Some(first) = failed.first() {
                summary.push_str(&format!("\nfirst failure {}/{}: {}", first.suite, first.check, first.counterexample));
            }
            let mut outcome = finish(&s, &report)?;
            outcome.success = report.metadata.all_passed;
            outcome.summary = Some(summary);
            Ok(outcome)
        }
    }
}

/// Parses `args`, runs the command, writes its output and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli).and_then(|o| write_outcome(&o).map(|_| o)) {
        Ok(o) => {
            if let Some(s) = &o.summary {
                eprintln!("{s}");
            }
            if o.success {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}

fn write_outcome(o: &Outcome) -> anyhow::Result<()> {
    match &o.out {
        Some(path) => std::fs::write(path, &o.text).map_err(|e| usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            std::io::stdout().write_all(o.text.as_bytes())?;
            Ok(())
        }
    }
}
