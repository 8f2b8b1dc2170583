//! `cylforms`: reproducible experiments on a half-cylinder with JSON config in
//! and JSON/CSV reports out.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::RunConfig;
use report::{Output, Report, Timing};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Compute(#[from] cylforms::Error),
}

#[derive(Parser)]
#[command(name = "cylforms", version, about = "Cauchy data and Green forms on a half-cylinder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; defaults apply to omitted fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for the report and CSV data.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Also emit the nδω trace blocks with DtN output.
    #[arg(long, global = true)]
    emit_ndelta: bool,
}

#[derive(Subcommand, Clone, Copy, Debug)]
enum Command {
    /// Gaussian curvature over a z-grid.
    Curvature,
    /// Compositional against explicit Laplacians on random forms.
    OperatorsCheck,
    /// Per-mode Dirichlet-to-Neumann blocks.
    Dtn,
    /// Per-mode gaps between the Cauchy data of two metrics.
    Compare,
    /// Boundary jets from the full symbol, optionally via a DtN fit.
    Recover,
    /// Lowest eigenvalues of the P_k or L_k mode families.
    Spectrum,
    /// Log coefficient of the assembled Green form.
    Green,
    /// Convergence of the discrete Stokes pairing.
    StokesCheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Curvature => "curvature",
            Command::OperatorsCheck => "operators-check",
            Command::Dtn => "dtn",
            Command::Compare => "compare",
            Command::Recover => "recover",
            Command::Spectrum => "spectrum",
            Command::Green => "green",
            Command::StokesCheck => "stokes-check",
        }
    }
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    cfg.emit_ndelta |= cli.emit_ndelta;
    let mut out = Output::new(&cli.out)?;
    let start = Instant::now();
    let (payload, verdicts) = match cli.command {
        Command::Curvature => commands::curvature(&cfg, &mut out),
        Command::OperatorsCheck => commands::operators_check(&cfg, &mut out),
        Command::Dtn => commands::dtn(&cfg, &mut out),
        Command::Compare => commands::compare(&cfg, &mut out),
        Command::Recover => commands::recover(&cfg, &mut out),
        Command::Spectrum => commands::spectrum(&cfg, &mut out),
        Command::Green => commands::green(&cfg, &mut out),
        Command::StokesCheck => commands::stokes_check(&cfg, &mut out),
    }?;
    let wall_seconds = start.elapsed().as_secs_f64();
    let report_name = format!("{}.report.json", cli.command.name());
    let mut files = out.files().to_vec();
    files.push(report_name.clone());
    let report = Report {
        command: cli.command.name().to_string(),
        seed: cfg.seed,
        config: cfg,
        payload,
        pass: verdicts.iter().all(|c| c.pass),
        verdicts,
        files,
        timing: Timing { wall_seconds },
    };
    out.write_json(&report_name, &report)?;
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            for c in &report.verdicts {
                eprintln!("{} {}: {:e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value);
            }
            match serde_json::to_string_pretty(&report) {
                Ok(s) => println!("{s}"),
                Err(e) => eprintln!("error: {e}"),
            }
            let failures: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
            if failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                eprintln!("{} verdict(s) failed: {}", failures.len(), failures.join(", "));
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
