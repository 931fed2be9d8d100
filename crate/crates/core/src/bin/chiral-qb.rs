use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use chiral_battery::commands::{self, CommandError};
use chiral_battery::config::{self, RunConfig};
use chiral_battery::table::{ResultTable, TableError};
use chiral_battery::verify::{self, VerifyOptions};

#[derive(Parser, Debug)]
#[command(name = "chiral-qb", version, about = "Chiral waveguide quantum battery simulator")]
struct Cli {
    /// JSON configuration; the fully chiral canonical set is used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path, `-` for standard output.
    #[arg(long, global = true, default_value = "-")]
    out: String,
    /// Worker threads for sweeps and figures.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for the randomized checks of `verify`.
    #[arg(long, global = true, default_value_t = 0x5eed)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Time series of energies, ergotropy and coherence from vacuum.
    Evolve,
    /// Closed-form steady state.
    Steady,
    /// Steady-state grid over one or two parameters.
    Sweep,
    /// Run the self-check battery; exits with 2 on any failure.
    Verify {
        /// Override every tolerance (for demonstrating failures).
        #[arg(long)]
        strict_tol: Option<f64>,
        /// Flip the propagation phase in H_L inside the Fock-space oracle.
        #[arg(long)]
        mutate_hl_phase: bool,
        /// Random parameter draws for the analytic/ODE comparison.
        #[arg(long, default_value_t = 20)]
        draws: usize,
    },
    /// Data behind a figure: fig2, fig3, fig4 or figS1.
    Figure { name: String },
}

fn open_out(path: &str) -> Result<Box<dyn Write>> {
    if path == "-" {
        return Ok(Box::new(BufWriter::new(io::stdout().lock())));
    }
    let f = File::create(path).with_context(|| format!("cannot create {path}"))?;
    Ok(Box::new(BufWriter::new(f)))
}

fn write_table(t: &ResultTable, out: &str) -> Result<()> {
    let mut w = open_out(out)?;
    t.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn is_validation(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<config::ConfigError>().is_some()
            || c.downcast_ref::<chiral_battery::params::ParamError>().is_some()
            || matches!(c.downcast_ref::<CommandError>(), Some(CommandError::Config(_) | CommandError::Param(_)))
    })
}

/// A closed downstream reader (e.g. `| head`) is not an error.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
            || match c.downcast_ref::<TableError>() {
                Some(TableError::Io(io)) => io.kind() == io::ErrorKind::BrokenPipe,
                Some(TableError::Csv(e)) => {
                    matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == io::ErrorKind::BrokenPipe)
                }
                _ => false,
            }
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("thread pool")?;
    }
    let cfg = match &cli.config {
        Some(path) => config::load_config(path)?,
        None => RunConfig::canonical_default(),
    };
    let table = match cli.command {
        Command::Evolve => commands::cmd_evolve(&cfg)?,
        Command::Steady => commands::cmd_steady(&cfg)?,
        Command::Sweep => commands::cmd_sweep(&cfg)?,
        Command::Figure { name } => commands::cmd_figure(&name, &cfg)?,
        Command::Verify { strict_tol, mutate_hl_phase, draws } => {
            let report = verify::run_verify(VerifyOptions {
                seed: cli.seed,
                strict_tol,
                mutate_hl_phase,
                draws,
                oracle_cutoff: cfg.oracle.cutoff,
                oracle_omega_scale: cfg.oracle.omega_scale,
            });
            let mut w = open_out(&cli.out)?;
            w.write_all(report.to_text().as_bytes())?;
            w.flush()?;
            return Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::from(2) });
        }
    };
    write_table(&table, &cli.out)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = if is_validation(&e) { "validation error" } else { "error" };
            eprintln!("chiral-qb: {kind}: {e:#}");
            ExitCode::from(1)
        }
    }
}
