//! Command-line front end: experiment configs and the `synth`, `simulate`,
//! `sweep` and `compare` subcommands.
//!
//! Exit codes: 0 success, 1 invalid input (usage, schema, unreadable or
//! mismatched files), 2 infeasible synthesis, 3 solver failure.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{load_config, SweepVar};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "slsblend", version, about = "Blended FIR system-level controllers")]
pub struct Cli {
    /// Overrides the simulation seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Solver tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a blended CLM and write it with diagnostics.
    Synth {
        #[arg(long)]
        config: PathBuf,
        /// CLM output file; defaults to `output.clm` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured scenarios and write one CSV and summary per scenario.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        clm: Option<PathBuf>,
        /// Output directory; defaults to `output.dir` of the config, then `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Linear and blended costs over a grid of sigma or eta_1 values.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        var: Option<SweepVar>,
        /// Comma separated grid values.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        /// CSV output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate objectives, certified peaks and radii of CLM files.
    Compare {
        /// Supplies weights and distribution for the objective column.
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON output.
        #[arg(long)]
        out: Option<PathBuf>,
        files: Vec<PathBuf>,
    },
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Synth { config, out } => {
            let cfg = load_config(config)?;
            let o = commands::cmd_synth(&cfg, out.as_deref(), cli.tol)?;
            println!(
                "optimal: objective {:.8}, {} zones, peaks x {:.4} u {:.4}, {} iterations",
                o.result.objective,
                o.result.blend.zones().len(),
                o.result.active.state_peak,
                o.result.active.input_peak,
                o.result.solver.iterations
            );
            println!("wrote {} and {}", o.clm_path.display(), o.diagnostics_path.display());
        }
        Command::Simulate { config, clm, out } => {
            let cfg = load_config(config)?;
            let dir = match out {
                Some(d) => d.clone(),
                None => cfg.config.output.dir.as_ref().map(|d| cfg.resolve(d)).unwrap_or_else(|| PathBuf::from("out")),
            };
            for o in commands::cmd_simulate(&cfg, clm.as_deref(), &dir, cli.seed)? {
                let s = &o.summary;
                println!(
                    "{}: diverged {} max|x| {:.6e} max|u| {:.6e} final|x| {:.6e} -> {}",
                    s.scenario,
                    s.stats.diverged,
                    s.stats.max_abs_x,
                    s.stats.max_abs_u,
                    s.final_abs_x,
                    o.csv_path.display()
                );
            }
        }
        Command::Sweep { config, var, grid, out } => {
            let cfg = load_config(config)?;
            let block = cfg.config.sweep.clone();
            let var = var.or(block.as_ref().map(|b| b.var)).ok_or_else(|| CliError::Usage("pass --var or set sweep.var".into()))?;
            let grid = grid.clone().or(block.map(|b| b.grid)).ok_or_else(|| CliError::Usage("pass --grid or set sweep.grid".into()))?;
            let rows = commands::cmd_sweep(&cfg, var, &grid, cli.jobs, cli.tol)?;
            match out {
                Some(p) => {
                    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                        std::fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), source: e })?;
                    }
                    let f = std::fs::File::create(p).map_err(|e| CliError::Io { path: p.clone(), source: e })?;
                    commands::write_sweep_csv(&rows, f)?;
                }
                None => commands::write_sweep_csv(&rows, std::io::stdout().lock())?,
            }
        }
        Command::Compare { config, out, files } => {
            let cfg = config.as_deref().map(load_config).transpose()?;
            let rows = commands::cmd_compare(files, cfg.as_ref())?;
            print!("{}", commands::format_compare(&rows));
            if let Some(p) = out {
                let text = serde_json::to_string_pretty(&rows)?;
                std::fs::write(p, text + "\n").map_err(|e| CliError::Io { path: p.clone(), source: e })?;
            }
        }
    }
    Ok(())
}
