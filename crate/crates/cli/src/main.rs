use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geofeas_cli::commands::{extract_control_cmd, kinfeas, simulate_many, Overrides};
use geofeas_cli::{exit, CliError};
use geofeas_core::Method;

#[derive(Parser)]
#[command(name = "geofeas", version, about = "Motion feasibility of multi-agent systems on Lie groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the constrained dynamics and write trajectory, diagnostics and controls.
    Simulate {
        /// Scenario file; repeat to run several (each into OUT/<stem>).
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Drop all distance constraints (free agents).
        #[arg(long)]
        no_constraints: bool,
        /// Scenarios to run in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Rank and admissible-velocity basis at the scenario's initial configuration.
    Kinfeas {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Recompute controls from a written trajectory.
    ExtractControl {
        #[arg(long)]
        traj: PathBuf,
        /// Defaults to TRAJ/scenario.cfg.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to TRAJ/controls_extracted.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: geofeas_core::GeoError| e.to_string())
}

/// Prints a line, ignoring a closed stdout (e.g. piped into `head`).
fn emit(line: String) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn fail(e: &CliError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Simulate {
            config,
            out,
            method,
            h,
            steps,
            no_constraints,
            jobs,
        } => {
            let ov = Overrides {
                method,
                h,
                steps,
                no_constraints,
            };
            let results = match simulate_many(&config, &out, &ov, jobs) {
                Ok(r) => r,
                Err(e) => return fail(&e),
            };
            let mut code = exit::OK;
            for (path, r) in config.iter().zip(results) {
                match r {
                    Ok(s) => emit(format!(
                        "{}: {} records -> {} (max |phi| {:e}, max separation error {:e} m)",
                        path.display(),
                        s.records,
                        s.out_dir.display(),
                        s.max_abs_phi,
                        s.max_separation_error
                    )),
                    Err(e) => {
                        eprint!("{}: ", path.display());
                        let c = fail(&e);
                        if code == exit::OK {
                            code = c;
                        }
                    }
                }
            }
            code
        }
        Command::Kinfeas { config, json } => match kinfeas(&config) {
            Ok(report) => {
                if json {
                    match serde_json::to_string_pretty(&report) {
                        Ok(s) => emit(s),
                        Err(e) => {
                            eprintln!("error: {e}");
                            return exit::INPUT;
                        }
                    }
                } else {
                    emit(report.to_text().trim_end().to_string());
                }
                exit::OK
            }
            Err(e) => fail(&e),
        },
        Command::ExtractControl { traj, config, out } => {
            match extract_control_cmd(&traj, config.as_deref(), out.as_deref()) {
                Ok(p) => {
                    emit(format!("wrote {}", p.display()));
                    exit::OK
                }
                Err(e) => fail(&e),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::INPUT as u8 } else { 0 });
        }
    };
    ExitCode::from(run(cli) as u8)
}
