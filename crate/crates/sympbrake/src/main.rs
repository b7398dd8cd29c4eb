use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sympbrake::commands::{self, Outcome};
use sympbrake::config::Fault;
use sympbrake::{CliError, RunConfig, SweepSizes};

#[derive(Parser)]
#[command(name = "sympbrake", version, about = "Index theory and brake orbits of symplectic paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON); flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random sample and multistart draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sweep size: N paths in Sp(2), N/5 of every other sample family.
    #[arg(long, global = true)]
    sweep: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print a human-readable table to stdout.
    #[arg(long, global = true)]
    pretty: bool,
    /// Write SVG plots into this directory.
    #[arg(long, global = true)]
    plot: Option<PathBuf>,
    /// Override one tolerance, e.g. `--tol shoot=1e-10`.
    #[arg(long = "tol", value_name = "KEY=VAL", global = true)]
    tol: Vec<String>,
    #[arg(long, value_enum, hide = true, global = true)]
    inject_fault: Option<FaultArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    SignFlip,
}

#[derive(Subcommand)]
enum Command {
    /// Maslov-type and Lagrangian indices of a path document.
    IndexPath {
        /// Path document (JSON).
        input: Option<PathBuf>,
    },
    /// Identity suite over seeded random samples.
    Verify,
    /// Brake orbits on an ellipsoid (`--radii`) or a hypersurface document.
    Ellipsoid {
        /// Hypersurface document (JSON); ignored when `--radii` is given.
        input: Option<PathBuf>,
        /// Ellipsoid radii, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        radii: Option<Vec<f64>>,
    },
}

fn configure(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let name = match &cli.command {
        Command::IndexPath { input } => {
            cfg.input = input.clone().or(cfg.input);
            "index-path"
        }
        Command::Verify => "verify",
        Command::Ellipsoid { input, radii } => {
            if input.is_some() {
                cfg.input = input.clone();
                cfg.radii = None;
            }
            if radii.is_some() {
                cfg.radii = radii.clone();
            }
            "ellipsoid"
        }
    };
    cfg.command = Some(name.into());
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.sweep {
        cfg.sweep = SweepSizes { scale: cfg.sweep.scale, pieces: cfg.sweep.pieces, ..SweepSizes::scaled(n) };
    }
    if cli.out.is_some() {
        cfg.output = cli.out.clone();
    }
    for t in &cli.tol {
        cfg.tolerances.set(t)?;
    }
    if let Some(FaultArg::SignFlip) = cli.inject_fault {
        cfg.fault = Some(Fault::SignFlip);
    }
    Ok(cfg)
}

fn emit(cli: &Cli, cfg: &RunConfig, out: &Outcome) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&out.report).expect("reports serialize") + "\n";
    match &cfg.output {
        Some(p) => std::fs::write(p, &text)?,
        None if !cli.pretty => std::io::stdout().write_all(text.as_bytes())?,
        None => {}
    }
    if cli.pretty {
        std::io::stdout().write_all(out.pretty.as_bytes())?;
    }
    if let Some(dir) = &cli.plot {
        std::fs::create_dir_all(dir)?;
        for (name, svg) in &out.plots {
            std::fs::write(dir.join(name), svg)?;
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    let cfg = configure(cli)?;
    let outcome = match cli.command {
        Command::IndexPath { .. } => commands::index_path(&cfg)?,
        Command::Verify => commands::verify(&cfg)?,
        Command::Ellipsoid { .. } => commands::ellipsoid(&cfg)?,
    };
    emit(cli, &cfg, &outcome)?;
    Ok(outcome.code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("sympbrake: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
