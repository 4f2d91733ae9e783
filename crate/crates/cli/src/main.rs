mod commands;
mod config;
mod presets;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use efrlab::Error;

use config::{Overrides, RunConfig};
use presets::{Preset, Scale};

#[derive(Parser, Debug)]
#[command(name = "efrlab", version, about = "Feedback-controlled Navier-Stokes experiments with EFR and POD-Galerkin ROMs")]
struct Cli {
    /// Output root
    #[arg(long, global = true, env = "EFRLAB_OUT")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate or inspect meshes
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Steady Stokes solve and line profiles
    #[command(allow_negative_numbers = true)]
    Stokes(Overrides),
    /// Full-order time integration
    #[command(allow_negative_numbers = true)]
    Simulate(Overrides),
    /// POD basis with supremizer enrichment from a snapshot file
    #[command(allow_negative_numbers = true)]
    Pod {
        #[command(flatten)]
        o: Overrides,
        /// Snapshot file written by `simulate`
        #[arg(long)]
        snapshots_file: PathBuf,
    },
    /// Reduced-order integration
    #[command(allow_negative_numbers = true)]
    Rom {
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        basis: PathBuf,
        /// Full-order snapshots to compare against
        #[arg(long)]
        fom: Option<PathBuf>,
    },
    /// Gnuplot script for a CSV series
    Report {
        csv: PathBuf,
        #[arg(long, default_value = "t")]
        x: String,
        #[arg(long, num_args = 1..)]
        y: Vec<String>,
        #[arg(long)]
        log: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a preset experiment
    Experiment {
        preset: Preset,
        #[arg(long, value_enum, default_value_t = Scale::Desk)]
        scale: Scale,
        /// Print the parameters without running
        #[arg(long)]
        dry_run: bool,
    },
}

#[derive(Subcommand, Debug)]
enum MeshCommand {
    #[command(allow_negative_numbers = true)]
    Gen {
        #[command(flatten)]
        o: Overrides,
        #[arg(long, short)]
        output: PathBuf,
    },
    #[command(allow_negative_numbers = true)]
    Info(Overrides),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NewtonDiverged { .. } => 2,
        Error::InvalidInput(_) | Error::Parse { .. } => 3,
        Error::Io(_) | Error::Csv(_) => 4,
        _ => 1,
    }
}

fn resolve(o: &Overrides) -> efrlab::Result<(RunConfig, config::Resolved)> {
    let cfg = RunConfig::default().merged(o)?;
    let r = cfg.resolve()?;
    Ok((cfg, r))
}

fn run_dir(root: &std::path::Path, cfg: &RunConfig, default: &str) -> PathBuf {
    root.join(cfg.output.dir.clone().unwrap_or_else(|| default.into()))
}

fn run(cli: Cli) -> efrlab::Result<()> {
    let root = commands::output_root(cli.out);
    match cli.cmd {
        Command::Mesh(MeshCommand::Gen { o, output }) => {
            let (_, r) = resolve(&o)?;
            commands::mesh_gen(&r, &output)
        }
        Command::Mesh(MeshCommand::Info(o)) => {
            let (_, r) = resolve(&o)?;
            print!("{}", commands::mesh_summary(&r.mesh()?));
            Ok(())
        }
        Command::Stokes(o) => {
            let (cfg, r) = resolve(&o)?;
            commands::stokes(&r, &run_dir(&root, &cfg, "stokes"))
        }
        Command::Simulate(o) => {
            let (cfg, r) = resolve(&o)?;
            commands::simulate_cmd(&cfg, &r, &run_dir(&root, &cfg, "simulate"))
        }
        Command::Pod { o, snapshots_file } => {
            let (cfg, r) = resolve(&o)?;
            commands::pod_cmd(&r, &snapshots_file, &run_dir(&root, &cfg, "pod"))
        }
        Command::Rom { o, basis, fom } => {
            let (cfg, r) = resolve(&o)?;
            commands::rom_cmd(&r, &basis, fom.as_deref(), &run_dir(&root, &cfg, "rom"))
        }
        Command::Report { csv, x, y, log, output } => commands::report_cmd(&csv, &x, &y, log, output.as_deref()),
        Command::Experiment { preset, scale, dry_run } => commands::experiment(preset, scale, &root, dry_run).map(|_| ()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
