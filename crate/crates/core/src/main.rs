use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSubcommand};

use qel::cli::{self, plots::emit_plots, RunRequest, Subcommand};

#[derive(Parser)]
#[command(name = "qel", version, about = "Finite-volume experiments for time-periodically driven Anderson models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Config file (`section.key = value`) or a manifest.json to rerun.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set model.gamma=30`. Repeatable.
    #[arg(long = "set", value_name = "K=V")]
    set: Vec<String>,
    /// Parent directory of the run directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Worker threads; falls back to QEL_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    /// Master seed; overrides disorder.seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Eigenvalues of H and/or K per sample.
    Spectrum(Common),
    /// Green's-function columns and decay fits.
    Greens(Common),
    /// Wegner curves for K and H.
    Wegner(Common),
    /// Trusted quasi-energy counts in (E - 1, E + 1).
    Count(Common),
    /// Initial-scale Green's decay probabilities.
    Initial(Common),
    /// Tail-mass traces under the driven evolution.
    Dynamics(Common),
    /// Quasi-energies against monodromy eigenphases.
    Floquet(Common),
    /// Decay rates of trusted K eigenfunctions.
    Decay(Common),
    /// Any experiment over a parameter grid.
    Sweep(Common),
    /// Resolvent identity and trace checks.
    IdentityCheck(Common),
    /// Write plotting scripts for a finished run directory.
    Plots {
        /// Run directory.
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let (sub, common) = match Cli::parse().command {
        Command::Spectrum(c) => (Subcommand::Spectrum, c),
        Command::Greens(c) => (Subcommand::Greens, c),
        Command::Wegner(c) => (Subcommand::Wegner, c),
        Command::Count(c) => (Subcommand::Count, c),
        Command::Initial(c) => (Subcommand::Initial, c),
        Command::Dynamics(c) => (Subcommand::Dynamics, c),
        Command::Floquet(c) => (Subcommand::Floquet, c),
        Command::Decay(c) => (Subcommand::Decay, c),
        Command::Sweep(c) => (Subcommand::Sweep, c),
        Command::IdentityCheck(c) => (Subcommand::IdentityCheck, c),
        Command::Plots { dir } => {
            return match emit_plots(&dir) {
                Ok(paths) => {
                    for p in paths {
                        println!("{}", p.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(cli::exit_code(&e) as u8)
                }
            };
        }
    };
    let req = RunRequest {
        subcommand: sub,
        config: common.config,
        overrides: common.set,
        out: common.out,
        threads: common.threads,
        seed: common.seed,
    };
    match cli::run(&req) {
        Ok(o) => {
            for n in &o.notes {
                eprintln!("{n}");
            }
            println!("{}", o.run_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
