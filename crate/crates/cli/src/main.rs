use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qcme_cli::commands;
use qcme_cli::config::GridKind;
use qcme_cli::{parse_config, CliError, Overrides, RawConfig};

/// Lattice transport between finite thermal reservoirs.
#[derive(Parser)]
#[command(name = "qcme", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate with finite reservoirs whose chemical potentials evolve.
    Simulate(Common),
    /// Integrate with reservoirs held at fixed occupations.
    Stationary(Common),
    /// Steady state for fixed reservoir occupations.
    Ness(Common),
    /// Spectrum of the effective non-Hermitian Hamiltonian.
    Spectrum(Common),
    /// Final equilibrium and equilibration rate.
    Equilibrium(Common),
    /// Short-time power series of the single-particle density matrix.
    Shorttime(Common),
    /// Cartesian sweep over lattice length and coupling.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads (default: one per core).
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV; a JSON sidecar is written next to it. Stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also propagate the two-particle density matrix.
    #[arg(long)]
    tpdm: bool,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long = "t-max")]
    t_max: Option<f64>,
    #[arg(long, value_enum)]
    grid: Option<GridKind>,
}

impl Common {
    fn load(&self) -> Result<RawConfig, CliError> {
        let text = std::fs::read_to_string(&self.config)
            .map_err(|e| CliError::Io(format!("{}: {e}", self.config.display())))?;
        let mut raw = parse_config(&text)?;
        raw.apply(&Overrides {
            tpdm: self.tpdm,
            rtol: self.rtol,
            atol: self.atol,
            t_max: self.t_max,
            grid: self.grid,
        });
        Ok(raw)
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    let (common, report) = match cmd {
        Command::Simulate(c) => {
            let r = commands::simulate(c.load()?, true)?;
            (c, r)
        }
        Command::Stationary(c) => {
            let r = commands::simulate(c.load()?, false)?;
            (c, r)
        }
        Command::Ness(c) => {
            let r = commands::ness_table(c.load()?)?;
            (c, r)
        }
        Command::Spectrum(c) => {
            let r = commands::spectrum_table(c.load()?)?;
            (c, r)
        }
        Command::Equilibrium(c) => {
            let r = commands::equilibrium_table(c.load()?)?;
            (c, r)
        }
        Command::Shorttime(c) => {
            let r = commands::shorttime_table(c.load()?)?;
            (c, r)
        }
        Command::Sweep { common, workers } => {
            let r = commands::sweep(common.load()?, workers)?;
            (common, r)
        }
    };
    report.write(common.out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qcme: error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
