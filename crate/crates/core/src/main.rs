use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use poronlmc::harness::{self, RunConfig};
use poronlmc::Error;

#[derive(Parser)]
#[command(name = "poronlmc", version, about = "Fractured poroelasticity: fine reference and NLMC coarse model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fine-grid simulation.
    Fine(Common),
    /// Build the multiscale bases and export those of one coarse cell.
    Basis {
        #[command(flatten)]
        common: Common,
        /// Coarse cell whose bases are exported.
        #[arg(long, default_value_t = 0)]
        cell: usize,
    },
    /// Coarse simulation with reconstructed snapshots.
    Coarse(Common),
    /// Fine reference against coarse models; writes errors.csv.
    Compare(Common),
    /// Generate a random fracture geometry file.
    Genfrac {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        min_length: Option<f64>,
        #[arg(long)]
        max_length: Option<f64>,
        /// Output file.
        output: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration; omitted values take their defaults.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Fracture geometry file.
    #[arg(long)]
    fractures: Option<PathBuf>,
    /// Run without fractures.
    #[arg(long, conflicts_with = "fractures")]
    no_fractures: bool,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    coarse_nx: Option<usize>,
    #[arg(long)]
    coarse_ny: Option<usize>,
    /// Oversampling layers, comma separated.
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    #[arg(long)]
    steps: Option<usize>,
    /// Output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Write the assembled blocks as Matrix Market files.
    #[arg(long)]
    dump_blocks: bool,
    /// Use the plain Galerkin coarse operator without the conservative closure.
    #[arg(long)]
    galerkin: bool,
    /// Skip VTK snapshots.
    #[arg(long)]
    no_vtk: bool,
}

impl Common {
    fn config(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(f) = &self.fractures {
            cfg.fractures.file = Some(f.clone());
        }
        if self.no_fractures {
            cfg.fractures.file = None;
        }
        if let Some(v) = self.nx {
            cfg.mesh.nx = v;
        }
        if let Some(v) = self.ny {
            cfg.mesh.ny = v;
        }
        if let Some(v) = self.coarse_nx {
            cfg.coarse.nx = v;
        }
        if let Some(v) = self.coarse_ny {
            cfg.coarse.ny = v;
        }
        if let Some(v) = &self.layers {
            cfg.coarse.layers = v.clone();
        }
        if let Some(n) = self.steps {
            cfg.material.t_max *= n as f64 / cfg.material.n_steps as f64;
            cfg.material.n_steps = n;
            cfg.output.snapshots.retain(|&s| s <= n);
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        cfg.coarse.conservative &= !self.galerkin;
        cfg.output.dump_blocks |= self.dump_blocks;
        cfg.output.write_vtk &= !self.no_vtk;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Fine(c) => {
            harness::cmd_fine(&c.config()?)?;
        }
        Command::Basis { common, cell } => {
            harness::cmd_basis(&common.config()?, cell)?;
        }
        Command::Coarse(c) => {
            harness::cmd_coarse(&c.config()?)?;
        }
        Command::Compare(c) => {
            let rows = harness::cmd_compare(&c.config()?)?;
            print!("{}", harness::table_csv(&rows));
        }
        Command::Genfrac {
            common,
            count,
            seed,
            min_length,
            max_length,
            output,
        } => {
            let mut cfg = common.config()?;
            let g = &mut cfg.generate;
            g.count = count.unwrap_or(g.count);
            g.seed = seed.unwrap_or(g.seed);
            g.min_length = min_length.unwrap_or(g.min_length);
            g.max_length = max_length.unwrap_or(g.max_length);
            let lines = harness::cmd_genfrac(&cfg, &output)?;
            log::info!("wrote {} fractures to {}", lines.len(), output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Solver(_) | Error::Assembly(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
