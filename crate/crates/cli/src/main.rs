use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lqg_core::field::{mollify, sample_gff};
use lqg_core::metric::sssp;
use lqg_core::Result;
use lqg_geodesy::experiments::Setup;
use lqg_geodesy::{run_experiment, Experiment, RunConfig};

/// Lattice LFPP experiments.
///
/// Settings are resolved in three layers: built-in defaults, then the
/// `--config` JSON file, then command-line flags.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed; repeat for several.
    #[arg(long, global = true)]
    seed: Vec<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long = "dgamma", global = true)]
    d_gamma: Option<f64>,
    /// Metric mollification scale.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Grid side count.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Samples (pairs, radius pairs, instances) per seed.
    #[arg(long, global = true)]
    samples: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a mollified field and write it as .fgrid.
    Sample(Common),
    /// Distances from the grid center, written as .dfield.
    Metric(Common),
    /// Geodesic multiplicity census; add --networks for (n, m) classes.
    Census {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        networks: bool,
    },
    Confluence(Common),
    Dimension(Common),
    Bound {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        threshold: Option<u64>,
    },
    Axioms(Common),
    Perturb(Common),
}

fn resolve(experiment: Experiment, c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => {
            let mut cfg = RunConfig::load(path)?;
            cfg.experiment = experiment;
            cfg
        }
        None => RunConfig::new(experiment, "out"),
    };
    if !c.seed.is_empty() {
        cfg.seeds = c.seed.clone();
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    if let Some(g) = c.gamma {
        cfg.gamma = g;
    }
    if c.d_gamma.is_some() {
        cfg.d_gamma = c.d_gamma;
    }
    if c.eps.is_some() {
        cfg.epsilon = c.eps;
    }
    if let Some(n) = c.grid {
        cfg.side_count = n;
    }
    if let Some(s) = c.samples {
        cfg.samples_per_seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_fields(cfg: &RunConfig, distances: bool) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let id = cfg.run_id();
    if distances {
        let setup = Setup::from_config(cfg)?;
        for &seed in &cfg.seeds {
            let mf = sssp(&setup.weights(seed)?, setup.center())?;
            let path = cfg.out_dir.join(format!("{id}-seed{seed}.dfield"));
            mf.write_dfield(&path)?;
            println!("{}", path.display());
        }
    } else {
        let spec = cfg.spec()?;
        for &seed in &cfg.seeds {
            let h = mollify(&sample_gff(spec, seed)?, cfg.epsilon())?;
            let path = cfg.out_dir.join(format!("{id}-seed{seed}.fgrid"));
            h.write_fgrid(&path)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    let (experiment, common, threshold) = match &cli.command {
        Command::Sample(c) => {
            write_fields(&resolve(Experiment::Axioms, c)?, false)?;
            return Ok(0);
        }
        Command::Metric(c) => {
            write_fields(&resolve(Experiment::Axioms, c)?, true)?;
            return Ok(0);
        }
        Command::Census { common, networks } => {
            (if *networks { Experiment::NetworkCensus } else { Experiment::MultiplicityCensus }, common, None)
        }
        Command::Confluence(c) => (Experiment::ConfluenceCensus, c, None),
        Command::Dimension(c) => (Experiment::Dimension, c, None),
        Command::Bound { common, threshold } => (Experiment::Bounds, common, *threshold),
        Command::Axioms(c) => (Experiment::Axioms, c, None),
        Command::Perturb(c) => (Experiment::Perturbation, c, None),
    };
    let mut cfg = resolve(experiment, common)?;
    if threshold.is_some() {
        cfg.threshold = threshold;
        cfg.validate()?;
    }
    let manifest = run_experiment(&cfg)?;
    for c in &manifest.checks {
        println!("{:4}  {}: {}", c.status.label(), c.name, c.summary);
    }
    println!("manifest: {}", manifest.output_path("manifest.json").display());
    Ok(manifest.exit_code())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
