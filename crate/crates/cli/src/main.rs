//! `roaming`: command-line front end for the phase-space analyses.

mod cache;
mod cmd;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cache::Cache;
use config::RunConfig;
use output::Ctx;

#[derive(Parser, Debug)]
#[command(name = "roaming", version, about = "Periodic orbits, dividing surfaces and roaming transport in a planar CH4+ model")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// JSON run configuration (partial objects are merged onto the defaults).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config entry, e.g. `--set params.I=2.5` (repeatable).
    #[arg(long = "set", value_name = "KEY=JSON", global = true)]
    sets: Vec<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cache directory (overrides ROAM_CACHE_DIR and the config).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    no_cache: bool,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Integration time limit for trajectory sweeps.
    #[arg(long, global = true)]
    t_max: Option<f64>,
    /// Moment of inertia of CH3+.
    #[arg(long, global = true)]
    inertia: Option<f64>,
    /// Total angular momentum.
    #[arg(long, global = true)]
    lambda: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Inner,
    Outer,
    Middle,
    B,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SurfaceArg {
    InnerDs,
    Theta0,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Residence,
    Rotation,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// The eight critical points of the potential.
    CriticalPoints,
    /// Boundary radii of the Hill region on a θ grid.
    Hill {
        #[arg(short = 'E', long = "energy", allow_hyphen_values = true)]
        energy: Option<f64>,
        #[arg(long, default_value_t = 720)]
        n_theta: usize,
    },
    /// Continue a periodic-orbit family and detect its bifurcations.
    Family {
        #[arg(long, value_enum)]
        tag: FamilyArg,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        /// Energy at which the family is seeded (default: 2, clamped into the range).
        #[arg(long, allow_hyphen_values = true)]
        seed_energy: Option<f64>,
    },
    /// Build the dividing surfaces at one energy.
    Ds {
        #[arg(short = 'E', long = "energy", allow_hyphen_values = true)]
        energy: Option<f64>,
    },
    /// Flux through the dividing surfaces at several energies.
    Flux {
        /// Comma-separated energies (default: the config's energy list).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        energies: Vec<f64>,
    },
    /// Residence-time or rotation-number raster.
    Raster {
        #[arg(long, value_enum)]
        surface: SurfaceArg,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(short = 'E', long = "energy", allow_hyphen_values = true)]
        energy: Option<f64>,
        /// Cells per axis.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_delimiter = ',', num_args = 2, allow_hyphen_values = true)]
        x_range: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 2, allow_hyphen_values = true)]
        y_range: Vec<f64>,
    },
    /// Manifold sections with the outward middle annulus and the γ sets.
    Manifolds {
        #[arg(short = 'E', long = "energy", allow_hyphen_values = true)]
        energy: Option<f64>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Classify trajectories started on the outward inner dividing surface.
    Classify {
        #[arg(short = 'E', long = "energy", allow_hyphen_values = true)]
        energy: Option<f64>,
        /// N×N grid in the surface chart.
        #[arg(long, conflicts_with_all = ["random", "states"])]
        grid: Option<usize>,
        /// N uniform random chart points (default: the config's sample count).
        #[arg(long, conflicts_with = "states")]
        random: Option<usize>,
        /// JSON list of states `{r, theta, p_r, p_theta}`.
        #[arg(long)]
        states: Option<PathBuf>,
        /// Include the crossing log of every trajectory.
        #[arg(long)]
        with_log: bool,
    },
    /// Iterate the return map of the outward middle annulus.
    ReturnMap {
        #[arg(short = 'E', long = "energy", allow_hyphen_values = true)]
        energy: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long, allow_hyphen_values = true)]
        p_theta: f64,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
    },
    /// Shell representation of the energy surface with topology labels and overlays.
    Cm {
        #[arg(short = 'E', long = "energy", allow_hyphen_values = true)]
        energy: Option<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        #[arg(long)]
        shift: bool,
        /// Also export the dividing surfaces and their generating orbits.
        #[arg(long)]
        overlay: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CriticalPoints => "critical-points",
            Command::Hill { .. } => "hill",
            Command::Family { .. } => "family",
            Command::Ds { .. } => "ds",
            Command::Flux { .. } => "flux",
            Command::Raster { .. } => "raster",
            Command::Manifolds { .. } => "manifolds",
            Command::Classify { .. } => "classify",
            Command::ReturnMap { .. } => "return-map",
            Command::Cm { .. } => "cm",
        }
    }
}

fn build_config(g: &Global) -> Result<RunConfig> {
    let mut sets = g.sets.clone();
    let mut push = |k: &str, v: String| sets.push(format!("{k}={v}"));
    if let Some(o) = &g.out {
        push("output_dir", serde_json::to_string(o)?);
    }
    if let Some(t) = g.threads {
        push("threads", t.to_string());
    }
    if let Some(t) = g.t_max {
        push("t_max", t.to_string());
    }
    if let Some(i) = g.inertia {
        push("params.I", i.to_string());
    }
    if let Some(l) = g.lambda {
        push("params.lambda", l.to_string());
    }
    RunConfig::load(g.config.as_deref(), &sets)
}

fn run(cli: Cli) -> Result<i32> {
    let cfg = build_config(&cli.global)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool")?;
    }
    let cache = if cli.global.no_cache { Cache::disabled() } else { Cache::new(cfg.cache_dir(cli.global.cache_dir.as_deref())) };
    let mut ctx = Ctx::new(cfg, cache, cli.command.name())?;
    let e0 = ctx.cfg.energies.first().copied();
    let energy = |e: Option<f64>| e.or(e0).context("no energy given and the config's energy list is empty");
    let summary = match cli.command {
        Command::CriticalPoints => cmd::model::critical_points(&mut ctx)?,
        Command::Hill { energy: e, n_theta } => cmd::model::hill(&mut ctx, energy(e)?, n_theta)?,
        Command::Family { tag, from, to, seed_energy } => cmd::orbits::family(&mut ctx, tag, from, to, seed_energy)?,
        Command::Ds { energy: e } => cmd::orbits::ds(&mut ctx, energy(e)?)?,
        Command::Flux { energies } => cmd::orbits::flux(&mut ctx, energies)?,
        Command::Raster { surface, kind, energy: e, n, x_range, y_range } => {
            cmd::transport::raster(&mut ctx, surface, kind, energy(e)?, n, &x_range, &y_range)?
        }
        Command::Manifolds { energy: e, seeds, budget } => cmd::transport::manifolds(&mut ctx, energy(e)?, seeds, budget)?,
        Command::Classify { energy: e, grid, random, states, with_log } => {
            cmd::transport::classify(&mut ctx, energy(e)?, grid, random, states.as_deref(), with_log)?
        }
        Command::ReturnMap { energy: e, theta, p_theta, iterations } => {
            cmd::transport::return_map(&mut ctx, energy(e)?, theta, p_theta, iterations)?
        }
        Command::Cm { energy: e, radii, shift, overlay } => cmd::cm::cm(&mut ctx, energy(e)?, &radii, shift, overlay)?,
    };
    ctx.finish(summary)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Usage errors are failures (status 1); status 2 is reserved for partial runs.
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
