use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use coadapt::analysis;
use coadapt::config::{ExperimentConfig, InitScheme};
use coadapt::logfile::save_iterates;
use coadapt::server::Server;
use coadapt::simulate::Batch;
use coadapt_core::human::{HumanModel, DEFAULT_GRADIENT_RATE};
use coadapt_core::learner::BallSampling;
use coadapt_core::{ClosedLoopSystem, Dims, Estimate, LearnerConfig, LearnerState, Matrix, QuadraticCost, UpdateMode};

#[derive(Parser)]
#[command(name = "coadapt", version, about = "Human/machine co-adaptation game: simulation, service and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run simulated sessions and write their logs and iterate tables.
    Simulate(SimulateArgs),
    /// Serve live sessions over websockets.
    Serve(ServeArgs),
    /// Print the closed-loop transition matrix and its spectrum.
    AnalyzeSystem(AnalyzeArgs),
    /// Per-iteration error percentiles, median estimates and cost quartiles.
    Stats {
        /// Directory of `*iterates.csv` files.
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Side-by-side per-iteration median estimates of two session sets.
    Compare {
        sim: PathBuf,
        exp: PathBuf,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct LearnerArgs {
    #[arg(long, default_value = "1x1")]
    dims: Dims,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Base gain, row-major and comma separated; zero when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    gain: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    /// Divide the machine step by the number of perturbations.
    #[arg(long)]
    averaged: bool,
}

impl LearnerArgs {
    fn config(&self) -> anyhow::Result<LearnerConfig> {
        let dims = self.dims;
        let base_gain = match &self.gain {
            Some(g) => Matrix::from_row_major(dims.machine(), dims.human(), g.clone())
                .with_context(|| format!("--gain needs {} entries for {dims}", dims.gain_entries()))?,
            None => Matrix::zeros(dims.machine(), dims.human()),
        };
        let config = LearnerConfig {
            base_gain,
            delta: self.delta,
            alpha: self.alpha,
            iterations: self.iterations,
            mode: if self.averaged { UpdateMode::Averaged } else { UpdateMode::Sum },
            ..LearnerConfig::defaults(dims)
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Human {
    Exact,
    Noisy,
    Gradient,
}

#[derive(Clone, Copy, ValueEnum)]
enum Inits {
    Circle8,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sampling {
    Volume,
    Surface,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    learner: LearnerArgs,
    /// Start session `i` at point `i mod 8` of the circle of radius 0.65 (1x1 only).
    #[arg(long, conflicts_with = "init_ball")]
    inits: Option<Inits>,
    /// Draw each session's start from the ball of this radius.
    #[arg(long)]
    init_ball: Option<f64>,
    #[arg(long, value_enum, default_value = "volume")]
    sampling: Sampling,
    #[arg(long, default_value_t = 8)]
    sessions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "exact")]
    human: Human,
    /// Noise standard deviation for the noisy and gradient humans.
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    /// Gradient-flow rate in 1/s.
    #[arg(long, default_value_t = DEFAULT_GRADIENT_RATE)]
    rate: f64,
    /// Write only iterate tables, not per-sample logs.
    #[arg(long)]
    no_logs: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// Experiment config (JSON). Defaults for `--dims` when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "1x1", conflicts_with = "config")]
    dims: Dims,
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: String,
    /// Where finished sessions are written.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the effective config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    learner: LearnerArgs,
    /// Also iterate the map from this stacked start `(h_hat, m_hat)`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    init: Option<Vec<f64>>,
    /// Write the iterates from `--init` as an iterate table.
    #[arg(long, requires = "init")]
    iterates_out: Option<PathBuf>,
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let learner = args.learner.config()?;
    let init = match (args.inits, args.init_ball) {
        (Some(Inits::Circle8), _) => InitScheme::Circle8 { radius: 0.65 },
        (None, Some(radius)) => InitScheme::Ball {
            radius,
            sampling: match args.sampling {
                Sampling::Volume => BallSampling::Volume,
                Sampling::Surface => BallSampling::Surface,
            },
        },
        (None, None) if learner.dims.state_len() == 2 => InitScheme::Circle8 { radius: 0.65 },
        (None, None) => InitScheme::Ball {
            radius: 0.65,
            sampling: BallSampling::Volume,
        },
    };
    let human = match args.human {
        Human::Exact => HumanModel::ExactBestResponse,
        Human::Noisy => HumanModel::NoisyBestResponse {
            sigma: args.sigma,
            seed: args.seed,
        },
        Human::Gradient => HumanModel::GradientFlow {
            rate: args.rate,
            sigma: args.sigma,
            seed: args.seed,
        },
    };
    let batch = Batch {
        learner,
        init,
        sessions: args.sessions,
        seed: args.seed,
        human,
        timing: None,
    };
    let histories = batch.run_to_dir(&args.out, !args.no_logs)?;
    let cost = QuadraticCost::origin(batch.learner.dims);
    let trajectories: Vec<Vec<Estimate>> = histories
        .into_iter()
        .map(|h| h.into_iter().map(|s| s.estimate).collect())
        .collect();
    let stats = coadapt_core::stats::summarize(&trajectories, &cost)?;
    println!("{} sessions written to {}", batch.sessions, args.out.display());
    analysis::print_summary(&stats, std::io::stdout())?;
    Ok(())
}

async fn serve(args: ServeArgs) -> anyhow::Result<()> {
    let config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::defaults("default", args.dims),
    };
    if args.print_config {
        println!("{}", config.to_json()?);
        return Ok(());
    }
    let server = Server::new(config, args.out)?;
    let listener = Server::bind(&args.listen).await?;
    log::info!("listening on {}", listener.local_addr()?);
    server.run(listener).await?;
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> anyhow::Result<()> {
    let config = args.learner.config()?;
    let sys = ClosedLoopSystem::from_config(&config)?;
    let report = sys.stability()?;
    println!("dims {}  delta {}  alpha {}  mode {:?}", config.dims, config.delta, config.alpha, config.mode);
    println!("transition matrix:");
    for r in 0..sys.matrix().rows() {
        let row: Vec<String> = sys.matrix().row(r).iter().map(|x| format!("{:>12.6}", x + 0.0)).collect();
        println!("  {}", row.join(" "));
    }
    let eigs: Vec<String> = report.eigenvalues.iter().map(|e| e.to_string()).collect();
    println!("eigenvalues: {}", eigs.join(", "));
    println!("spectral radius: {}", report.spectral_radius);
    println!("converges: {}", report.converges);
    match report.nilpotency_index {
        Some(k) => println!("nilpotent: A^{k} = 0"),
        None => println!("nilpotent: no"),
    }
    if let Some(fp) = &report.fixed_point {
        println!("fixed point: {fp:?}");
    }
    if let Some(x0) = args.init {
        let xs = sys.iterate(&x0, config.iterations)?;
        for (k, x) in xs.iter().enumerate() {
            println!("x[{k}] = {x:?}");
        }
        if let Some(path) = args.iterates_out {
            let history = xs
                .iter()
                .enumerate()
                .map(|(k, x)| {
                    Ok(LearnerState {
                        k,
                        estimate: Estimate::from_stacked(config.dims, x)?,
                    })
                })
                .collect::<coadapt_core::Result<Vec<_>>>()?;
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            save_iterates(&history, &QuadraticCost::origin(config.dims), &path)?;
        }
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Simulate(args) => simulate(args),
        Command::Serve(args) => tokio::runtime::Runtime::new()?.block_on(serve(args)),
        Command::AnalyzeSystem(args) => analyze(args),
        Command::Stats { dir, out } => {
            let set = analysis::load_dir(&dir)?;
            let stats = analysis::iteration_stats(&set)?;
            for p in analysis::write_stats(&stats, set.dims, &out)? {
                println!("wrote {}", p.display());
            }
            analysis::print_summary(&stats, std::io::stdout())?;
            Ok(())
        }
        Command::Compare { sim, exp, out } => {
            let c = analysis::compare_dirs(&sim, &exp)?;
            if c.rows.is_empty() {
                bail!("no iterations in common");
            }
            analysis::write_comparison(&c, &out)?;
            println!("max median gap: {:e}", c.max_gap);
            Ok(())
        }
    }
}
