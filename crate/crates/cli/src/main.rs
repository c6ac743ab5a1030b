mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Overrides;

#[derive(Parser, Debug)]
#[command(name = "rulcast", version, about = "Remaining-useful-life forecasting for run-to-failure fleets")]
struct Cli {
    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; per-module seeds are derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct DataArgs {
    /// Training log (C-MAPSS format, run to failure).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test log, truncated before failure.
    #[arg(long)]
    test: Option<PathBuf>,
    /// True RUL at the last cycle of each test engine.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct BaselineArgs {
    /// Clamp negative RUL forecasts to zero.
    #[arg(long)]
    clamp_zero: bool,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    mc_samples: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct SennArgs {
    /// Small network, short schedule and 20 training engines.
    #[arg(long)]
    desk_scale: bool,
    /// weibull or lognormal.
    #[arg(long)]
    family: Option<String>,
    /// current, engineered or both.
    #[arg(long)]
    linear_input: Option<String>,
    /// gaussian or laplace prior on the linear coefficients.
    #[arg(long)]
    prior: Option<String>,
    /// reparam or score.
    #[arg(long)]
    grad: Option<String>,
    /// Comma-separated LSTM layer sizes.
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    lags: Option<usize>,
    #[arg(long)]
    n_mc: Option<usize>,
    /// Keep only the first N training engines.
    #[arg(long)]
    train_engines: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse the logs, write canonical dumps and summary statistics.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Lifetime and penalized linear baselines on the test protocol.
    Baselines {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opts: BaselineArgs,
    },
    /// Fit the structured-effect network and write a checkpoint.
    TrainSenn {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        senn: SennArgs,
        /// Fit lifetime and linear parts first, then the recurrent part.
        #[arg(long)]
        two_stage: bool,
    },
    /// Score a checkpoint on the test engines.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Per-cycle decomposition of selected engines.
    Decompose {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated engine ids; defaults to the first test engine.
        #[arg(long, value_delimiter = ',')]
        engines: Vec<u32>,
        /// Decompose training engines instead of test engines.
        #[arg(long)]
        on_train: bool,
    },
    /// Full comparison tables and plots for a checkpoint against the baselines.
    Report {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opts: BaselineArgs,
        #[arg(long, value_delimiter = ',')]
        engines: Vec<u32>,
    },
}

fn overrides(cli: &Cli) -> Overrides {
    let mut o = Overrides { seed: cli.seed, out: cli.out.clone(), ..Overrides::default() };
    let data = |o: &mut Overrides, d: &DataArgs| {
        o.train = d.train.clone();
        o.test = d.test.clone();
        o.truth = d.truth.clone();
    };
    let base = |o: &mut Overrides, b: &BaselineArgs| {
        o.clamp_zero = b.clamp_zero;
        o.folds = b.folds;
        o.mc_samples = b.mc_samples;
    };
    match &cli.command {
        Command::Ingest { data: d } | Command::Evaluate { data: d, .. } | Command::Decompose { data: d, .. } => data(&mut o, d),
        Command::Baselines { data: d, opts } | Command::Report { data: d, opts, .. } => {
            data(&mut o, d);
            base(&mut o, opts);
        }
        Command::TrainSenn { data: d, senn, two_stage } => {
            data(&mut o, d);
            o.two_stage = *two_stage;
            o.desk_scale = senn.desk_scale;
            o.family = senn.family.clone();
            o.linear_input = senn.linear_input.clone();
            o.prior = senn.prior.clone();
            o.grad = senn.grad.clone();
            o.hidden = senn.hidden.clone();
            o.steps = senn.steps;
            o.batch = senn.batch;
            o.window = senn.window;
            o.lags = senn.lags;
            o.n_mc = senn.n_mc;
            o.train_engines = senn.train_engines;
        }
    }
    o
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let cfg = match config::RunConfig::load(cli.config.as_deref(), &overrides(&cli)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Ingest { .. } => commands::ingest(&cfg),
        Command::Baselines { .. } => commands::baselines(&cfg),
        Command::TrainSenn { .. } => commands::train_senn(&cfg),
        Command::Evaluate { checkpoint, .. } => commands::evaluate(&cfg, checkpoint),
        Command::Decompose { checkpoint, engines, on_train, .. } => commands::decompose(&cfg, checkpoint, engines, *on_train),
        Command::Report { checkpoint, engines, .. } => commands::report(&cfg, checkpoint, engines),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
