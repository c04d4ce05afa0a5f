use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod manifest;

/// Dataset generation, training and evaluation for neural algorithmic reasoners.
#[derive(Parser, Debug)]
#[command(name = "narlab", version, about)]
struct Cli {
    /// Worker threads for data generation and evaluation.
    #[arg(long, global = true, env = "NAR_LAB_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate dataset shards for a preset.
    Gen(GenArgs),
    /// Train a model.
    Train(TrainArgs),
    /// Score a checkpoint (or the oracle) on a shard.
    Eval(EvalArgs),
    /// Evaluate linear interpolations between two checkpoints.
    Interp(InterpArgs),
    /// Run the two-community bridge probe.
    BridgeProbe(ProbeArgs),
    /// Generate or verify golden fixtures.
    Fixtures(FixtureArgs),
}

#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    /// CLRS, L-CLRS, L-CLRS-Len, L-CLRS-Deg, L-CLRS-Len-Deg or custom.
    #[arg(long)]
    pub preset: String,
    /// Task name or `all`.
    #[arg(long, default_value = "all")]
    pub task: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub valtest_size: Option<usize>,
    #[arg(long)]
    pub train_len: Option<usize>,
    #[arg(long)]
    pub test_len: Option<usize>,
    /// Degree of the training (and test, unless --k-test) regular graphs.
    #[arg(long = "K", alias = "k")]
    pub k: Option<usize>,
    #[arg(long)]
    pub k_test: Option<usize>,
    #[arg(long)]
    pub encoding: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// JSON training config; flags given alongside override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub preset: Option<String>,
    /// Shard root written by `gen`; without it the data is generated in memory.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub processor: Option<String>,
    #[arg(long)]
    pub encoding: Option<String>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Processor applications per forward pass.
    #[arg(long = "T")]
    pub processor_steps: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Single-core configuration: n=16 4-regular graphs, 2000 train
    /// instances, d=64, T=16, 3000 steps.
    #[arg(long)]
    pub desk_scale: bool,
    #[arg(long, default_value = "runs")]
    pub runs: PathBuf,
    #[arg(long)]
    pub run_id: Option<String>,
    /// Resume from this checkpoint of the same run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Resolve the configuration, write the run manifest and config, then stop.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    #[arg(long, required_unless_present = "oracle")]
    pub ckpt: Option<PathBuf>,
    #[arg(long)]
    pub shard: PathBuf,
    /// Score the oracle instead of a model.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct InterpArgs {
    #[arg(long)]
    pub ckpt_a: PathBuf,
    #[arg(long)]
    pub ckpt_b: PathBuf,
    #[arg(long, default_value_t = 11)]
    pub grid: usize,
    #[arg(long)]
    pub id_shard: PathBuf,
    #[arg(long)]
    pub ood_shard: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ProbeArgs {
    #[arg(long, required_unless_present = "random_baseline")]
    pub ckpt: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub pairs: usize,
    /// Score a fair-coin mask predictor instead of a model.
    #[arg(long)]
    pub random_baseline: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct FixtureArgs {
    #[command(subcommand)]
    pub action: FixtureAction,
}

#[derive(Subcommand, Debug, Clone)]
pub enum FixtureAction {
    /// Draw and write fresh fixtures.
    Generate {
        #[arg(long, default_value = "fixtures")]
        out: PathBuf,
        #[arg(long, default_value_t = narlab_core::fixtures::FIXTURES_PER_TASK)]
        per_task: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-run the oracles on every fixture.
    Verify {
        #[arg(long, default_value = "fixtures")]
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let argv: Vec<String> = std::env::args().collect();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(&a, &argv),
        Command::Train(a) => commands::train(&a, &argv),
        Command::Eval(a) => commands::eval(&a),
        Command::Interp(a) => commands::interp(&a),
        Command::BridgeProbe(a) => commands::bridge_probe(&a),
        Command::Fixtures(a) => commands::fixtures(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.source);
            ExitCode::from(e.code)
        }
    }
}
