use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mvplab::bounds::{BoundMode, VarMaxCSource};
use mvplab::cli::{
    cmd_bounds, cmd_gen_chain, cmd_gen_lower_bound, cmd_gen_random, cmd_run, cmd_solve, CliError,
    ExperimentConfig,
};
use mvplab::envs::LowerBoundSpec;
use mvplab::solver::DEFAULT_ENUM_CAP;

/// Tabular episodic-RL laboratory: generate instances, solve them exactly,
/// run seeded regret experiments, and evaluate theoretical bounds.
#[derive(Parser)]
#[command(name = "mvplab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance and write it as JSON.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Solve an MDP file exactly and print the report JSON.
    Solve(SolveArgs),
    /// Run seeded experiments from a JSON config.
    Run(RunArgs),
    /// Evaluate the regret upper bound for a solved-instance report.
    Bounds(BoundsArgs),
}

#[derive(Subcommand)]
enum GenCommand {
    /// The hard family: a drifting main state feeding per-step Bernoulli
    /// bandit states.
    LowerBound(LowerBoundArgs),
    /// Single-state chain paying 1 at the last step.
    Chain(ChainArgs),
    /// Random sparse instance (rewards rescaled to the horizon bound).
    Random(RandomArgs),
}

#[derive(Args)]
struct LowerBoundArgs {
    /// Number of bandit states.
    #[arg(long = "S")]
    bandit_states: usize,
    /// Number of actions.
    #[arg(long = "A")]
    num_actions: usize,
    /// Horizon.
    #[arg(long = "H")]
    horizon: usize,
    /// Target conditional variance, in [1, H^2].
    #[arg(long = "L")]
    target_variance: f64,
    /// Comma-separated list of S*A*H nonnegative gaps (at least S*H zeros).
    #[arg(long, value_delimiter = ',')]
    gaps: Vec<f64>,
    /// Output path prefix; writes <prefix>.mdp.json and <prefix>.meta.json.
    #[arg(long, default_value = "lower_bound")]
    out: PathBuf,
}

#[derive(Args)]
struct ChainArgs {
    #[arg(long = "H")]
    horizon: usize,
    #[arg(long, default_value = "chain")]
    out: PathBuf,
}

#[derive(Args)]
struct RandomArgs {
    #[arg(long = "S")]
    num_states: usize,
    #[arg(long = "A")]
    num_actions: usize,
    #[arg(long = "H")]
    horizon: usize,
    /// Fraction of states in each transition row's support, in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    sparsity: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "random")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// MDP JSON file.
    mdp: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Policy-enumeration cap for the exact conditional-variance oracle.
    #[arg(long, default_value_t = DEFAULT_ENUM_CAP)]
    cap: u64,
    /// Skip the enumeration oracle entirely.
    #[arg(long)]
    no_exact: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config JSON file.
    config: PathBuf,
    /// Seed-level parallelism.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Copy, Clone, ValueEnum)]
enum ModeArg {
    Leading,
    FullConstants,
}

#[derive(Copy, Clone, ValueEnum)]
enum VarcArg {
    Future,
    Exact,
}

#[derive(Args)]
struct BoundsArgs {
    /// Solved-instance report JSON (output of `solve`).
    report: PathBuf,
    /// Episode count K the bound is evaluated at.
    #[arg(long = "K")]
    episodes: u64,
    #[arg(long)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Leading)]
    mode: ModeArg,
    /// Which conditional-variance estimate to use.
    #[arg(long = "var-max-c", value_enum, default_value_t = VarcArg::Future)]
    var_max_c: VarcArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit<T: serde::Serialize>(value: &T, out: Option<&PathBuf>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serialization cannot fail");
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(GenCommand::LowerBound(args)) => {
            let spec = LowerBoundSpec {
                bandit_states: args.bandit_states,
                num_actions: args.num_actions,
                horizon: args.horizon,
                target_variance: args.target_variance,
                gaps: args.gaps,
            };
            let out = cmd_gen_lower_bound(&spec, &args.out)?;
            println!("{}", out.mdp_path.display());
            println!(
                "{}",
                out.meta_path
                    .expect("lower-bound gen writes a sidecar")
                    .display()
            );
            Ok(())
        }
        Command::Gen(GenCommand::Chain(args)) => {
            let out = cmd_gen_chain(args.horizon, &args.out)?;
            println!("{}", out.mdp_path.display());
            Ok(())
        }
        Command::Gen(GenCommand::Random(args)) => {
            let out = cmd_gen_random(
                args.num_states,
                args.num_actions,
                args.horizon,
                args.sparsity,
                args.seed,
                &args.out,
            )?;
            println!("{}", out.mdp_path.display());
            Ok(())
        }
        Command::Solve(args) => {
            let report = cmd_solve(&args.mdp, args.cap, !args.no_exact)?;
            if !args.no_exact && report.variance.var_max_c_exact.is_none() {
                eprintln!(
                    "note: {:.3e} deterministic policies exceed the cap {}; \
                     var_max_c_exact skipped",
                    report.policy_count, report.enum_cap
                );
            }
            emit(&report, args.out.as_ref())
        }
        Command::Run(args) => {
            let config: ExperimentConfig = {
                let text = std::fs::read_to_string(&args.config)?;
                serde_json::from_str(&text).map_err(|source| CliError::Parse {
                    path: args.config.display().to_string(),
                    source,
                })?
            };
            let out = cmd_run(&config, args.jobs.max(1))?;
            for path in &out.trace_paths {
                println!("{}", path.display());
            }
            println!("{}", out.summary_path.display());
            Ok(())
        }
        Command::Bounds(args) => {
            let mode = match args.mode {
                ModeArg::Leading => BoundMode::Leading,
                ModeArg::FullConstants => BoundMode::FullConstants,
            };
            let source = match args.var_max_c {
                VarcArg::Future => VarMaxCSource::FutureDp,
                VarcArg::Exact => VarMaxCSource::Exact,
            };
            let report = cmd_bounds(&args.report, args.episodes, args.delta, mode, source)?;
            emit(&report, args.out.as_ref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
