//! `mecsim`: run policies on a scenario, sweep a parameter, or train a
//! hyperparameter grid. Every command writes CSV/JSON into `--out`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mec_core::experiment::{
    hyperparam_grid, run, sweep, summarize_sweep, write_csv, write_run, write_sweep, Axis, GridSpec, PolicyName,
    SweepSpec,
};
use mec_core::hasac::{LearnedPolicy, TrainerConfig};
use mec_core::nn::Activation;
use mec_core::scenario::{load_config, SimConfig};

#[derive(Parser, Debug)]
#[command(name = "mecsim", version, about = "Maritime UAV/vessel edge-computing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one policy (training it first if it learns).
    Run(RunArgs),
    /// Cross product of axis values, policies and seeds.
    Sweep(SweepArgs),
    /// Training curves over learning rates, widths and activations.
    Grid(GridArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario TOML; defaults to the small three-MIoT scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trainer TOML; defaults to the desk-scale trainer.
    #[arg(long)]
    trainer: Option<PathBuf>,
    /// Ten MIoTs, six UAVs, two vessels and 512-wide networks.
    #[arg(long)]
    full_scale: bool,
    /// Training episodes for learning policies.
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "gct")]
    policy: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluate this checkpoint instead of training.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// num_miot, num_uav or bandwidth.
    #[arg(long)]
    axis: String,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "gct")]
    policy: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seed: Vec<u64>,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_value = "5e-4")]
    lr: Vec<f64>,
    /// Layer widths joined by `x`, e.g. `64x64`.
    #[arg(long, value_delimiter = ',', default_value = "64x64")]
    hidden: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "leaky_relu")]
    activation: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seed: Vec<u64>,
}

fn scenario(c: &Common) -> Result<SimConfig> {
    match &c.config {
        Some(p) => load_config(p).with_context(|| format!("loading {}", p.display())),
        None if c.full_scale => Ok(SimConfig::full_scale()),
        None => Ok(SimConfig::default()),
    }
}

fn trainer(c: &Common) -> Result<TrainerConfig> {
    let mut t = match &c.trainer {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None if c.full_scale => TrainerConfig::default(),
        None => TrainerConfig::desk(),
    };
    if let Some(e) = c.episodes {
        t.episodes = e;
    }
    t.validate()?;
    Ok(t)
}

fn policies(names: &[String]) -> Result<Vec<PolicyName>> {
    Ok(names.iter().map(|n| n.parse()).collect::<std::result::Result<_, _>>()?)
}

fn parse_hidden(s: &str) -> Result<Vec<usize>> {
    s.split('x').map(|w| w.trim().parse::<usize>().with_context(|| format!("bad layer width in `{s}`"))).collect()
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let cfg = scenario(&a.common)?;
    let tcfg = trainer(&a.common)?;
    let policy: PolicyName = a.policy.parse()?;
    let pretrained = match &a.checkpoint {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let lp = LearnedPolicy::from_json(&text)?;
            if policy.algorithm() != Some(lp.algorithm) {
                bail!("checkpoint holds a {} policy, not {policy}", lp.algorithm.name());
            }
            Some(lp)
        }
        None => None,
    };
    let out = run(&cfg, policy, a.seed, &tcfg, pretrained)?;
    write_run(&a.common.out, &out)?;
    let m = &out.metrics;
    println!(
        "{policy} seed {}: avg completion {} s, edge {} %, mean reward {:.4}",
        a.seed,
        fmt_opt(m.avg_completion),
        fmt_opt(m.edge_pct),
        m.mean_reward
    );
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"))
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let spec = SweepSpec {
        base: scenario(&a.common)?,
        axis: a.axis.parse::<Axis>()?,
        values: a.values.clone(),
        policies: policies(&a.policy)?,
        seeds: a.seed.clone(),
        trainer: trainer(&a.common)?,
    };
    let rows = sweep(&spec)?;
    write_sweep(&a.common.out, &rows)?;
    for s in summarize_sweep(&rows) {
        println!(
            "{}={} {}: completion {} ± {} s ({} runs, {} failed)",
            s.axis,
            s.value,
            s.policy,
            fmt_opt(s.avg_completion_mean),
            fmt_opt(s.avg_completion_std),
            s.runs,
            s.failures
        );
    }
    Ok(())
}

fn cmd_grid(a: &GridArgs) -> Result<()> {
    let spec = GridSpec {
        base: scenario(&a.common)?,
        trainer: trainer(&a.common)?,
        learning_rates: a.lr.clone(),
        hidden: a.hidden.iter().map(|h| parse_hidden(h)).collect::<Result<_>>()?,
        activations: a.activation.iter().map(|s| s.parse::<Activation>()).collect::<std::result::Result<_, _>>()?,
        seeds: a.seed.clone(),
    };
    let rows = hyperparam_grid(&spec)?;
    write_curves(&a.common.out, &rows)?;
    println!("{} curve rows written", rows.len());
    Ok(())
}

fn write_curves(dir: &Path, rows: &[mec_core::experiment::CurveRow]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(rows, fs::File::create(dir.join("curves.csv"))?)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Grid(a) => cmd_grid(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
