use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use pm_core::adversary::AdversaryKind;
use pm_core::harness::{self, ExperimentConfig, ParamSpec, SeedSpec};
use pm_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "pm",
    version,
    about = "Partial-monitoring games and local internal regret"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print observer vectors and the local observability verdict.
    Check { game: String },
    /// Print the neighborhood graph and boundary margins.
    Graph { game: String },
    /// Run an experiment sweep and write per-run CSVs plus summary.json.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment file; other flags are ignored when given.
    #[arg(long, conflicts_with_all = ["game", "adversary", "horizons"])]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    game: Option<String>,
    #[arg(long, default_value = "uniform")]
    adversary: Option<AdversaryKind>,
    #[arg(long = "T", value_delimiter = ',', required_unless_present = "config")]
    horizons: Vec<usize>,
    #[arg(long, default_value = "20")]
    seeds: SeedSpec,
    #[arg(long, default_value = "auto")]
    eta: ParamSpec,
    #[arg(long, default_value = "auto")]
    gamma: ParamSpec,
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<usize>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self) -> Result<ExperimentConfig> {
        if let Some(path) = &self.config {
            let mut config = ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?;
            if let Some(out) = self.out {
                config.out = out;
            }
            return Ok(config);
        }
        let config = ExperimentConfig {
            game: self.game.expect("required by clap"),
            adversary: self.adversary.expect("has a default"),
            horizons: self.horizons,
            seeds: self.seeds,
            eta: self.eta,
            gamma: self.gamma,
            checkpoints: self.checkpoints,
            out: self.out.unwrap_or_else(|| PathBuf::from("out")),
        };
        config.validate()?;
        Ok(config)
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match std::io::stdout().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn check(game_ref: &str) -> Result<u8> {
    let (_, game) = harness::resolve_game(game_ref)?;
    let c = harness::classify(&game)?;
    print_json(&c.observability)?;
    if !c.observability.locally_observable {
        let pairs = c.observability.unobservable_pairs();
        eprintln!("not locally observable: pairs {pairs:?}");
        return Ok(3);
    }
    if !c.geometry.dominated_actions.is_empty() {
        eprintln!("dominated actions: {:?}", c.geometry.dominated_actions);
        return Ok(4);
    }
    Ok(0)
}

fn graph(game_ref: &str) -> Result<u8> {
    let (_, game) = harness::resolve_game(game_ref)?;
    let c = harness::classify(&game)?;
    let adjacency: Vec<&[usize]> = (0..c.num_actions).map(|i| c.graph.neighbors(i)).collect();
    print_json(&json!({
        "N": c.num_actions,
        "adjacency": adjacency,
        "cell_margins": c.geometry.cell_margins,
        "margins": c.geometry.pair_margins,
        "dominated_actions": c.geometry.dominated_actions,
    }))?;
    Ok(0)
}

fn run(args: RunArgs) -> Result<u8> {
    let config = args.into_config()?;
    let sweep = harness::run_experiment(&config)?;
    let s = &sweep.summary;
    for (idx, t) in s.horizons.iter().enumerate() {
        eprintln!(
            "T={t}: mean internal regret {:.3} (sd {:.3}), bound {:.3}",
            s.mean_int_regret[idx], s.std_int_regret[idx], s.theorem_bound[idx]
        );
    }
    if let Some(slope) = s.slope {
        eprintln!("log-log slope {slope:.3}");
    }
    eprintln!("wrote {}", config.out.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Check { game } => check(&game),
        Command::Graph { game } => graph(&game),
        Command::Run(args) => run(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            if let Error::NotLocallyObservable { pairs } = &err {
                eprintln!("unobservable pairs: {pairs:?}");
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
