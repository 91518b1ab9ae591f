use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::Adversary;
use crate::engine::{self, EngineConfig, FlowStats, PreparedGame};
use crate::error::{Error, Result};
use crate::game::Game;
use crate::geometry::{self, GeometryReport, NeighborhoodGraph};
use crate::observability::{self, ObservabilityReport};
use crate::regret::{self, RegretReport};

use super::catalog::catalog_entry;
use super::config::ExperimentConfig;

pub const CSV_HEADER: &str = "t,k,I,j,loss,cum_loss,ext_regret,int_regret,local_int_regret";

/// Everything `pm check` reports about a game.
#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    #[serde(rename = "N")]
    pub num_actions: usize,
    #[serde(rename = "M")]
    pub num_outcomes: usize,
    pub graph: NeighborhoodGraph,
    pub geometry: GeometryReport,
    pub observability: ObservabilityReport,
}

/// Geometry and observability verdicts without requiring the game to be
/// playable. Only degenerate games are rejected.
pub fn classify(game: &Game) -> Result<Classification> {
    let (graph, geometry) = geometry::neighborhood(game)?;
    let observability = observability::check_game(game, &graph)?;
    Ok(Classification {
        num_actions: game.num_actions(),
        num_outcomes: game.num_outcomes(),
        graph,
        geometry,
        observability,
    })
}

/// A catalog name, or else a path to a game document.
pub fn resolve_game(game_ref: &str) -> Result<(String, Game)> {
    if let Some(entry) = catalog_entry(game_ref) {
        return Ok((entry.name.to_string(), entry.game));
    }
    let path = Path::new(game_ref);
    if !path.exists() {
        return Err(Error::InvalidInput(format!(
            "{game_ref:?} is neither a catalog game nor an existing file"
        )));
    }
    let text = fs::read_to_string(path)?;
    let name = path.file_stem().map_or_else(
        || game_ref.to_string(),
        |s| s.to_string_lossy().into_owned(),
    );
    Ok((name, Game::parse(&text)?))
}

/// About a thousand evenly spaced rounds, always including the last.
pub fn default_checkpoints(horizon: usize) -> Vec<usize> {
    let stride = (horizon / 1000).max(1);
    let mut points: Vec<usize> = (1..=horizon / stride).map(|k| k * stride).collect();
    if points.last() != Some(&horizon) && horizon > 0 {
        points.push(horizon);
    }
    points
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub clamped: usize,
}

/// Least-squares slope of `ln(value)` against `ln(T)`. Values at or below
/// `floor` are replaced by `floor` and counted.
pub fn fit_slope(points: &[(f64, f64)], floor: f64) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "slope fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    let mut clamped = 0;
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(t, y)| {
            let y = if y <= floor {
                clamped += 1;
                floor
            } else {
                y
            };
            (t.ln(), y.ln())
        })
        .collect();
    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput(
            "slope fit needs distinct horizons".into(),
        ));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: mean_y - slope * mean_x,
        clamped,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub horizon: usize,
    pub seed: u64,
    pub eta: f64,
    pub gamma: f64,
    pub report: RegretReport,
    pub flow: FlowStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub game: String,
    #[serde(rename = "N")]
    pub num_actions: usize,
    #[serde(rename = "M")]
    pub num_outcomes: usize,
    pub v_bar: f64,
    pub l_bar: f64,
    pub adversary: String,
    pub seeds: Vec<u64>,
    /// Per horizon.
    pub eta: Vec<f64>,
    /// Per horizon.
    pub gamma: Vec<f64>,
    pub horizons: Vec<usize>,
    pub mean_int_regret: Vec<f64>,
    pub std_int_regret: Vec<f64>,
    pub avg_int_regret: Vec<f64>,
    pub mean_local_int_regret: Vec<f64>,
    pub mean_ext_regret: Vec<f64>,
    pub avg_ext_regret: Vec<f64>,
    pub theorem_bound: Vec<f64>,
    /// `None` with a single horizon.
    pub slope: Option<f64>,
    pub clamped_points: usize,
    pub max_flow_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub summary: Summary,
    /// Sorted by `(horizon, seed)`.
    pub runs: Vec<RunResult>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every `(horizon, seed)` pair in parallel and aggregates the results.
/// Nothing is written to disk.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let (name, game) = resolve_game(&config.game)?;
    let prepared = PreparedGame::new(game)?;
    let n = prepared.num_actions();
    let v_bar = prepared.observers.v_bar;
    if !(v_bar > 0.0) {
        return Err(Error::InvalidInput("observer vectors are all zero".into()));
    }
    let seeds = config.seeds.seeds();

    let eta_for = |t: usize| {
        config
            .eta
            .resolve(|| ((n as f64).ln() / (24.0 * v_bar * v_bar * t.max(1) as f64)).sqrt())
    };
    let gamma_for = |t: usize| {
        config
            .gamma
            .resolve(|| (1.0 / (t.max(1) as f64).sqrt()).min(0.25))
    };

    let jobs: Vec<(usize, u64)> = config
        .horizons
        .iter()
        .flat_map(|&t| seeds.iter().map(move |&s| (t, s)))
        .collect();

    let mut runs = jobs
        .par_iter()
        .map(|&(horizon, seed)| -> Result<RunResult> {
            let eta = eta_for(horizon);
            let gamma = gamma_for(horizon);
            let mut adversary = Adversary::new(config.adversary.clone(), &prepared.game, seed)?;
            let outcome = engine::run(
                &prepared,
                &mut adversary,
                horizon,
                EngineConfig { eta, gamma, seed },
            )?;
            let checkpoints = match &config.checkpoints {
                Some(list) => list.clone(),
                None => default_checkpoints(horizon),
            };
            let report = if outcome.transcript.is_empty() {
                RegretReport {
                    external: 0.0,
                    internal: 0.0,
                    local_internal: 0.0,
                    best_fixed_action: 0,
                    worst_departure: None,
                    theorem_bound: 0.0,
                    checkpoints: Vec::new(),
                }
            } else {
                regret::regret_report(
                    &outcome.transcript,
                    prepared.game.loss(),
                    &prepared.graph,
                    v_bar,
                    &checkpoints,
                )?
            };
            Ok(RunResult {
                horizon,
                seed,
                eta,
                gamma,
                report,
                flow: outcome.flow,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    runs.sort_by_key(|r| (r.horizon, r.seed));

    let mut summary = Summary {
        game: name,
        num_actions: n,
        num_outcomes: prepared.game.num_outcomes(),
        v_bar,
        l_bar: prepared.observers.l_bar,
        adversary: config.adversary.to_string(),
        seeds,
        eta: Vec::new(),
        gamma: Vec::new(),
        horizons: config.horizons.clone(),
        mean_int_regret: Vec::new(),
        std_int_regret: Vec::new(),
        avg_int_regret: Vec::new(),
        mean_local_int_regret: Vec::new(),
        mean_ext_regret: Vec::new(),
        avg_ext_regret: Vec::new(),
        theorem_bound: Vec::new(),
        slope: None,
        clamped_points: 0,
        max_flow_residual: runs
            .iter()
            .map(|r| r.flow.max_l1_residual)
            .fold(0.0, f64::max),
    };
    for &t in &config.horizons {
        let at_t: Vec<&RunResult> = runs.iter().filter(|r| r.horizon == t).collect();
        let internal: Vec<f64> = at_t.iter().map(|r| r.report.internal).collect();
        let local: Vec<f64> = at_t.iter().map(|r| r.report.local_internal).collect();
        let external: Vec<f64> = at_t.iter().map(|r| r.report.external).collect();
        let (mean, std) = mean_std(&internal);
        let mean_ext = mean_std(&external).0;
        let denom = t.max(1) as f64;
        summary.eta.push(eta_for(t));
        summary.gamma.push(gamma_for(t));
        summary.mean_int_regret.push(mean);
        summary.std_int_regret.push(std);
        summary.avg_int_regret.push(mean / denom);
        summary.mean_local_int_regret.push(mean_std(&local).0);
        summary.mean_ext_regret.push(mean_ext);
        summary.avg_ext_regret.push(mean_ext / denom);
        summary
            .theorem_bound
            .push(regret::theorem_bound(n, v_bar, t));
    }
    if config.horizons.len() >= 2 {
        let points: Vec<(f64, f64)> = config
            .horizons
            .iter()
            .zip(&summary.mean_int_regret)
            .map(|(&t, &y)| (t as f64, y))
            .collect();
        let fit = fit_slope(&points, 1.0)?;
        summary.slope = Some(fit.slope);
        summary.clamped_points = fit.clamped;
    }
    Ok(SweepResult { summary, runs })
}

fn csv_text(run: &RunResult) -> String {
    let mut out = String::with_capacity(64 * (run.report.checkpoints.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &run.report.checkpoints {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.t,
            r.k,
            r.played,
            r.j,
            r.loss,
            r.cum_loss,
            r.ext_regret,
            r.int_regret,
            r.local_int_regret
        );
    }
    out
}

/// Writes `run_T<horizon>_seed<seed>.csv` per run and `summary.json` into `dir`.
pub fn write_results(dir: &Path, sweep: &SweepResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    for run in &sweep.runs {
        let path = dir.join(format!("run_T{}_seed{}.csv", run.horizon, run.seed));
        fs::write(path, csv_text(run))?;
    }
    let mut summary = serde_json::to_string_pretty(&sweep.summary)?;
    summary.push('\n');
    fs::write(dir.join("summary.json"), summary)?;
    Ok(())
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<SweepResult> {
    let sweep = run_sweep(config)?;
    write_results(&config.out, &sweep)?;
    Ok(sweep)
}
