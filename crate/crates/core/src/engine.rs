//! The meta algorithm: one local learner per action, combined through the
//! stationary distribution of the matrix whose columns are the learners'
//! sampling distributions.
//!
//! Each round:
//! 1. `Q` is assembled from the learners (`Q[:, i] = q_i`) and `p = Q p` is solved.
//! 2. `k ~ p`, then `I ~ q_k` (both from the engine's random stream, in that order).
//! 3. The opponent picks `j`; the signal for `(I, j)` is drawn (random feedback
//!    consumes the engine stream after `k` and `I`).
//! 4. The round is buffered at learners `I` and `k`, and learner `k` is invoked.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adversary::Opponent;
use crate::error::{Error, Result};
use crate::game::Game;
use crate::geometry::{self, GeometryReport, NeighborhoodGraph};
use crate::learner::{LocalLearner, RoundRecord};
use crate::linalg::solve_square;
use crate::observability::{self, ObservabilityReport};

/// Bound on `||Q p - p||_1` enforced every round.
pub const FLOW_TOL: f64 = 1e-9;

const COLUMN_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-12;
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 1_000_000;

/// A game that passed every gate the learner needs, with its derived structure.
#[derive(Debug, Clone)]
pub struct PreparedGame {
    pub game: Game,
    pub graph: NeighborhoodGraph,
    pub geometry: GeometryReport,
    pub observers: ObservabilityReport,
}

impl PreparedGame {
    /// Gates, in order: degeneracy, local observability, dominated actions.
    pub fn new(game: Game) -> Result<Self> {
        let (graph, geometry) = geometry::neighborhood(&game)?;
        let observers = observability::check_game(&game, &graph)?;
        if !observers.locally_observable {
            return Err(Error::NotLocallyObservable {
                pairs: observers.unobservable_pairs(),
            });
        }
        if !geometry.dominated_actions.is_empty() {
            return Err(Error::Dominated {
                actions: geometry.dominated_actions.clone(),
            });
        }
        Ok(PreparedGame {
            game,
            graph,
            geometry,
            observers,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.game.num_actions()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub eta: f64,
    pub gamma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TranscriptRow {
    pub t: usize,
    pub k: usize,
    #[serde(rename = "I")]
    pub played: usize,
    #[serde(rename = "j")]
    pub outcome: usize,
    pub symbol: usize,
    /// `L[I][j]`.
    pub loss: f64,
}

/// Worst flow-condition violations seen over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FlowStats {
    /// `max_t ||Q^t p^t - p^t||_1`.
    pub max_l1_residual: f64,
    /// `max_t max_i |sum_k p_k q_k(i) - p_i|`.
    pub max_marginal_error: f64,
}

/// Stationary distribution of a column-stochastic matrix given row-major
/// (`q[row][col]`, columns summing to one).
///
/// Solves `(Q - I) p = 0` with the last equation replaced by `sum p = 1`; if
/// that system is singular, falls back to lazy power iteration from the
/// uniform vector.
pub fn fixed_point(q: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = q.len();
    if n == 0 || q.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidInput(
            "fixed point needs a square matrix".into(),
        ));
    }
    for c in 0..n {
        let total: f64 = (0..n).map(|r| q[r][c]).sum();
        if (total - 1.0).abs() > COLUMN_TOL || (0..n).any(|r| !(q[r][c] >= -COLUMN_TOL)) {
            return Err(Error::InvalidInput(format!(
                "column {c} is not a distribution (sum {total})"
            )));
        }
    }

    let mut a: Vec<Vec<f64>> = q
        .iter()
        .enumerate()
        .map(|(r, row)| {
            row.iter()
                .enumerate()
                .map(|(c, &v)| if r == c { v - 1.0 } else { v })
                .collect()
        })
        .collect();
    a[n - 1] = vec![1.0; n];
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;

    if let Some(p) = solve_square(&a, &b, PIVOT_TOL) {
        if p.iter().all(|&x| x >= -FLOW_TOL) {
            return Ok(normalize_nonnegative(p));
        }
    }
    power_iteration(q)
}

fn normalize_nonnegative(mut p: Vec<f64>) -> Vec<f64> {
    p.iter_mut().for_each(|x| *x = x.max(0.0));
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

fn apply(q: &[Vec<f64>], p: &[f64]) -> Vec<f64> {
    q.iter()
        .map(|row| row.iter().zip(p).map(|(a, b)| a * b).sum())
        .collect()
}

fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn power_iteration(q: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = q.len();
    let mut p = vec![1.0 / n as f64; n];
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_MAX_ITERS {
        let next = apply(q, &p);
        residual = l1_distance(&next, &p);
        if residual <= POWER_TOL {
            return Ok(p);
        }
        p = p.iter().zip(&next).map(|(a, b)| 0.5 * (a + b)).collect();
    }
    Err(Error::Numerical(format!(
        "power iteration did not converge (residual {residual:e})"
    )))
}

/// Index drawn from `weights` with one uniform variate.
fn sample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = i;
            acc += w;
            if u < acc {
                return i;
            }
        }
    }
    last
}

pub struct Engine<'a> {
    prepared: &'a PreparedGame,
    learners: Vec<LocalLearner>,
    p: Vec<f64>,
    t: usize,
    rng: ChaCha8Rng,
    played: Vec<usize>,
    transcript: Vec<TranscriptRow>,
    flow: FlowStats,
}

impl<'a> Engine<'a> {
    pub fn new(prepared: &'a PreparedGame, config: EngineConfig) -> Result<Self> {
        let n = prepared.num_actions();
        let learners = (0..n)
            .map(|i| LocalLearner::new(i, n, prepared.graph.neighbors(i), config.eta, config.gamma))
            .collect::<Result<Vec<_>>>()?;
        Ok(Engine {
            prepared,
            learners,
            p: vec![1.0 / n as f64; n],
            t: 0,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            played: Vec::new(),
            transcript: Vec::new(),
            flow: FlowStats::default(),
        })
    }

    /// Row-major `Q` with `Q[r][c] = q_c(r)`.
    pub fn q_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.learners.len();
        (0..n)
            .map(|r| self.learners.iter().map(|l| l.distribution()[r]).collect())
            .collect()
    }

    pub fn learners(&self) -> &[LocalLearner] {
        &self.learners
    }

    /// Distribution `p^t` used in the latest round.
    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn round(&self) -> usize {
        self.t
    }

    pub fn transcript(&self) -> &[TranscriptRow] {
        &self.transcript
    }

    pub fn flow_stats(&self) -> FlowStats {
        self.flow
    }

    pub fn step(&mut self, opponent: &mut dyn Opponent) -> Result<TranscriptRow> {
        let t = self.t + 1;
        let q = self.q_matrix();
        let p = fixed_point(&q)?;
        let qp = apply(&q, &p);
        let l1 = l1_distance(&qp, &p);
        let marginal = qp
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        if l1 > FLOW_TOL {
            return Err(Error::Numerical(format!(
                "round {t}: flow condition violated, ||Qp - p||_1 = {l1:e}"
            )));
        }
        self.flow.max_l1_residual = self.flow.max_l1_residual.max(l1);
        self.flow.max_marginal_error = self.flow.max_marginal_error.max(marginal);

        let k = sample(&p, &mut self.rng);
        let qk = self.learners[k].distribution();
        let played = sample(qk, &mut self.rng);
        let sampling_prob = qk[played];
        debug_assert!(self.prepared.graph.are_neighbors(k, played));

        let outcome = opponent.next_outcome(t, &self.played)?;
        if outcome >= self.prepared.game.num_outcomes() {
            return Err(Error::InvalidInput(format!(
                "opponent returned outcome {outcome} out of range"
            )));
        }
        let signal = self.prepared.game.observe(played, outcome, &mut self.rng);

        let record = RoundRecord {
            t,
            k,
            played,
            signal,
            sampling_prob,
        };
        self.learners[played].record(record);
        if k != played {
            self.learners[k].record(record);
        }
        self.learners[k].invoke(&self.prepared.observers)?;

        let row = TranscriptRow {
            t,
            k,
            played,
            outcome,
            symbol: signal.symbol,
            loss: self.prepared.game.loss_at(played, outcome),
        };
        self.p = p;
        self.t = t;
        self.played.push(played);
        self.transcript.push(row);
        Ok(row)
    }

    pub fn run(mut self, opponent: &mut dyn Opponent, horizon: usize) -> Result<RunOutcome> {
        for _ in 0..horizon {
            self.step(opponent)?;
        }
        Ok(RunOutcome {
            transcript: self.transcript,
            flow: self.flow,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub transcript: Vec<TranscriptRow>,
    pub flow: FlowStats,
}

/// Plays `horizon` rounds of the prepared game against `opponent`.
pub fn run(
    prepared: &PreparedGame,
    opponent: &mut dyn Opponent,
    horizon: usize,
    config: EngineConfig,
) -> Result<RunOutcome> {
    Engine::new(prepared, config)?.run(opponent, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{Adversary, AdversaryKind};

    fn bandit() -> PreparedGame {
        PreparedGame::new(
            Game::parse(r#"{"loss": [[0,1],[1,0]], "signals": [["0","1"],["1","0"]]}"#).unwrap(),
        )
        .unwrap()
    }

    fn config(seed: u64) -> EngineConfig {
        EngineConfig {
            eta: 0.05,
            gamma: 0.1,
            seed,
        }
    }

    #[test]
    fn fixed_point_of_identical_columns() {
        let q = vec![
            vec![0.2, 0.2, 0.2],
            vec![0.5, 0.5, 0.5],
            vec![0.3, 0.3, 0.3],
        ];
        let p = fixed_point(&q).unwrap();
        for (a, b) in p.iter().zip([0.2, 0.5, 0.3]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn fixed_point_two_state_balance() {
        // Balance: 0.3 p1 = 0.6 p2.
        let p = fixed_point(&[vec![0.7, 0.6], vec![0.3, 0.4]]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn fixed_point_identity_is_uniform() {
        let q = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        assert_eq!(fixed_point(&q).unwrap(), vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn fixed_point_periodic_chain_through_fallback() {
        // Reducible block structure forces the fallback: two closed classes {0,1} and {2}.
        let q = vec![
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let p = fixed_point(&q).unwrap();
        let qp = apply(&q, &p);
        assert!(l1_distance(&qp, &p) <= 1e-12);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_rejects_non_stochastic() {
        assert!(fixed_point(&[vec![0.5, 0.5], vec![0.4, 0.5]]).is_err());
        assert!(fixed_point(&[vec![1.0, 0.5]]).is_err());
    }

    #[test]
    fn zero_horizon_is_empty() {
        let g = bandit();
        let mut adv = Adversary::new(AdversaryKind::Iid(vec![]), &g.game, 0).unwrap();
        let out = run(&g, &mut adv, 0, config(1)).unwrap();
        assert!(out.transcript.is_empty());
    }

    #[test]
    fn short_run_shape() {
        let g = bandit();
        let mut adv = Adversary::new(AdversaryKind::Iid(vec![]), &g.game, 7).unwrap();
        let out = run(&g, &mut adv, 10, config(7)).unwrap();
        assert_eq!(out.transcript.len(), 10);
        for (idx, row) in out.transcript.iter().enumerate() {
            assert_eq!(row.t, idx + 1);
            assert!(g.graph.are_neighbors(row.k, row.played));
            let loss = g.game.loss_at(row.played, row.outcome);
            assert!(loss == 0.0 || loss == 1.0);
        }
        assert!(out.flow.max_l1_residual <= FLOW_TOL);
    }

    #[test]
    fn deterministic_given_seed() {
        let g = bandit();
        let go = |seed| {
            let mut adv = Adversary::new("adaptive:10".parse().unwrap(), &g.game, seed).unwrap();
            run(&g, &mut adv, 500, config(seed)).unwrap().transcript
        };
        assert_eq!(go(3), go(3));
        assert_ne!(go(3), go(4));
    }

    #[test]
    fn first_round_is_fair_on_symmetric_game() {
        let g = bandit();
        let trials = 20_000;
        let ones = (0..trials)
            .filter(|&s| {
                let mut adv =
                    Adversary::new(AdversaryKind::FixedSequence(vec![0]), &g.game, s).unwrap();
                let mut engine = Engine::new(&g, config(s)).unwrap();
                engine.step(&mut adv).unwrap().played == 0
            })
            .count();
        let freq = ones as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.015, "{freq}");
    }

    #[test]
    fn column_of_q_tracks_learner() {
        let g = bandit();
        let mut adv = Adversary::new(AdversaryKind::Iid(vec![]), &g.game, 1).unwrap();
        let mut engine = Engine::new(&g, config(1)).unwrap();
        for _ in 0..50 {
            engine.step(&mut adv).unwrap();
            let q = engine.q_matrix();
            for (c, learner) in engine.learners().iter().enumerate() {
                for r in 0..2 {
                    assert_eq!(q[r][c], learner.distribution()[r]);
                }
            }
            let p = engine.p();
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn gates_report_in_order() {
        let unobservable = Game::parse(
            r#"{"loss": [[1,1],[0,1],[1,0]], "signals": [["a","b"],["x","x"],["x","x"]]}"#,
        )
        .unwrap();
        assert!(matches!(
            PreparedGame::new(unobservable),
            Err(Error::NotLocallyObservable { .. })
        ));
        let dominated = Game::parse(
            r#"{"loss": [[0,1],[1,0],[0.6,0.6]], "signals": [["a","b"],["a","b"],["a","b"]]}"#,
        )
        .unwrap();
        assert!(matches!(
            PreparedGame::new(dominated),
            Err(Error::Dominated { .. })
        ));
        let degenerate = Game::parse(
            r#"{"loss": [[0,1],[1,0],[0.5,0.5]], "signals": [["a","b"],["a","b"],["a","b"]]}"#,
        )
        .unwrap();
        assert!(matches!(
            PreparedGame::new(degenerate),
            Err(Error::Degenerate(_))
        ));
    }
}
