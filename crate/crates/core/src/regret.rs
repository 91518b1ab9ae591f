//! Exact post-hoc regret from a transcript.
//!
//! All quantities are cumulative (not divided by `T`).

use serde::Serialize;

use crate::engine::TranscriptRow;
use crate::error::{Error, Result};
use crate::geometry::NeighborhoodGraph;

/// `4 N v_bar sqrt(6 ln(N) T)`.
pub fn theorem_bound(num_actions: usize, v_bar: f64, horizon: usize) -> f64 {
    4.0 * num_actions as f64 * v_bar * (6.0 * (num_actions as f64).ln() * horizon as f64).sqrt()
}

/// Incremental regret accounting over a growing transcript.
#[derive(Debug, Clone)]
pub struct RegretTracker {
    loss: Vec<Vec<f64>>,
    rounds: usize,
    cumulative_loss: f64,
    /// `sum_t L[k][j_t]` for every fixed action `k`.
    fixed_totals: Vec<f64>,
    /// `departure[i][j] = sum_t 1{I_t = i} (L[i][j_t] - L[j][j_t])`.
    departure: Vec<Vec<f64>>,
}

impl RegretTracker {
    pub fn new(loss: &[Vec<f64>]) -> Self {
        let n = loss.len();
        RegretTracker {
            loss: loss.to_vec(),
            rounds: 0,
            cumulative_loss: 0.0,
            fixed_totals: vec![0.0; n],
            departure: vec![vec![0.0; n]; n],
        }
    }

    pub fn push(&mut self, played: usize, outcome: usize) {
        let incurred = self.loss[played][outcome];
        self.rounds += 1;
        self.cumulative_loss += incurred;
        for (k, total) in self.fixed_totals.iter_mut().enumerate() {
            *total += self.loss[k][outcome];
        }
        for (j, d) in self.departure[played].iter_mut().enumerate() {
            *d += incurred - self.loss[j][outcome];
        }
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn cumulative_loss(&self) -> f64 {
        self.cumulative_loss
    }

    /// Smallest-index action with the least cumulative loss in hindsight.
    pub fn best_fixed_action(&self) -> usize {
        let mut best = 0;
        for (k, &total) in self.fixed_totals.iter().enumerate() {
            if total < self.fixed_totals[best] {
                best = k;
            }
        }
        best
    }

    pub fn external(&self) -> f64 {
        self.cumulative_loss - self.fixed_totals[self.best_fixed_action()]
    }

    /// Largest gain of a single swap `i -> j`, floored at zero (the identity
    /// departure), together with the maximising swap when it is positive.
    pub fn internal(&self) -> (f64, Option<(usize, usize)>) {
        self.best_departure(|_, _| true)
    }

    pub fn local_internal(&self, graph: &NeighborhoodGraph) -> (f64, Option<(usize, usize)>) {
        self.best_departure(|i, j| graph.are_neighbors(i, j))
    }

    fn best_departure(
        &self,
        allowed: impl Fn(usize, usize) -> bool,
    ) -> (f64, Option<(usize, usize)>) {
        let mut best = (0.0, None);
        for (i, row) in self.departure.iter().enumerate() {
            for (j, &d) in row.iter().enumerate() {
                if i != j && allowed(i, j) && d > best.0 {
                    best = (d, Some((i, j)));
                }
            }
        }
        best
    }
}

fn tracker_for(transcript: &[TranscriptRow], loss: &[Vec<f64>]) -> RegretTracker {
    let mut tracker = RegretTracker::new(loss);
    for row in transcript {
        tracker.push(row.played, row.outcome);
    }
    tracker
}

pub fn external_regret(transcript: &[TranscriptRow], loss: &[Vec<f64>]) -> Result<f64> {
    if transcript.is_empty() {
        return Err(Error::InvalidInput(
            "external regret of an empty transcript".into(),
        ));
    }
    Ok(tracker_for(transcript, loss).external())
}

pub fn internal_regret(
    transcript: &[TranscriptRow],
    loss: &[Vec<f64>],
) -> (f64, Option<(usize, usize)>) {
    tracker_for(transcript, loss).internal()
}

pub fn local_internal_regret(
    transcript: &[TranscriptRow],
    loss: &[Vec<f64>],
    graph: &NeighborhoodGraph,
) -> f64 {
    tracker_for(transcript, loss).local_internal(graph).0
}

/// Regret after round `t`, alongside that round's play.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointRow {
    pub t: usize,
    pub k: usize,
    #[serde(rename = "I")]
    pub played: usize,
    pub j: usize,
    pub loss: f64,
    pub cum_loss: f64,
    pub ext_regret: f64,
    pub int_regret: f64,
    pub local_int_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretReport {
    pub external: f64,
    pub internal: f64,
    pub local_internal: f64,
    pub best_fixed_action: usize,
    pub worst_departure: Option<(usize, usize)>,
    pub theorem_bound: f64,
    pub checkpoints: Vec<CheckpointRow>,
}

/// Full report; `checkpoints` lists the rounds (1-based) at which curve rows are
/// recorded. Checkpoints beyond the transcript are ignored.
pub fn regret_report(
    transcript: &[TranscriptRow],
    loss: &[Vec<f64>],
    graph: &NeighborhoodGraph,
    v_bar: f64,
    checkpoints: &[usize],
) -> Result<RegretReport> {
    if transcript.is_empty() {
        return Err(Error::InvalidInput(
            "regret report of an empty transcript".into(),
        ));
    }
    let mut wanted: Vec<usize> = checkpoints
        .iter()
        .copied()
        .filter(|&t| t >= 1 && t <= transcript.len())
        .collect();
    wanted.sort_unstable();
    wanted.dedup();

    let mut tracker = RegretTracker::new(loss);
    let mut rows = Vec::with_capacity(wanted.len());
    let mut next = wanted.iter().peekable();
    for row in transcript {
        tracker.push(row.played, row.outcome);
        if next.peek() == Some(&&row.t) {
            next.next();
            rows.push(CheckpointRow {
                t: row.t,
                k: row.k,
                played: row.played,
                j: row.outcome,
                loss: row.loss,
                cum_loss: tracker.cumulative_loss(),
                ext_regret: tracker.external(),
                int_regret: tracker.internal().0,
                local_int_regret: tracker.local_internal(graph).0,
            });
        }
    }
    let (internal, worst_departure) = tracker.internal();
    Ok(RegretReport {
        external: tracker.external(),
        internal,
        local_internal: tracker.local_internal(graph).0,
        best_fixed_action: tracker.best_fixed_action(),
        worst_departure,
        theorem_bound: theorem_bound(loss.len(), v_bar, transcript.len()),
        checkpoints: rows,
    })
}
