//! Local observability and observer vectors.
//!
//! For neighbors `i != j` the observer vector `v_(i,j)` is the minimum-norm
//! solution of `S_(i,j)^T v = l_j - l_i`, where `S_(i,j)` stacks the signal
//! matrix of `i` on top of that of `j`. Random feedback uses the
//! column-stochastic signal matrices in place of the 0/1 ones.

use serde::Serialize;

use crate::error::Result;
use crate::game::Game;
use crate::geometry::NeighborhoodGraph;
use crate::linalg::min_norm_solve;

/// Relative residual tolerance for `l_j - l_i` to count as being in the image.
pub const OBSERVABILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObserverVector {
    pub i: usize,
    pub j: usize,
    /// Length `s_i + s_j`; the first `split` coordinates pair with `S_i`.
    pub v: Vec<f64>,
    pub split: usize,
    /// `|| S_(i,j)^T v - (l_j - l_i) ||_inf`.
    pub residual: f64,
    pub observable: bool,
}

impl ObserverVector {
    pub fn own_block(&self) -> &[f64] {
        &self.v[..self.split]
    }

    pub fn neighbor_block(&self) -> &[f64] {
        &self.v[self.split..]
    }

    pub fn sup_norm(&self) -> f64 {
        self.v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }
}

pub fn solve_observer(game: &Game, i: usize, j: usize) -> Result<ObserverVector> {
    let stacked = game.stacked_signal_matrix(i, j)?;
    let m = game.num_outcomes();
    let target: Vec<f64> = (0..m)
        .map(|c| game.loss_at(j, c) - game.loss_at(i, c))
        .collect();
    // S^T as an M x (s_i + s_j) system.
    let transposed: Vec<Vec<f64>> = (0..m)
        .map(|c| stacked.matrix.iter().map(|row| row[c]).collect())
        .collect();
    let v = min_norm_solve(&transposed, &target)?;
    let residual = transposed
        .iter()
        .zip(&target)
        .map(|(row, t)| (row.iter().zip(&v).map(|(a, x)| a * x).sum::<f64>() - t).abs())
        .fold(0.0_f64, f64::max);
    let scale = 1.0 + target.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    Ok(ObserverVector {
        i,
        j,
        v,
        split: stacked.split,
        residual,
        observable: residual <= OBSERVABILITY_TOL * scale,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservabilityReport {
    /// Both orientations of every neighboring pair, sorted by `(i, j)`.
    pub pairs: Vec<ObserverVector>,
    pub locally_observable: bool,
    /// Largest `||v_(i,j)||_inf` over observable pairs.
    pub v_bar: f64,
    /// Largest absolute loss entry.
    pub l_bar: f64,
    #[serde(skip)]
    index: Vec<Vec<Option<usize>>>,
}

impl ObservabilityReport {
    /// `v_(i,j)` for a neighboring pair; `None` for `i == j` (whose observer is
    /// identically zero) and for non-neighbors.
    pub fn observer(&self, i: usize, j: usize) -> Option<&ObserverVector> {
        self.index
            .get(i)
            .and_then(|row| row.get(j))
            .copied()
            .flatten()
            .map(|k| &self.pairs[k])
    }

    pub fn unobservable_pairs(&self) -> Vec<(usize, usize)> {
        self.pairs
            .iter()
            .filter(|p| !p.observable)
            .map(|p| (p.i, p.j))
            .collect()
    }
}

pub fn check_game(game: &Game, graph: &NeighborhoodGraph) -> Result<ObservabilityReport> {
    let n = game.num_actions();
    let mut pairs = Vec::new();
    let mut index = vec![vec![None; n]; n];
    for (i, j) in graph.neighbor_pairs() {
        index[i][j] = Some(pairs.len());
        pairs.push(solve_observer(game, i, j)?);
    }
    let locally_observable = pairs.iter().all(|p| p.observable);
    let v_bar = pairs
        .iter()
        .filter(|p| p.observable)
        .map(ObserverVector::sup_norm)
        .fold(0.0_f64, f64::max);
    Ok(ObservabilityReport {
        pairs,
        locally_observable,
        v_bar,
        l_bar: game.max_abs_loss(),
        index,
    })
}
