//! Best-response cells over the outcome simplex and the neighborhood graph.
//!
//! Cell `C_i` is the set of outcome distributions `q` for which action `i`
//! minimises `l_i . q`. Cell and pair margins are obtained from small linear
//! programs; a positive margin means the corresponding cell (or shared face)
//! has a relative interior where every other action is strictly worse.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::Game;
use crate::lp::{LinearProgram, LpOutcome, Relation};

/// Margins at or below this value do not count as positive.
pub const MARGIN_TOL: f64 = 1e-7;

/// Pair margin reported when no third action constrains the shared face (N = 2).
pub const UNBOUNDED_MARGIN: f64 = 1e9;

/// Pair margin reported when the two loss hyperplanes never meet over the simplex.
pub const DISJOINT_MARGIN: f64 = -1e9;

const SIMPLEX_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestResponse {
    /// Smallest index in the tie set.
    pub action: usize,
    pub ties: Vec<usize>,
    pub value: f64,
}

fn check_distribution(loss: &[Vec<f64>], q: &[f64]) -> Result<()> {
    let m = loss.first().map_or(0, Vec::len);
    if q.len() != m {
        return Err(Error::InvalidInput(format!(
            "distribution has {} entries, expected {m}",
            q.len()
        )));
    }
    let total: f64 = q.iter().sum();
    if q.iter().any(|&x| !(x >= -SIMPLEX_TOL)) || (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidInput(format!(
            "{q:?} is not a probability distribution"
        )));
    }
    Ok(())
}

fn expected_losses(loss: &[Vec<f64>], q: &[f64]) -> Vec<f64> {
    loss.iter()
        .map(|row| row.iter().zip(q).map(|(l, p)| l * p).sum())
        .collect()
}

fn tie_set(values: &[f64], candidates: impl Iterator<Item = usize>) -> Option<(Vec<usize>, f64)> {
    let candidates: Vec<usize> = candidates.collect();
    let best = candidates
        .iter()
        .map(|&i| values[i])
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let scale = 1.0 + best.abs();
    let ties: Vec<usize> = candidates
        .into_iter()
        .filter(|&i| values[i] - best <= TIE_TOL * scale)
        .collect();
    Some((ties, best))
}

pub fn best_response(loss: &[Vec<f64>], q: &[f64]) -> Result<BestResponse> {
    check_distribution(loss, q)?;
    let values = expected_losses(loss, q);
    let (ties, value) = tie_set(&values, 0..values.len())
        .ok_or_else(|| Error::InvalidInput("empty loss matrix".into()))?;
    Ok(BestResponse {
        action: ties[0],
        ties,
        value,
    })
}

/// Best action once the whole best-response tie set is removed.
pub fn second_best(loss: &[Vec<f64>], q: &[f64]) -> Result<BestResponse> {
    if loss.len() < 2 {
        return Err(Error::InvalidInput("no strict second best: N < 2".into()));
    }
    let best = best_response(loss, q)?;
    let values = expected_losses(loss, q);
    let rest = (0..values.len()).filter(|i| !best.ties.contains(i));
    let (ties, value) = tie_set(&values, rest)
        .ok_or_else(|| Error::InvalidInput("no strict second best: all actions tied".into()))?;
    Ok(BestResponse {
        action: ties[0],
        ties,
        value,
    })
}

/// Gap row `(l_k - l_i)` with a trailing `-1` for the margin variable.
fn gap_row(loss: &[Vec<f64>], k: usize, i: usize) -> Vec<f64> {
    let mut row: Vec<f64> = loss[k].iter().zip(&loss[i]).map(|(a, b)| a - b).collect();
    row.push(-1.0);
    row
}

/// Margin program over `(q, delta)`: `q` in the simplex, `(l_a - l_b) . q = 0`
/// for every `(a, b)` in `ties`, and `(l_k - l_anchor) . q >= delta` for every
/// `k` not in `exclude`.
fn margin_program(
    loss: &[Vec<f64>],
    anchor: usize,
    ties: &[(usize, usize)],
    exclude: &[usize],
) -> LinearProgram {
    let m = loss[0].len();
    let mut lp = LinearProgram::new(m + 1);
    lp.objective[m] = 1.0;
    lp.free[m] = true;
    let mut simplex = vec![1.0; m];
    simplex.push(0.0);
    lp.add(simplex, Relation::Eq, 1.0);
    for &(a, b) in ties {
        let mut row: Vec<f64> = loss[a].iter().zip(&loss[b]).map(|(x, y)| x - y).collect();
        row.push(0.0);
        lp.add(row, Relation::Eq, 0.0);
    }
    for k in 0..loss.len() {
        if !exclude.contains(&k) {
            lp.add(gap_row(loss, k, anchor), Relation::Ge, 0.0);
        }
    }
    lp
}

fn margin_value(lp: &LinearProgram) -> Result<f64> {
    match lp.solve()? {
        LpOutcome::Optimal { value, .. } => Ok(value),
        LpOutcome::Unbounded => Ok(UNBOUNDED_MARGIN),
        LpOutcome::Infeasible => Ok(DISJOINT_MARGIN),
    }
}

/// Largest `delta` such that some `q` has every other action at least `delta`
/// worse than `i`.
pub fn cell_margin(loss: &[Vec<f64>], i: usize) -> Result<f64> {
    if i >= loss.len() {
        return Err(Error::InvalidInput(format!("action {i} out of range")));
    }
    margin_value(&margin_program(loss, i, &[], &[i]))
}

/// Largest `delta` over the face where `i` and `j` tie, such that every other
/// action is at least `delta` worse there.
pub fn pair_margin(loss: &[Vec<f64>], i: usize, j: usize) -> Result<f64> {
    if i == j || i >= loss.len() || j >= loss.len() {
        return Err(Error::InvalidInput(format!(
            "pair margin needs two distinct valid actions, got ({i}, {j})"
        )));
    }
    margin_value(&margin_program(loss, i, &[(i, j)], &[i, j]))
}

/// Margin on the face where `i`, `j` and `k` all tie; `None` when that face is empty.
fn triple_face_margin(loss: &[Vec<f64>], i: usize, j: usize, k: usize) -> Result<Option<f64>> {
    let lp = margin_program(loss, i, &[(i, j), (i, k)], &[i, j, k]);
    Ok(match lp.solve()? {
        LpOutcome::Optimal { value, .. } => Some(value),
        LpOutcome::Unbounded => Some(UNBOUNDED_MARGIN),
        LpOutcome::Infeasible => None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairMargin {
    pub i: usize,
    pub j: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Degeneracy {
    pub actions: Vec<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryReport {
    pub cell_margins: Vec<f64>,
    pub pair_margins: Vec<PairMargin>,
    /// Actions whose cell has no interior (`delta_i <= MARGIN_TOL`).
    pub dominated_actions: Vec<usize>,
    pub degeneracies: Vec<Degeneracy>,
}

impl GeometryReport {
    pub fn pair_margin(&self, i: usize, j: usize) -> Option<f64> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.pair_margins
            .iter()
            .find(|p| p.i == a && p.j == b)
            .map(|p| p.margin)
    }
}

/// Computes all cell and pair margins and collects domination and degeneracy
/// witnesses. Never rejects the game.
pub fn analyze(loss: &[Vec<f64>]) -> Result<GeometryReport> {
    let n = loss.len();
    let mut degeneracies = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if loss[i] == loss[j] {
                degeneracies.push(Degeneracy {
                    actions: vec![i, j],
                    reason: format!("actions {i} and {j} have identical loss rows"),
                });
            }
        }
    }

    let cell_margins = (0..n)
        .map(|i| cell_margin(loss, i))
        .collect::<Result<Vec<_>>>()?;
    let dominated_actions: Vec<usize> = (0..n).filter(|&i| cell_margins[i] <= MARGIN_TOL).collect();
    for (i, &d) in cell_margins.iter().enumerate() {
        if d.abs() <= MARGIN_TOL && !degeneracies.iter().any(|w| w.actions.contains(&i)) {
            degeneracies.push(Degeneracy {
                actions: vec![i],
                reason: format!("cell of action {i} is non-empty but has no interior"),
            });
        }
    }

    let mut pair_margins = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let margin = pair_margin(loss, i, j)?;
            pair_margins.push(PairMargin { i, j, margin });
            let relevant = cell_margins[i] >= -MARGIN_TOL && cell_margins[j] >= -MARGIN_TOL;
            if relevant && margin.abs() <= MARGIN_TOL && loss[i] != loss[j] {
                for k in (0..n).filter(|&k| k != i && k != j) {
                    if let Some(m) = triple_face_margin(loss, i, j, k)? {
                        if m >= -MARGIN_TOL {
                            degeneracies.push(Degeneracy {
                                actions: vec![i, j, k],
                                reason: format!(
                                    "actions {i} and {j} only touch where action {k} also ties"
                                ),
                            });
                        }
                    }
                }
            }
        }
    }

    Ok(GeometryReport {
        cell_margins,
        pair_margins,
        dominated_actions,
        degeneracies,
    })
}

/// Symmetric neighbor sets with self-loops.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborhoodGraph {
    neighbors: Vec<Vec<usize>>,
}

impl NeighborhoodGraph {
    /// Builds a graph from explicit neighbor lists. Self-loops are added; the
    /// relation must be symmetric.
    pub fn from_adjacency(lists: Vec<Vec<usize>>) -> Result<Self> {
        let n = lists.len();
        let mut neighbors = lists;
        for (i, list) in neighbors.iter_mut().enumerate() {
            if list.iter().any(|&j| j >= n) {
                return Err(Error::InvalidInput(format!("neighbor of {i} out of range")));
            }
            list.push(i);
            list.sort_unstable();
            list.dedup();
        }
        for i in 0..n {
            for &j in &neighbors[i] {
                if !neighbors[j].contains(&i) {
                    return Err(Error::InvalidInput(format!(
                        "adjacency is not symmetric: {j} in N_{i} but {i} not in N_{j}"
                    )));
                }
            }
        }
        Ok(NeighborhoodGraph { neighbors })
    }

    pub fn num_actions(&self) -> usize {
        self.neighbors.len()
    }

    /// `N_i`, sorted ascending, always containing `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn are_neighbors(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Ordered pairs `(i, j)` with `j` in `N_i` and `i != j`.
    pub fn neighbor_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j != i).map(move |&j| (i, j)))
    }

    /// Whether every action in `actions` is reachable from the first one.
    pub fn is_connected_over(&self, actions: &[usize]) -> bool {
        let Some(&start) = actions.first() else {
            return true;
        };
        let mut seen = vec![false; self.num_actions()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        actions.iter().all(|&a| seen[a])
    }
}

/// Neighborhood graph over the non-dominated actions. Dominated actions keep
/// only their self-loop. Rejects degenerate games.
pub fn neighborhood(game: &Game) -> Result<(NeighborhoodGraph, GeometryReport)> {
    let loss = game.loss();
    let report = analyze(loss)?;
    if let Some(first) = report.degeneracies.first() {
        return Err(Error::Degenerate(first.reason.clone()));
    }
    let n = loss.len();
    let mut lists = vec![Vec::new(); n];
    for p in &report.pair_margins {
        let live =
            !report.dominated_actions.contains(&p.i) && !report.dominated_actions.contains(&p.j);
        if live && p.margin > MARGIN_TOL {
            lists[p.i].push(p.j);
            lists[p.j].push(p.i);
        }
    }
    let graph = NeighborhoodGraph::from_adjacency(lists)?;
    let live: Vec<usize> = (0..n)
        .filter(|i| !report.dominated_actions.contains(i))
        .collect();
    if !graph.is_connected_over(&live) {
        return Err(Error::Degenerate(
            "neighborhood graph over non-dominated actions is not connected".into(),
        ));
    }
    Ok((graph, report))
}

/// Neighborhood graph for a game the learner can play: additionally rejects
/// any dominated action.
pub fn build_graph(game: &Game) -> Result<(NeighborhoodGraph, GeometryReport)> {
    let (graph, report) = neighborhood(game)?;
    if !report.dominated_actions.is_empty() {
        return Err(Error::Dominated {
            actions: report.dominated_actions.clone(),
        });
    }
    Ok((graph, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Feedback;
    use proptest::prelude::*;

    fn game(loss: Vec<Vec<f64>>) -> Game {
        let h = loss
            .iter()
            .map(|row| (0..row.len()).map(|j| j.to_string()).collect())
            .collect();
        Game::new(loss, Feedback::Deterministic(h)).unwrap()
    }

    fn three_action() -> Vec<Vec<f64>> {
        vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.4, 0.4]]
    }

    /// Maximum over a fine grid of the two-outcome simplex of `objective(q1)`
    /// restricted to points where `constraint(q1)` holds within `band`.
    fn sweep(objective: impl Fn(f64) -> f64, constraint: impl Fn(f64) -> f64, band: f64) -> f64 {
        (0..=100_000)
            .map(|k| k as f64 / 100_000.0)
            .filter(|&q1| constraint(q1).abs() <= band)
            .map(objective)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn value(row: &[f64], q1: f64) -> f64 {
        row[0] * q1 + row[1] * (1.0 - q1)
    }

    #[test]
    fn best_response_examples() {
        let l = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(best_response(&l, &[0.9, 0.1]).unwrap().action, 0);
        assert_eq!(best_response(&l, &[0.5, 0.5]).unwrap().ties, vec![0, 1]);
        assert_eq!(
            best_response(&three_action(), &[0.5, 0.5]).unwrap().action,
            2
        );
        assert!(best_response(&l, &[0.5, 0.6]).is_err());
    }

    #[test]
    fn second_best_examples() {
        let second = second_best(&three_action(), &[0.5, 0.5]).unwrap();
        assert_eq!(second.ties, vec![0, 1]);
        let l = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(second_best(&l, &[0.9, 0.1]).unwrap().action, 1);
        assert!(second_best(&[vec![0.0, 1.0]], &[0.5, 0.5]).is_err());
        assert!(second_best(&l, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn cell_margins_match_grid_oracle() {
        let l = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let oracle = sweep(|q1| value(&l[1], q1) - value(&l[0], q1), |_| 0.0, 1.0);
        assert!((oracle - 1.0).abs() < 1e-9);
        assert!((cell_margin(&l, 0).unwrap() - oracle).abs() < 1e-9);

        let l3 = three_action();
        let oracle = sweep(
            |q1| (value(&l3[0], q1) - value(&l3[2], q1)).min(value(&l3[1], q1) - value(&l3[2], q1)),
            |_| 0.0,
            1.0,
        );
        assert!((oracle - 0.1).abs() < 1e-9);
        assert!((cell_margin(&l3, 2).unwrap() - oracle).abs() < 1e-9);

        let dup = vec![vec![0.0, 1.0], vec![0.0, 1.0]];
        assert!(cell_margin(&dup, 0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn pair_margins_match_sweep_oracle() {
        let l = three_action();
        let band = 1e-5;
        let oracle_13 = sweep(
            |q1| value(&l[1], q1) - value(&l[0], q1),
            |q1| value(&l[0], q1) - value(&l[2], q1),
            band,
        );
        let got = pair_margin(&l, 0, 2).unwrap();
        assert!(got > MARGIN_TOL);
        assert!((got - oracle_13).abs() < 1e-4, "{got} vs {oracle_13}");
        assert!((got - 0.2).abs() < 1e-9);

        let oracle_12 = sweep(
            |q1| value(&l[2], q1) - value(&l[0], q1),
            |q1| value(&l[0], q1) - value(&l[1], q1),
            band,
        );
        let got = pair_margin(&l, 0, 1).unwrap();
        assert!(got <= 0.0);
        assert!((got - oracle_12).abs() < 1e-4);
    }

    #[test]
    fn two_action_pair_is_unbounded_and_disjoint_is_sentinel() {
        let l = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(pair_margin(&l, 0, 1).unwrap(), UNBOUNDED_MARGIN);
        let l = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        assert_eq!(pair_margin(&l, 0, 1).unwrap(), DISJOINT_MARGIN);
        assert!(pair_margin(&l, 1, 1).is_err());
    }

    #[test]
    fn builds_three_action_graph() {
        let (g, report) = build_graph(&game(three_action())).unwrap();
        assert_eq!(g.neighbors(0), &[0, 2]);
        assert_eq!(g.neighbors(1), &[1, 2]);
        assert_eq!(g.neighbors(2), &[0, 1, 2]);
        assert!(report.dominated_actions.is_empty());
    }

    #[test]
    fn builds_two_action_graph() {
        let (g, _) = build_graph(&game(vec![vec![0.0, 1.0], vec![1.0, 0.0]])).unwrap();
        assert_eq!(g.neighbors(0), &[0, 1]);
        assert_eq!(g.neighbors(1), &[0, 1]);
    }

    #[test]
    fn rejects_triple_tie() {
        let err =
            build_graph(&game(vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5]])).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)), "{err}");
    }

    #[test]
    fn rejects_duplicate_rows() {
        let err =
            build_graph(&game(vec![vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]])).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn rejects_strictly_dominated() {
        let err =
            build_graph(&game(vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.6, 0.6]])).unwrap_err();
        match err {
            Error::Dominated { actions } => assert_eq!(actions, vec![2]),
            other => panic!("{other}"),
        }
        // The lenient neighborhood keeps the dominated action isolated.
        let (g, _) =
            neighborhood(&game(vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.6, 0.6]])).unwrap();
        assert_eq!(g.neighbors(2), &[2]);
        assert_eq!(g.neighbors(0), &[0, 1]);
    }

    #[test]
    fn adjacency_must_be_symmetric() {
        assert!(NeighborhoodGraph::from_adjacency(vec![vec![1], vec![]]).is_err());
        let g = NeighborhoodGraph::from_adjacency(vec![vec![1], vec![0], vec![]]).unwrap();
        assert!(g.are_neighbors(2, 2));
        assert!(!g.is_connected_over(&[0, 1, 2]));
        assert_eq!(g.neighbor_pairs().collect::<Vec<_>>(), vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn three_outcome_full_info_is_complete_graph() {
        let l = vec![
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ];
        let (g, report) = build_graph(&game(l)).unwrap();
        for i in 0..3 {
            assert_eq!(g.neighbors(i), &[0, 1, 2]);
        }
        assert!((report.pair_margin(0, 1).unwrap() - 0.5).abs() < 1e-9);
    }

    fn loss_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..=4, 2usize..=3).prop_flat_map(|(n, m)| {
            proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, m), n)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn pair_margin_is_symmetric(loss in loss_strategy()) {
            let n = loss.len();
            for i in 0..n {
                for j in i + 1..n {
                    let a = pair_margin(&loss, i, j).unwrap();
                    let b = pair_margin(&loss, j, i).unwrap();
                    prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
                }
            }
        }

        #[test]
        fn accepted_graph_is_symmetric_connected_and_scale_invariant(
            loss in loss_strategy(),
            scale in 0.5f64..2.0,
            shift in -1.0f64..1.0,
        ) {
            if let Ok((g, _)) = build_graph(&game(loss.clone())) {
                let n = g.num_actions();
                for i in 0..n {
                    prop_assert!(g.are_neighbors(i, i));
                    for &j in g.neighbors(i) {
                        prop_assert!(g.are_neighbors(j, i));
                    }
                }
                prop_assert!(g.is_connected_over(&(0..n).collect::<Vec<_>>()));

                let moved: Vec<Vec<f64>> = loss
                    .iter()
                    .map(|r| r.iter().map(|x| scale * x + shift).collect())
                    .collect();
                let (g2, _) = build_graph(&game(moved)).unwrap();
                prop_assert_eq!(g, g2);
            }
        }
    }
}
