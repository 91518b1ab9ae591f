//! Game model: loss matrix, feedback scheme and the derived signal matrices.
//!
//! Symbols are per-row: the same symbol appearing in two different rows of the
//! feedback matrix carries no shared meaning. Within a row, signal-matrix rows
//! are ordered by first occurrence scanning outcomes left to right (for random
//! feedback, each cell contributes its support in lexicographic key order).

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Tolerance for a signal distribution (or a column of a random signal matrix)
/// to count as summing to one.
pub const DISTRIBUTION_TOL: f64 = 1e-12;

/// Feedback matrix `H`.
#[derive(Debug, Clone, PartialEq)]
pub enum Feedback {
    /// `H[i][j]` is the symbol observed when playing `i` against outcome `j`.
    Deterministic(Vec<Vec<String>>),
    /// `H[i][j]` is a distribution over symbols.
    Random(Vec<Vec<BTreeMap<String, f64>>>),
}

/// Signal matrix of a single action: `S_i` (0/1) or `Xi_i` (column-stochastic).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalMatrix {
    pub action: usize,
    pub symbols: Vec<String>,
    /// `symbols.len()` rows, `M` columns.
    pub matrix: Vec<Vec<f64>>,
}

impl SignalMatrix {
    pub fn num_symbols(&self) -> usize {
        self.symbols.len()
    }

    pub fn num_outcomes(&self) -> usize {
        self.matrix.first().map_or(0, Vec::len)
    }
}

/// `S_(i,j)`: `S_i` stacked on top of `S_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StackedSignalMatrix {
    pub pair: (usize, usize),
    /// Number of rows that belong to the first action's block.
    pub split: usize,
    pub matrix: Vec<Vec<f64>>,
}

impl StackedSignalMatrix {
    pub fn num_rows(&self) -> usize {
        self.matrix.len()
    }

    pub fn num_outcomes(&self) -> usize {
        self.matrix.first().map_or(0, Vec::len)
    }
}

/// The symbol observed after playing `action`, as an index into that action's
/// signal matrix rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SignalObservation {
    pub action: usize,
    pub symbol: usize,
    pub num_symbols: usize,
}

impl SignalObservation {
    /// The observation as a standard unit vector of length `s_i`.
    pub fn vector(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.num_symbols];
        v[self.symbol] = 1.0;
        v
    }
}

/// JSON representation of a game.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameDocument {
    pub loss: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signals: Option<Vec<Vec<Value>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_dists: Option<Vec<Vec<BTreeMap<String, f64>>>>,
}

/// A validated finite partial-monitoring game.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    loss: Vec<Vec<f64>>,
    feedback: Feedback,
    signals: Vec<SignalMatrix>,
}

impl Game {
    pub fn new(loss: Vec<Vec<f64>>, feedback: Feedback) -> Result<Self> {
        let n = loss.len();
        if n < 2 {
            return Err(Error::Parse(format!("need at least 2 actions, got {n}")));
        }
        let m = loss[0].len();
        if m < 2 {
            return Err(Error::Parse(format!("need at least 2 outcomes, got {m}")));
        }
        for (i, row) in loss.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Parse(format!(
                    "loss row {} has {} entries, expected {m}",
                    i + 1,
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                return Err(Error::Parse(format!(
                    "row {} col {}: loss is not finite",
                    i + 1,
                    j + 1
                )));
            }
        }

        let check_shape = |rows: usize, lens: &mut dyn Iterator<Item = usize>| -> Result<()> {
            if rows != n {
                return Err(Error::Parse(format!(
                    "feedback has {rows} rows, loss has {n}"
                )));
            }
            for (i, len) in lens.enumerate() {
                if len != m {
                    return Err(Error::Parse(format!(
                        "feedback row {} has {len} entries, expected {m}",
                        i + 1
                    )));
                }
            }
            Ok(())
        };

        let signals = match &feedback {
            Feedback::Deterministic(h) => {
                check_shape(h.len(), &mut h.iter().map(Vec::len))?;
                h.iter()
                    .enumerate()
                    .map(|(i, row)| deterministic_signal_matrix(i, row))
                    .collect()
            }
            Feedback::Random(h) => {
                check_shape(h.len(), &mut h.iter().map(Vec::len))?;
                for (i, row) in h.iter().enumerate() {
                    for (j, dist) in row.iter().enumerate() {
                        validate_distribution(i, j, dist)?;
                    }
                }
                h.iter()
                    .enumerate()
                    .map(|(i, row)| random_signal_matrix(i, row))
                    .collect()
            }
        };

        Ok(Game {
            loss,
            feedback,
            signals,
        })
    }

    /// Parses a game from its JSON document.
    pub fn parse(text: &str) -> Result<Self> {
        let doc: GameDocument =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: GameDocument) -> Result<Self> {
        let feedback = match (doc.signals, doc.signal_dists) {
            (Some(h), None) => Feedback::Deterministic(
                h.into_iter()
                    .enumerate()
                    .map(|(i, row)| {
                        row.into_iter()
                            .enumerate()
                            .map(|(j, v)| symbol_text(i, j, v))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            (None, Some(h)) => Feedback::Random(h),
            (Some(_), Some(_)) => {
                return Err(Error::Parse(
                    "exactly one of `signals` and `signal_dists` may be present".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Parse(
                    "missing feedback: expected `signals` or `signal_dists`".into(),
                ))
            }
        };
        Self::new(doc.loss, feedback)
    }

    pub fn to_document(&self) -> GameDocument {
        match &self.feedback {
            Feedback::Deterministic(h) => GameDocument {
                loss: self.loss.clone(),
                signals: Some(
                    h.iter()
                        .map(|row| row.iter().map(|s| Value::String(s.clone())).collect())
                        .collect(),
                ),
                signal_dists: None,
            },
            Feedback::Random(h) => GameDocument {
                loss: self.loss.clone(),
                signals: None,
                signal_dists: Some(h.clone()),
            },
        }
    }

    pub fn num_actions(&self) -> usize {
        self.loss.len()
    }

    pub fn num_outcomes(&self) -> usize {
        self.loss[0].len()
    }

    pub fn loss(&self) -> &[Vec<f64>] {
        &self.loss
    }

    /// `L[i][j]`.
    pub fn loss_at(&self, action: usize, outcome: usize) -> f64 {
        self.loss[action][outcome]
    }

    pub fn feedback(&self) -> &Feedback {
        &self.feedback
    }

    pub fn is_random(&self) -> bool {
        matches!(self.feedback, Feedback::Random(_))
    }

    /// Largest absolute loss entry.
    pub fn max_abs_loss(&self) -> f64 {
        self.loss
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }

    pub fn signal_matrix(&self, action: usize) -> Result<&SignalMatrix> {
        self.signals.get(action).ok_or_else(|| {
            Error::InvalidInput(format!(
                "action {action} out of range (N = {})",
                self.num_actions()
            ))
        })
    }

    pub fn signal_matrices(&self) -> &[SignalMatrix] {
        &self.signals
    }

    pub fn stacked_signal_matrix(&self, i: usize, j: usize) -> Result<StackedSignalMatrix> {
        if i == j {
            return Err(Error::InvalidInput(format!(
                "stacked signal matrix needs two distinct actions, got ({i}, {j})"
            )));
        }
        let top = self.signal_matrix(i)?;
        let bottom = self.signal_matrix(j)?;
        let matrix = top
            .matrix
            .iter()
            .chain(bottom.matrix.iter())
            .cloned()
            .collect();
        Ok(StackedSignalMatrix {
            pair: (i, j),
            split: top.num_symbols(),
            matrix,
        })
    }

    /// Signal received for playing `action` against `outcome`.
    ///
    /// Deterministic feedback does not touch `rng`; random feedback draws one
    /// uniform variate per call.
    pub fn observe<R: Rng + ?Sized>(
        &self,
        action: usize,
        outcome: usize,
        rng: &mut R,
    ) -> SignalObservation {
        let sm = &self.signals[action];
        let num_symbols = sm.num_symbols();
        let symbol = match self.feedback {
            Feedback::Deterministic(_) => sm
                .matrix
                .iter()
                .position(|row| row[outcome] == 1.0)
                .expect("deterministic signal matrix column has a unit entry"),
            Feedback::Random(_) => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut last_positive = 0;
                let mut chosen = None;
                for (k, row) in sm.matrix.iter().enumerate() {
                    let w = row[outcome];
                    if w > 0.0 {
                        last_positive = k;
                        acc += w;
                        if u < acc {
                            chosen = Some(k);
                            break;
                        }
                    }
                }
                chosen.unwrap_or(last_positive)
            }
        };
        SignalObservation {
            action,
            symbol,
            num_symbols,
        }
    }
}

fn symbol_text(i: usize, j: usize, v: Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        other => Err(Error::Parse(format!(
            "row {} col {}: signal must be a scalar symbol, got {other}",
            i + 1,
            j + 1
        ))),
    }
}

fn validate_distribution(i: usize, j: usize, dist: &BTreeMap<String, f64>) -> Result<()> {
    if dist.is_empty() {
        return Err(Error::Parse(format!(
            "row {} col {}: empty distribution",
            i + 1,
            j + 1
        )));
    }
    for (sym, &w) in dist {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Parse(format!(
                "row {} col {}: weight of {sym:?} is {w}",
                i + 1,
                j + 1
            )));
        }
    }
    let total: f64 = dist.values().sum();
    if (total - 1.0).abs() > DISTRIBUTION_TOL {
        return Err(Error::Parse(format!(
            "row {} col {}: distribution sums to {total}",
            i + 1,
            j + 1
        )));
    }
    Ok(())
}

fn deterministic_signal_matrix(action: usize, row: &[String]) -> SignalMatrix {
    let mut symbols: Vec<String> = Vec::new();
    for s in row {
        if !symbols.contains(s) {
            symbols.push(s.clone());
        }
    }
    let matrix = symbols
        .iter()
        .map(|sym| {
            row.iter()
                .map(|h| if h == sym { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    SignalMatrix {
        action,
        symbols,
        matrix,
    }
}

fn random_signal_matrix(action: usize, row: &[BTreeMap<String, f64>]) -> SignalMatrix {
    let mut symbols: Vec<String> = Vec::new();
    for dist in row {
        for (s, &w) in dist {
            if w > 0.0 && !symbols.contains(s) {
                symbols.push(s.clone());
            }
        }
    }
    let matrix = symbols
        .iter()
        .map(|sym| {
            row.iter()
                .map(|dist| dist.get(sym).copied().unwrap_or(0.0))
                .collect()
        })
        .collect();
    SignalMatrix {
        action,
        symbols,
        matrix,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn deterministic(loss: Vec<Vec<f64>>, h: &[&[&str]]) -> Game {
        let h = h
            .iter()
            .map(|r| r.iter().map(|s| s.to_string()).collect())
            .collect();
        Game::new(loss, Feedback::Deterministic(h)).unwrap()
    }

    #[test]
    fn parses_bandit_document() {
        let g =
            Game::parse(r#"{"loss": [[0,1],[1,0]], "signals": [["0","1"],["1","0"]]}"#).unwrap();
        assert_eq!(g.num_actions(), 2);
        assert_eq!(g.num_outcomes(), 2);
        assert!(!g.is_random());
    }

    #[test]
    fn rejects_distribution_not_summing_to_one() {
        let err = Game::parse(
            r#"{"loss": [[0,1],[1,0]],
                "signal_dists": [[{"a":1.0},{"a":1.0}],[{"a":0.9},{"a":1.0}]]}"#,
        )
        .unwrap_err();
        assert_eq!(
            err.to_string(),
            "parse error: row 2 col 1: distribution sums to 0.9"
        );
    }

    #[test]
    fn rejects_ragged_loss() {
        let err =
            Game::parse(r#"{"loss": [[0,1],[1]], "signals": [["a","b"],["a","b"]]}"#).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        assert!(err.to_string().contains("loss row 2"));
    }

    #[test]
    fn rejects_both_or_neither_feedback() {
        assert!(Game::parse(r#"{"loss": [[0,1],[1,0]]}"#).is_err());
        assert!(Game::parse(
            r#"{"loss": [[0,1],[1,0]], "signals": [["a","b"],["a","b"]],
                "signal_dists": [[{"a":1},{"a":1}],[{"a":1},{"a":1}]]}"#
        )
        .is_err());
    }

    #[test]
    fn rejects_too_small() {
        assert!(Game::parse(r#"{"loss": [[0,1]], "signals": [["a","b"]]}"#).is_err());
        assert!(Game::parse(r#"{"loss": [[0],[1]], "signals": [["a"],["b"]]}"#).is_err());
    }

    #[test]
    fn signal_matrix_first_occurrence_order() {
        let g = deterministic(
            vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 1.0]],
            &[&["a", "b", "a"], &["a", "a", "a"]],
        );
        let s0 = g.signal_matrix(0).unwrap();
        assert_eq!(s0.symbols, vec!["a", "b"]);
        assert_eq!(s0.matrix, vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]);
        let s1 = g.signal_matrix(1).unwrap();
        assert_eq!(s1.matrix, vec![vec![1.0, 1.0, 1.0]]);
        assert!(g.signal_matrix(2).is_err());
    }

    #[test]
    fn random_signal_matrix_transcribes_distributions() {
        let g = Game::parse(
            r#"{"loss": [[0,1],[1,0]],
                "signal_dists": [[{"a":0.3,"b":0.7},{"a":1.0}],[{"x":1.0},{"y":1.0}]]}"#,
        )
        .unwrap();
        let xi = g.signal_matrix(0).unwrap();
        assert_eq!(xi.symbols, vec!["a", "b"]);
        assert_eq!(xi.matrix, vec![vec![0.3, 1.0], vec![0.7, 0.0]]);
        for j in 0..2 {
            let col: f64 = xi.matrix.iter().map(|r| r[j]).sum();
            assert!((col - 1.0).abs() <= DISTRIBUTION_TOL);
        }
    }

    #[test]
    fn stacked_bandit_matrix() {
        let g = deterministic(
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            &[&["0", "1"], &["1", "0"]],
        );
        let s = g.stacked_signal_matrix(0, 1).unwrap();
        assert_eq!(
            s.matrix,
            vec![
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0]
            ]
        );
        assert_eq!(s.split, 2);
        assert!(g.stacked_signal_matrix(1, 1).is_err());
    }

    #[test]
    fn stacked_apple_tasting_matrix() {
        let g = deterministic(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            &[&["n", "n"], &["a", "b"]],
        );
        let s = g.stacked_signal_matrix(0, 1).unwrap();
        assert_eq!(
            s.matrix,
            vec![vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]
        );
        assert_eq!(s.num_rows(), 3);
    }

    #[test]
    fn deterministic_observation_is_indicator() {
        let g = deterministic(
            vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 1.0]],
            &[&["a", "b", "a"], &["c", "d", "e"]],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let obs = g.observe(0, 2, &mut rng);
        assert_eq!(obs.symbol, 0);
        assert_eq!(obs.vector(), vec![1.0, 0.0]);
    }

    #[test]
    fn degenerate_random_column_always_same_symbol() {
        let g = Game::parse(
            r#"{"loss": [[0,1],[1,0]],
                "signal_dists": [[{"a":0.5,"b":0.5},{"a":1.0}],[{"x":1.0},{"y":1.0}]]}"#,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_eq!(g.observe(0, 1, &mut rng).symbol, 0);
        }
    }

    #[test]
    fn random_observation_frequency() {
        let g = Game::parse(
            r#"{"loss": [[0,1],[1,0]],
                "signal_dists": [[{"a":0.5,"b":0.5},{"a":1.0}],[{"x":1.0},{"y":1.0}]]}"#,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let hits = (0..draws)
            .filter(|_| g.observe(0, 0, &mut rng).symbol == 0)
            .count();
        let freq = hits as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 0.01, "frequency {freq}");
    }

    #[test]
    fn reparse_is_stable() {
        let text = r#"{"loss": [[0,1,2],[1,0,2]],
                       "signal_dists": [[{"b":0.5,"a":0.5},{"c":1.0},{"a":1.0}],
                                        [{"x":1.0},{"y":1.0},{"x":0.2,"y":0.8}]]}"#;
        let a = Game::parse(text).unwrap();
        let b = Game::parse(text).unwrap();
        assert_eq!(a.signal_matrices(), b.signal_matrices());
        let again = Game::from_document(a.to_document()).unwrap();
        assert_eq!(again, a);
    }
}
