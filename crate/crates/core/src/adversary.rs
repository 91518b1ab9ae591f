//! Opponents that choose the outcome `j_t` each round.
//!
//! Opponents only ever see the realized actions `I_1..I_{t-1}`; the learner's
//! sampled neighborhoods and internal distributions stay private.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::game::Game;

/// ChaCha stream reserved for opponents, distinct from the learner's stream 0.
const ADVERSARY_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum AdversaryKind {
    FixedSequence(Vec<usize>),
    Iid(Vec<f64>),
    /// Plays the outcome maximising the learner's loss summed over its last
    /// `window` actions (`None` = whole history).
    AdaptiveWorst {
        window: Option<usize>,
    },
}

impl fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |items: Vec<String>| items.join(",");
        match self {
            AdversaryKind::FixedSequence(seq) => {
                write!(
                    f,
                    "fixed:{}",
                    join(seq.iter().map(|x| x.to_string()).collect())
                )
            }
            AdversaryKind::Iid(p) if p.is_empty() => write!(f, "uniform"),
            AdversaryKind::Iid(p) => {
                write!(f, "iid:{}", join(p.iter().map(|x| x.to_string()).collect()))
            }
            AdversaryKind::AdaptiveWorst { window: None } => write!(f, "adaptive"),
            AdversaryKind::AdaptiveWorst { window: Some(w) } => write!(f, "adaptive:{w}"),
        }
    }
}

impl FromStr for AdversaryKind {
    type Err = Error;

    /// `iid:0.5,0.5`, `uniform`, `fixed:1,0,1`, `adaptive`, `adaptive:100`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidInput(format!("adversary {s:?}: {msg}"));
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        match (name, args) {
            ("uniform", None) => Ok(AdversaryKind::Iid(Vec::new())),
            ("iid", Some(a)) => a
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| bad(e.to_string())))
                .collect::<Result<Vec<_>>>()
                .map(AdversaryKind::Iid),
            ("fixed", Some(a)) => a
                .split(',')
                .map(|x| x.trim().parse::<usize>().map_err(|e| bad(e.to_string())))
                .collect::<Result<Vec<_>>>()
                .map(AdversaryKind::FixedSequence),
            ("adaptive", None) | ("adaptive", Some("inf")) => {
                Ok(AdversaryKind::AdaptiveWorst { window: None })
            }
            ("adaptive", Some(w)) => {
                let w = w.parse::<usize>().map_err(|e| bad(e.to_string()))?;
                if w == 0 {
                    return Err(bad("window must be positive".into()));
                }
                Ok(AdversaryKind::AdaptiveWorst { window: Some(w) })
            }
            _ => Err(bad("unknown kind".into())),
        }
    }
}

impl Serialize for AdversaryKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AdversaryKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Anything that can pick outcomes from the public play history.
pub trait Opponent {
    /// Outcome for round `t` (1-based), given `history = [I_1, ..., I_{t-1}]`.
    fn next_outcome(&mut self, t: usize, history: &[usize]) -> Result<usize>;
}

#[derive(Debug, Clone)]
pub struct Adversary {
    kind: AdversaryKind,
    loss: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
    seen: usize,
    window: VecDeque<usize>,
    counts: Vec<usize>,
}

impl Adversary {
    /// `uniform` (an empty `Iid` vector) is expanded to the uniform distribution over `M`.
    pub fn new(kind: AdversaryKind, game: &Game, seed: u64) -> Result<Self> {
        let m = game.num_outcomes();
        let kind = match kind {
            AdversaryKind::Iid(p) if p.is_empty() => AdversaryKind::Iid(vec![1.0 / m as f64; m]),
            AdversaryKind::Iid(p) => {
                let total: f64 = p.iter().sum();
                if p.len() != m || p.iter().any(|x| !(*x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidInput(format!(
                        "iid adversary needs a distribution over {m} outcomes, got {p:?}"
                    )));
                }
                AdversaryKind::Iid(p)
            }
            AdversaryKind::FixedSequence(seq) => {
                if let Some(bad) = seq.iter().find(|&&j| j >= m) {
                    return Err(Error::InvalidInput(format!(
                        "fixed sequence outcome {bad} out of range (M = {m})"
                    )));
                }
                AdversaryKind::FixedSequence(seq)
            }
            other => other,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ADVERSARY_STREAM);
        Ok(Adversary {
            kind,
            loss: game.loss().to_vec(),
            rng,
            seen: 0,
            window: VecDeque::new(),
            counts: vec![0; game.num_actions()],
        })
    }

    pub fn kind(&self) -> &AdversaryKind {
        &self.kind
    }

    fn ingest(&mut self, history: &[usize], window: Option<usize>) {
        for &a in &history[self.seen.min(history.len())..] {
            self.counts[a] += 1;
            self.window.push_back(a);
            if let Some(w) = window {
                if self.window.len() > w {
                    let old = self.window.pop_front().expect("non-empty window");
                    self.counts[old] -= 1;
                }
            }
        }
        self.seen = history.len();
    }
}

impl Opponent for Adversary {
    fn next_outcome(&mut self, t: usize, history: &[usize]) -> Result<usize> {
        if t == 0 {
            return Err(Error::InvalidInput("rounds are numbered from 1".into()));
        }
        match &self.kind {
            AdversaryKind::FixedSequence(seq) => seq
                .get(t - 1)
                .copied()
                .ok_or(Error::SequenceExhausted { round: t }),
            AdversaryKind::Iid(p) => {
                let u: f64 = self.rng.gen();
                let mut acc = 0.0;
                let mut last = 0;
                for (j, &w) in p.iter().enumerate() {
                    if w > 0.0 {
                        last = j;
                        acc += w;
                        if u < acc {
                            return Ok(j);
                        }
                    }
                }
                Ok(last)
            }
            AdversaryKind::AdaptiveWorst { window } => {
                let window = *window;
                self.ingest(history, window);
                let m = self.loss[0].len();
                let mut best = 0;
                let mut best_score = f64::NEG_INFINITY;
                for j in 0..m {
                    let score: f64 = self
                        .counts
                        .iter()
                        .zip(&self.loss)
                        .map(|(&c, row)| c as f64 * row[j])
                        .sum();
                    if score > best_score {
                        best = j;
                        best_score = score;
                    }
                }
                Ok(best)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bandit() -> Game {
        Game::parse(r#"{"loss": [[0,1],[1,0]], "signals": [["0","1"],["1","0"]]}"#).unwrap()
    }

    #[test]
    fn fixed_sequence_indexing_and_exhaustion() {
        let mut adv =
            Adversary::new(AdversaryKind::FixedSequence(vec![1, 0, 1]), &bandit(), 0).unwrap();
        assert_eq!(adv.next_outcome(2, &[0]).unwrap(), 0);
        assert_eq!(adv.next_outcome(3, &[0, 0]).unwrap(), 1);
        assert!(matches!(
            adv.next_outcome(4, &[0, 0, 0]),
            Err(Error::SequenceExhausted { round: 4 })
        ));
    }

    #[test]
    fn iid_uniform_frequencies() {
        let mut adv = Adversary::new("iid:0.5,0.5".parse().unwrap(), &bandit(), 9).unwrap();
        let draws = 100_000;
        let zeros = (1..=draws)
            .filter(|&t| adv.next_outcome(t, &[]).unwrap() == 0)
            .count();
        let freq = zeros as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 0.01, "{freq}");
    }

    #[test]
    fn adaptive_targets_frequent_action() {
        let mut adv = Adversary::new("adaptive".parse().unwrap(), &bandit(), 0).unwrap();
        let history = vec![0; 10];
        // Row 0 is [0, 1]: outcome 1 hurts action 0.
        assert_eq!(adv.next_outcome(11, &history).unwrap(), 1);
    }

    #[test]
    fn adaptive_window_forgets() {
        let mut adv = Adversary::new("adaptive:2".parse().unwrap(), &bandit(), 0).unwrap();
        let mut history = vec![0, 0, 0];
        assert_eq!(adv.next_outcome(4, &history).unwrap(), 1);
        history.extend([1, 1]);
        assert_eq!(adv.next_outcome(6, &history).unwrap(), 0);
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["iid:0.25,0.75", "fixed:0,1,1", "adaptive", "adaptive:50"] {
            let kind: AdversaryKind = s.parse().unwrap();
            assert_eq!(kind.to_string(), s);
        }
        assert!("adaptive:0".parse::<AdversaryKind>().is_err());
        assert!("bogus".parse::<AdversaryKind>().is_err());
        assert_eq!(
            Adversary::new("uniform".parse().unwrap(), &bandit(), 0)
                .unwrap()
                .kind(),
            &AdversaryKind::Iid(vec![0.5, 0.5])
        );
        assert!(Adversary::new("iid:0.5,0.6".parse().unwrap(), &bandit(), 0).is_err());
        assert!(Adversary::new("fixed:0,2".parse().unwrap(), &bandit(), 0).is_err());
    }
}
