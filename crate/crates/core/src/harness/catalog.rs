use std::collections::BTreeMap;

use crate::game::{Feedback, Game};

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub game: Game,
    pub expected_observable: bool,
}

fn symbols(rows: &[&[&str]]) -> Feedback {
    Feedback::Deterministic(
        rows.iter()
            .map(|r| r.iter().map(|s| s.to_string()).collect())
            .collect(),
    )
}

fn entry(
    name: &'static str,
    loss: Vec<Vec<f64>>,
    feedback: Feedback,
    observable: bool,
) -> CatalogEntry {
    CatalogEntry {
        name,
        game: Game::new(loss, feedback).expect("catalog games are well formed"),
        expected_observable: observable,
    }
}

/// Matching-pennies bandit where each symbol is reported correctly with
/// probability 0.9 and flipped otherwise.
fn noisy_bandit() -> Feedback {
    let cell = |shown: &str| -> BTreeMap<String, f64> {
        let other = if shown == "0" { "1" } else { "0" };
        BTreeMap::from([(shown.to_string(), 0.9), (other.to_string(), 0.1)])
    };
    Feedback::Random(vec![vec![cell("0"), cell("1")], vec![cell("1"), cell("0")]])
}

/// Built-in games.
pub fn catalog() -> Vec<CatalogEntry> {
    vec![
        entry(
            "bandit_mp",
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            symbols(&[&["0", "1"], &["1", "0"]]),
            true,
        ),
        entry(
            "bandit_mp_noisy",
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            noisy_bandit(),
            true,
        ),
        entry(
            "apple_tasting",
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            symbols(&[&["none", "none"], &["rotten", "good"]]),
            true,
        ),
        entry(
            "label_efficient",
            vec![vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            symbols(&[&["0", "1"], &["none", "none"], &["none", "none"]]),
            false,
        ),
        entry(
            "full_info_3x3",
            vec![
                vec![0.0, 1.0, 1.0],
                vec![1.0, 0.0, 1.0],
                vec![1.0, 1.0, 0.0],
            ],
            symbols(&[&["0", "1", "2"], &["0", "1", "2"], &["0", "1", "2"]]),
            true,
        ),
    ]
}

pub fn catalog_entry(name: &str) -> Option<CatalogEntry> {
    catalog().into_iter().find(|e| e.name == name)
}
