//! The worked example games, bundled so sweeps run without files on disk.

use crate::error::Result;
use crate::game::NormalFormGame;

/// Strict example games: name and JSON text.
pub const STRICT: &[(&str, &str)] = &[
    ("pd", include_str!("../fixtures/pd.json")),
    ("stag_hunt", include_str!("../fixtures/stag_hunt.json")),
    ("hawk_dove", include_str!("../fixtures/hawk_dove.json")),
    ("game22", include_str!("../fixtures/game22.json")),
    ("three_person", include_str!("../fixtures/three_person.json")),
    ("nhp_off", include_str!("../fixtures/nhp_off.json")),
    ("rationality", include_str!("../fixtures/rationality.json")),
];

/// Games with indifferences, solved in weak mode.
pub const WEAK: &[(&str, &str)] = &[
    ("weak_tie", include_str!("../fixtures/weak_tie.json")),
    ("all_equal", include_str!("../fixtures/all_equal.json")),
    ("weak_three", include_str!("../fixtures/weak_three.json")),
];

pub fn load(name: &str) -> Result<NormalFormGame> {
    let text = STRICT
        .iter()
        .chain(WEAK)
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| crate::Error::InvalidInput(format!("no bundled game named {name:?}")))?;
    NormalFormGame::from_json_str(text)
}

pub fn strict_games() -> Vec<(&'static str, NormalFormGame)> {
    STRICT.iter().map(|(n, t)| (*n, NormalFormGame::from_json_str(t).expect("bundled game parses"))).collect()
}

pub fn weak_games() -> Vec<(&'static str, NormalFormGame)> {
    WEAK.iter().map(|(n, t)| (*n, NormalFormGame::from_json_str(t).expect("bundled game parses"))).collect()
}
