//! Per-game tile configuration.
//!
//! Tile vocabularies, solid/passable sets and segment sizes are data, not
//! code. Defaults for the four supported games ship with the crate and can
//! be overridden with a user-supplied TOML file for retargeted corpora.

use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GameId {
    Zelda,
    Metroid,
    MegaMan,
    LodeRunner,
}

impl GameId {
    pub const ALL: [GameId; 4] = [GameId::Zelda, GameId::Metroid, GameId::MegaMan, GameId::LodeRunner];

    pub fn name(&self) -> &'static str {
        match self {
            GameId::Zelda => "zelda",
            GameId::Metroid => "metroid",
            GameId::MegaMan => "megaman",
            GameId::LodeRunner => "loderunner",
        }
    }

    pub fn display(&self) -> &'static str {
        match self {
            GameId::Zelda => "Zelda",
            GameId::Metroid => "Metroid",
            GameId::MegaMan => "Mega Man",
            GameId::LodeRunner => "Lode Runner",
        }
    }
}

impl FromStr for GameId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zelda" => Ok(GameId::Zelda),
            "metroid" => Ok(GameId::Metroid),
            "megaman" | "mega-man" | "mm" => Ok(GameId::MegaMan),
            "loderunner" | "lode-runner" | "lr" => Ok(GameId::LodeRunner),
            other => Err(Error::InvalidArgument(format!("unknown game {other:?}"))),
        }
    }
}

impl std::fmt::Display for GameId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawGameConfig {
    game: String,
    segment_rows: usize,
    segment_cols: usize,
    vocabulary: String,
    /// Tiles counted by the density metric.
    solid: String,
    /// Tiles a player can occupy; used by the opening heuristic.
    passable: String,
    /// Tiles that mark doors/stairs; open by definition.
    doors: String,
    /// Character used to pad unused level area (filtered segments).
    filler: String,
    #[serde(default = "default_run")]
    open_run_threshold: usize,
}

fn default_run() -> usize {
    2
}

#[derive(Debug, Clone)]
pub struct GameConfig {
    pub game: GameId,
    pub segment_rows: usize,
    pub segment_cols: usize,
    pub vocabulary: Vec<char>,
    pub solid: BTreeSet<char>,
    pub passable: BTreeSet<char>,
    pub doors: BTreeSet<char>,
    pub filler: char,
    pub open_run_threshold: usize,
}

const ZELDA_TOML: &str = include_str!("../data/zelda.toml");
const METROID_TOML: &str = include_str!("../data/metroid.toml");
const MEGAMAN_TOML: &str = include_str!("../data/megaman.toml");
const LODERUNNER_TOML: &str = include_str!("../data/loderunner.toml");

impl GameConfig {
    pub fn builtin(game: GameId) -> GameConfig {
        let text = match game {
            GameId::Zelda => ZELDA_TOML,
            GameId::Metroid => METROID_TOML,
            GameId::MegaMan => MEGAMAN_TOML,
            GameId::LodeRunner => LODERUNNER_TOML,
        };
        GameConfig::from_toml(text).expect("builtin config is valid")
    }

    pub fn from_toml(text: &str) -> Result<GameConfig> {
        let raw: RawGameConfig =
            toml::from_str(text).map_err(|e| Error::Format(format!("game config: {e}")))?;
        let game = raw.game.parse()?;
        let vocabulary: Vec<char> = raw.vocabulary.chars().collect();
        if vocabulary.is_empty() {
            return Err(Error::Format("game config: empty vocabulary".into()));
        }
        let vocab_set: BTreeSet<char> = vocabulary.iter().copied().collect();
        if vocab_set.len() != vocabulary.len() {
            return Err(Error::Format("game config: duplicate vocabulary character".into()));
        }
        for (name, set) in [("solid", &raw.solid), ("passable", &raw.passable), ("doors", &raw.doors)] {
            if let Some(c) = set.chars().find(|c| !vocab_set.contains(c)) {
                return Err(Error::Format(format!(
                    "game config: {name} character {c:?} not in vocabulary"
                )));
            }
        }
        let mut filler_chars = raw.filler.chars();
        let filler = filler_chars
            .next()
            .ok_or_else(|| Error::Format("game config: filler must be one character".into()))?;
        if filler_chars.next().is_some() || !vocab_set.contains(&filler) {
            return Err(Error::Format("game config: filler must be one vocabulary character".into()));
        }
        if raw.segment_rows == 0 || raw.segment_cols == 0 {
            return Err(Error::Format("game config: zero segment size".into()));
        }
        if raw.open_run_threshold == 0 {
            return Err(Error::Format("game config: open_run_threshold must be >= 1".into()));
        }
        Ok(GameConfig {
            game,
            segment_rows: raw.segment_rows,
            segment_cols: raw.segment_cols,
            vocabulary,
            solid: raw.solid.chars().collect(),
            passable: raw.passable.chars().collect(),
            doors: raw.doors.chars().collect(),
            filler,
            open_run_threshold: raw.open_run_threshold,
        })
    }

    pub fn from_file(path: &Path) -> Result<GameConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        GameConfig::from_toml(&text)
    }

    pub fn contains(&self, tile: char) -> bool {
        self.vocabulary.contains(&tile)
    }

    pub fn is_open_tile(&self, tile: char) -> bool {
        self.passable.contains(&tile) || self.doors.contains(&tile)
    }
}
