//! Fill a layout with conditionally generated segments to produce whole
//! levels, either from one (possibly blended) model or by turn-taking
//! between several single-game models.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;

use crate::corpus::{pad_zelda_room, AnnotatedSegment, Provenance};
use crate::cvae::ModelParams;
use crate::error::{Error, Result};
use crate::label::{ConditionLabel, DirectionalLabel};
use crate::layout::{cell_condition_label, Layout, LayoutCell, Position};
use crate::rng::rng_from;
use crate::tiles::TileGrid;

/// How game bits are chosen per cell when assembling with a blend model.
#[derive(Debug, Clone, PartialEq)]
pub enum GamePolicy {
    /// Single-game model, no game bits.
    None,
    /// The same bits for every cell.
    Fixed(Vec<u8>),
    /// Each bit set to 1 independently with the given probability.
    Random(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellPlacement {
    pub segment: AnnotatedSegment,
    pub label: ConditionLabel,
    pub model: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub layout: Layout,
    pub placements: BTreeMap<Position, CellPlacement>,
}

impl Level {
    pub fn segment_rows(&self) -> usize {
        self.placements.values().next().map(|p| p.segment.grid.rows()).unwrap_or(0)
    }

    pub fn segment_cols(&self) -> usize {
        self.placements.values().next().map(|p| p.segment.grid.cols()).unwrap_or(0)
    }

    /// Every cell placed, and each placement's directional bits equal the
    /// cell's open sides.
    pub fn labels_agree_with_layout(&self) -> bool {
        self.layout.cells.len() == self.placements.len()
            && self.layout.cells.iter().all(|(pos, cell)| {
                self.placements
                    .get(pos)
                    .is_some_and(|p| p.label.directional == cell.sides)
            })
    }
}

fn position_key(pos: Position) -> u64 {
    ((pos.0 as u32 as u64) << 32) | pos.1 as u32 as u64
}

fn generate_cell(
    model: &ModelParams,
    cell: &LayoutCell,
    game_bits: Option<Vec<u8>>,
    root_seed: u64,
    model_name: &str,
) -> Result<CellPlacement> {
    let label = cell_condition_label(cell, game_bits.as_deref());
    let seed = crate::rng::derive_seed(root_seed, "cell-latent", position_key(cell.position));
    let mut rng = rng_from(seed, "generate", 0);
    let mut segment = model.generate(&label, &mut rng)?;
    segment.provenance = Provenance::new(
        format!("cell_{}_{}", cell.position.0, cell.position.1),
        0,
        0,
    );
    Ok(CellPlacement { segment, label, model: model_name.to_string(), seed })
}

/// One generation call per layout cell, conditioned on the cell's open
/// sides plus the policy's game bits.
pub fn assemble(
    layout: &Layout,
    model: &ModelParams,
    policy: &GamePolicy,
    root_seed: u64,
) -> Result<Level> {
    let bits_width = match policy {
        GamePolicy::None => 0,
        GamePolicy::Fixed(bits) => bits.len(),
        GamePolicy::Random(probs) => probs.len(),
    };
    if model.label_width != 4 + bits_width {
        return Err(Error::Shape(format!(
            "model label width {} does not match policy game-bit width {bits_width}",
            model.label_width
        )));
    }
    let model_name = model.games.iter().map(|g| g.name()).collect::<Vec<_>>().join("-");
    let mut placements = BTreeMap::new();
    for (pos, cell) in &layout.cells {
        let game_bits = match policy {
            GamePolicy::None => None,
            GamePolicy::Fixed(bits) => Some(bits.clone()),
            GamePolicy::Random(probs) => {
                let mut rng =
                    rng_from(root_seed, "cell-game-bits", position_key(*pos));
                Some(probs.iter().map(|&p| (rng.gen::<f64>() < p) as u8).collect())
            }
        };
        placements.insert(*pos, generate_cell(model, cell, game_bits, root_seed, &model_name)?);
    }
    Ok(Level { layout: layout.clone(), placements })
}

/// Turn-taking assembly: per cell, draw one of the single-game models by
/// the given probabilities and condition it on the cell's sides alone.
/// When 11x16 and 15x16 models are mixed, the 11x16 rooms are padded to
/// 15x16 so rows align.
pub fn assemble_multi(
    layout: &Layout,
    models: &[&ModelParams],
    probabilities: &[f64],
    root_seed: u64,
) -> Result<Level> {
    if models.is_empty() || models.len() != probabilities.len() {
        return Err(Error::InvalidArgument(
            "need one probability per model".into(),
        ));
    }
    if probabilities.iter().any(|&p| p < 0.0) || (probabilities.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("probabilities must be nonnegative and sum to 1".into()));
    }
    for m in models {
        if m.label_width != 4 {
            return Err(Error::Shape("turn-taking assembly requires single-game models".into()));
        }
    }
    let shapes: std::collections::BTreeSet<(usize, usize)> =
        models.iter().map(|m| (m.segment_rows, m.segment_cols)).collect();
    let pad = if shapes.len() == 1 {
        false
    } else if shapes == [(11, 16), (15, 16)].into_iter().collect() {
        true
    } else {
        return Err(Error::Shape(format!("incompatible model segment shapes: {shapes:?}")));
    };

    let mut placements = BTreeMap::new();
    for (pos, cell) in &layout.cells {
        let mut rng = rng_from(root_seed, "cell-model", position_key(*pos));
        let draw: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = models.len() - 1;
        for (i, &p) in probabilities.iter().enumerate() {
            acc += p;
            if draw < acc {
                chosen = i;
                break;
            }
        }
        let model = models[chosen];
        let name = format!("{}#{}", model.games[0].name(), chosen);
        let mut placement = generate_cell(model, cell, None, root_seed, &name)?;
        if pad && placement.segment.grid.rows() == 11 {
            placement.segment.grid = pad_zelda_room(&placement.segment.grid)?;
        }
        placements.insert(*pos, placement);
    }
    Ok(Level { layout: layout.clone(), placements })
}

const LEVEL_MAGIC: &str = "levelblend-level v1";

pub fn level_to_string(level: &Level) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{LEVEL_MAGIC}");
    let _ = writeln!(s, "rows: {}", level.segment_rows());
    let _ = writeln!(s, "cols: {}", level.segment_cols());
    let _ = writeln!(s, "cells: {}", level.placements.len());
    for (pos, p) in &level.placements {
        let _ = writeln!(
            s,
            "\n@ {} {} {} {} {} {}",
            pos.0,
            pos.1,
            p.label,
            p.segment.game.name(),
            p.model,
            p.seed
        );
        s.push_str(&p.segment.grid.to_text());
    }
    s
}

pub fn level_from_str(text: &str) -> Result<Level> {
    let mut lines = text.lines();
    let magic = lines.next().ok_or_else(|| Error::Format("empty level file".into()))?;
    if magic.trim_end() != LEVEL_MAGIC {
        return Err(Error::Format(format!("bad level header {magic:?}")));
    }
    let mut rows = None;
    let mut cols = None;
    let mut count = None;
    for _ in 0..3 {
        let line = lines.next().ok_or_else(|| Error::Format("truncated level header".into()))?;
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| Error::Format(format!("bad level header line {line:?}")))?;
        let value: usize = value
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad level header value {line:?}")))?;
        match key {
            "rows" => rows = Some(value),
            "cols" => cols = Some(value),
            "cells" => count = Some(value),
            other => return Err(Error::Format(format!("unknown level header key {other:?}"))),
        }
    }
    let rows = rows.ok_or_else(|| Error::Format("level missing rows".into()))?;
    let cols = cols.ok_or_else(|| Error::Format("level missing cols".into()))?;
    let count = count.ok_or_else(|| Error::Format("level missing cells".into()))?;
    if rows == 0 || cols == 0 {
        return Err(Error::Format("level segment size must be positive".into()));
    }

    let mut placements = BTreeMap::new();
    let mut cells = BTreeMap::new();
    while let Some(line) = lines.next() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let rest = line
            .strip_prefix("@ ")
            .ok_or_else(|| Error::Format(format!("expected cell record, got {line:?}")))?;
        let parts: Vec<&str> = rest.split_whitespace().collect();
        if parts.len() != 6 {
            return Err(Error::Format(format!("bad cell record {rest:?}")));
        }
        let r: i64 = parts[0].parse().map_err(|_| Error::Format("bad cell row".into()))?;
        let c: i64 = parts[1].parse().map_err(|_| Error::Format("bad cell col".into()))?;
        let bits = crate::label::parse_bit_list(parts[2])?;
        if bits.len() < 4 {
            return Err(Error::Format("cell label must have at least 4 bits".into()));
        }
        let directional = DirectionalLabel::from_bits([bits[0], bits[1], bits[2], bits[3]]);
        let label = ConditionLabel::with_game_bits(directional, bits[4..].to_vec());
        let game: crate::config::GameId = parts[3].parse()?;
        let seed: u64 = parts[5].parse().map_err(|_| Error::Format("bad cell seed".into()))?;
        let mut tiles = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let row_line =
                lines.next().ok_or_else(|| Error::Format(format!("cell ({r},{c}) truncated")))?;
            let chars: Vec<char> = row_line.chars().collect();
            if chars.len() != cols {
                return Err(Error::Format(format!(
                    "cell ({r},{c}): expected {cols} tiles per row, got {}",
                    chars.len()
                )));
            }
            tiles.extend(chars);
        }
        let pos = (r, c);
        if placements.contains_key(&pos) {
            return Err(Error::Format(format!("duplicate cell at {pos:?}")));
        }
        cells.insert(pos, LayoutCell { position: pos, sides: directional });
        placements.insert(
            pos,
            CellPlacement {
                segment: AnnotatedSegment {
                    grid: TileGrid::new(rows, cols, tiles)?,
                    label: directional,
                    game,
                    provenance: Provenance::new(format!("cell_{r}_{c}"), 0, 0),
                },
                label,
                model: parts[4].to_string(),
                seed,
            },
        );
    }
    if placements.len() != count {
        return Err(Error::Format(format!(
            "level declares {count} cells but contains {}",
            placements.len()
        )));
    }
    let layout = Layout { cells, step_count: 0 };
    if !layout.open_sides_have_neighbors() || !layout.adjacency_symmetric() {
        return Err(Error::Format("level cell openings are not mutual".into()));
    }
    Ok(Level { layout, placements })
}

pub fn save_level(level: &Level, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, level_to_string(level)).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_level(path: &std::path::Path) -> Result<Level> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    level_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::GameId;
    use crate::nn::{DenseNet, Layer};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_model(rows: usize, cols: usize, vocab: &str, games: Vec<GameId>) -> ModelParams {
        let vocabulary: Vec<char> = vocab.chars().collect();
        let label_width = 4 + if games.len() > 1 { games.len() } else { 0 };
        let cells = rows * cols;
        let latent = 2;
        ModelParams {
            encoder: DenseNet::new(vec![Layer::zeros(2 * latent, cells * vocabulary.len() + label_width)])
                .unwrap(),
            decoder: DenseNet::new(vec![Layer::zeros(cells * vocabulary.len(), latent + label_width)])
                .unwrap(),
            latent_dim: latent,
            segment_rows: rows,
            segment_cols: cols,
            vocabulary,
            label_width,
            games,
            seed: 0,
            hidden: vec![],
        }
    }

    /// A 1 x n row of cells joined left-to-right.
    fn row_layout(n: usize) -> Layout {
        let mut cells = std::collections::BTreeMap::new();
        for c in 0..n as i64 {
            let sides = DirectionalLabel::new(false, false, c > 0, c + 1 < n as i64);
            cells.insert((0, c), LayoutCell { position: (0, c), sides });
        }
        Layout { cells, step_count: n.saturating_sub(1) }
    }

    #[test]
    fn assembled_labels_agree_with_layout() {
        let model = zero_model(4, 5, "-W", vec![GameId::Zelda]);
        let layout = crate::layout::generate_layout(4, 8, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let level = assemble(&layout, &model, &GamePolicy::None, 77).unwrap();
        assert!(level.labels_agree_with_layout());
        assert_eq!(level.placements.len(), layout.len());

        let again = assemble(&layout, &model, &GamePolicy::None, 77).unwrap();
        assert_eq!(level, again);
    }

    #[test]
    fn policy_width_must_match_model() {
        let single = zero_model(4, 5, "-W", vec![GameId::Zelda]);
        let blend = zero_model(4, 5, "-W", vec![GameId::Zelda, GameId::Metroid]);
        let layout = row_layout(3);
        assert!(assemble(&layout, &single, &GamePolicy::Fixed(vec![1, 0]), 0).is_err());
        assert!(assemble(&layout, &blend, &GamePolicy::None, 0).is_err());
        assert!(assemble(&layout, &blend, &GamePolicy::Random(vec![0.5]), 0).is_err());
        assert!(assemble(&layout, &blend, &GamePolicy::Fixed(vec![1, 0]), 0).is_ok());
    }

    #[test]
    fn random_policy_bit_frequency_is_near_probability() {
        let blend = zero_model(4, 5, "-W", vec![GameId::Zelda, GameId::Metroid]);
        let layout = row_layout(1000);
        let level = assemble(&layout, &blend, &GamePolicy::Random(vec![0.5, 0.0]), 13).unwrap();
        let ones: usize = level
            .placements
            .values()
            .map(|p| p.label.game_bits[0] as usize)
            .sum();
        let rate = ones as f64 / 1000.0;
        assert!((0.45..=0.55).contains(&rate), "bit rate {rate}");
        assert!(level.placements.values().all(|p| p.label.game_bits[1] == 0));
    }

    #[test]
    fn multi_probabilities_validated() {
        let a = zero_model(4, 5, "-W", vec![GameId::Zelda]);
        let b = zero_model(4, 5, "-#", vec![GameId::Metroid]);
        let layout = row_layout(4);
        assert!(assemble_multi(&layout, &[&a, &b], &[0.7, 0.4], 0).is_err());
        assert!(assemble_multi(&layout, &[&a, &b], &[0.5], 0).is_err());
        assert!(assemble_multi(&layout, &[], &[], 0).is_err());
        assert!(assemble_multi(&layout, &[&a, &b], &[-0.5, 1.5], 0).is_err());
        assert!(assemble_multi(&layout, &[&a, &b], &[0.5, 0.5], 0).is_ok());
    }

    #[test]
    fn multi_extreme_probabilities_pick_one_model() {
        let a = zero_model(4, 5, "-W", vec![GameId::Zelda]);
        let b = zero_model(4, 5, "-#", vec![GameId::Metroid]);
        let layout = row_layout(20);
        let level = assemble_multi(&layout, &[&a, &b], &[1.0, 0.0], 3).unwrap();
        assert!(level.placements.values().all(|p| p.segment.game == GameId::Zelda));
        let level = assemble_multi(&layout, &[&a, &b], &[0.0, 1.0], 3).unwrap();
        assert!(level.placements.values().all(|p| p.segment.game == GameId::Metroid));
    }

    #[test]
    fn multi_even_split_is_balanced() {
        let a = zero_model(4, 5, "-W", vec![GameId::Zelda]);
        let b = zero_model(4, 5, "-#", vec![GameId::Metroid]);
        let layout = row_layout(1000);
        let level = assemble_multi(&layout, &[&a, &b], &[0.5, 0.5], 21).unwrap();
        let zelda = level.placements.values().filter(|p| p.segment.game == GameId::Zelda).count();
        let rate = zelda as f64 / 1000.0;
        assert!((0.45..=0.55).contains(&rate), "model pick rate {rate}");
    }

    #[test]
    fn mixed_room_sizes_are_padded() {
        let zelda = zero_model(11, 16, "-W", vec![GameId::Zelda]);
        let metroid = zero_model(15, 16, "-#", vec![GameId::Metroid]);
        let layout = row_layout(12);
        let level = assemble_multi(&layout, &[&zelda, &metroid], &[0.5, 0.5], 2).unwrap();
        assert!(level.placements.values().all(|p| p.segment.grid.rows() == 15));

        let tiny = zero_model(4, 5, "-W", vec![GameId::Zelda]);
        assert!(assemble_multi(&layout, &[&tiny, &metroid], &[0.5, 0.5], 2).is_err());
    }

    #[test]
    fn level_text_round_trip() {
        let blend = zero_model(4, 5, "-W", vec![GameId::Zelda, GameId::Metroid]);
        let layout = crate::layout::generate_layout(3, 6, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let level = assemble(&layout, &blend, &GamePolicy::Fixed(vec![0, 1]), 5).unwrap();
        let text = level_to_string(&level);
        let mut parsed = level_from_str(&text).unwrap();
        parsed.layout.step_count = level.layout.step_count;
        assert_eq!(parsed, level);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("level.txt");
        save_level(&level, &path).unwrap();
        let mut loaded = load_level(&path).unwrap();
        loaded.layout.step_count = level.layout.step_count;
        assert_eq!(loaded, level);
    }

    #[test]
    fn level_parser_rejects_malformed_input() {
        assert!(level_from_str("").is_err());
        assert!(level_from_str("wrong header\nrows: 1\ncols: 1\ncells: 0\n").is_err());
        // cell count mismatch
        assert!(level_from_str("levelblend-level v1\nrows: 1\ncols: 1\ncells: 2\n").is_err());
        // non-mutual opening
        let text = "levelblend-level v1\nrows: 1\ncols: 1\ncells: 1\n\n@ 0 0 0,0,0,1 zelda m 0\n-\n";
        assert!(level_from_str(text).is_err());
    }
}
