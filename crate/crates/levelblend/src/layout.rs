//! Random layout generation: a connected arrangement of cells with
//! per-side open/closed flags, grown by repeatedly opening a closed side
//! toward a (possibly newly created) neighbor.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::label::{ConditionLabel, DirectionalLabel, Side};

pub type Position = (i64, i64);

pub fn neighbor(pos: Position, side: Side) -> Position {
    let (r, c) = pos;
    match side {
        Side::Up => (r - 1, c),
        Side::Down => (r + 1, c),
        Side::Left => (r, c - 1),
        Side::Right => (r, c + 1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayoutCell {
    pub position: Position,
    pub sides: DirectionalLabel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub cells: BTreeMap<Position, LayoutCell>,
    pub step_count: usize,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Open side toward an existing cell on every open flag.
    pub fn open_sides_have_neighbors(&self) -> bool {
        self.cells.values().all(|cell| {
            Side::ALL
                .iter()
                .all(|&s| !cell.sides.get(s) || self.cells.contains_key(&neighbor(cell.position, s)))
        })
    }

    /// A open toward B iff B open toward A.
    pub fn adjacency_symmetric(&self) -> bool {
        self.cells.values().all(|cell| {
            Side::ALL.iter().all(|&s| {
                !cell.sides.get(s)
                    || self
                        .cells
                        .get(&neighbor(cell.position, s))
                        .is_some_and(|n| n.sides.get(s.opposite()))
            })
        })
    }

    /// Connectivity over mutual open sides.
    pub fn connected(&self) -> bool {
        let Some(&start) = self.cells.keys().next() else { return true };
        let mut seen = std::collections::BTreeSet::new();
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(pos) = stack.pop() {
            let cell = &self.cells[&pos];
            for &s in &Side::ALL {
                if cell.sides.get(s) {
                    let n = neighbor(pos, s);
                    if self.cells.contains_key(&n) && seen.insert(n) {
                        stack.push(n);
                    }
                }
            }
        }
        seen.len() == self.cells.len()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for cell in self.cells.values() {
            let b = cell.sides.bits();
            s.push_str(&format!(
                "{} {} {} {} {} {}\n",
                cell.position.0, cell.position.1, b[0], b[1], b[2], b[3]
            ));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Layout> {
        let mut cells = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 6 {
                return Err(Error::Format(format!(
                    "layout line {}: expected 'row col U D L R'",
                    lineno + 1
                )));
            }
            let row: i64 = parts[0]
                .parse()
                .map_err(|_| Error::Format(format!("layout line {}: bad row", lineno + 1)))?;
            let col: i64 = parts[1]
                .parse()
                .map_err(|_| Error::Format(format!("layout line {}: bad col", lineno + 1)))?;
            let mut bits = [0u8; 4];
            for (i, p) in parts[2..].iter().enumerate() {
                bits[i] = match *p {
                    "0" => 0,
                    "1" => 1,
                    other => {
                        return Err(Error::Format(format!(
                            "layout line {}: bad side flag {other:?}",
                            lineno + 1
                        )))
                    }
                };
            }
            let position = (row, col);
            if cells
                .insert(position, LayoutCell { position, sides: DirectionalLabel::from_bits(bits) })
                .is_some()
            {
                return Err(Error::Format(format!("duplicate layout cell at {position:?}")));
            }
        }
        let layout = Layout { cells, step_count: 0 };
        if !layout.open_sides_have_neighbors() || !layout.adjacency_symmetric() {
            return Err(Error::Format("layout open sides are not mutual".into()));
        }
        if !layout.connected() {
            return Err(Error::Format("layout is not connected".into()));
        }
        Ok(layout)
    }
}

/// Grow a layout: start from one all-closed cell; each step picks a random
/// closed (cell, side) pair, creates the neighbor if absent, and opens the
/// adjoining sides. The step count is drawn uniformly from
/// [min_steps, max_steps].
pub fn generate_layout<R: Rng>(min_steps: usize, max_steps: usize, rng: &mut R) -> Result<Layout> {
    if min_steps == 0 || min_steps > max_steps {
        return Err(Error::InvalidArgument(format!(
            "step range must satisfy 0 < min <= max, got {min_steps}..{max_steps}"
        )));
    }
    let steps = rng.gen_range(min_steps..=max_steps);
    let mut cells: BTreeMap<Position, LayoutCell> = BTreeMap::new();
    cells.insert((0, 0), LayoutCell { position: (0, 0), sides: DirectionalLabel::CLOSED });

    let mut performed = 0;
    let mut attempts = 0usize;
    let attempt_cap = steps.saturating_mul(100);
    while performed < steps && attempts < attempt_cap {
        attempts += 1;
        let closed: Vec<(Position, Side)> = cells
            .values()
            .flat_map(|cell| {
                Side::ALL
                    .iter()
                    .filter(|&&s| !cell.sides.get(s))
                    .map(|&s| (cell.position, s))
                    .collect::<Vec<_>>()
            })
            .collect();
        if closed.is_empty() {
            break;
        }
        let (pos, side) = closed[rng.gen_range(0..closed.len())];
        let npos = neighbor(pos, side);
        cells
            .entry(npos)
            .or_insert(LayoutCell { position: npos, sides: DirectionalLabel::CLOSED });
        cells.get_mut(&pos).unwrap().sides.set(side, true);
        cells.get_mut(&npos).unwrap().sides.set(side.opposite(), true);
        performed += 1;
    }
    Ok(Layout { cells, step_count: performed })
}

/// Directional bits equal the cell's open sides; game bits are appended
/// verbatim when provided.
pub fn cell_condition_label(cell: &LayoutCell, game_bits: Option<&[u8]>) -> ConditionLabel {
    match game_bits {
        Some(bits) => ConditionLabel::with_game_bits(cell.sides, bits.to_vec()),
        None => ConditionLabel::directional(cell.sides),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_step_makes_two_joined_cells() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layout = generate_layout(1, 1, &mut rng).unwrap();
        assert_eq!(layout.len(), 2);
        assert_eq!(layout.step_count, 1);
        let open: usize = layout
            .cells
            .values()
            .map(|c| c.sides.bits().iter().map(|&b| b as usize).sum::<usize>())
            .sum();
        assert_eq!(open, 2);
        assert!(layout.connected());
        assert!(layout.adjacency_symmetric());
    }

    #[test]
    fn zero_steps_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(generate_layout(0, 3, &mut rng).is_err());
        assert!(generate_layout(4, 3, &mut rng).is_err());
    }

    #[test]
    fn generated_layouts_satisfy_graph_invariants() {
        for seed in 0..1000 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let layout = generate_layout(1, 12, &mut rng).unwrap();
            assert!(layout.connected(), "seed {seed}");
            assert!(layout.adjacency_symmetric(), "seed {seed}");
            assert!(layout.open_sides_have_neighbors(), "seed {seed}");
            assert!(layout.len() <= layout.step_count + 1, "seed {seed}");
        }
    }

    #[test]
    fn seeded_generation_reproduces() {
        let a = generate_layout(3, 9, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = generate_layout(3, 9, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn condition_labels_from_cells() {
        let cell = LayoutCell {
            position: (0, 0),
            sides: DirectionalLabel::new(true, false, false, true),
        };
        assert_eq!(cell_condition_label(&cell, None).to_vec(), vec![1.0, 0.0, 0.0, 1.0]);

        let closed = LayoutCell { position: (0, 0), sides: DirectionalLabel::CLOSED };
        assert_eq!(cell_condition_label(&closed, None).to_vec(), vec![0.0; 4]);

        let down = LayoutCell {
            position: (0, 0),
            sides: DirectionalLabel::new(false, true, false, false),
        };
        assert_eq!(
            cell_condition_label(&down, Some(&[1, 0])).to_vec(),
            vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn layout_text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layout = generate_layout(4, 8, &mut rng).unwrap();
        let text = layout.to_text();
        let mut parsed = Layout::from_text(&text).unwrap();
        parsed.step_count = layout.step_count;
        assert_eq!(parsed, layout);
    }

    #[test]
    fn from_text_rejects_asymmetric_openings() {
        assert!(Layout::from_text("0 0 0 0 0 1\n0 1 0 0 0 0\n").is_err());
        assert!(Layout::from_text("0 0 0 0 0 1\n").is_err()); // neighbor missing
        assert!(Layout::from_text("0 0 0 0 0 0\n5 5 0 0 0 0\n").is_err()); // disconnected
    }
}
