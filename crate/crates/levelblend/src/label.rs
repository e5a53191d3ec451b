//! Directional and conditioning labels.
//!
//! A directional label is a 4-bit vector in the fixed order
//! Up, Down, Left, Right; 1 means progression through that side is
//! possible. A conditioning label is the directional bits optionally
//! followed by n game bits for blend models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirectionalLabel {
    pub up: bool,
    pub down: bool,
    pub left: bool,
    pub right: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Up,
    Down,
    Left,
    Right,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Up, Side::Down, Side::Left, Side::Right];

    pub fn opposite(self) -> Side {
        match self {
            Side::Up => Side::Down,
            Side::Down => Side::Up,
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl DirectionalLabel {
    pub const CLOSED: DirectionalLabel =
        DirectionalLabel { up: false, down: false, left: false, right: false };

    pub fn new(up: bool, down: bool, left: bool, right: bool) -> Self {
        DirectionalLabel { up, down, left, right }
    }

    pub fn bits(&self) -> [u8; 4] {
        [self.up as u8, self.down as u8, self.left as u8, self.right as u8]
    }

    pub fn from_bits(bits: [u8; 4]) -> Self {
        DirectionalLabel {
            up: bits[0] != 0,
            down: bits[1] != 0,
            left: bits[2] != 0,
            right: bits[3] != 0,
        }
    }

    /// Index in 0..16, Up as the most significant bit.
    pub fn index(&self) -> usize {
        ((self.up as usize) << 3)
            | ((self.down as usize) << 2)
            | ((self.left as usize) << 1)
            | (self.right as usize)
    }

    pub fn from_index(i: usize) -> Self {
        DirectionalLabel {
            up: i & 8 != 0,
            down: i & 4 != 0,
            left: i & 2 != 0,
            right: i & 1 != 0,
        }
    }

    /// All 16 labels in index order.
    pub fn all() -> impl Iterator<Item = DirectionalLabel> {
        (0..16).map(DirectionalLabel::from_index)
    }

    pub fn get(&self, side: Side) -> bool {
        match side {
            Side::Up => self.up,
            Side::Down => self.down,
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }

    pub fn set(&mut self, side: Side, open: bool) {
        match side {
            Side::Up => self.up = open,
            Side::Down => self.down = open,
            Side::Left => self.left = open,
            Side::Right => self.right = open,
        }
    }

    /// Swap left/right, as under a horizontal flip of the tile grid.
    pub fn flip_horizontal(&self) -> Self {
        DirectionalLabel { up: self.up, down: self.down, left: self.right, right: self.left }
    }

    /// Swap up/down, as under a vertical flip of the tile grid.
    pub fn flip_vertical(&self) -> Self {
        DirectionalLabel { up: self.down, down: self.up, left: self.left, right: self.right }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bits = parse_bit_list(s)?;
        if bits.len() != 4 {
            return Err(Error::Annotation(format!(
                "directional label must have 4 bits, got {} in {s:?}",
                bits.len()
            )));
        }
        Ok(DirectionalLabel::from_bits([bits[0], bits[1], bits[2], bits[3]]))
    }
}

impl std::fmt::Display for DirectionalLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let b = self.bits();
        write!(f, "{},{},{},{}", b[0], b[1], b[2], b[3])
    }
}

pub fn parse_bit_list(s: &str) -> Result<Vec<u8>> {
    s.split(',')
        .map(|t| match t.trim() {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(Error::Annotation(format!("expected bit, got {other:?}"))),
        })
        .collect()
}

/// Directional bits plus optional game bits, in model input order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConditionLabel {
    pub directional: DirectionalLabel,
    pub game_bits: Vec<u8>,
}

impl ConditionLabel {
    pub fn directional(label: DirectionalLabel) -> Self {
        ConditionLabel { directional: label, game_bits: Vec::new() }
    }

    pub fn with_game_bits(label: DirectionalLabel, game_bits: Vec<u8>) -> Self {
        ConditionLabel { directional: label, game_bits }
    }

    pub fn width(&self) -> usize {
        4 + self.game_bits.len()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.directional.bits().iter().map(|&b| b as f64).collect();
        v.extend(self.game_bits.iter().map(|&b| b as f64));
        v
    }
}

impl std::fmt::Display for ConditionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.directional)?;
        for b in &self.game_bits {
            write!(f, ",{b}")?;
        }
        Ok(())
    }
}
