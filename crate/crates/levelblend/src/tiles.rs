//! Tile grids and level text parsing.

use serde::{Deserialize, Serialize};

use crate::config::GameConfig;
use crate::error::{Error, Result};

/// Rectangular grid of tile characters, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TileGrid {
    rows: usize,
    cols: usize,
    tiles: Vec<char>,
}

impl TileGrid {
    pub fn new(rows: usize, cols: usize, tiles: Vec<char>) -> Result<TileGrid> {
        if tiles.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "tile count {} does not match {rows}x{cols}",
                tiles.len()
            )));
        }
        Ok(TileGrid { rows, cols, tiles })
    }

    pub fn filled(rows: usize, cols: usize, tile: char) -> TileGrid {
        TileGrid { rows, cols, tiles: vec![tile; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> char {
        debug_assert!(row < self.rows && col < self.cols);
        self.tiles[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, tile: char) {
        debug_assert!(row < self.rows && col < self.cols);
        self.tiles[row * self.cols + col] = tile;
    }

    pub fn tiles(&self) -> &[char] {
        &self.tiles
    }

    pub fn row(&self, row: usize) -> &[char] {
        &self.tiles[row * self.cols..(row + 1) * self.cols]
    }

    /// Copy of the rectangle starting at (row, col).
    pub fn window(&self, row: usize, col: usize, rows: usize, cols: usize) -> Result<TileGrid> {
        if row + rows > self.rows || col + cols > self.cols {
            return Err(Error::Dimension(format!(
                "window {rows}x{cols} at ({row},{col}) exceeds {}x{}",
                self.rows, self.cols
            )));
        }
        let mut tiles = Vec::with_capacity(rows * cols);
        for r in row..row + rows {
            tiles.extend_from_slice(&self.tiles[r * self.cols + col..r * self.cols + col + cols]);
        }
        Ok(TileGrid { rows, cols, tiles })
    }

    pub fn flip_horizontal(&self) -> TileGrid {
        let mut tiles = Vec::with_capacity(self.tiles.len());
        for r in 0..self.rows {
            tiles.extend(self.row(r).iter().rev());
        }
        TileGrid { rows: self.rows, cols: self.cols, tiles }
    }

    pub fn flip_vertical(&self) -> TileGrid {
        let mut tiles = Vec::with_capacity(self.tiles.len());
        for r in (0..self.rows).rev() {
            tiles.extend_from_slice(self.row(r));
        }
        TileGrid { rows: self.rows, cols: self.cols, tiles }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.cells() + self.rows);
        for r in 0..self.rows {
            s.extend(self.row(r));
            s.push('\n');
        }
        s
    }

    pub fn all_equal_to(&self, tile: char) -> bool {
        self.tiles.iter().all(|&t| t == tile)
    }
}

/// Parse newline-separated level text, validating against the game vocabulary.
pub fn parse_level(text: &str, config: &GameConfig) -> Result<TileGrid> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim_end().is_empty()).collect();
    if lines.is_empty() {
        return Err(Error::Format("level text is empty".into()));
    }
    let cols = lines[0].chars().count();
    let mut tiles = Vec::with_capacity(lines.len() * cols);
    for (row, line) in lines.iter().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        if chars.len() != cols {
            return Err(Error::Format(format!(
                "ragged rows: row {row} has {} columns, expected {cols}",
                chars.len()
            )));
        }
        for (col, &c) in chars.iter().enumerate() {
            if !config.contains(c) {
                return Err(Error::Vocabulary { tile: c, row, col });
            }
            tiles.push(c);
        }
    }
    TileGrid::new(lines.len(), cols, tiles)
}
