//! Turn assembled levels into annotated text and raster images: tile
//! characters or flat-color cells laid out by layout position, white
//! segment borders, red dash marks centered on each open side.

use std::collections::BTreeMap;
use std::path::Path;

use image::{Rgb, RgbImage};
use serde::Deserialize;

use crate::assemble::Level;
use crate::error::{Error, Result};
use crate::label::Side;

pub const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
pub const RED: Rgb<u8> = Rgb([220, 40, 40]);

/// Flat color per tile character.
#[derive(Debug, Clone, PartialEq)]
pub struct Tileset {
    pub colors: BTreeMap<char, Rgb<u8>>,
}

#[derive(Deserialize)]
struct TilesetFile {
    colors: BTreeMap<String, String>,
}

fn parse_hex_color(s: &str) -> Result<Rgb<u8>> {
    let hex = s
        .strip_prefix('#')
        .filter(|h| h.len() == 6 && h.chars().all(|c| c.is_ascii_hexdigit()))
        .ok_or_else(|| Error::Format(format!("bad color {s:?}, expected #RRGGBB")))?;
    let v = u32::from_str_radix(hex, 16).expect("validated hex");
    Ok(Rgb([(v >> 16) as u8, (v >> 8) as u8, v as u8]))
}

impl Tileset {
    pub fn parse(text: &str) -> Result<Tileset> {
        let file: TilesetFile =
            toml::from_str(text).map_err(|e| Error::Format(format!("tileset: {e}")))?;
        let mut colors = BTreeMap::new();
        for (key, value) in file.colors {
            let mut chars = key.chars();
            let (Some(tile), None) = (chars.next(), chars.next()) else {
                return Err(Error::Format(format!("tileset key {key:?} is not a single tile")));
            };
            colors.insert(tile, parse_hex_color(&value)?);
        }
        Ok(Tileset { colors })
    }

    /// Colors for every tile character of the built-in game vocabularies.
    pub fn builtin() -> Tileset {
        Tileset::parse(include_str!("../data/tileset.toml")).expect("built-in tileset parses")
    }

    pub fn load(path: &Path) -> Result<Tileset> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Tileset::parse(&text)
    }

    pub fn color(&self, tile: char) -> Result<Rgb<u8>> {
        self.colors.get(&tile).copied().ok_or(Error::MissingTile(tile))
    }
}

fn level_extent(level: &Level) -> Option<(i64, i64, i64, i64)> {
    let rows: Vec<i64> = level.layout.cells.keys().map(|p| p.0).collect();
    let cols: Vec<i64> = level.layout.cells.keys().map(|p| p.1).collect();
    Some((
        *rows.iter().min()?,
        *rows.iter().max()?,
        *cols.iter().min()?,
        *cols.iter().max()?,
    ))
}

/// Character canvas: each cell occupies its tile grid plus a one-character
/// shared border drawn with `+ - |`; positions without a cell stay filled
/// with `background`. A level of R x C cells with S x T tiles per segment
/// yields R*(S+1)+1 lines of C*(T+1)+1 characters.
pub fn render_text(level: &Level, background: char) -> String {
    let Some((r0, r1, c0, c1)) = level_extent(level) else {
        return String::new();
    };
    let srows = level.segment_rows();
    let scols = level.segment_cols();
    let height = (r1 - r0 + 1) as usize * (srows + 1) + 1;
    let width = (c1 - c0 + 1) as usize * (scols + 1) + 1;
    let mut canvas = vec![vec![background; width]; height];

    for (pos, placement) in &level.placements {
        let top = (pos.0 - r0) as usize * (srows + 1);
        let left = (pos.1 - c0) as usize * (scols + 1);
        for x in 0..=scols + 1 {
            let ch = if x == 0 || x == scols + 1 { '+' } else { '-' };
            canvas[top][left + x] = ch;
            canvas[top + srows + 1][left + x] = ch;
        }
        for y in 1..=srows {
            canvas[top + y][left] = '|';
            canvas[top + y][left + scols + 1] = '|';
        }
        for r in 0..srows {
            for c in 0..scols {
                canvas[top + 1 + r][left + 1 + c] = placement.segment.grid.get(r, c);
            }
        }
    }

    let mut out = String::with_capacity(height * (width + 1));
    for row in canvas {
        out.extend(row);
        out.push('\n');
    }
    out
}

/// Pixel size of the image `render_image` produces for a level spanning
/// `cell_rows` x `cell_cols` layout positions.
pub fn image_dimensions(
    cell_rows: usize,
    cell_cols: usize,
    segment_rows: usize,
    segment_cols: usize,
    tile_px: u32,
) -> (u32, u32) {
    let w = cell_cols as u32 * (segment_cols as u32 * tile_px + 1) + 1;
    let h = cell_rows as u32 * (segment_rows as u32 * tile_px + 1) + 1;
    (w, h)
}

fn draw_dash(img: &mut RgbImage, x0: u32, y0: u32, x1: u32, y1: u32) {
    for y in y0..y1 {
        for x in x0..x1 {
            img.put_pixel(x, y, RED);
        }
    }
}

/// Raster rendering: `tile_px` square per tile, one-pixel shared white
/// border between and around segments, and a red dash centered on each
/// border side the cell's label marks open.
pub fn render_image(level: &Level, tileset: &Tileset, tile_px: u32) -> Result<RgbImage> {
    if tile_px == 0 {
        return Err(Error::InvalidArgument("tile size must be positive".into()));
    }
    let Some((r0, r1, c0, c1)) = level_extent(level) else {
        return Err(Error::InvalidArgument("cannot render an empty level".into()));
    };
    let srows = level.segment_rows();
    let scols = level.segment_cols();
    let (width, height) = image_dimensions(
        (r1 - r0 + 1) as usize,
        (c1 - c0 + 1) as usize,
        srows,
        scols,
        tile_px,
    );
    let cell_w = scols as u32 * tile_px + 1;
    let cell_h = srows as u32 * tile_px + 1;
    let mut img = RgbImage::from_pixel(width, height, Rgb([0, 0, 0]));

    for (pos, placement) in &level.placements {
        let left = (pos.1 - c0) as u32 * cell_w;
        let top = (pos.0 - r0) as u32 * cell_h;
        // white frame (shared edges get drawn twice, harmlessly)
        for x in left..=left + cell_w {
            img.put_pixel(x, top, WHITE);
            img.put_pixel(x, top + cell_h, WHITE);
        }
        for y in top..=top + cell_h {
            img.put_pixel(left, y, WHITE);
            img.put_pixel(left + cell_w, y, WHITE);
        }
        for r in 0..srows {
            for c in 0..scols {
                let color = tileset.color(placement.segment.grid.get(r, c))?;
                for dy in 0..tile_px {
                    for dx in 0..tile_px {
                        img.put_pixel(
                            left + 1 + c as u32 * tile_px + dx,
                            top + 1 + r as u32 * tile_px + dy,
                            color,
                        );
                    }
                }
            }
        }
        // red dashes over the border, a third of the side, centered
        let dash_w = (cell_w / 3).max(1);
        let dash_h = (cell_h / 3).max(1);
        for &side in &Side::ALL {
            if !placement.label.directional.get(side) {
                continue;
            }
            match side {
                Side::Up => {
                    let x = left + (cell_w - dash_w) / 2;
                    draw_dash(&mut img, x, top, x + dash_w, top + 1);
                }
                Side::Down => {
                    let x = left + (cell_w - dash_w) / 2;
                    draw_dash(&mut img, x, top + cell_h, x + dash_w, top + cell_h + 1);
                }
                Side::Left => {
                    let y = top + (cell_h - dash_h) / 2;
                    draw_dash(&mut img, left, y, left + 1, y + dash_h);
                }
                Side::Right => {
                    let y = top + (cell_h - dash_h) / 2;
                    draw_dash(&mut img, left + cell_w, y, left + cell_w + 1, y + dash_h);
                }
            }
        }
    }
    Ok(img)
}

pub fn save_image(level: &Level, tileset: &Tileset, tile_px: u32, path: &Path) -> Result<()> {
    let img = render_image(level, tileset, tile_px)?;
    img.save(path).map_err(|e| Error::Format(format!("write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::CellPlacement;
    use crate::config::GameId;
    use crate::corpus::{AnnotatedSegment, Provenance};
    use crate::label::{ConditionLabel, DirectionalLabel};
    use crate::layout::{Layout, LayoutCell, Position};
    use crate::tiles::TileGrid;

    fn toy_level(cells: &[(Position, DirectionalLabel, char)]) -> Level {
        let mut layout = Layout { cells: BTreeMap::new(), step_count: 0 };
        let mut placements = BTreeMap::new();
        for &(pos, sides, fill) in cells {
            layout.cells.insert(pos, LayoutCell { position: pos, sides });
            placements.insert(
                pos,
                CellPlacement {
                    segment: AnnotatedSegment {
                        grid: TileGrid::filled(2, 3, fill),
                        label: sides,
                        game: GameId::Zelda,
                        provenance: Provenance::new("toy", 0, 0),
                    },
                    label: ConditionLabel::directional(sides),
                    model: "toy".into(),
                    seed: 0,
                },
            );
        }
        Level { layout, placements }
    }

    #[test]
    fn text_dimensions_single_cell() {
        let level = toy_level(&[((0, 0), DirectionalLabel::CLOSED, 'W')]);
        let text = render_text(&level, ' ');
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2 + 2); // 2 tile rows + 2 borders
        assert!(lines.iter().all(|l| l.chars().count() == 3 + 2));
    }

    #[test]
    fn text_golden_two_cells() {
        let open_r = DirectionalLabel::new(false, false, false, true);
        let open_l = DirectionalLabel::new(false, false, true, false);
        let level = toy_level(&[((0, 0), open_r, 'A'), ((0, 1), open_l, 'B')]);
        let expected = "\
+---+---+
|AAA|BBB|
|AAA|BBB|
+---+---+
";
        assert_eq!(render_text(&level, ' '), expected);
    }

    #[test]
    fn text_absent_cells_use_background() {
        let level = toy_level(&[
            ((0, 0), DirectionalLabel::new(false, true, false, false), 'A'),
            ((1, 0), DirectionalLabel::new(true, false, false, true), 'B'),
            ((1, 1), DirectionalLabel::new(false, false, true, false), 'C'),
        ]);
        let text = render_text(&level, '.');
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2 * 3 + 1);
        assert!(lines[1].ends_with("....")); // top-right position is empty
        assert!(lines[4].contains("|B") && lines[4].contains("C"));
    }

    #[test]
    fn image_dimensions_match_formula() {
        let level = toy_level(&[
            ((0, 0), DirectionalLabel::new(false, false, false, true), 'A'),
            ((0, 1), DirectionalLabel::new(false, false, true, false), 'B'),
        ]);
        let img = render_image(&level, &test_tileset(), 4).unwrap();
        let (w, h) = image_dimensions(1, 2, 2, 3, 4);
        assert_eq!((img.width(), img.height()), (w, h));
        assert_eq!((w, h), (2 * (3 * 4 + 1) + 1, 2 * 4 + 1 + 1));
    }

    fn test_tileset() -> Tileset {
        Tileset::parse("[colors]\nA = \"#102030\"\nB = \"#405060\"\nC = \"#708090\"\n").unwrap()
    }

    #[test]
    fn red_marks_iff_side_open() {
        for (sides, fill) in [
            (DirectionalLabel::new(true, false, false, true), 'A'),
            (DirectionalLabel::CLOSED, 'B'),
        ] {
            let level = toy_level(&[((0, 0), sides, fill)]);
            let img = render_image(&level, &test_tileset(), 4).unwrap();
            let top_mid = *img.get_pixel(img.width() / 2, 0);
            let bottom_mid = *img.get_pixel(img.width() / 2, img.height() - 1);
            let left_mid = *img.get_pixel(0, img.height() / 2);
            let right_mid = *img.get_pixel(img.width() - 1, img.height() / 2);
            assert_eq!(top_mid == RED, sides.up);
            assert_eq!(bottom_mid == RED, sides.down);
            assert_eq!(left_mid == RED, sides.left);
            assert_eq!(right_mid == RED, sides.right);
            // closed sides stay white border
            for (px, open) in [
                (top_mid, sides.up),
                (bottom_mid, sides.down),
                (left_mid, sides.left),
                (right_mid, sides.right),
            ] {
                if !open {
                    assert_eq!(px, WHITE);
                }
            }
        }
    }

    #[test]
    fn tile_interior_uses_tileset_color() {
        let level = toy_level(&[((0, 0), DirectionalLabel::CLOSED, 'A')]);
        let img = render_image(&level, &test_tileset(), 4).unwrap();
        assert_eq!(*img.get_pixel(3, 3), Rgb([0x10, 0x20, 0x30]));
    }

    #[test]
    fn missing_tile_is_named() {
        let level = toy_level(&[((0, 0), DirectionalLabel::CLOSED, 'Z')]);
        match render_image(&level, &test_tileset(), 4) {
            Err(Error::MissingTile('Z')) => {}
            other => panic!("expected MissingTile('Z'), got {other:?}"),
        }
    }

    #[test]
    fn builtin_tileset_covers_all_game_vocabularies() {
        let ts = Tileset::builtin();
        for game in [GameId::Zelda, GameId::Metroid, GameId::MegaMan, GameId::LodeRunner] {
            let cfg = crate::config::GameConfig::builtin(game);
            for &tile in &cfg.vocabulary {
                assert!(ts.colors.contains_key(&tile), "{game:?} tile {tile:?} has no color");
            }
        }
    }

    #[test]
    fn tileset_parse_rejects_bad_input() {
        assert!(Tileset::parse("[colors]\nAB = \"#102030\"\n").is_err());
        assert!(Tileset::parse("[colors]\nA = \"#10203\"\n").is_err());
        assert!(Tileset::parse("[colors]\nA = \"102030\"\n").is_err());
        assert!(Tileset::parse("not toml at all [").is_err());
    }
}
