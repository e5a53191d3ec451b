//! Segment extraction, labeling, augmentation and corpus persistence.
//!
//! Levels come in as VGLC-style text (one character per tile). Each game
//! has its own segment convention: Zelda dungeons split into discrete
//! 11x16 rooms labeled from door tiles, Metroid and Mega Man levels split
//! into screen-aligned 15x16 segments labeled by an opening heuristic
//! (overridable with a sidecar file), and Lode Runner levels split into
//! four 11x16 quadrants with fixed positional labels.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::config::{GameConfig, GameId};
use crate::error::{Error, Result};
use crate::label::DirectionalLabel;
use crate::tiles::TileGrid;

/// Where a segment came from: source level, tile offset, flip variant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Provenance {
    pub level: String,
    pub row: usize,
    pub col: usize,
    /// `None` for as-extracted, `Some('h')`/`Some('v')` for flips.
    pub variant: Option<char>,
}

impl Provenance {
    pub fn new(level: impl Into<String>, row: usize, col: usize) -> Provenance {
        Provenance { level: level.into(), row, col, variant: None }
    }

    fn with_variant(&self, variant: char) -> Provenance {
        Provenance { variant: Some(variant), ..self.clone() }
    }

    pub fn key(&self) -> String {
        format!(
            "{} {} {} {}",
            self.level,
            self.row,
            self.col,
            self.variant.map(String::from).unwrap_or_else(|| "-".into())
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSegment {
    pub grid: TileGrid,
    pub label: DirectionalLabel,
    pub game: GameId,
    pub provenance: Provenance,
}

/// Extraction output before labels are final (Metroid/Mega Man labels are
/// assigned later from the heuristic plus any sidecar overrides).
#[derive(Debug, Clone)]
pub struct RawSegment {
    pub grid: TileGrid,
    pub provenance: Provenance,
    pub label: Option<DirectionalLabel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub games: Vec<GameId>,
    pub segment_rows: usize,
    pub segment_cols: usize,
    /// Union of tile characters over all segments, in the order the
    /// characters appear in the game config vocabularies.
    pub vocabulary: Vec<char>,
    pub segments: Vec<AnnotatedSegment>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Directional labels present in the corpus (the IN labels).
    pub fn in_labels(&self) -> BTreeSet<DirectionalLabel> {
        self.segments.iter().map(|s| s.label).collect()
    }
}

/// Split a level into non-overlapping segments per the game convention.
pub fn extract_segments(level: &TileGrid, config: &GameConfig) -> Result<Vec<RawSegment>> {
    extract_segments_named(level, config, "level")
}

pub fn extract_segments_named(
    level: &TileGrid,
    config: &GameConfig,
    level_id: &str,
) -> Result<Vec<RawSegment>> {
    let (sr, sc) = (config.segment_rows, config.segment_cols);
    if config.game == GameId::LodeRunner && (level.rows() != 2 * sr || level.cols() != 2 * sc) {
        return Err(Error::Extraction(format!(
            "Lode Runner levels must be {}x{}, got {}x{}",
            2 * sr,
            2 * sc,
            level.rows(),
            level.cols()
        )));
    }
    if level.rows() % sr != 0 || level.cols() % sc != 0 {
        return Err(Error::Extraction(format!(
            "level {}x{} is not a multiple of the {}x{} segment size",
            level.rows(),
            level.cols(),
            sr,
            sc
        )));
    }
    let mut out = Vec::new();
    for br in 0..level.rows() / sr {
        for bc in 0..level.cols() / sc {
            let grid = level.window(br * sr, bc * sc, sr, sc)?;
            let provenance = Provenance::new(level_id, br * sr, bc * sc);
            match config.game {
                GameId::Zelda => {
                    // Dungeon maps pad unused room slots with void tiles.
                    if grid.all_equal_to(config.filler) {
                        continue;
                    }
                    let label = derive_zelda_label(&grid, config);
                    out.push(RawSegment { grid, provenance, label: Some(label) });
                }
                GameId::Metroid | GameId::MegaMan => {
                    if grid.all_equal_to(config.filler) {
                        continue;
                    }
                    out.push(RawSegment { grid, provenance, label: None });
                }
                GameId::LodeRunner => {
                    let label = loderunner_quadrant_label(br, bc);
                    out.push(RawSegment { grid, provenance, label: Some(label) });
                }
            }
        }
    }
    Ok(out)
}

/// Quadrant labels point at the neighboring quadrants: the top-left
/// quadrant has segments below and to its right, so it gets Down+Right.
fn loderunner_quadrant_label(block_row: usize, block_col: usize) -> DirectionalLabel {
    DirectionalLabel {
        up: block_row == 1,
        down: block_row == 0,
        left: block_col == 1,
        right: block_col == 0,
    }
}

/// A side is open iff a door/stair tile occurs in that side's 2-tile
/// perimeter band.
pub fn derive_zelda_label(room: &TileGrid, config: &GameConfig) -> DirectionalLabel {
    let is_door = |c: char| config.doors.contains(&c);
    let band = 2.min(room.rows()).min(room.cols());
    let mut label = DirectionalLabel::CLOSED;
    for r in 0..room.rows() {
        for c in 0..room.cols() {
            if !is_door(room.get(r, c)) {
                continue;
            }
            if r < band {
                label.up = true;
            }
            if r >= room.rows() - band {
                label.down = true;
            }
            if c < band {
                label.left = true;
            }
            if c >= room.cols() - band {
                label.right = true;
            }
        }
    }
    label
}

/// Opening heuristic for platformer segments: a side is open iff its border
/// row/column contains a door tile or a contiguous run of passable tiles at
/// least `open_run_threshold` long.
pub fn auto_label_openings(segment: &TileGrid, config: &GameConfig) -> DirectionalLabel {
    let top: Vec<char> = (0..segment.cols()).map(|c| segment.get(0, c)).collect();
    let bottom: Vec<char> = (0..segment.cols()).map(|c| segment.get(segment.rows() - 1, c)).collect();
    let left: Vec<char> = (0..segment.rows()).map(|r| segment.get(r, 0)).collect();
    let right: Vec<char> = (0..segment.rows()).map(|r| segment.get(r, segment.cols() - 1)).collect();
    DirectionalLabel {
        up: band_open(&top, config),
        down: band_open(&bottom, config),
        left: band_open(&left, config),
        right: band_open(&right, config),
    }
}

fn band_open(band: &[char], config: &GameConfig) -> bool {
    if band.iter().any(|c| config.doors.contains(c)) {
        return true;
    }
    let mut run = 0usize;
    for &c in band {
        if config.passable.contains(&c) {
            run += 1;
            if run >= config.open_run_threshold {
                return true;
            }
        } else {
            run = 0;
        }
    }
    false
}

/// Add horizontal and vertical flips of each room unless an identical grid
/// is already present. Labels flip with the grid.
pub fn augment_zelda_flips(rooms: &[AnnotatedSegment]) -> Vec<AnnotatedSegment> {
    let mut seen: HashSet<TileGrid> = rooms.iter().map(|r| r.grid.clone()).collect();
    let mut out: Vec<AnnotatedSegment> = rooms.to_vec();
    for room in rooms {
        let h = room.grid.flip_horizontal();
        if seen.insert(h.clone()) {
            out.push(AnnotatedSegment {
                grid: h,
                label: room.label.flip_horizontal(),
                game: room.game,
                provenance: room.provenance.with_variant('h'),
            });
        }
        let v = room.grid.flip_vertical();
        if seen.insert(v.clone()) {
            out.push(AnnotatedSegment {
                grid: v,
                label: room.label.flip_vertical(),
                game: room.game,
                provenance: room.provenance.with_variant('v'),
            });
        }
    }
    out
}

/// Pad an 11x16 room to 15x16 by duplicating the two outermost rows at the
/// top and at the bottom.
pub fn pad_zelda_room(room: &TileGrid) -> Result<TileGrid> {
    if room.rows() != 11 || room.cols() != 16 {
        return Err(Error::Dimension(format!(
            "pad_zelda_room expects 11x16, got {}x{}",
            room.rows(),
            room.cols()
        )));
    }
    let mut tiles: Vec<char> = Vec::with_capacity(15 * 16);
    for r in [0, 1] {
        tiles.extend_from_slice(room.row(r));
    }
    for r in 0..11 {
        tiles.extend_from_slice(room.row(r));
    }
    for r in [9, 10] {
        tiles.extend_from_slice(room.row(r));
    }
    TileGrid::new(15, 16, tiles)
}

/// Per-segment label overrides keyed by provenance (level id + offset).
#[derive(Debug, Clone, Default)]
pub struct Sidecar {
    entries: HashMap<(String, usize, usize), DirectionalLabel>,
}

impl Sidecar {
    pub fn parse(text: &str) -> Result<Sidecar> {
        let mut entries = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(Error::Annotation(format!(
                    "sidecar line {}: expected 'level row col u,d,l,r'",
                    lineno + 1
                )));
            }
            let row: usize = parts[1]
                .parse()
                .map_err(|_| Error::Annotation(format!("sidecar line {}: bad row", lineno + 1)))?;
            let col: usize = parts[2]
                .parse()
                .map_err(|_| Error::Annotation(format!("sidecar line {}: bad col", lineno + 1)))?;
            let label = DirectionalLabel::parse(parts[3])?;
            entries.insert((parts[0].to_string(), row, col), label);
        }
        Ok(Sidecar { entries })
    }

    pub fn from_file(path: &Path) -> Result<Sidecar> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Sidecar::parse(&text)
    }

    pub fn lookup(&self, p: &Provenance) -> Option<DirectionalLabel> {
        self.entries.get(&(p.level.clone(), p.row, p.col)).copied()
    }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Apply flip augmentation (Zelda only).
    pub augment: bool,
    pub sidecar: Option<Sidecar>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { augment: true, sidecar: None }
    }
}

/// Build an annotated corpus from parsed levels.
pub fn build_corpus(
    levels: &[(String, TileGrid)],
    config: &GameConfig,
    options: &IngestOptions,
) -> Result<Corpus> {
    let mut segments: Vec<AnnotatedSegment> = Vec::new();
    for (id, level) in levels {
        for raw in extract_segments_named(level, config, id)? {
            let label = match raw.label {
                Some(l) => l,
                None => auto_label_openings(&raw.grid, config),
            };
            let label = options
                .sidecar
                .as_ref()
                .and_then(|s| s.lookup(&raw.provenance))
                .unwrap_or(label);
            segments.push(AnnotatedSegment {
                grid: raw.grid,
                label,
                game: config.game,
                provenance: raw.provenance,
            });
        }
    }
    if config.game == GameId::Zelda && options.augment {
        segments = augment_zelda_flips(&segments);
    }
    let mut keys = HashSet::new();
    for s in &segments {
        if !keys.insert(s.provenance.clone()) {
            return Err(Error::Annotation(format!("duplicate provenance {}", s.provenance.key())));
        }
    }
    Ok(Corpus {
        games: vec![config.game],
        segment_rows: config.segment_rows,
        segment_cols: config.segment_cols,
        vocabulary: used_vocabulary(&segments, &config.vocabulary),
        segments,
    })
}

/// Union of characters present in the segments, ordered as in the config
/// vocabulary (followed by any stragglers in character order).
fn used_vocabulary(segments: &[AnnotatedSegment], order: &[char]) -> Vec<char> {
    let used: BTreeSet<char> = segments.iter().flat_map(|s| s.grid.tiles().iter().copied()).collect();
    let mut out: Vec<char> = order.iter().copied().filter(|c| used.contains(c)).collect();
    for c in used {
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

/// Read every `*.txt` level under `dir` (sorted by name, stem as level id)
/// and parse it against the game vocabulary.
pub fn load_levels_from_dir(dir: &Path, config: &GameConfig) -> Result<Vec<(String, TileGrid)>> {
    let mut paths: Vec<std::path::PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir.display().to_string(), e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "txt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Extraction(format!("no .txt levels in {}", dir.display())));
    }
    let mut levels = Vec::with_capacity(paths.len());
    for path in paths {
        let text =
            std::fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "level".into());
        let grid = crate::tiles::parse_level(&text, config)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        levels.push((id, grid));
    }
    Ok(levels)
}

const CORPUS_MAGIC: &str = "levelblend-corpus v1";

pub fn corpus_to_string(corpus: &Corpus) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{CORPUS_MAGIC}");
    let games: Vec<&str> = corpus.games.iter().map(|g| g.name()).collect();
    let _ = writeln!(s, "games: {}", games.join(","));
    let _ = writeln!(s, "vocab: {}", corpus.vocabulary.iter().collect::<String>());
    let _ = writeln!(s, "rows: {}", corpus.segment_rows);
    let _ = writeln!(s, "cols: {}", corpus.segment_cols);
    let _ = writeln!(s, "count: {}", corpus.segments.len());
    for seg in &corpus.segments {
        let _ = writeln!(s, "\n@ {} {} {}", seg.provenance.key(), seg.game.name(), seg.label);
        s.push_str(&seg.grid.to_text());
    }
    s
}

pub fn corpus_from_str(text: &str) -> Result<Corpus> {
    let mut lines = text.lines().peekable();
    let magic = lines.next().ok_or_else(|| Error::Format("empty corpus file".into()))?;
    if magic.trim_end() != CORPUS_MAGIC {
        return Err(Error::Format(format!("bad corpus header {magic:?}")));
    }
    let mut games: Option<Vec<GameId>> = None;
    let mut vocab: Option<Vec<char>> = None;
    let mut rows: Option<usize> = None;
    let mut cols: Option<usize> = None;
    let mut count: Option<usize> = None;
    while let Some(&line) = lines.peek() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('@') {
            break;
        }
        lines.next();
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| Error::Format(format!("bad corpus header line {line:?}")))?;
        let value = value.trim();
        match key {
            "games" => {
                games = Some(
                    value
                        .split(',')
                        .map(|g| g.trim().parse())
                        .collect::<Result<Vec<GameId>>>()?,
                )
            }
            "vocab" => vocab = Some(value.chars().collect()),
            "rows" => rows = Some(parse_usize(value, "rows")?),
            "cols" => cols = Some(parse_usize(value, "cols")?),
            "count" => count = Some(parse_usize(value, "count")?),
            other => return Err(Error::Format(format!("unknown corpus header key {other:?}"))),
        }
    }
    let games = games.ok_or_else(|| Error::Format("corpus missing games header".into()))?;
    let vocab = vocab.ok_or_else(|| Error::Format("corpus missing vocab header".into()))?;
    let rows = rows.ok_or_else(|| Error::Format("corpus missing rows header".into()))?;
    let cols = cols.ok_or_else(|| Error::Format("corpus missing cols header".into()))?;
    let count = count.ok_or_else(|| Error::Format("corpus missing count header".into()))?;
    if rows == 0 || cols == 0 {
        return Err(Error::Format("corpus segment size must be positive".into()));
    }
    let vocab_set: HashSet<char> = vocab.iter().copied().collect();

    let mut segments = Vec::with_capacity(count);
    let mut keys = HashSet::new();
    while let Some(line) = lines.next() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let rest = line
            .strip_prefix("@ ")
            .ok_or_else(|| Error::Format(format!("expected segment record, got {line:?}")))?;
        let parts: Vec<&str> = rest.split_whitespace().collect();
        if parts.len() != 6 {
            return Err(Error::Annotation(format!("bad segment record {rest:?}")));
        }
        let provenance = Provenance {
            level: parts[0].to_string(),
            row: parse_usize(parts[1], "segment row")?,
            col: parse_usize(parts[2], "segment col")?,
            variant: match parts[3] {
                "-" => None,
                "h" => Some('h'),
                "v" => Some('v'),
                other => return Err(Error::Annotation(format!("bad variant {other:?}"))),
            },
        };
        let game: GameId = parts[4].parse()?;
        let label = DirectionalLabel::parse(parts[5])?;
        let mut tiles = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let row_line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("segment {} truncated", provenance.key())))?;
            let chars: Vec<char> = row_line.trim_end_matches('\n').chars().collect();
            if chars.len() != cols {
                return Err(Error::Format(format!(
                    "segment {} row {r}: expected {cols} tiles, got {}",
                    provenance.key(),
                    chars.len()
                )));
            }
            for &c in &chars {
                if !vocab_set.contains(&c) {
                    return Err(Error::Format(format!(
                        "segment {} uses {c:?} outside the corpus vocabulary",
                        provenance.key()
                    )));
                }
            }
            tiles.extend(chars);
        }
        if !keys.insert(provenance.clone()) {
            return Err(Error::Annotation(format!("duplicate provenance {}", provenance.key())));
        }
        segments.push(AnnotatedSegment { grid: TileGrid::new(rows, cols, tiles)?, label, game, provenance });
    }
    if segments.len() != count {
        return Err(Error::Format(format!(
            "corpus declares {count} segments but contains {}",
            segments.len()
        )));
    }
    Ok(Corpus { games, segment_rows: rows, segment_cols: cols, vocabulary: vocab, segments })
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Format(format!("bad {what} value {s:?}")))
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    std::fs::write(path, corpus_to_string(corpus)).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    corpus_from_str(&text)
}

/// Pad every room of an 11x16 Zelda corpus to 15x16 for blending with the
/// platformer games.
pub fn pad_zelda_corpus(corpus: &Corpus) -> Result<Corpus> {
    let mut out = corpus.clone();
    out.segment_rows = 15;
    for seg in &mut out.segments {
        seg.grid = pad_zelda_room(&seg.grid)?;
    }
    Ok(out)
}
