//! Experimental protocols: directional-label accuracy, blend-label
//! accuracy, density/symmetry comparison with significance flags, novelty,
//! and E-distance series, plus delimited-text report emission.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array1;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::config::{GameConfig, GameId};
use crate::corpus::{derive_zelda_label, pad_zelda_corpus, Corpus};
use crate::cvae::{blend_train, train, ModelParams, TrainConfig};
use crate::error::{Error, Result};
use crate::forest::{
    match_labels, segment_features, train_forest, Forest, MatchKind,
};
use crate::label::{ConditionLabel, DirectionalLabel};
use crate::metrics::{self, MetricPoint};
use crate::rng::{derive_seed, rng_from};
use crate::tiles::TileGrid;

/// How a generated segment's directional label is judged.
pub enum Judge<'a> {
    /// Door-tile positions decide directly (Zelda).
    DoorRule(&'a GameConfig),
    /// The border-opening heuristic that labeled the corpus decides
    /// (door tile or passable run on a side). Ground truth by construction
    /// for corpora labeled without sidecar overrides.
    OpeningRule(&'a GameConfig),
    /// A random forest trained on the game's corpus decides.
    Forest { forest: &'a Forest, classes: &'a [DirectionalLabel], vocabulary: &'a [char] },
}

impl Judge<'_> {
    pub fn predict(&self, grid: &TileGrid) -> DirectionalLabel {
        match self {
            Judge::DoorRule(cfg) => derive_zelda_label(grid, cfg),
            Judge::OpeningRule(cfg) => crate::corpus::auto_label_openings(grid, cfg),
            Judge::Forest { forest, classes, vocabulary } => {
                classes[forest.predict(&segment_features(grid, vocabulary))]
            }
        }
    }
}

fn sample_latent<R: Rng>(dim: usize, rng: &mut R) -> Array1<f64> {
    Array1::from_shape_fn(dim, |_| rng.sample::<f64, _>(StandardNormal))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalRow {
    pub latent_dim: usize,
    pub exact_in: f64,
    pub admissible_in: f64,
    /// Absent when every directional label occurs in training.
    pub exact_out: Option<f64>,
    pub admissible_out: Option<f64>,
}

/// §IV-A protocol: sample `n_latents` latent vectors; decode each under all
/// 16 directional labels; judge the result; aggregate exact/admissible
/// match percentages separately over IN and OUT conditioning labels.
pub fn directional_accuracy(
    model: &ModelParams,
    judge: &Judge,
    in_labels: &BTreeSet<DirectionalLabel>,
    n_latents: usize,
    seed: u64,
) -> Result<DirectionalRow> {
    if n_latents == 0 {
        return Err(Error::InvalidArgument("need at least one latent".into()));
    }
    if model.label_width != 4 {
        return Err(Error::InvalidArgument(
            "directional accuracy applies to single-game models".into(),
        ));
    }
    // counts per label index: (exact, admissible)
    let per_latent: Vec<[(u64, u64); 16]> = (0..n_latents)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from(seed, "dir-latent", i as u64);
            let z = sample_latent(model.latent_dim, &mut rng);
            let mut counts = [(0u64, 0u64); 16];
            for label in DirectionalLabel::all() {
                let seg = model
                    .generate_from(&z, &ConditionLabel::directional(label))
                    .expect("label width checked");
                let predicted = judge.predict(&seg.grid);
                match match_labels(predicted, label) {
                    MatchKind::Exact => counts[label.index()] = (1, 1),
                    MatchKind::Admissible => counts[label.index()] = (0, 1),
                    MatchKind::None => {}
                }
            }
            counts
        })
        .collect();

    let mut exact = [0u64; 16];
    let mut admissible = [0u64; 16];
    for counts in &per_latent {
        for (i, &(e, a)) in counts.iter().enumerate() {
            exact[i] += e;
            admissible[i] += a;
        }
    }

    let pct = |labels: &[usize], counts: &[u64; 16]| -> Option<f64> {
        if labels.is_empty() {
            return None;
        }
        let hits: u64 = labels.iter().map(|&i| counts[i]).sum();
        Some(100.0 * hits as f64 / (labels.len() * n_latents) as f64)
    };
    let in_idx: Vec<usize> = in_labels.iter().map(|l| l.index()).collect();
    let out_idx: Vec<usize> = (0..16).filter(|i| !in_idx.contains(i)).collect();

    Ok(DirectionalRow {
        latent_dim: model.latent_dim,
        exact_in: pct(&in_idx, &exact).unwrap_or(0.0),
        admissible_in: pct(&in_idx, &admissible).unwrap_or(0.0),
        exact_out: pct(&out_idx, &exact),
        admissible_out: pct(&out_idx, &admissible),
    })
}

/// Forest that recognizes which game a segment comes from. Classes follow
/// the corpus order handed in (the blend model's game order).
pub fn train_game_forest(
    corpora: &[&Corpus],
    vocabulary: &[char],
    n_trees: usize,
    seed: u64,
) -> Result<Forest> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (game_idx, corpus) in corpora.iter().enumerate() {
        for seg in &corpus.segments {
            features.push(segment_features(&seg.grid, vocabulary));
            labels.push(game_idx);
        }
    }
    train_forest(&features, &labels, corpora.len(), n_trees, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlendRow {
    pub game_bits: Vec<u8>,
    /// Percentage of generated segments the game forest assigns to each of
    /// the model's games, in model game order. Sums to 100.
    pub percentages: Vec<f64>,
}

/// §IV-B protocol: for every game-bit combination, decode `n_latents`
/// latents under all 16 directional labels and tally which game the forest
/// predicts.
pub fn blend_accuracy(
    model: &ModelParams,
    game_forest: &Forest,
    n_latents: usize,
    seed: u64,
) -> Result<Vec<BlendRow>> {
    let n_games = model.label_width.checked_sub(4).filter(|&n| n >= 2).ok_or_else(|| {
        Error::InvalidArgument("blend accuracy needs a model with game bits".into())
    })?;
    if game_forest.n_classes != n_games {
        return Err(Error::InvalidArgument(format!(
            "game forest has {} classes, model blends {n_games} games",
            game_forest.n_classes
        )));
    }
    let mut rows = Vec::new();
    for combo in 0..1u32 << n_games {
        let bits: Vec<u8> = (0..n_games).map(|b| ((combo >> b) & 1) as u8).collect();
        let tallies: Vec<Vec<u64>> = (0..n_latents)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng_from(seed, "blend-latent", derive_seed(combo as u64, "combo", i as u64));
                let z = sample_latent(model.latent_dim, &mut rng);
                let mut tally = vec![0u64; n_games];
                for label in DirectionalLabel::all() {
                    let cl = ConditionLabel::with_game_bits(label, bits.clone());
                    let seg = model.generate_from(&z, &cl).expect("label width checked");
                    let game = game_forest.predict(&segment_features(&seg.grid, &model.vocabulary));
                    tally[game] += 1;
                }
                tally
            })
            .collect();
        let mut totals = vec![0u64; n_games];
        for t in &tallies {
            for (acc, v) in totals.iter_mut().zip(t) {
                *acc += v;
            }
        }
        let denom = (16 * n_latents) as f64;
        rows.push(BlendRow {
            game_bits: bits,
            percentages: totals.iter().map(|&t| 100.0 * t as f64 / denom).collect(),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensitySymmetryRow {
    pub latent_dim: usize,
    pub density_mean: f64,
    pub density_std: f64,
    pub density_p: f64,
    pub symmetry_mean: f64,
    pub symmetry_std: f64,
    pub symmetry_p: f64,
}

impl DensitySymmetryRow {
    pub fn density_significant(&self) -> bool {
        self.density_p < 0.05
    }

    pub fn symmetry_significant(&self) -> bool {
        self.symmetry_p < 0.05
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// §IV-C protocol: sample as many latents as training segments; per latent,
/// average density/symmetry over segments decoded under each IN label;
/// rank-sum the per-latent means against the per-segment training values.
pub fn density_symmetry_study(
    model: &ModelParams,
    corpus: &Corpus,
    solid: &BTreeSet<char>,
    seed: u64,
) -> Result<DensitySymmetryRow> {
    let in_labels: Vec<DirectionalLabel> = corpus.in_labels().into_iter().collect();
    if in_labels.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let generated: Vec<(f64, f64)> = (0..corpus.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from(seed, "ds-latent", i as u64);
            let z = sample_latent(model.latent_dim, &mut rng);
            let mut d = 0.0;
            let mut s = 0.0;
            for &label in &in_labels {
                let seg = model
                    .generate_from(&z, &ConditionLabel::directional(label))
                    .expect("label width checked");
                d += metrics::density(&seg.grid, solid);
                s += metrics::symmetry(&seg.grid);
            }
            (d / in_labels.len() as f64, s / in_labels.len() as f64)
        })
        .collect();

    let gen_density: Vec<f64> = generated.iter().map(|&(d, _)| d).collect();
    let gen_symmetry: Vec<f64> = generated.iter().map(|&(_, s)| s).collect();
    let train_density: Vec<f64> =
        corpus.segments.iter().map(|seg| metrics::density(&seg.grid, solid)).collect();
    let train_symmetry: Vec<f64> =
        corpus.segments.iter().map(|seg| metrics::symmetry(&seg.grid)).collect();

    let (dm, ds) = mean_std(&gen_density);
    let (sm, ss) = mean_std(&gen_symmetry);
    Ok(DensitySymmetryRow {
        latent_dim: model.latent_dim,
        density_mean: dm,
        density_std: ds,
        density_p: metrics::rank_sum_test(&gen_density, &train_density).unwrap_or(1.0),
        symmetry_mean: sm,
        symmetry_std: ss,
        symmetry_p: metrics::rank_sum_test(&gen_symmetry, &train_symmetry).unwrap_or(1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoveltyRow {
    pub latent_dim: usize,
    /// Percentages of generated segments with no exact training duplicate.
    pub novelty_in: f64,
    pub novelty_out: Option<f64>,
    pub novelty_overall: f64,
}

/// §IV-C protocol: `n_latents` latents decoded under all 16 labels;
/// exact-duplicate-free share, split by IN/OUT conditioning label.
pub fn novelty_study(
    model: &ModelParams,
    corpus: &Corpus,
    n_latents: usize,
    seed: u64,
) -> Result<NoveltyRow> {
    if n_latents == 0 {
        return Err(Error::InvalidArgument("need at least one latent".into()));
    }
    let in_labels = corpus.in_labels();
    let generated: Vec<Vec<(bool, TileGrid)>> = (0..n_latents)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from(seed, "novelty-latent", i as u64);
            let z = sample_latent(model.latent_dim, &mut rng);
            DirectionalLabel::all()
                .map(|label| {
                    let seg = model
                        .generate_from(&z, &ConditionLabel::directional(label))
                        .expect("label width checked");
                    (in_labels.contains(&label), seg.grid)
                })
                .collect()
        })
        .collect();

    let training: Vec<TileGrid> = corpus.segments.iter().map(|s| s.grid.clone()).collect();
    let mut in_grids = Vec::new();
    let mut out_grids = Vec::new();
    for batch in generated {
        for (is_in, grid) in batch {
            if is_in {
                in_grids.push(grid);
            } else {
                out_grids.push(grid);
            }
        }
    }
    let all: Vec<TileGrid> = in_grids.iter().chain(&out_grids).cloned().collect();
    Ok(NoveltyRow {
        latent_dim: model.latent_dim,
        novelty_in: 100.0 * metrics::novelty(&in_grids, &training),
        novelty_out: (!out_grids.is_empty())
            .then(|| 100.0 * metrics::novelty(&out_grids, &training)),
        novelty_overall: 100.0 * metrics::novelty(&all, &training),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EDistanceEntry {
    pub game_bits: Vec<u8>,
    pub corpus_game: GameId,
    pub value: f64,
}

/// §IV-C E-distance series: for every game-bit combination, generate
/// `n_latents` segments (directional label drawn uniformly from the union
/// of the corpora's IN labels) and measure the E-distance of their
/// (density, symmetry) points to each original corpus. Metric points on
/// both sides use the solid set of the corpus being compared against.
pub fn edistance_study(
    model: &ModelParams,
    corpora: &[&Corpus],
    solids: &[&BTreeSet<char>],
    n_latents: usize,
    seed: u64,
) -> Result<Vec<EDistanceEntry>> {
    let n_games = model.label_width.checked_sub(4).filter(|&n| n >= 2).ok_or_else(|| {
        Error::InvalidArgument("e-distance study needs a blend model".into())
    })?;
    if corpora.len() != n_games || solids.len() != n_games {
        return Err(Error::InvalidArgument(
            "need one corpus and one solid set per blended game".into(),
        ));
    }
    let mut label_union: Vec<DirectionalLabel> = Vec::new();
    for c in corpora {
        for l in c.in_labels() {
            if !label_union.contains(&l) {
                label_union.push(l);
            }
        }
    }
    let mut entries = Vec::new();
    for combo in 0..1u32 << n_games {
        let bits: Vec<u8> = (0..n_games).map(|b| ((combo >> b) & 1) as u8).collect();
        let grids: Vec<TileGrid> = (0..n_latents)
            .into_par_iter()
            .map(|i| {
                let mut rng =
                    rng_from(seed, "edist-latent", derive_seed(combo as u64, "combo", i as u64));
                let z = sample_latent(model.latent_dim, &mut rng);
                let label = label_union[rng.gen_range(0..label_union.len())];
                model
                    .generate_from(&z, &ConditionLabel::with_game_bits(label, bits.clone()))
                    .expect("label width checked")
                    .grid
            })
            .collect();
        for ((corpus, solid), &game) in corpora.iter().zip(solids).zip(
            model.games.iter(),
        ) {
            let original: Vec<MetricPoint> =
                corpus.segments.iter().map(|s| MetricPoint::of(&s.grid, solid)).collect();
            let gen_points: Vec<MetricPoint> =
                grids.iter().map(|g| MetricPoint::of(g, solid)).collect();
            entries.push(EDistanceEntry {
                game_bits: bits.clone(),
                corpus_game: game,
                value: metrics::e_distance(&original, &gen_points)
                    .ok_or(Error::EmptyCorpus)?,
            });
        }
    }
    Ok(entries)
}

// ---------------------------------------------------------------------------
// end-to-end orchestration and report emission

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Minutes-scale: fewer epochs and latents, same protocols.
    Desk,
    /// Paper-scale counts.
    Full,
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<EvalMode> {
        match s {
            "desk" => Ok(EvalMode::Desk),
            "full" => Ok(EvalMode::Full),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}, expected desk|full"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub mode: EvalMode,
    pub latent_sizes: Vec<usize>,
    pub epochs: usize,
    pub n_latents_directional: usize,
    pub n_latents_blend: usize,
    pub n_latents_novelty: usize,
    pub n_trees: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl EvalConfig {
    pub fn new(mode: EvalMode, seed: u64) -> EvalConfig {
        match mode {
            EvalMode::Desk => EvalConfig {
                mode,
                latent_sizes: vec![8],
                epochs: 2000,
                n_latents_directional: 200,
                n_latents_blend: 50,
                n_latents_novelty: 200,
                n_trees: 100,
                hidden: vec![128, 96, 64],
                seed,
            },
            EvalMode::Full => EvalConfig {
                mode,
                latent_sizes: vec![4, 8, 16, 32],
                epochs: 10_000,
                n_latents_directional: 1000,
                n_latents_blend: 100,
                n_latents_novelty: 1000,
                n_trees: 100,
                hidden: vec![512, 256, 128],
                seed,
            },
        }
    }

    fn train_config(&self, latent_dim: usize, tag: &str) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            latent_dim,
            hidden: self.hidden.clone(),
            seed: derive_seed(self.seed, tag, latent_dim as u64),
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// (game, row) per latent size.
    pub directional: Vec<(GameId, DirectionalRow)>,
    /// (blend games, latent size, rows) — two-game blends.
    pub blend2: Vec<(Vec<GameId>, usize, Vec<BlendRow>)>,
    /// Same for the three-game blend.
    pub blend3: Vec<(Vec<GameId>, usize, Vec<BlendRow>)>,
    pub density_symmetry: Vec<(GameId, DensitySymmetryRow)>,
    pub novelty: Vec<(GameId, NoveltyRow)>,
    /// (blend games, latent size, entries).
    pub edistance: Vec<(Vec<GameId>, usize, Vec<EDistanceEntry>)>,
}

fn blend_name(games: &[GameId]) -> String {
    games.iter().map(|g| g.name()).collect::<Vec<_>>().join("-")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into())
}

fn bits_string(bits: &[u8]) -> String {
    bits.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(",")
}

impl EvalReport {
    pub fn directional_tsv(&self) -> String {
        let mut s = String::from("game\tlatent\texact_in\tadmissible_in\texact_out\tadmissible_out\n");
        for (game, row) in &self.directional {
            let _ = writeln!(
                s,
                "{}\t{}\t{:.2}\t{:.2}\t{}\t{}",
                game.name(),
                row.latent_dim,
                row.exact_in,
                row.admissible_in,
                fmt_opt(row.exact_out),
                fmt_opt(row.admissible_out)
            );
        }
        s
    }

    fn blend_tsv(blends: &[(Vec<GameId>, usize, Vec<BlendRow>)]) -> String {
        let mut s = String::from("blend\tlatent\tgame_bits\tpredictions\n");
        for (games, latent, rows) in blends {
            for row in rows {
                let preds = games
                    .iter()
                    .zip(&row.percentages)
                    .map(|(g, p)| format!("{}={:.2}", g.name(), p))
                    .collect::<Vec<_>>()
                    .join("\t");
                let _ = writeln!(s, "{}\t{latent}\t{}\t{preds}", blend_name(games), bits_string(&row.game_bits));
            }
        }
        s
    }

    pub fn blend2_tsv(&self) -> String {
        Self::blend_tsv(&self.blend2)
    }

    pub fn blend3_tsv(&self) -> String {
        Self::blend_tsv(&self.blend3)
    }

    pub fn density_symmetry_tsv(&self) -> String {
        let mut s = String::from(
            "game\tlatent\tdensity_mean\tdensity_std\tdensity_p\tdensity_sig\tsymmetry_mean\tsymmetry_std\tsymmetry_p\tsymmetry_sig\n",
        );
        for (game, row) in &self.density_symmetry {
            let _ = writeln!(
                s,
                "{}\t{}\t{:.3}\t{:.3}\t{:.4}\t{}\t{:.3}\t{:.3}\t{:.4}\t{}",
                game.name(),
                row.latent_dim,
                row.density_mean,
                row.density_std,
                row.density_p,
                row.density_significant() as u8,
                row.symmetry_mean,
                row.symmetry_std,
                row.symmetry_p,
                row.symmetry_significant() as u8
            );
        }
        s
    }

    pub fn novelty_tsv(&self) -> String {
        let mut s = String::from("game\tlatent\tnovelty_in\tnovelty_out\tnovelty_overall\n");
        for (game, row) in &self.novelty {
            let _ = writeln!(
                s,
                "{}\t{}\t{:.2}\t{}\t{:.2}",
                game.name(),
                row.latent_dim,
                row.novelty_in,
                fmt_opt(row.novelty_out),
                row.novelty_overall
            );
        }
        s
    }

    pub fn edistance_tsv(&self) -> String {
        let mut s = String::from("blend\tlatent\tgame_bits\tcorpus\tvalue\n");
        for (games, latent, entries) in &self.edistance {
            for e in entries {
                let _ = writeln!(
                    s,
                    "{}\t{latent}\t{}\t{}\t{:.5}",
                    blend_name(games),
                    bits_string(&e.game_bits),
                    e.corpus_game.name(),
                    e.value
                );
            }
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Directional label accuracy (percent):");
        s.push_str(&self.directional_tsv());
        let _ = writeln!(s, "\nTwo-game blend label accuracy (percent):");
        s.push_str(&self.blend2_tsv());
        let _ = writeln!(s, "\nThree-game blend label accuracy (percent):");
        s.push_str(&self.blend3_tsv());
        let _ = writeln!(s, "\nDensity and symmetry vs. training (rank-sum, sig at p<0.05):");
        s.push_str(&self.density_symmetry_tsv());
        let _ = writeln!(s, "\nNovelty (percent of generated segments unseen in training):");
        s.push_str(&self.novelty_tsv());
        let _ = writeln!(s, "\nE-distance of generated segment metrics to original corpora:");
        s.push_str(&self.edistance_tsv());
        s
    }

    pub fn write_all(&self, dir: &Path) -> Result<()> {
        let w = |name: &str, text: String| -> Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
        };
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        w("table1_directional.tsv", self.directional_tsv())?;
        w("table2_blend2.tsv", self.blend2_tsv())?;
        w("table3_blend3.tsv", self.blend3_tsv())?;
        w("table4_density_symmetry.tsv", self.density_symmetry_tsv())?;
        w("table5_novelty.tsv", self.novelty_tsv())?;
        w("edistance.tsv", self.edistance_tsv())?;
        w("summary.txt", self.summary())?;
        let plot = edistance_plot(&self.edistance);
        let path = dir.join("edistance.png");
        plot.save(&path).map_err(|e| Error::Format(format!("write {}: {e}", path.display())))?;
        Ok(())
    }
}

/// Bar chart of the E-distance entries: one bar per (blend, bits, corpus),
/// grouped by blend, bar height scaled to the series maximum.
pub fn edistance_plot(series: &[(Vec<GameId>, usize, Vec<EDistanceEntry>)]) -> image::RgbImage {
    use image::Rgb;
    let bars: Vec<f64> = series
        .iter()
        .flat_map(|(_, _, entries)| entries.iter().map(|e| e.value))
        .collect();
    let n = bars.len().max(1);
    let (bar_w, gap, h, margin) = (12u32, 4u32, 240u32, 20u32);
    let width = margin * 2 + n as u32 * (bar_w + gap);
    let height = h + margin * 2;
    let mut img = image::RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    let max = bars.iter().cloned().fold(0.0f64, f64::max).max(1e-12);
    let palette = [Rgb([66, 110, 180]), Rgb([190, 90, 60]), Rgb([80, 160, 90]), Rgb([150, 100, 170])];
    for (i, &v) in bars.iter().enumerate() {
        let bh = ((v / max) * h as f64).round() as u32;
        let x0 = margin + i as u32 * (bar_w + gap);
        let color = palette[i % palette.len()];
        for x in x0..x0 + bar_w {
            for y in (height - margin - bh)..(height - margin) {
                img.put_pixel(x, y, color);
            }
        }
    }
    // axis
    for x in margin - 1..width - margin {
        img.put_pixel(x, height - margin, Rgb([0, 0, 0]));
    }
    for y in margin..=height - margin {
        img.put_pixel(margin - 1, y, Rgb([0, 0, 0]));
    }
    img
}

/// The blend combinations evaluated when all four games are available:
/// every pair involving Zelda, the Metroid–Mega Man pair, and the
/// three-game blend.
pub fn standard_blends(available: &[GameId]) -> Vec<Vec<GameId>> {
    let pairs = [
        vec![GameId::Zelda, GameId::Metroid],
        vec![GameId::Zelda, GameId::MegaMan],
        vec![GameId::Zelda, GameId::LodeRunner],
        vec![GameId::Metroid, GameId::MegaMan],
        vec![GameId::Zelda, GameId::Metroid, GameId::MegaMan],
    ];
    pairs
        .into_iter()
        .filter(|blend| blend.iter().all(|g| available.contains(g)))
        .collect()
}

/// Corpora padded/aligned so they can be blended: Zelda rooms are padded
/// to 15x16 whenever any 15x16 game participates.
pub fn align_for_blend(corpora: &[&Corpus]) -> Result<Vec<Corpus>> {
    let needs_pad = corpora.iter().any(|c| c.segment_rows == 15)
        && corpora.iter().any(|c| c.segment_rows == 11);
    corpora
        .iter()
        .map(|c| {
            if needs_pad && c.segment_rows == 11 && c.games == [GameId::Zelda] {
                pad_zelda_corpus(c)
            } else {
                Ok((*c).clone())
            }
        })
        .collect()
}

/// Train every model the protocols need and run all five studies.
/// `corpora` supplies one single-game corpus per available game.
pub fn run_evaluation(
    corpora: &[(GameId, Corpus)],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let games: Vec<GameId> = corpora.iter().map(|(g, _)| *g).collect();
    let find = |g: GameId| -> &Corpus {
        &corpora.iter().find(|(game, _)| *game == g).expect("game filtered present").1
    };
    let mut report = EvalReport {
        directional: Vec::new(),
        blend2: Vec::new(),
        blend3: Vec::new(),
        density_symmetry: Vec::new(),
        novelty: Vec::new(),
        edistance: Vec::new(),
    };

    for &(game, ref corpus) in corpora {
        let config = GameConfig::builtin(game);
        let in_labels = corpus.in_labels();
        let forest_and_classes = if game == GameId::Zelda {
            None
        } else {
            Some(crate::forest::train_directional_forest(
                corpus,
                cfg.n_trees,
                derive_seed(cfg.seed, "judge-forest", game as u64),
            )?)
        };
        for &latent in &cfg.latent_sizes {
            let (model, _) = train(corpus, &cfg.train_config(latent, game.name()))?;
            let judge = match &forest_and_classes {
                None => Judge::DoorRule(&config),
                Some((forest, classes)) => {
                    Judge::Forest { forest, classes, vocabulary: &corpus.vocabulary }
                }
            };
            report.directional.push((
                game,
                directional_accuracy(
                    &model,
                    &judge,
                    &in_labels,
                    cfg.n_latents_directional,
                    derive_seed(cfg.seed, "eval-dir", latent as u64),
                )?,
            ));
            report.density_symmetry.push((
                game,
                density_symmetry_study(
                    &model,
                    corpus,
                    &config.solid,
                    derive_seed(cfg.seed, "eval-ds", latent as u64),
                )?,
            ));
            report.novelty.push((
                game,
                novelty_study(
                    &model,
                    corpus,
                    cfg.n_latents_novelty,
                    derive_seed(cfg.seed, "eval-novelty", latent as u64),
                )?,
            ));
        }
    }

    for blend in standard_blends(&games) {
        let raw: Vec<&Corpus> = blend.iter().map(|&g| find(g)).collect();
        let aligned = align_for_blend(&raw)?;
        let refs: Vec<&Corpus> = aligned.iter().collect();
        for &latent in &cfg.latent_sizes {
            let (model, _) =
                blend_train(&aligned, &cfg.train_config(latent, &blend_name(&blend)))?;
            let game_forest = train_game_forest(
                &refs,
                &model.vocabulary,
                cfg.n_trees,
                derive_seed(cfg.seed, "game-forest", latent as u64),
            )?;
            let rows = blend_accuracy(
                &model,
                &game_forest,
                cfg.n_latents_blend,
                derive_seed(cfg.seed, "eval-blend", latent as u64),
            )?;
            if blend.len() == 2 {
                report.blend2.push((blend.clone(), latent, rows));
            } else {
                report.blend3.push((blend.clone(), latent, rows));
            }
            let solids_owned: Vec<BTreeSet<char>> =
                blend.iter().map(|&g| GameConfig::builtin(g).solid.clone()).collect();
            let solids: Vec<&BTreeSet<char>> = solids_owned.iter().collect();
            report.edistance.push((
                blend.clone(),
                latent,
                edistance_study(
                    &model,
                    &refs,
                    &solids,
                    cfg.n_latents_blend.max(aligned.iter().map(|c| c.len()).max().unwrap_or(0)),
                    derive_seed(cfg.seed, "eval-edist", latent as u64),
                )?,
            ));
        }
    }
    Ok(report)
}
