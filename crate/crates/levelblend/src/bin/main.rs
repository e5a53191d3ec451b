use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use levelblend::assemble::{assemble, assemble_multi, load_level, save_level, GamePolicy};
use levelblend::corpus::{
    build_corpus, load_corpus, load_levels_from_dir, pad_zelda_corpus,
    save_corpus, Sidecar,
};
use levelblend::cvae::{
    blend_train, history_to_tsv, load_checkpoint, save_checkpoint, train, TrainConfig,
};
use levelblend::eval::{run_evaluation, EvalConfig, EvalMode};
use levelblend::label::parse_bit_list;
use levelblend::layout::generate_layout;
use levelblend::nn::{DecayMode, LrSchedule};
use levelblend::render::{render_text, save_image, Tileset};
use levelblend::rng::{derive_seed, rng_from};
use levelblend::{ConditionLabel, DirectionalLabel, GameConfig, GameId, IngestOptions};

/// Train, generate, assemble and evaluate tile-based game levels.
#[derive(Parser)]
#[command(name = "levelblend", version)]
struct Cli {
    /// Root random seed; every run with the same seed is bit-reproducible.
    #[arg(long, global = true, env = "LEVELBLEND_SEED")]
    seed: Option<u64>,

    /// Optional TOML file with default values (flags and env override it).
    #[arg(long, global = true, env = "LEVELBLEND_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(serde::Deserialize, Default)]
struct FileDefaults {
    seed: Option<u64>,
    mode: Option<String>,
    tileset: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw level files into an annotated segment corpus.
    Ingest(IngestArgs),
    /// Train a (possibly blended) conditional VAE on one or more corpora.
    Train(TrainArgs),
    /// Decode segments from a trained model under a conditioning label.
    Generate(GenerateArgs),
    /// Grow a random layout and fill it with generated segments.
    Assemble(AssembleArgs),
    /// Run the full evaluation protocols and write the report tables.
    Evaluate(EvaluateArgs),
    /// Render an assembled level as text or image.
    Render(RenderArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// zelda | metroid | megaman | loderunner
    #[arg(long)]
    game: GameId,
    /// Directory of .txt level files.
    #[arg(long)]
    input: PathBuf,
    /// Game configuration TOML overriding the built-in one.
    #[arg(long)]
    game_config: Option<PathBuf>,
    /// Skip flip augmentation (Zelda).
    #[arg(long)]
    no_augment: bool,
    /// Manual label overrides: lines of "level row col u,d,l,r".
    #[arg(long)]
    sidecar: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus file; pass several to train a blend model.
    #[arg(long, required = true, num_args = 1..)]
    corpus: Vec<PathBuf>,
    #[arg(long, default_value_t = 8)]
    latent: usize,
    #[arg(long, default_value_t = 10_000)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    /// Hidden layer widths, encoder order.
    #[arg(long, value_delimiter = ',', default_values_t = [512, 256, 128])]
    hidden: Vec<usize>,
    /// Learning-rate decay: multiply by the factor or subtract it.
    #[arg(long, default_value = "factor")]
    decay_mode: String,
    /// Pad 11x16 Zelda rooms to 15x16 before blending.
    #[arg(long)]
    pad: bool,
    #[arg(long)]
    out: PathBuf,
    /// Optional training-log TSV.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Conditioning bits "u,d,l,r" plus one game bit per blended game.
    #[arg(long)]
    label: String,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Output directory; one text file per segment.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AssembleArgs {
    /// Model checkpoint; pass several for probabilistic turn-taking.
    #[arg(long, required = true, num_args = 1..)]
    model: Vec<PathBuf>,
    #[arg(long, default_value_t = 6)]
    steps_min: usize,
    #[arg(long, default_value_t = 12)]
    steps_max: usize,
    /// With several models: selection probability per model (sums to 1).
    #[arg(long, value_delimiter = ',')]
    probs: Vec<f64>,
    /// With one blend model: fixed game bits for every cell.
    #[arg(long)]
    game_bits: Option<String>,
    /// With one blend model: per-bit probability of setting each game bit.
    #[arg(long, value_delimiter = ',')]
    game_probs: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Also write a rendered PNG next to the level.
    #[arg(long)]
    png: Option<PathBuf>,
    #[arg(long)]
    tileset: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Corpus per game as "game=path", repeatable.
    #[arg(long, required = true, num_args = 1..)]
    corpus: Vec<String>,
    /// desk | full
    #[arg(long, env = "LEVELBLEND_MODE")]
    mode: Option<String>,
    /// Override the training epochs of the chosen mode.
    #[arg(long)]
    epochs: Option<usize>,
    /// Latent sizes to sweep; defaults to the mode's set.
    #[arg(long, value_delimiter = ',')]
    latents: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    level: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write text instead of PNG.
    #[arg(long)]
    text: bool,
    #[arg(long)]
    tileset: Option<PathBuf>,
    /// Pixels per tile in image output.
    #[arg(long, default_value_t = 8)]
    tile_px: u32,
}

fn load_defaults(path: &Option<PathBuf>) -> Result<FileDefaults> {
    match path {
        None => Ok(FileDefaults::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("read config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parse config {}", p.display()))
        }
    }
}

fn load_tileset(flag: &Option<PathBuf>, defaults: &FileDefaults) -> Result<Tileset> {
    match flag.as_ref().or(defaults.tileset.as_ref()) {
        Some(p) => Ok(Tileset::load(p)?),
        None => Ok(Tileset::builtin()),
    }
}

fn parse_label(s: &str) -> Result<ConditionLabel> {
    let bits = parse_bit_list(s)?;
    if bits.len() < 4 {
        bail!("label needs at least 4 bits (u,d,l,r), got {}", bits.len());
    }
    let directional = DirectionalLabel::from_bits([bits[0], bits[1], bits[2], bits[3]]);
    Ok(ConditionLabel::with_game_bits(directional, bits[4..].to_vec()))
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let defaults = load_defaults(&cli.config)?;
    let seed = cli.seed.or(defaults.seed).unwrap_or(0);
    match cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Train(args) => cmd_train(args, seed),
        Command::Generate(args) => cmd_generate(args, seed),
        Command::Assemble(args) => cmd_assemble(args, seed, &defaults),
        Command::Evaluate(args) => cmd_evaluate(args, seed, &defaults),
        Command::Render(args) => cmd_render(args, &defaults),
    }
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let config = match &args.game_config {
        Some(p) => GameConfig::from_file(p)?,
        None => GameConfig::builtin(args.game),
    };
    if config.game != args.game {
        bail!("config file is for {}, not {}", config.game, args.game);
    }
    let levels = load_levels_from_dir(&args.input, &config)?;
    let sidecar = args.sidecar.as_deref().map(Sidecar::from_file).transpose()?;
    let options = IngestOptions { augment: !args.no_augment, sidecar };
    let corpus = build_corpus(&levels, &config, &options)?;
    save_corpus(&corpus, &args.out)?;
    println!("{} segments", corpus.len());
    Ok(())
}

fn cmd_train(args: TrainArgs, seed: u64) -> Result<()> {
    let decay = match args.decay_mode.as_str() {
        "factor" => DecayMode::Factor,
        "decrement" => DecayMode::Decrement,
        other => bail!("unknown decay mode {other:?}, expected factor|decrement"),
    };
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        latent_dim: args.latent,
        hidden: args.hidden.clone(),
        schedule: LrSchedule { mode: decay, ..LrSchedule::default() },
        seed,
    };
    let mut corpora = Vec::new();
    for path in &args.corpus {
        let mut corpus = load_corpus(path)?;
        if args.pad && corpus.segment_rows == 11 && corpus.games == [GameId::Zelda] {
            corpus = pad_zelda_corpus(&corpus)?;
        }
        corpora.push(corpus);
    }
    let (model, history) = if corpora.len() == 1 {
        train(&corpora[0], &cfg)?
    } else {
        blend_train(&corpora, &cfg)?
    };
    save_checkpoint(&model, &args.out)?;
    if let Some(log) = &args.log {
        std::fs::write(log, history_to_tsv(&history))
            .with_context(|| format!("write {}", log.display()))?;
    }
    if let Some(last) = history.last() {
        println!("trained {} epochs, final recon {:.4}, kl {:.4}", history.len(), last.recon, last.kl);
    } else {
        println!("trained 0 epochs");
    }
    Ok(())
}

fn cmd_generate(args: GenerateArgs, seed: u64) -> Result<()> {
    let model = load_checkpoint(&args.model)?;
    let label = parse_label(&args.label)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("create {}", args.out.display()))?;
    let mut rng = rng_from(seed, "generate", 0);
    for i in 0..args.count {
        let seg = model.generate(&label, &mut rng)?;
        let path = args.out.join(format!("seg_{i:03}.txt"));
        std::fs::write(&path, seg.grid.to_text())
            .with_context(|| format!("write {}", path.display()))?;
    }
    println!("{} segments written to {}", args.count, args.out.display());
    Ok(())
}

fn cmd_assemble(args: AssembleArgs, seed: u64, defaults: &FileDefaults) -> Result<()> {
    if args.steps_min == 0 || args.steps_min > args.steps_max {
        bail!("invalid step range {}..{}", args.steps_min, args.steps_max);
    }
    let models: Vec<_> = args
        .model
        .iter()
        .map(|p| load_checkpoint(p))
        .collect::<levelblend::Result<_>>()?;
    let mut layout_rng = rng_from(seed, "layout", 0);
    let layout = generate_layout(args.steps_min, args.steps_max, &mut layout_rng)?;
    let cell_seed = derive_seed(seed, "assemble", 0);

    let level = if models.len() == 1 {
        let model = &models[0];
        let policy = match (&args.game_bits, args.game_probs.is_empty()) {
            (Some(bits), true) => GamePolicy::Fixed(parse_bit_list(bits)?),
            (None, false) => GamePolicy::Random(args.game_probs.clone()),
            (None, true) => {
                if model.label_width == 4 {
                    GamePolicy::None
                } else {
                    bail!("blend model needs --game-bits or --game-probs");
                }
            }
            (Some(_), false) => bail!("--game-bits and --game-probs are mutually exclusive"),
        };
        assemble(&layout, model, &policy, cell_seed)?
    } else {
        if args.probs.len() != models.len() {
            bail!("--probs must list one probability per model");
        }
        let refs: Vec<&levelblend::ModelParams> = models.iter().collect();
        assemble_multi(&layout, &refs, &args.probs, cell_seed)?
    };

    save_level(&level, &args.out)?;
    if let Some(png) = &args.png {
        let tileset = load_tileset(&args.tileset, defaults)?;
        save_image(&level, &tileset, 8, png)?;
    }
    println!("{} cells written to {}", level.placements.len(), args.out.display());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs, seed: u64, defaults: &FileDefaults) -> Result<()> {
    let mode: EvalMode = args
        .mode
        .as_deref()
        .or(defaults.mode.as_deref())
        .unwrap_or("desk")
        .parse()?;
    let mut cfg = EvalConfig::new(mode, seed);
    if let Some(epochs) = args.epochs {
        cfg.epochs = epochs;
    }
    if !args.latents.is_empty() {
        cfg.latent_sizes = args.latents.clone();
    }
    let mut corpora: BTreeMap<GameId, levelblend::Corpus> = BTreeMap::new();
    for spec in &args.corpus {
        let (game, path) = spec
            .split_once('=')
            .with_context(|| format!("corpus spec {spec:?} is not game=path"))?;
        let game: GameId = game.parse()?;
        if corpora.insert(game, load_corpus(Path::new(path))?).is_some() {
            bail!("duplicate corpus for {game}");
        }
    }
    let pairs: Vec<(GameId, levelblend::Corpus)> = corpora.into_iter().collect();
    let report = run_evaluation(&pairs, &cfg)?;
    report.write_all(&args.out)?;
    println!("report written to {}", args.out.display());
    Ok(())
}

fn cmd_render(args: RenderArgs, defaults: &FileDefaults) -> Result<()> {
    let level = load_level(&args.level)?;
    if args.text {
        std::fs::write(&args.out, render_text(&level, ' '))
            .with_context(|| format!("write {}", args.out.display()))?;
    } else {
        let tileset = load_tileset(&args.tileset, defaults)?;
        save_image(&level, &tileset, args.tile_px, &args.out)?;
    }
    println!("rendered {}", args.out.display());
    Ok(())
}
