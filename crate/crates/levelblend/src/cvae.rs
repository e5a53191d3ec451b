//! Conditional VAE assembly: label concatenation at the encoder and
//! decoder inputs, the training loop, conditional sampling, and the
//! checkpoint format.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::GameId;
use crate::corpus::{AnnotatedSegment, Corpus, Provenance};
use crate::error::{Error, Result};
use crate::label::ConditionLabel;
use crate::nn::{
    kl_standard_normal, softmax, AdamState, DenseNet, GaussianParams, Grads, LrSchedule,
};
use crate::rng::rng_from;
use crate::tiles::TileGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub encoder: DenseNet,
    pub decoder: DenseNet,
    pub latent_dim: usize,
    pub segment_rows: usize,
    pub segment_cols: usize,
    pub vocabulary: Vec<char>,
    pub label_width: usize,
    /// Game-bit order for blend models; single entry for plain models.
    pub games: Vec<GameId>,
    pub seed: u64,
    pub hidden: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub schedule: LrSchedule,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10_000,
            batch_size: 64,
            latent_dim: 8,
            hidden: vec![512, 256, 128],
            schedule: LrSchedule::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub recon: f64,
    pub kl: f64,
    pub lr: f64,
}

impl ModelParams {
    pub fn cells(&self) -> usize {
        self.segment_rows * self.segment_cols
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    fn tile_index(&self, tile: char) -> Result<usize> {
        self.vocabulary
            .iter()
            .position(|&c| c == tile)
            .ok_or_else(|| Error::Shape(format!("tile {tile:?} not in model vocabulary")))
    }

    fn check_label(&self, label: &ConditionLabel) -> Result<()> {
        if label.width() != self.label_width {
            return Err(Error::Shape(format!(
                "label width {} does not match model label width {}",
                label.width(),
                self.label_width
            )));
        }
        Ok(())
    }

    pub fn one_hot(&self, grid: &TileGrid) -> Result<Array1<f64>> {
        if grid.rows() != self.segment_rows || grid.cols() != self.segment_cols {
            return Err(Error::Shape(format!(
                "segment {}x{} does not match model {}x{}",
                grid.rows(),
                grid.cols(),
                self.segment_rows,
                self.segment_cols
            )));
        }
        let v = self.vocab_size();
        let mut x = Array1::zeros(self.cells() * v);
        for (i, &tile) in grid.tiles().iter().enumerate() {
            x[i * v + self.tile_index(tile)?] = 1.0;
        }
        Ok(x)
    }

    pub fn encode(&self, segment: &TileGrid, label: &ConditionLabel) -> Result<GaussianParams> {
        self.check_label(label)?;
        let x = self.one_hot(segment)?;
        let mut input = Array1::zeros(x.len() + self.label_width);
        input.slice_mut(s![..x.len()]).assign(&x);
        for (i, v) in label.to_vec().into_iter().enumerate() {
            input[x.len() + i] = v;
        }
        let (out, _) = self.encoder.forward(input.view())?;
        Ok(GaussianParams {
            mu: out.slice(s![..self.latent_dim]).to_owned(),
            logvar: out.slice(s![self.latent_dim..]).to_owned(),
        })
    }

    /// Per-cell softmax distributions over the vocabulary, [cells x vocab].
    pub fn decode(&self, z: &Array1<f64>, label: &ConditionLabel) -> Result<Array2<f64>> {
        self.check_label(label)?;
        if z.len() != self.latent_dim {
            return Err(Error::Shape(format!(
                "latent length {} does not match latent_dim {}",
                z.len(),
                self.latent_dim
            )));
        }
        let mut input = Array1::zeros(self.latent_dim + self.label_width);
        input.slice_mut(s![..self.latent_dim]).assign(z);
        for (i, v) in label.to_vec().into_iter().enumerate() {
            input[self.latent_dim + i] = v;
        }
        let (logits, _) = self.decoder.forward(input.view())?;
        let v = self.vocab_size();
        let mut probs = Array2::zeros((self.cells(), v));
        for cell in 0..self.cells() {
            let p = softmax(logits.slice(s![cell * v..(cell + 1) * v]));
            probs.row_mut(cell).assign(&p);
        }
        Ok(probs)
    }

    /// Argmax decode with ties broken toward the lowest vocabulary index.
    pub fn grid_from_probs(&self, probs: &Array2<f64>) -> Result<TileGrid> {
        let mut tiles = Vec::with_capacity(self.cells());
        for row in probs.axis_iter(Axis(0)) {
            let mut best = 0;
            for (i, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = i;
                }
            }
            tiles.push(self.vocabulary[best]);
        }
        TileGrid::new(self.segment_rows, self.segment_cols, tiles)
    }

    /// Sample a standard-normal latent and decode under the label.
    pub fn generate<R: Rng>(&self, label: &ConditionLabel, rng: &mut R) -> Result<AnnotatedSegment> {
        self.check_label(label)?;
        let z = Array1::from_shape_fn(self.latent_dim, |_| rng.sample::<f64, _>(StandardNormal));
        self.generate_from(&z, label)
    }

    pub fn generate_from(&self, z: &Array1<f64>, label: &ConditionLabel) -> Result<AnnotatedSegment> {
        let probs = self.decode(z, label)?;
        let grid = self.grid_from_probs(&probs)?;
        Ok(AnnotatedSegment {
            grid,
            label: label.directional,
            game: self.game_for_bits(&label.game_bits),
            provenance: Provenance::new("generated", 0, 0),
        })
    }

    /// The game a set of blend bits names, when exactly one bit is set;
    /// otherwise the model's first game.
    pub fn game_for_bits(&self, bits: &[u8]) -> GameId {
        let ones: Vec<usize> = bits.iter().enumerate().filter(|(_, &b)| b == 1).map(|(i, _)| i).collect();
        match ones.as_slice() {
            [i] if *i < self.games.len() => self.games[*i],
            _ => self.games[0],
        }
    }

    /// One-hot game bits for a model game, in the model's game order.
    pub fn bits_for_game(&self, game: GameId) -> Result<Vec<u8>> {
        if self.label_width == 4 {
            return Ok(Vec::new());
        }
        let idx = self
            .games
            .iter()
            .position(|&g| g == game)
            .ok_or_else(|| Error::InvalidArgument(format!("model has no game {game}")))?;
        let mut bits = vec![0u8; self.games.len()];
        bits[idx] = 1;
        Ok(bits)
    }
}

struct Dataset {
    /// [n x cells*vocab]
    one_hot: Array2<f64>,
    /// [n x label_width]
    labels: Array2<f64>,
    /// class index per cell, [n][cells]
    targets: Vec<Vec<u16>>,
}

fn build_dataset(model: &ModelParams, items: &[(TileGrid, ConditionLabel)]) -> Result<Dataset> {
    let n = items.len();
    let v = model.vocab_size();
    let mut one_hot = Array2::zeros((n, model.cells() * v));
    let mut labels = Array2::zeros((n, model.label_width));
    let mut targets = Vec::with_capacity(n);
    for (i, (grid, label)) in items.iter().enumerate() {
        model.check_label(label)?;
        one_hot.row_mut(i).assign(&model.one_hot(grid)?);
        for (j, b) in label.to_vec().into_iter().enumerate() {
            labels[[i, j]] = b;
        }
        let t: Vec<u16> = grid
            .tiles()
            .iter()
            .map(|&c| model.tile_index(c).map(|x| x as u16))
            .collect::<Result<_>>()?;
        targets.push(t);
    }
    Ok(Dataset { one_hot, labels, targets })
}

/// Batched reconstruction + KL loss and all gradients for one batch.
/// Deterministic given the noise matrix; exposed so tests can check the
/// full gradient path with finite differences.
pub struct BatchGrads {
    pub recon: f64,
    pub kl: f64,
    pub encoder: Grads,
    pub decoder: Grads,
}

pub fn batch_loss_and_grads(
    model: &ModelParams,
    one_hot: &Array2<f64>,
    labels: &Array2<f64>,
    targets: &[&[u16]],
    noise: &Array2<f64>,
) -> Result<BatchGrads> {
    let b = one_hot.nrows();
    let l = model.latent_dim;
    let v = model.vocab_size();
    let scale = 1.0 / b as f64;

    let enc_in = ndarray::concatenate(Axis(1), &[one_hot.view(), labels.view()])
        .map_err(|e| Error::Shape(e.to_string()))?;
    let (enc_out, enc_cache) = model.encoder.forward_batch(&enc_in)?;
    let mu = enc_out.slice(s![.., ..l]).to_owned();
    let logvar = enc_out.slice(s![.., l..]).to_owned();

    let sigma = logvar.mapv(|x| (0.5 * x).exp());
    let z = &mu + &(&sigma * noise);

    let dec_in = ndarray::concatenate(Axis(1), &[z.view(), labels.view()])
        .map_err(|e| Error::Shape(e.to_string()))?;
    let (logits, dec_cache) = model.decoder.forward_batch(&dec_in)?;

    // per-cell softmax cross-entropy, summed over the grid
    let mut recon = 0.0;
    let mut dlogits = Array2::zeros(logits.raw_dim());
    for i in 0..b {
        let row = logits.row(i);
        let mut drow = dlogits.row_mut(i);
        for (cell, &target) in targets[i].iter().enumerate() {
            let lo = cell * v;
            let cell_logits = row.slice(s![lo..lo + v]);
            let max = cell_logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for &x in cell_logits.iter() {
                sum += (x - max).exp();
            }
            recon += sum.ln() + max - cell_logits[target as usize];
            for j in 0..v {
                drow[lo + j] = (cell_logits[j] - max).exp() / sum * scale;
            }
            drow[lo + target as usize] -= scale;
        }
    }
    recon *= scale;

    let (dec_grads, ddec_in) = model.decoder.backward_batch(&dec_cache, &dlogits)?;
    let dz = ddec_in.slice(s![.., ..l]).to_owned();

    let mut kl = 0.0;
    let mut dmu = dz.clone();
    let mut dlogvar = &dz * noise * &sigma * 0.5;
    for i in 0..b {
        let g = GaussianParams { mu: mu.row(i).to_owned(), logvar: logvar.row(i).to_owned() };
        let (k, gmu, glv) = kl_standard_normal(&g);
        kl += k;
        for j in 0..l {
            dmu[[i, j]] += gmu[j] * scale;
            dlogvar[[i, j]] += glv[j] * scale;
        }
    }
    kl *= scale;

    let denc_out = ndarray::concatenate(Axis(1), &[dmu.view(), dlogvar.view()])
        .map_err(|e| Error::Shape(e.to_string()))?;
    let (enc_grads, _) = model.encoder.backward_batch(&enc_cache, &denc_out)?;

    Ok(BatchGrads { recon, kl, encoder: enc_grads, decoder: dec_grads })
}

fn init_model(
    rows: usize,
    cols: usize,
    vocabulary: Vec<char>,
    label_width: usize,
    games: Vec<GameId>,
    cfg: &TrainConfig,
) -> ModelParams {
    let cells = rows * cols;
    let v = vocabulary.len();
    let mut enc_dims = vec![cells * v + label_width];
    enc_dims.extend_from_slice(&cfg.hidden);
    enc_dims.push(2 * cfg.latent_dim);
    let mut dec_dims = vec![cfg.latent_dim + label_width];
    dec_dims.extend(cfg.hidden.iter().rev());
    dec_dims.push(cells * v);

    let mut rng = rng_from(cfg.seed, "init", 0);
    ModelParams {
        encoder: DenseNet::init(&enc_dims, &mut rng),
        decoder: DenseNet::init(&dec_dims, &mut rng),
        latent_dim: cfg.latent_dim,
        segment_rows: rows,
        segment_cols: cols,
        vocabulary,
        label_width,
        games,
        seed: cfg.seed,
        hidden: cfg.hidden.clone(),
    }
}

fn train_loop(
    mut model: ModelParams,
    items: Vec<(TileGrid, ConditionLabel)>,
    cfg: &TrainConfig,
) -> Result<(ModelParams, Vec<EpochStats>)> {
    let data = build_dataset(&model, &items)?;
    let n = items.len();
    let mut enc_state = AdamState::new(&model.encoder, cfg.schedule.clone());
    let mut dec_state = AdamState::new(&model.decoder, cfg.schedule.clone());
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut noise_rng = rng_from(cfg.seed, "noise", 0);

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        let mut shuffle_rng = rng_from(cfg.seed, "shuffle", epoch as u64);
        for i in (1..n).rev() {
            let j = shuffle_rng.gen_range(0..=i);
            order.swap(i, j);
        }

        let mut recon_sum = 0.0;
        let mut kl_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let b = chunk.len();
            let one_hot = data.one_hot.select(Axis(0), chunk);
            let labels = data.labels.select(Axis(0), chunk);
            let targets: Vec<&[u16]> = chunk.iter().map(|&i| data.targets[i].as_slice()).collect();
            let noise = Array2::from_shape_fn((b, model.latent_dim), |_| {
                noise_rng.sample::<f64, _>(StandardNormal)
            });
            let out = batch_loss_and_grads(&model, &one_hot, &labels, &targets, &noise)?;
            if !out.recon.is_finite() || !out.kl.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: format!("recon={}, kl={}", out.recon, out.kl),
                });
            }
            recon_sum += out.recon * b as f64;
            kl_sum += out.kl * b as f64;
            enc_state.step(&mut model.encoder, &out.encoder, epoch)?;
            dec_state.step(&mut model.decoder, &out.decoder, epoch)?;
        }
        history.push(EpochStats {
            epoch,
            recon: recon_sum / n as f64,
            kl: kl_sum / n as f64,
            lr: cfg.schedule.lr_at(epoch),
        });
    }
    Ok((model, history))
}

/// Train a single-game model; labels are the 4 directional bits.
pub fn train(corpus: &Corpus, cfg: &TrainConfig) -> Result<(ModelParams, Vec<EpochStats>)> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let model = init_model(
        corpus.segment_rows,
        corpus.segment_cols,
        corpus.vocabulary.clone(),
        4,
        corpus.games.clone(),
        cfg,
    );
    let items: Vec<(TileGrid, ConditionLabel)> = corpus
        .segments
        .iter()
        .map(|s| (s.grid.clone(), ConditionLabel::directional(s.label)))
        .collect();
    train_loop(model, items, cfg)
}

/// Train a blend model over several single-game corpora. Game bits are
/// one-hot in corpus order: segments of `corpora[i]` get bit i set.
pub fn blend_train(corpora: &[Corpus], cfg: &TrainConfig) -> Result<(ModelParams, Vec<EpochStats>)> {
    if corpora.is_empty() || corpora.iter().any(|c| c.is_empty()) {
        return Err(Error::EmptyCorpus);
    }
    let rows = corpora[0].segment_rows;
    let cols = corpora[0].segment_cols;
    for c in corpora {
        if c.segment_rows != rows || c.segment_cols != cols {
            return Err(Error::Shape(format!(
                "corpora segment shapes differ: {}x{} vs {}x{} (pad Zelda rooms first)",
                rows, cols, c.segment_rows, c.segment_cols
            )));
        }
    }
    let mut games = Vec::new();
    let mut vocabulary: Vec<char> = Vec::new();
    for c in corpora {
        for &g in &c.games {
            if games.contains(&g) {
                return Err(Error::InvalidArgument(format!("game {g} appears twice in blend")));
            }
            games.push(g);
        }
        for &ch in &c.vocabulary {
            if !vocabulary.contains(&ch) {
                vocabulary.push(ch);
            }
        }
    }
    let n = corpora.len();
    let model = init_model(rows, cols, vocabulary, 4 + n, games, cfg);
    let mut items = Vec::new();
    for (i, c) in corpora.iter().enumerate() {
        let mut bits = vec![0u8; n];
        bits[i] = 1;
        for s in &c.segments {
            items.push((s.grid.clone(), ConditionLabel::with_game_bits(s.label, bits.clone())));
        }
    }
    train_loop(model, items, cfg)
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic, version, JSON metadata, raw little-endian f64
// parameter data. Round-trips bit-exactly.

const CKPT_MAGIC: &[u8; 8] = b"LVLBLEND";
const CKPT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    latent_dim: usize,
    segment_rows: usize,
    segment_cols: usize,
    vocabulary: String,
    label_width: usize,
    games: Vec<String>,
    seed: u64,
    hidden: Vec<usize>,
    encoder_shapes: Vec<(usize, usize)>,
    decoder_shapes: Vec<(usize, usize)>,
}

fn write_net(buf: &mut Vec<u8>, net: &DenseNet) {
    for layer in &net.layers {
        for &x in layer.weight.iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        for &x in layer.bias.iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
}

fn read_net(data: &mut &[u8], shapes: &[(usize, usize)]) -> Result<DenseNet> {
    let mut layers = Vec::with_capacity(shapes.len());
    for &(out_dim, in_dim) in shapes {
        let mut read_f64s = |count: usize| -> Result<Vec<f64>> {
            let bytes = count * 8;
            if data.len() < bytes {
                return Err(Error::Checkpoint("truncated parameter data".into()));
            }
            let vals = data[..bytes]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            *data = &data[bytes..];
            Ok(vals)
        };
        let weight = Array2::from_shape_vec((out_dim, in_dim), read_f64s(out_dim * in_dim)?)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        let bias = Array1::from_vec(read_f64s(out_dim)?);
        layers.push(crate::nn::Layer { weight, bias });
    }
    DenseNet::new(layers).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn checkpoint_to_bytes(model: &ModelParams) -> Vec<u8> {
    let meta = CheckpointMeta {
        latent_dim: model.latent_dim,
        segment_rows: model.segment_rows,
        segment_cols: model.segment_cols,
        vocabulary: model.vocabulary.iter().collect(),
        label_width: model.label_width,
        games: model.games.iter().map(|g| g.name().to_string()).collect(),
        seed: model.seed,
        hidden: model.hidden.clone(),
        encoder_shapes: model.encoder.layers.iter().map(|l| (l.out_dim(), l.in_dim())).collect(),
        decoder_shapes: model.decoder.layers.iter().map(|l| (l.out_dim(), l.in_dim())).collect(),
    };
    let meta_json = serde_json::to_vec(&meta).expect("meta serializes");
    let mut buf = Vec::new();
    buf.extend_from_slice(CKPT_MAGIC);
    buf.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(meta_json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&meta_json);
    write_net(&mut buf, &model.encoder);
    write_net(&mut buf, &model.decoder);
    buf
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<ModelParams> {
    if bytes.len() < 20 || &bytes[..8] != CKPT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CKPT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let meta_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    if bytes.len() < 20 + meta_len {
        return Err(Error::Checkpoint("truncated metadata".into()));
    }
    let meta: CheckpointMeta = serde_json::from_slice(&bytes[20..20 + meta_len])
        .map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
    if meta.latent_dim == 0 || meta.label_width < 4 || meta.games.is_empty() {
        return Err(Error::Checkpoint("invalid metadata values".into()));
    }
    let total_params: usize = meta
        .encoder_shapes
        .iter()
        .chain(&meta.decoder_shapes)
        .map(|&(o, i)| o.checked_mul(i).and_then(|p| p.checked_add(o)).unwrap_or(usize::MAX))
        .fold(0usize, |a, b| a.saturating_add(b));
    if total_params == usize::MAX || total_params.saturating_mul(8) != bytes.len() - 20 - meta_len {
        return Err(Error::Checkpoint("parameter data size mismatch".into()));
    }
    let mut data = &bytes[20 + meta_len..];
    let encoder = read_net(&mut data, &meta.encoder_shapes)?;
    let decoder = read_net(&mut data, &meta.decoder_shapes)?;
    let games: Vec<GameId> = meta
        .games
        .iter()
        .map(|g| g.parse())
        .collect::<Result<_>>()
        .map_err(|_| Error::Checkpoint("unknown game in metadata".into()))?;
    let model = ModelParams {
        encoder,
        decoder,
        latent_dim: meta.latent_dim,
        segment_rows: meta.segment_rows,
        segment_cols: meta.segment_cols,
        vocabulary: meta.vocabulary.chars().collect(),
        label_width: meta.label_width,
        games,
        seed: meta.seed,
        hidden: meta.hidden,
    };
    if model.encoder.in_dim() != model.cells() * model.vocab_size() + model.label_width
        || model.encoder.out_dim() != 2 * model.latent_dim
        || model.decoder.in_dim() != model.latent_dim + model.label_width
        || model.decoder.out_dim() != model.cells() * model.vocab_size()
    {
        return Err(Error::Checkpoint("network shapes inconsistent with metadata".into()));
    }
    Ok(model)
}

pub fn save_checkpoint(model: &ModelParams, path: &Path) -> Result<()> {
    let bytes = checkpoint_to_bytes(model);
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    checkpoint_from_bytes(&bytes)
}

/// Training log as delimited text: epoch, reconstruction loss, KL, lr.
pub fn history_to_tsv(history: &[EpochStats]) -> String {
    let mut s = String::from("epoch\trecon\tkl\tlr\n");
    for h in history {
        s.push_str(&format!("{}\t{:.6}\t{:.6}\t{:.8}\n", h.epoch, h.recon, h.kl, h.lr));
    }
    s
}
