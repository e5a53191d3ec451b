//! Random-forest classification over segments, the exact/admissible match
//! logic, and the IN/OUT label split.
//!
//! Defaults follow the common library defaults: 100 trees, unlimited
//! depth, Gini impurity, sqrt(features) candidate features per split,
//! bootstrap sampling. Features are the flattened one-hot tile grid.
//! Ties are broken toward the lowest class index.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::label::DirectionalLabel;
use crate::rng::{derive_seed, rng_from};
use crate::tiles::TileGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchKind {
    Exact,
    Admissible,
    None,
}

/// Exact iff bitwise equal; admissible iff every open bit of the
/// conditioning label is open in the prediction.
pub fn match_labels(predicted: DirectionalLabel, conditioned: DirectionalLabel) -> MatchKind {
    if predicted == conditioned {
        MatchKind::Exact
    } else if conditioned.bits().iter().zip(predicted.bits()).all(|(&c, p)| c == 0 || p == 1) {
        MatchKind::Admissible
    } else {
        MatchKind::None
    }
}

impl MatchKind {
    pub fn is_admissible(&self) -> bool {
        matches!(self, MatchKind::Exact | MatchKind::Admissible)
    }
}

/// IN = directional labels occurring in the corpus, OUT = the rest of the
/// 16, both in label-index order.
pub fn in_out_split(corpus: &Corpus) -> (Vec<DirectionalLabel>, Vec<DirectionalLabel>) {
    let present = corpus.in_labels();
    let (mut ins, mut outs) = (Vec::new(), Vec::new());
    for label in DirectionalLabel::all() {
        if present.contains(&label) {
            ins.push(label);
        } else {
            outs.push(label);
        }
    }
    (ins, outs)
}

/// Flattened one-hot tile features. Tiles outside the vocabulary one-hot
/// to all zeros for that cell.
pub fn segment_features(grid: &TileGrid, vocabulary: &[char]) -> Vec<f64> {
    let v = vocabulary.len();
    let mut x = vec![0.0; grid.cells() * v];
    for (i, tile) in grid.tiles().iter().enumerate() {
        if let Some(j) = vocabulary.iter().position(|c| c == tile) {
            x[i * v + j] = 1.0;
        }
    }
    x
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
enum Node {
    Leaf { counts: Vec<u32> },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn leaf_counts(&self, x: &[f64]) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
    pub n_classes: usize,
    pub n_features: usize,
}

impl Forest {
    /// Soft-vote prediction: average the per-tree leaf class frequencies.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut votes = vec![0.0f64; self.n_classes];
        for tree in &self.trees {
            let counts = tree.leaf_counts(x);
            let total: u32 = counts.iter().sum();
            if total > 0 {
                for (v, &c) in votes.iter_mut().zip(counts) {
                    *v += c as f64 / total as f64;
                }
            }
        }
        let mut best = 0;
        for (i, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = i;
            }
        }
        best
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest serializes")
    }

    pub fn from_json(text: &str) -> Result<Forest> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("forest: {e}")))
    }
}

fn gini(counts: &[u32], total: u32) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

struct TreeBuilder<'a> {
    features: &'a [Vec<f64>],
    labels: &'a [usize],
    n_classes: usize,
    n_candidates: usize,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn class_counts(&self, idx: &[usize]) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_classes];
        for &i in idx {
            counts[self.labels[i]] += 1;
        }
        counts
    }

    fn build<R: Rng>(&mut self, idx: Vec<usize>, rng: &mut R) -> usize {
        let counts = self.class_counts(&idx);
        let total = idx.len() as u32;
        let node_gini = gini(&counts, total);
        if node_gini == 0.0 || idx.len() < 2 {
            self.nodes.push(Node::Leaf { counts });
            return self.nodes.len() - 1;
        }

        let n_features = self.features[0].len();
        let mut candidates: Vec<usize> = (0..n_features).collect();
        candidates.partial_shuffle(rng, self.n_candidates);
        candidates.truncate(self.n_candidates);

        let mut best: Option<(f64, usize, f64)> = None; // (weighted gini, feature, threshold)
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(idx.len());
        for &f in &candidates {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.features[i][f], self.labels[i])));
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut left_counts = vec![0u32; self.n_classes];
            let mut left_total = 0u32;
            for w in 0..pairs.len() - 1 {
                left_counts[pairs[w].1] += 1;
                left_total += 1;
                if pairs[w].0 == pairs[w + 1].0 {
                    continue;
                }
                let right_total = total - left_total;
                let right_counts: Vec<u32> =
                    counts.iter().zip(&left_counts).map(|(&c, &l)| c - l).collect();
                let weighted = (left_total as f64 * gini(&left_counts, left_total)
                    + right_total as f64 * gini(&right_counts, right_total))
                    / total as f64;
                if best.map_or(true, |(b, _, _)| weighted < b) {
                    let threshold = 0.5 * (pairs[w].0 + pairs[w + 1].0);
                    best = Some((weighted, f, threshold));
                }
            }
        }

        match best {
            Some((weighted, feature, threshold)) if weighted < node_gini - 1e-12 => {
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
                    idx.into_iter().partition(|&i| self.features[i][feature] <= threshold);
                let placeholder = self.nodes.len();
                self.nodes.push(Node::Leaf { counts: Vec::new() });
                let left = self.build(left_idx, rng);
                let right = self.build(right_idx, rng);
                self.nodes[placeholder] = Node::Split { feature, threshold, left, right };
                placeholder
            }
            _ => {
                self.nodes.push(Node::Leaf { counts });
                self.nodes.len() - 1
            }
        }
    }
}

/// Bootstrap-sampled trees with random feature subsets per split. Trees
/// train in parallel with per-tree derived seeds, so results do not depend
/// on thread scheduling.
pub fn train_forest(
    features: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    n_trees: usize,
    seed: u64,
) -> Result<Forest> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::InvalidArgument("need one label per feature row".into()));
    }
    let distinct: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::InvalidArgument("forest training needs at least 2 distinct labels".into()));
    }
    if let Some(&max) = distinct.iter().next_back() {
        if max >= n_classes {
            return Err(Error::InvalidArgument("label index out of range".into()));
        }
    }
    let n = features.len();
    let n_features = features[0].len();
    let n_candidates = ((n_features as f64).sqrt().floor() as usize).max(1);
    let trees: Vec<Tree> = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from(seed, "tree", t as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut builder =
                TreeBuilder { features, labels, n_classes, n_candidates, nodes: Vec::new() };
            builder.build(idx, &mut rng);
            Tree { nodes: builder.nodes }
        })
        .collect();
    Ok(Forest { trees, n_classes, n_features })
}

/// Stratified-where-possible k-fold cross validation; returns the mean
/// fold accuracy.
pub fn cross_validate(
    features: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    n_trees: usize,
    k: usize,
    seed: u64,
) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidArgument("cross validation needs k >= 2".into()));
    }
    if k > features.len() {
        return Err(Error::InvalidArgument("k exceeds sample count".into()));
    }
    // stratified deal: shuffle within each class, then round-robin
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut next_fold = 0usize;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = rng_from(seed, "cv-shuffle", 0);
    for class_idx in &mut by_class {
        class_idx.shuffle(&mut rng);
        for &i in class_idx.iter() {
            folds[next_fold].push(i);
            next_fold = (next_fold + 1) % k;
        }
    }

    let mut accuracies = Vec::with_capacity(k);
    for (f, fold) in folds.iter().enumerate() {
        if fold.is_empty() {
            continue;
        }
        let train_idx: Vec<usize> =
            folds.iter().enumerate().filter(|&(g, _)| g != f).flat_map(|(_, v)| v.iter().copied()).collect();
        let train_features: Vec<Vec<f64>> = train_idx.iter().map(|&i| features[i].clone()).collect();
        let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
        let forest = train_forest(
            &train_features,
            &train_labels,
            n_classes,
            n_trees,
            derive_seed(seed, "cv-fold", f as u64),
        )?;
        let correct = fold.iter().filter(|&&i| forest.predict(&features[i]) == labels[i]).count();
        accuracies.push(correct as f64 / fold.len() as f64);
    }
    Ok(accuracies.iter().sum::<f64>() / accuracies.len() as f64)
}

/// Forest over a corpus with the directional label as the class. Classes
/// are the corpus's IN labels in index order; returns the class list with
/// the forest.
pub fn train_directional_forest(
    corpus: &Corpus,
    n_trees: usize,
    seed: u64,
) -> Result<(Forest, Vec<DirectionalLabel>)> {
    let (classes, _) = in_out_split(corpus);
    let features: Vec<Vec<f64>> =
        corpus.segments.iter().map(|s| segment_features(&s.grid, &corpus.vocabulary)).collect();
    let labels: Vec<usize> = corpus
        .segments
        .iter()
        .map(|s| classes.iter().position(|&c| c == s.label).unwrap())
        .collect();
    let forest = train_forest(&features, &labels, classes.len(), n_trees, seed)?;
    Ok((forest, classes))
}
