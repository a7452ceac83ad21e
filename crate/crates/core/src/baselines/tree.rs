//! Decision tree, random forest and gradient-boosted trees scoring
//! (slot, candidate) pairs as gold or not.
//!
//! All three share one second-order tree builder. A node holding rows with gradient
//! sum G and hessian sum H gets leaf value -G/(H+lambda); a split is scored by
//! G_L²/(H_L+λ) + G_R²/(H_R+λ) - G²/(H+λ). With g = -y, h = 1 and λ = 0 this is
//! squared-error reduction, which is how the single tree and the forest are grown.

use log::info;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::features::{tree_features, TREE_FEATURES};
use crate::container::{Container, ModelKind};
use crate::context::SlotContext;
use crate::error::{Error, Result};
use crate::ingest::RankingExample;
use crate::ranker::{argmax, EmbeddingProvider};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeVariant {
    SingleTree,
    RandomForest,
    GradientBoosted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeConfig {
    pub num_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    /// Features tried per node; `None` tries all of them.
    pub features_per_node: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl TreeConfig {
    pub fn for_variant(variant: TreeVariant, seed: u64) -> Self {
        match variant {
            TreeVariant::SingleTree => TreeConfig {
                num_trees: 1,
                max_depth: 8,
                min_leaf: 2,
                learning_rate: 1.0,
                lambda: 0.0,
                features_per_node: None,
                bootstrap: false,
                seed,
            },
            TreeVariant::RandomForest => TreeConfig {
                num_trees: 50,
                max_depth: 10,
                min_leaf: 1,
                learning_rate: 1.0,
                lambda: 0.0,
                features_per_node: Some((TREE_FEATURES as f64).sqrt().round() as usize),
                bootstrap: true,
                seed,
            },
            TreeVariant::GradientBoosted => TreeConfig {
                num_trees: 100,
                max_depth: 3,
                min_leaf: 1,
                learning_rate: 0.1,
                lambda: 1.0,
                features_per_node: None,
                bootstrap: false,
                seed,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Row-major feature matrix with each column's row order presorted.
pub(crate) struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    /// Per column, (row, value) in ascending value order; empty for constant columns.
    sorted: Vec<Vec<(u32, f64)>>,
}

impl Matrix {
    pub(crate) fn new(rows: Vec<Vec<f64>>) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let n = rows.len();
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        let sorted = (0..cols)
            .map(|f| {
                let mut o: Vec<(u32, f64)> = (0..n).map(|r| (r as u32, data[r * cols + f])).collect();
                o.sort_by(|a, b| a.1.total_cmp(&b.1));
                if o.first().map(|x| x.1) == o.last().map(|x| x.1) {
                    o.clear();
                }
                o
            })
            .collect();
        Matrix { rows: n, cols, data, sorted }
    }

    fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }
}

struct Params<'a> {
    max_depth: usize,
    min_leaf: usize,
    lambda: f64,
    features_per_node: Option<usize>,
    rng: &'a mut ChaCha8Rng,
}

#[derive(Clone, Copy, Default)]
struct Stats {
    g: f64,
    h: f64,
    n: usize,
}

impl Stats {
    fn add(&mut self, g: f64, h: f64, w: u32) {
        self.g += g * w as f64;
        self.h += h * w as f64;
        self.n += w as usize;
    }

    fn score(&self, lambda: f64) -> f64 {
        if self.h + lambda <= 0.0 {
            0.0
        } else {
            self.g * self.g / (self.h + lambda)
        }
    }

    fn leaf(&self, lambda: f64) -> f64 {
        if self.h + lambda <= 0.0 {
            0.0
        } else {
            -self.g / (self.h + lambda)
        }
    }
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct Scan {
    left: Stats,
    prev: Option<f64>,
    best: Option<Best>,
}

/// Grows one tree level by level. Rows with zero weight take no part; a row's weight
/// counts as that many copies.
fn grow(m: &Matrix, g: &[f64], h: &[f64], weight: &[u32], p: Params<'_>) -> Tree {
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    // node index in `nodes` of each row, usize::MAX when inactive
    let mut node_of: Vec<usize> = weight.iter().map(|w| if *w > 0 { 0 } else { usize::MAX }).collect();
    let mut open: Vec<usize> = vec![0];
    for depth in 0..=p.max_depth {
        if open.is_empty() {
            break;
        }
        let mut slot_of_node = vec![u32::MAX; nodes.len()];
        for (i, n) in open.iter().enumerate() {
            slot_of_node[*n] = i as u32;
        }
        let row_slot: Vec<u32> =
            node_of.iter().map(|n| if *n == usize::MAX { u32::MAX } else { slot_of_node[*n] }).collect();
        let mut totals = vec![Stats::default(); open.len()];
        for r in 0..m.rows {
            if row_slot[r] != u32::MAX {
                totals[row_slot[r] as usize].add(g[r], h[r], weight[r]);
            }
        }
        for (s, n) in open.iter().enumerate() {
            nodes[*n] = Node::Leaf { value: totals[s].leaf(p.lambda) };
        }
        if depth == p.max_depth {
            break;
        }
        let tried: Vec<Vec<bool>> = open
            .iter()
            .map(|_| match p.features_per_node {
                Some(k) if k < m.cols => {
                    let mut mask = vec![false; m.cols];
                    for f in sample(p.rng, m.cols, k).into_iter() {
                        mask[f] = true;
                    }
                    mask
                }
                _ => vec![true; m.cols],
            })
            .collect();
        let mut best: Vec<Option<Best>> = vec![None; open.len()];
        for f in 0..m.cols {
            if m.sorted[f].is_empty() || !tried.iter().any(|t| t[f]) {
                continue;
            }
            let mut scans: Vec<Scan> =
                open.iter().map(|_| Scan { left: Stats::default(), prev: None, best: None }).collect();
            for &(r, x) in &m.sorted[f] {
                let r = r as usize;
                let s = row_slot[r];
                if s == u32::MAX || !tried[s as usize][f] {
                    continue;
                }
                let s = s as usize;
                let sc = &mut scans[s];
                if let Some(prev) = sc.prev {
                    if x > prev {
                        let total = totals[s];
                        let l = sc.left;
                        let right = Stats { g: total.g - l.g, h: total.h - l.h, n: total.n - l.n };
                        if l.n >= p.min_leaf && right.n >= p.min_leaf {
                            let gain = l.score(p.lambda) + right.score(p.lambda) - total.score(p.lambda);
                            if sc.best.map_or(true, |b| gain > b.gain) {
                                sc.best = Some(Best { gain, feature: f, threshold: prev + (x - prev) / 2.0 });
                            }
                        }
                    }
                }
                sc.left.add(g[r], h[r], weight[r]);
                sc.prev = Some(x);
            }
            for (s, sc) in scans.into_iter().enumerate() {
                if let Some(b) = sc.best {
                    if best[s].map_or(true, |cur| b.gain > cur.gain) {
                        best[s] = Some(b);
                    }
                }
            }
        }
        let mut next = Vec::new();
        let mut children = std::collections::HashMap::new();
        for (s, n) in open.iter().enumerate() {
            let Some(b) = best[s] else { continue };
            if b.gain <= 1e-12 {
                continue;
            }
            let left = nodes.len();
            nodes.push(Node::Leaf { value: 0.0 });
            nodes.push(Node::Leaf { value: 0.0 });
            nodes[*n] = Node::Split { feature: b.feature, threshold: b.threshold, left, right: left + 1 };
            children.insert(*n, (b, left));
            next.push(left);
            next.push(left + 1);
        }
        for (r, node) in node_of.iter_mut().enumerate() {
            if *node == usize::MAX {
                continue;
            }
            *node = match children.get(node) {
                Some((b, left)) => {
                    if m.get(r, b.feature) <= b.threshold {
                        *left
                    } else {
                        left + 1
                    }
                }
                None => usize::MAX,
            };
        }
        open = next;
    }
    Tree { nodes }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fits trees to labelled rows. Labels must contain both classes.
pub(crate) fn fit(variant: TreeVariant, config: &TreeConfig, rows: Vec<Vec<f64>>, labels: &[bool]) -> Result<(Vec<Tree>, f64)> {
    if rows.is_empty() {
        return Err(Error::Training("no training rows".into()));
    }
    let positives = labels.iter().filter(|y| **y).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::Training("training data contains a single class".into()));
    }
    let m = Matrix::new(rows);
    let y: Vec<f64> = labels.iter().map(|b| *b as u8 as f64).collect();
    match variant {
        TreeVariant::SingleTree | TreeVariant::RandomForest => {
            let g: Vec<f64> = y.iter().map(|v| -v).collect();
            let h = vec![1.0; m.rows];
            let trees = (0..config.num_trees)
                .into_par_iter()
                .map(|t| {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                    let mut weight = vec![1u32; m.rows];
                    if config.bootstrap {
                        weight = vec![0; m.rows];
                        for _ in 0..m.rows {
                            weight[rng.gen_range(0..m.rows)] += 1;
                        }
                    }
                    let p = Params {
                        max_depth: config.max_depth,
                        min_leaf: config.min_leaf,
                        lambda: config.lambda,
                        features_per_node: config.features_per_node,
                        rng: &mut rng,
                    };
                    grow(&m, &g, &h, &weight, p)
                })
                .collect();
            Ok((trees, 0.0))
        }
        TreeVariant::GradientBoosted => {
            let prior = positives as f64 / labels.len() as f64;
            let base = (prior / (1.0 - prior)).ln();
            let mut f = vec![base; m.rows];
            let weight = vec![1u32; m.rows];
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut trees = Vec::with_capacity(config.num_trees);
            for _ in 0..config.num_trees {
                let p: Vec<f64> = f.iter().map(|v| sigmoid(*v)).collect();
                let g: Vec<f64> = p.iter().zip(&y).map(|(p, y)| p - y).collect();
                let h: Vec<f64> = p.iter().map(|p| (p * (1.0 - p)).max(1e-12)).collect();
                let params = Params {
                    max_depth: config.max_depth,
                    min_leaf: config.min_leaf,
                    lambda: config.lambda,
                    features_per_node: config.features_per_node,
                    rng: &mut rng,
                };
                let mut tree = grow(&m, &g, &h, &weight, params);
                for node in &mut tree.nodes {
                    if let Node::Leaf { value } = node {
                        *value *= config.learning_rate;
                    }
                }
                for (r, v) in f.iter_mut().enumerate() {
                    *v += tree.predict(m.row(r));
                }
                trees.push(tree);
            }
            Ok((trees, base))
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    variant: TreeVariant,
    config: TreeConfig,
    provider_name: String,
    corpus_hash: String,
    base: f64,
    trees: Vec<Tree>,
}

/// A trained tree baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeModel {
    pub variant: TreeVariant,
    pub config: TreeConfig,
    pub provider_name: String,
    pub provider_version: String,
    pub corpus_hash: String,
    base: f64,
    trees: Vec<Tree>,
}

impl TreeModel {
    pub(crate) fn from_parts(variant: TreeVariant, config: TreeConfig, trees: Vec<Tree>, base: f64) -> Self {
        TreeModel {
            variant,
            config,
            provider_name: String::new(),
            provider_version: String::new(),
            corpus_hash: String::new(),
            base,
            trees,
        }
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Probability-like score that the row is the gold candidate.
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.variant {
            TreeVariant::SingleTree | TreeVariant::RandomForest => {
                self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len().max(1) as f64
            }
            TreeVariant::GradientBoosted => sigmoid(self.base + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()),
        }
    }

    /// Index of the best candidate, the earliest on ties.
    pub fn select(&self, slot: &SlotContext, candidates: &[String], provider: &dyn EmbeddingProvider) -> Result<usize> {
        if candidates.is_empty() {
            return Err(Error::Argument("cannot select from an empty candidate set".into()));
        }
        let scores: Vec<f64> =
            candidates.iter().map(|c| self.predict(&tree_features(slot, c, provider))).collect();
        Ok(argmax(&scores))
    }

    /// Accuracy on case-narrowed candidate sets.
    pub fn accuracy(&self, examples: &[RankingExample], provider: &dyn EmbeddingProvider) -> Result<f64> {
        if examples.is_empty() {
            return Ok(0.0);
        }
        let mut correct = 0;
        for ex in examples {
            let cands: Vec<String> = ex.narrowed().iter().map(|i| ex.candidate_set[*i].clone()).collect();
            let pick = self.select(&ex.context, &cands, provider)?;
            correct += (cands[pick] == ex.gold_string) as usize;
        }
        Ok(correct as f64 / examples.len() as f64)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            variant: self.variant,
            config: self.config.clone(),
            provider_name: self.provider_name.clone(),
            corpus_hash: self.corpus_hash.clone(),
            base: self.base,
            trees: self.trees.clone(),
        };
        let c = Container {
            kind: ModelKind::Tree,
            provider_version: self.provider_version.clone(),
            header: serde_json::to_vec(&header).map_err(|e| Error::Model(e.to_string()))?,
            blob: Vec::new(),
        };
        Ok(c.to_bytes())
    }

    pub fn from_bytes(bytes: &[u8], provider_version: Option<&str>, force: bool) -> Result<Self> {
        Self::from_container(Container::from_bytes(bytes, provider_version, force)?)
    }

    pub fn from_container(c: Container) -> Result<Self> {
        if c.kind != ModelKind::Tree {
            return Err(Error::Model("model file does not contain a tree baseline".into()));
        }
        let h: Header =
            serde_json::from_slice(&c.header).map_err(|e| Error::Model(format!("bad model header: {e}")))?;
        for t in &h.trees {
            for n in &t.nodes {
                if let Node::Split { feature, left, right, .. } = n {
                    if *feature >= TREE_FEATURES || *left >= t.nodes.len() || *right >= t.nodes.len() {
                        return Err(Error::Model("corrupt tree node".into()));
                    }
                }
            }
        }
        Ok(TreeModel {
            variant: h.variant,
            config: h.config,
            provider_name: h.provider_name,
            provider_version: c.provider_version,
            corpus_hash: h.corpus_hash,
            base: h.base,
            trees: h.trees,
        })
    }
}

/// Trains a tree baseline on every candidate of every example with its gold string
/// among the candidates.
pub fn train_tree_ranker(
    examples: &[RankingExample],
    variant: TreeVariant,
    config: &TreeConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<TreeModel> {
    let usable: Vec<&RankingExample> = examples.iter().filter(|e| e.has_pairs() && e.gold_index().is_some()).collect();
    let (rows, labels): (Vec<Vec<f64>>, Vec<bool>) = usable
        .par_iter()
        .flat_map_iter(|ex| {
            ex.candidate_set
                .iter()
                .map(|c| (tree_features(&ex.context, c, provider), *c == ex.gold_string))
                .collect::<Vec<_>>()
        })
        .unzip();
    info!("training {variant:?} on {} rows from {} examples", rows.len(), usable.len());
    let (trees, base) = fit(variant, config, rows, &labels)?;
    let bytes = serde_json::to_vec(examples).map_err(|e| Error::Training(e.to_string()))?;
    let mut model = TreeModel::from_parts(variant, config.clone(), trees, base);
    model.provider_name = provider.name().to_owned();
    model.provider_version = provider.version().to_owned();
    model.corpus_hash = hex::encode(Sha256::digest(&bytes));
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..200 {
            let a: f64 = rng.gen();
            let b: f64 = rng.gen();
            rows.push(vec![a, b, rng.gen()]);
            labels.push(a > 0.6 && b < 0.5);
        }
        (rows, labels)
    }

    fn train_acc(variant: TreeVariant) -> f64 {
        let (rows, labels) = toy();
        let mut cfg = TreeConfig::for_variant(variant, 1);
        cfg.features_per_node = cfg.features_per_node.map(|_| 2);
        let (trees, base) = fit(variant, &cfg, rows.clone(), &labels).unwrap();
        let model = TreeModel::from_parts(variant, cfg, trees, base);
        let ok = rows.iter().zip(&labels).filter(|(r, y)| (model.predict(r) > 0.5) == **y).count();
        ok as f64 / rows.len() as f64
    }

    #[test]
    fn separable_data_is_learned() {
        assert_eq!(train_acc(TreeVariant::SingleTree), 1.0);
        assert_eq!(train_acc(TreeVariant::GradientBoosted), 1.0);
        assert!(train_acc(TreeVariant::RandomForest) >= 0.98);
    }

    #[test]
    fn single_split_threshold() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let labels = [false, false, true, true];
        let cfg = TreeConfig::for_variant(TreeVariant::SingleTree, 0);
        let (trees, _) = fit(TreeVariant::SingleTree, &cfg, rows, &labels).unwrap();
        assert_eq!(
            trees[0].nodes[0],
            Node::Split { feature: 0, threshold: 2.5, left: 1, right: 2 }
        );
        assert_eq!(trees[0].predict(&[0.0]), 0.0);
        assert_eq!(trees[0].predict(&[9.0]), 1.0);
    }

    #[test]
    fn single_class_rejected() {
        let cfg = TreeConfig::for_variant(TreeVariant::SingleTree, 0);
        let r = fit(TreeVariant::SingleTree, &cfg, vec![vec![1.0], vec![2.0]], &[true, true]);
        assert!(matches!(r, Err(Error::Training(_))));
    }

    #[test]
    fn forest_is_deterministic() {
        let (rows, labels) = toy();
        let cfg = TreeConfig::for_variant(TreeVariant::RandomForest, 9);
        let a = fit(TreeVariant::RandomForest, &cfg, rows.clone(), &labels).unwrap();
        let b = fit(TreeVariant::RandomForest, &cfg, rows, &labels).unwrap();
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn round_trip() {
        let (rows, labels) = toy();
        let cfg = TreeConfig::for_variant(TreeVariant::GradientBoosted, 2);
        let (trees, base) = fit(TreeVariant::GradientBoosted, &cfg, rows, &labels).unwrap();
        let mut m = TreeModel::from_parts(TreeVariant::GradientBoosted, cfg, trees, base);
        m.provider_version = "hash-v1-d4".into();
        let bytes = m.to_bytes().unwrap();
        assert_eq!(TreeModel::from_bytes(&bytes, Some("hash-v1-d4"), false).unwrap(), m);
        assert!(TreeModel::from_bytes(&bytes, Some("other"), false).is_err());
        assert!(TreeModel::from_bytes(&bytes, Some("other"), true).is_ok());
    }
}
