//! Random-forest feature ranking and top-α% feature selection.
//!
//! Trees are regression trees on the 0/1 labels. Every split tests one
//! binary feature (bit set vs. unset) and is chosen by the largest drop in
//! sum of squared errors. A feature's importance is the total SSE drop it
//! produced, averaged over trees and normalized to sum to one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_space::{LabeledDataset, SparseBinaryVector};

/// Smallest SSE drop that counts as an informative split.
const MIN_GAIN: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Draw a bootstrap resample per tree; otherwise every tree sees all rows.
    pub bootstrap: bool,
    /// Bootstrap size as a fraction of the training set.
    pub sample_fraction: f64,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 8,
            min_samples_split: 2,
            bootstrap: true,
            sample_fraction: 1.0,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::param("forest needs at least one tree"));
        }
        if self.max_depth < 1 {
            return Err(Error::param("max_depth must be >= 1"));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::param(format!(
                "sample fraction must be in (0, 1], got {}",
                self.sample_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedFeatures {
    /// Feature indices by descending importance, ties by ascending index.
    pub order: Vec<usize>,
    /// Non-negative, summing to 1, or all zero when no split was informative.
    pub importances: Vec<f64>,
}

impl RankedFeatures {
    /// Ranks features by the given scores.
    pub fn from_importances(importances: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..importances.len()).collect();
        order.sort_by(|&a, &b| importances[b].total_cmp(&importances[a]).then(a.cmp(&b)));
        Self { order, importances }
    }

    pub fn dim(&self) -> usize {
        self.importances.len()
    }
}

/// Per-node feature statistics over a reusable scratch buffer.
struct Scratch {
    count: Vec<u32>,
    positives: Vec<u32>,
    touched: Vec<u32>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Self {
            count: vec![0; dim],
            positives: vec![0; dim],
            touched: Vec::new(),
        }
    }
}

fn sse(n: f64, positives: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else {
        positives - positives * positives / n
    }
}

struct TreeBuilder<'a> {
    samples: &'a [SparseBinaryVector],
    targets: Vec<bool>,
    cfg: &'a ForestConfig,
    scratch: Scratch,
    gains: Vec<f64>,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.targets[r]).count();
        if depth >= self.cfg.max_depth || n < self.cfg.min_samples_split || pos == 0 || pos == n {
            return;
        }

        let sc = &mut self.scratch;
        for &r in &rows {
            let y = self.targets[r] as u32;
            for &j in self.samples[r].indices() {
                let j = j as usize;
                if sc.count[j] == 0 {
                    sc.touched.push(j as u32);
                }
                sc.count[j] += 1;
                sc.positives[j] += y;
            }
        }

        let parent = sse(n as f64, pos as f64);
        let mut best: Option<(f64, u32)> = None;
        sc.touched.sort_unstable();
        for &j in &sc.touched {
            let (n1, p1) = (sc.count[j as usize] as usize, sc.positives[j as usize] as usize);
            if n1 == n {
                continue;
            }
            let gain = parent
                - sse(n1 as f64, p1 as f64)
                - sse((n - n1) as f64, (pos - p1) as f64);
            if gain > MIN_GAIN && best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, j));
            }
        }
        for &j in &sc.touched {
            sc.count[j as usize] = 0;
            sc.positives[j as usize] = 0;
        }
        sc.touched.clear();

        let Some((gain, feature)) = best else {
            return;
        };
        self.gains[feature as usize] += gain;
        let (set, unset): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| self.samples[r].contains(feature));
        self.grow(set, depth + 1);
        self.grow(unset, depth + 1);
    }
}

/// Unnormalized SSE drop per feature for one tree grown on `rows`.
fn tree_gains(train: &LabeledDataset, rows: Vec<usize>, cfg: &ForestConfig) -> Vec<f64> {
    let mut b = TreeBuilder {
        samples: train.samples(),
        targets: train.labels().iter().map(|l| l.is_malware()).collect(),
        cfg,
        scratch: Scratch::new(train.dim()),
        gains: vec![0.0; train.dim()],
    };
    b.grow(rows, 0);
    b.gains
}

fn tree_rows(n: usize, cfg: &ForestConfig, tree: usize) -> Vec<usize> {
    if !cfg.bootstrap {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(tree as u64);
    let size = ((n as f64 * cfg.sample_fraction).round() as usize).max(1);
    (0..size).map(|_| rng.random_range(0..n)).collect()
}

/// Impurity-based importance from a random forest of regression trees.
pub fn fit_forest_importance(train: &LabeledDataset, cfg: &ForestConfig) -> Result<RankedFeatures> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if train.len() < 2 {
        return Err(Error::param("feature ranking needs at least 2 samples"));
    }
    if train.dim() == 0 {
        return Err(Error::param("feature ranking needs at least one feature"));
    }

    let n = train.len();
    let grow = |t: usize| tree_gains(train, tree_rows(n, cfg, t), cfg);
    #[cfg(feature = "parallel")]
    let per_tree: Vec<Vec<f64>> = (0..cfg.n_trees).into_par_iter().map(grow).collect();
    #[cfg(not(feature = "parallel"))]
    let per_tree: Vec<Vec<f64>> = (0..cfg.n_trees).map(grow).collect();

    // summed in tree order so the result does not depend on scheduling
    let mut total = vec![0.0; train.dim()];
    for gains in &per_tree {
        for (t, g) in total.iter_mut().zip(gains) {
            *t += g;
        }
    }
    for t in &mut total {
        *t /= cfg.n_trees as f64;
    }
    let sum: f64 = total.iter().sum();
    if sum > 0.0 {
        for t in &mut total {
            *t /= sum;
        }
    }
    Ok(RankedFeatures::from_importances(total))
}

/// A kept-feature subset and the order-preserving remap onto `[0, m')`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureProjection {
    /// Original indices of the kept features, ascending; new index = position.
    pub kept: Vec<u32>,
    pub source_dim: usize,
    #[serde(skip)]
    new_index: Vec<Option<u32>>,
}

impl FeatureProjection {
    pub fn new(mut kept: Vec<u32>, source_dim: usize) -> Result<Self> {
        kept.sort_unstable();
        kept.dedup();
        if let Some(&last) = kept.last() {
            if last as usize >= source_dim {
                return Err(Error::IndexOutOfRange {
                    index: last,
                    dim: source_dim,
                });
            }
        }
        let mut new_index = vec![None; source_dim];
        for (pos, &j) in kept.iter().enumerate() {
            new_index[j as usize] = Some(pos as u32);
        }
        Ok(Self {
            kept,
            source_dim,
            new_index,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new((0..dim as u32).collect(), dim).expect("identity is in range")
    }

    pub fn target_dim(&self) -> usize {
        self.kept.len()
    }

    pub fn project(&self, v: &SparseBinaryVector) -> Result<SparseBinaryVector> {
        crate::feature_space::check_dims(v.dim(), self.source_dim)?;
        let idx = v
            .indices()
            .iter()
            .filter_map(|&j| self.new_index[j as usize])
            .collect();
        // ascending old indices map to ascending new ones
        SparseBinaryVector::new(idx, self.target_dim())
    }

    pub fn project_dataset(&self, d: &LabeledDataset) -> Result<LabeledDataset> {
        let samples = d.samples().iter().map(|s| self.project(s)).collect::<Result<_>>()?;
        LabeledDataset::new(samples, d.labels().to_vec(), self.target_dim())
    }

    /// Back to the source space; dropped features come back unset.
    pub fn unproject(&self, v: &SparseBinaryVector) -> Result<SparseBinaryVector> {
        crate::feature_space::check_dims(v.dim(), self.target_dim())?;
        SparseBinaryVector::new(
            v.indices().iter().map(|&i| self.kept[i as usize]).collect(),
            self.source_dim,
        )
    }
}

/// Number of features kept at `alpha_percent`: half-up rounding, at least 1.
pub fn kept_count(dim: usize, alpha_percent: u32) -> usize {
    ((dim * alpha_percent as usize + 50) / 100).max(1)
}

/// Keeps the top `alpha_percent`% of `ranked.order`.
pub fn select_top_fraction(ranked: &RankedFeatures, alpha_percent: u32) -> Result<FeatureProjection> {
    if !(1..=100).contains(&alpha_percent) {
        return Err(Error::param(format!(
            "alpha must be in [1, 100], got {alpha_percent}"
        )));
    }
    let k = kept_count(ranked.dim(), alpha_percent).min(ranked.dim());
    FeatureProjection::new(
        ranked.order[..k].iter().map(|&j| j as u32).collect(),
        ranked.dim(),
    )
}
