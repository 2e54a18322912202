//! Entropy-based program dissimilarity (PDME) and its all-nearest vote.
//!
//! `En(s) = −Σ_{j∈s} p_j·log p_j`, where `p_j` is the occurrence frequency
//! of feature `j` in the training fold. Two samples are compared through
//!
//! ```text
//! Sim(a, b) = (En(a) + En(b) − En(a ∪ b)) / max(En(a), En(b), En(a ∪ b))
//! d(a, b)   = 1 − Sim(a, b)
//! ```
//!
//! `Sim` is not bounded below, so `d` can exceed 1 for disjoint
//! high-entropy pairs.

use serde::Serialize;

use crate::classifiers::{Decision, TieRule};
use crate::error::{Error, Result};
use crate::feature_space::{check_dims, LabeledDataset, SparseBinaryVector};

/// Two distances closer than this are the same neighbor distance.
pub const DISTANCE_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyModel {
    pub probs: Vec<f64>,
    pub log_base: f64,
    /// `−p_j·log p_j` per feature, precomputed.
    #[serde(skip)]
    terms: Vec<f64>,
}

impl EntropyModel {
    /// Feature frequencies `counts[j] / n` from the training fold.
    pub fn fit(train: &LabeledDataset, log_base: f64) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let mut counts = vec![0usize; train.dim()];
        for s in train.samples() {
            for &j in s.indices() {
                counts[j as usize] += 1;
            }
        }
        let n = train.len() as f64;
        Self::from_probs(counts.iter().map(|&c| c as f64 / n).collect(), log_base)
    }

    pub fn from_probs(probs: Vec<f64>, log_base: f64) -> Result<Self> {
        if !(log_base > 0.0 && log_base != 1.0 && log_base.is_finite()) {
            return Err(Error::param(format!("invalid logarithm base {log_base}")));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::param(format!("probability {p} outside [0, 1]")));
        }
        let ln_base = log_base.ln();
        let terms = probs
            .iter()
            .map(|&p| if p > 0.0 { -p * p.ln() / ln_base } else { 0.0 })
            .collect();
        Ok(Self {
            probs,
            log_base,
            terms,
        })
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    /// Entropy of one sample. Features with `p ∈ {0, 1}` contribute nothing.
    pub fn entropy(&self, s: &SparseBinaryVector) -> Result<f64> {
        check_dims(s.dim(), self.dim())?;
        Ok(self.entropy_of(s.indices()))
    }

    fn entropy_of(&self, indices: &[u32]) -> f64 {
        indices.iter().map(|&j| self.terms[j as usize]).sum()
    }

    /// Entropy of the index-set union, summed in ascending index order so
    /// that `union_entropy(a, a) == entropy(a)` bit for bit.
    fn union_entropy(&self, a: &[u32], b: &[u32]) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            let (x, y) = (a[i], b[j]);
            acc += self.terms[x.min(y) as usize];
            i += (x <= y) as usize;
            j += (y <= x) as usize;
        }
        for &x in &a[i..] {
            acc += self.terms[x as usize];
        }
        for &y in &b[j..] {
            acc += self.terms[y as usize];
        }
        acc
    }

    /// Similarity from precomputed sample entropies.
    fn similarity(&self, a: &[u32], ea: f64, b: &[u32], eb: f64) -> f64 {
        let eu = self.union_entropy(a, b);
        let denom = ea.max(eb).max(eu);
        if denom == 0.0 {
            // neither sample carries information
            1.0
        } else {
            (ea + eb - eu) / denom
        }
    }
}

pub fn entropy(s: &SparseBinaryVector, model: &EntropyModel) -> Result<f64> {
    model.entropy(s)
}

/// PDME distance `1 − Sim(s1, s2)`.
pub fn pdme(s1: &SparseBinaryVector, s2: &SparseBinaryVector, model: &EntropyModel) -> Result<f64> {
    check_dims(s1.dim(), s2.dim())?;
    let e1 = model.entropy(s1)?;
    let e2 = model.entropy(s2)?;
    Ok(1.0 - model.similarity(s1.indices(), e1, s2.indices(), e2))
}

/// Training samples at minimal PDME distance, ascending, and that distance.
pub(crate) fn pdme_neighbors(
    query: &SparseBinaryVector,
    train: &LabeledDataset,
    train_entropies: &[f64],
    model: &EntropyModel,
) -> Result<(Vec<usize>, f64)> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    check_dims(query.dim(), train.dim())?;
    check_dims(query.dim(), model.dim())?;
    let q = query.indices();
    let eq = model.entropy_of(q);
    let dists: Vec<f64> = train
        .samples()
        .iter()
        .zip(train_entropies)
        .map(|(s, &es)| 1.0 - model.similarity(q, eq, s.indices(), es))
        .collect();
    let min = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let members = (0..dists.len())
        .filter(|&i| dists[i] - min <= DISTANCE_TIE_TOLERANCE)
        .collect();
    Ok((members, min))
}

/// Sample entropies of a training set under `model`.
pub fn train_entropies(train: &LabeledDataset, model: &EntropyModel) -> Result<Vec<f64>> {
    train.samples().iter().map(|s| model.entropy(s)).collect()
}

/// All-nearest vote with PDME as the distance.
pub fn pdme_classify(
    query: &SparseBinaryVector,
    train: &LabeledDataset,
    model: &EntropyModel,
    tie_rule: TieRule,
) -> Result<Decision> {
    check_dims(train.dim(), model.dim())?;
    let ents = train_entropies(train, model)?;
    let (members, _) = pdme_neighbors(query, train, &ents, model)?;
    Decision::vote(members, train, tie_rule)
}
