//! The four nearest-neighbor detectors: FNN, ANN, WANN and KMNN.
//!
//! All of them start from Hamming distances between a query and every
//! training sample and finish with a label vote. They differ in who gets to
//! vote:
//!
//! * FNN: the lowest-index sample at minimal distance.
//! * ANN: every sample at minimal distance.
//! * WANN: every sample whose feature-frequency weight is closest to the
//!   query's weight.
//! * KMNN: the ANN set, split into two medoid clusters, minus the fraction
//!   of members farthest from the two cluster heads.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_space::{check_dims, hamming_argmin, Label, LabeledDataset, SparseBinaryVector};
use crate::kmedoids::{ch_distance_scores, two_medoid_cluster, MedoidClustering};

/// Training samples sharing the minimal distance to a query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub member_indices: Vec<usize>,
    pub member_labels: Vec<Label>,
    pub min_distance: f64,
}

impl NeighborSet {
    pub(crate) fn from_members(members: Vec<usize>, train: &LabeledDataset, min_distance: f64) -> Self {
        let member_labels = members.iter().map(|&i| train.labels()[i]).collect();
        Self {
            member_indices: members,
            member_labels,
            min_distance,
        }
    }

    pub fn len(&self) -> usize {
        self.member_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_indices.is_empty()
    }

    pub fn contains_label(&self, label: Label) -> bool {
        self.member_labels.contains(&label)
    }
}

/// How an exactly split vote is resolved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieRule {
    /// Predict malware.
    #[default]
    Malware,
    /// Predict benign.
    Benign,
    /// Take the label of the first voter (lowest training index).
    Index,
}

impl FromStr for TieRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "malware" => Ok(TieRule::Malware),
            "benign" => Ok(TieRule::Benign),
            "index" => Ok(TieRule::Index),
            other => Err(Error::param(format!("unknown tie rule `{other}`"))),
        }
    }
}

/// Most frequent label; `labels` must be ordered by training index for
/// [`TieRule::Index`] to mean "first voter".
pub fn majority_vote(labels: &[Label], tie_rule: TieRule) -> Result<Label> {
    let first = *labels.first().ok_or(Error::Empty("vote"))?;
    let malware = labels.iter().filter(|l| l.is_malware()).count();
    let benign = labels.len() - malware;
    Ok(match malware.cmp(&benign) {
        std::cmp::Ordering::Greater => Label::Malware,
        std::cmp::Ordering::Less => Label::Benign,
        std::cmp::Ordering::Equal => match tie_rule {
            TieRule::Malware => Label::Malware,
            TieRule::Benign => Label::Benign,
            TieRule::Index => first,
        },
    })
}

/// A prediction together with the training samples that voted for it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub label: Label,
    /// Training indices of the voters, ascending.
    pub voters: Vec<usize>,
    /// Fraction of voters labeled malware; the ROC score.
    pub malware_share: f64,
}

impl Decision {
    pub(crate) fn vote(voters: Vec<usize>, train: &LabeledDataset, tie_rule: TieRule) -> Result<Self> {
        let labels: Vec<Label> = voters.iter().map(|&i| train.labels()[i]).collect();
        let label = majority_vote(&labels, tie_rule)?;
        let malware_share =
            labels.iter().filter(|l| l.is_malware()).count() as f64 / labels.len() as f64;
        Ok(Self {
            label,
            voters,
            malware_share,
        })
    }
}

fn check_query(query: &SparseBinaryVector, train: &LabeledDataset) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    check_dims(query.dim(), train.dim())
}

/// ANN neighbor set under Hamming distance.
pub fn ann_neighbors(query: &SparseBinaryVector, train: &LabeledDataset) -> Result<NeighborSet> {
    check_query(query, train)?;
    let (members, d) = hamming_argmin(query, train);
    Ok(NeighborSet::from_members(members, train, d as f64))
}

/// Label of the lowest-index training sample at minimal Hamming distance.
pub fn fnn_classify(query: &SparseBinaryVector, train: &LabeledDataset) -> Result<Label> {
    Ok(fnn_decide(query, train)?.label)
}

pub fn fnn_decide(query: &SparseBinaryVector, train: &LabeledDataset) -> Result<Decision> {
    let nn = ann_neighbors(query, train)?;
    let first = nn.member_indices[0];
    Decision::vote(vec![first], train, TieRule::Malware)
}

/// Majority label over the full ANN neighbor set.
pub fn ann_classify(
    query: &SparseBinaryVector,
    train: &LabeledDataset,
    tie_rule: TieRule,
) -> Result<Decision> {
    let nn = ann_neighbors(query, train)?;
    Decision::vote(nn.member_indices, train, tie_rule)
}

/// Per-feature occurrence counts over a training set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureWeights {
    pub counts: Vec<u32>,
    pub n_train: usize,
}

impl FeatureWeights {
    /// Sum of the feature counts over the bits set in `v`.
    pub fn sample_weight(&self, v: &SparseBinaryVector) -> u64 {
        v.indices().iter().map(|&j| self.counts[j as usize] as u64).sum()
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }
}

pub fn compute_feature_weights(train: &LabeledDataset) -> FeatureWeights {
    let mut counts = vec![0u32; train.dim()];
    for s in train.samples() {
        for &j in s.indices() {
            counts[j as usize] += 1;
        }
    }
    FeatureWeights {
        counts,
        n_train: train.len(),
    }
}

/// Indices minimizing `|w(s) − w(query)|`, ascending.
pub(crate) fn wann_select(query_weight: u64, sample_weights: &[u64]) -> Vec<usize> {
    let mut best = u64::MAX;
    let mut out = Vec::new();
    for (i, &w) in sample_weights.iter().enumerate() {
        let gap = w.abs_diff(query_weight);
        if gap < best {
            best = gap;
            out.clear();
            out.push(i);
        } else if gap == best {
            out.push(i);
        }
    }
    out
}

/// Vote among training samples whose weight sum is closest to the query's.
pub fn wann_classify(
    query: &SparseBinaryVector,
    train: &LabeledDataset,
    weights: &FeatureWeights,
    tie_rule: TieRule,
) -> Result<Decision> {
    check_query(query, train)?;
    check_dims(weights.dim(), train.dim())?;
    let sample_weights: Vec<u64> = train.samples().iter().map(|s| weights.sample_weight(s)).collect();
    let voters = wann_select(weights.sample_weight(query), &sample_weights);
    Decision::vote(voters, train, tie_rule)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KmnnConfig {
    /// Fraction of the neighbor set, farthest from the cluster heads, left out
    /// of the vote.
    pub trim_fraction: f64,
    pub tie_rule: TieRule,
}

impl Default for KmnnConfig {
    fn default() -> Self {
        Self {
            trim_fraction: 0.10,
            tie_rule: TieRule::default(),
        }
    }
}

impl KmnnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.trim_fraction) {
            return Err(Error::param(format!(
                "trim fraction must be in [0, 1), got {}",
                self.trim_fraction
            )));
        }
        Ok(())
    }

    /// Members dropped from a neighbor set of `len`: `ceil(trim · len)`,
    /// leaving at least one.
    pub fn trim_count(&self, len: usize) -> usize {
        // 1e-9 absorbs products like 0.1 * 30 = 3.0000000000000004.
        let raw = (self.trim_fraction * len as f64 - 1e-9).ceil().max(0.0) as usize;
        raw.min(len.saturating_sub(1))
    }
}

/// Every intermediate of one KMNN decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KmnnTrace {
    pub neighbors: NeighborSet,
    /// `None` when the neighbor set has fewer than two members.
    pub clustering: Option<MedoidClustering>,
    /// Sum of distances to both heads, aligned with `neighbors.member_indices`.
    pub scores: Vec<usize>,
    /// Training indices that survived trimming, ascending.
    pub survivors: Vec<usize>,
    pub decision: Decision,
}

pub fn kmnn_trace(
    query: &SparseBinaryVector,
    train: &LabeledDataset,
    cfg: &KmnnConfig,
) -> Result<KmnnTrace> {
    cfg.validate()?;
    let neighbors = ann_neighbors(query, train)?;
    if neighbors.len() < 2 {
        let decision = Decision::vote(neighbors.member_indices.clone(), train, cfg.tie_rule)?;
        return Ok(KmnnTrace {
            survivors: neighbors.member_indices.clone(),
            neighbors,
            clustering: None,
            scores: Vec::new(),
            decision,
        });
    }

    let members: Vec<&SparseBinaryVector> = neighbors
        .member_indices
        .iter()
        .map(|&i| &train.samples()[i])
        .collect();
    let clustering = two_medoid_cluster(&members)?;
    let scores = ch_distance_scores(&members, &clustering);

    // Member positions follow training order, so sorting by (score, position)
    // is sorting by (score, training index).
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by_key(|&k| (scores[k], k));
    let keep = members.len() - cfg.trim_count(members.len());
    let mut survivors: Vec<usize> = order[..keep]
        .iter()
        .map(|&k| neighbors.member_indices[k])
        .collect();
    survivors.sort_unstable();

    let decision = Decision::vote(survivors.clone(), train, cfg.tie_rule)?;
    Ok(KmnnTrace {
        neighbors,
        clustering: Some(clustering),
        scores,
        survivors,
        decision,
    })
}

pub fn kmnn_classify(
    query: &SparseBinaryVector,
    train: &LabeledDataset,
    cfg: &KmnnConfig,
) -> Result<Decision> {
    kmnn_trace(query, train, cfg).map(|t| t.decision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy;

    #[test]
    fn votes() {
        use Label::*;
        assert_eq!(majority_vote(&[Benign, Malware, Malware, Malware], TieRule::Malware).unwrap(), Malware);
        assert_eq!(majority_vote(&[Benign], TieRule::Malware).unwrap(), Benign);
        assert_eq!(majority_vote(&[Benign, Malware], TieRule::Malware).unwrap(), Malware);
        // same tie, other policies: the result follows the policy, not the order
        assert_eq!(majority_vote(&[Benign, Malware], TieRule::Benign).unwrap(), Benign);
        assert_eq!(majority_vote(&[Malware, Benign], TieRule::Benign).unwrap(), Benign);
        assert_eq!(majority_vote(&[Malware, Benign], TieRule::Malware).unwrap(), Malware);
        assert_eq!(majority_vote(&[Benign, Malware], TieRule::Index).unwrap(), Benign);
        assert_eq!(majority_vote(&[Malware, Benign], TieRule::Index).unwrap(), Malware);
        assert!(matches!(majority_vote(&[], TieRule::Malware), Err(Error::Empty(_))));
    }

    #[test]
    fn tie_rule_parse() {
        assert_eq!("index".parse::<TieRule>().unwrap(), TieRule::Index);
        assert!("coin".parse::<TieRule>().is_err());
    }

    #[test]
    fn toy_fnn_ann() {
        let train = toy::dataset();
        let x = toy::query();
        assert_eq!(fnn_classify(&x, &train).unwrap(), Label::Benign);
        let d = ann_classify(&x, &train, TieRule::Malware).unwrap();
        assert_eq!(d.voters, vec![1, 3, 6, 7]);
        assert_eq!(d.label, Label::Malware);
        assert_eq!(d.malware_share, 0.75);
    }

    #[test]
    fn toy_wann() {
        let train = toy::dataset();
        let w = compute_feature_weights(&train);
        assert_eq!(w.counts, vec![3, 3, 2, 3, 1, 1, 2, 3, 3, 1]);
        assert_eq!(w.counts.iter().map(|&c| c as usize).sum::<usize>(), train.total_ones());
        let sw: Vec<u64> = train.samples().iter().map(|s| w.sample_weight(s)).collect();
        assert_eq!(sw, vec![8, 6, 6, 5, 6, 2, 6, 5, 3, 9]);
        assert_eq!(w.sample_weight(&toy::query()), 6);
        let d = wann_classify(&toy::query(), &train, &w, TieRule::Malware).unwrap();
        assert_eq!(d.voters, vec![1, 2, 4, 6]);
        assert_eq!(d.label, Label::Malware);
    }

    #[test]
    fn toy_kmnn() {
        let cfg = KmnnConfig {
            trim_fraction: 0.25,
            tie_rule: TieRule::Malware,
        };
        let t = kmnn_trace(&toy::query(), &toy::dataset(), &cfg).unwrap();
        let c = t.clustering.as_ref().unwrap();
        let cluster_of = |pos: usize| c.assignment[pos];
        // members are S2, S4, S7, S8 at positions 0..4
        assert_eq!(cluster_of(0), cluster_of(3));
        assert_eq!(cluster_of(1), cluster_of(2));
        assert_ne!(cluster_of(0), cluster_of(1));
        assert_eq!(t.scores, vec![4, 4, 6, 6]);
        assert_eq!(t.survivors, vec![1, 3, 6]);
        assert_eq!(t.decision.label, Label::Malware);
    }

    #[test]
    fn degenerate_sets() {
        let train = LabeledDataset::new(
            vec![SparseBinaryVector::new(vec![1], 4).unwrap()],
            vec![Label::Malware],
            4,
        )
        .unwrap();
        let q = SparseBinaryVector::empty(4);
        assert_eq!(fnn_classify(&q, &train).unwrap(), Label::Malware);
        let w = compute_feature_weights(&train);
        assert_eq!(wann_classify(&q, &train, &w, TieRule::Benign).unwrap().label, Label::Malware);
        let t = kmnn_trace(&q, &train, &KmnnConfig::default()).unwrap();
        assert!(t.clustering.is_none());
        assert_eq!(t.decision.label, Label::Malware);
    }

    #[test]
    fn trim_counts() {
        let cfg = |f| KmnnConfig {
            trim_fraction: f,
            tie_rule: TieRule::Malware,
        };
        assert_eq!(cfg(0.25).trim_count(4), 1);
        assert_eq!(cfg(0.10).trim_count(30), 3);
        assert_eq!(cfg(0.10).trim_count(10), 1);
        assert_eq!(cfg(0.10).trim_count(2), 1);
        assert_eq!(cfg(0.10).trim_count(1), 0);
        assert_eq!(cfg(0.0).trim_count(7), 0);
        assert_eq!(cfg(0.99).trim_count(5), 4);
        assert!(cfg(1.0).validate().is_err());
        assert!(cfg(-0.1).validate().is_err());
    }

    #[test]
    fn all_zero_weights() {
        let train = LabeledDataset::new(
            vec![SparseBinaryVector::empty(3), SparseBinaryVector::empty(3)],
            vec![Label::Benign, Label::Malware],
            3,
        )
        .unwrap();
        assert_eq!(compute_feature_weights(&train).counts, vec![0, 0, 0]);
    }
}
