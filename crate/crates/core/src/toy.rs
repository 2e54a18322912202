//! The ten-sample worked example: a training matrix over ten features and a
//! query `X = {4, 8}` (1-based), small enough to follow every detector by
//! hand.

use serde::Serialize;

use crate::classifiers::{
    ann_classify, compute_feature_weights, fnn_decide, kmnn_trace, wann_classify, Decision, KmnnTrace,
};
use crate::error::Result;
use crate::feature_space::{hamming_distance, Label, LabeledDataset, SparseBinaryVector};
use crate::kmedoids::Cluster;
use crate::model::ClassifierConfig;
use crate::pdme::{pdme, pdme_classify, EntropyModel};

pub const DIM: usize = 10;

/// Set features of each training sample, 1-based as usually written.
pub const ROWS_ONE_BASED: [&[u32]; 10] = [
    &[2, 7, 8],
    &[4, 9],
    &[1, 2],
    &[3, 8],
    &[2, 9],
    &[5, 10],
    &[1, 8],
    &[4, 7],
    &[3, 6],
    &[1, 4, 9],
];

pub const LABELS: [u8; 10] = [0, 0, 1, 1, 1, 0, 1, 1, 0, 0];

pub const QUERY_ONE_BASED: [u32; 2] = [4, 8];

fn zero_based(one_based: &[u32]) -> SparseBinaryVector {
    SparseBinaryVector::new(one_based.iter().map(|i| i - 1).collect(), DIM)
        .expect("toy rows are sorted and in range")
}

pub fn dataset() -> LabeledDataset {
    LabeledDataset::new(
        ROWS_ONE_BASED.iter().map(|r| zero_based(r)).collect(),
        LABELS.iter().map(|&l| Label::from_bit(l == 1)).collect(),
        DIM,
    )
    .expect("toy dataset is consistent")
}

pub fn query() -> SparseBinaryVector {
    zero_based(&QUERY_ONE_BASED)
}

/// Every intermediate table of the five detectors on one query.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Walkthrough {
    pub hamming: Vec<usize>,
    pub fnn: Decision,
    pub ann: Decision,
    pub min_distance: usize,
    pub feature_counts: Vec<u32>,
    pub sample_weights: Vec<u64>,
    pub query_weight: u64,
    pub wann: Decision,
    pub trim_fraction: f64,
    pub kmnn: KmnnTrace,
    pub pdme_distances: Vec<f64>,
    pub pdme: Decision,
}

pub fn walkthrough(
    train: &LabeledDataset,
    query: &SparseBinaryVector,
    cfg: &ClassifierConfig,
) -> Result<Walkthrough> {
    let hamming = train
        .samples()
        .iter()
        .map(|s| hamming_distance(query, s))
        .collect::<Result<Vec<_>>>()?;
    let weights = compute_feature_weights(train);
    let model = EntropyModel::fit(train, cfg.log_base)?;
    let pdme_distances = train
        .samples()
        .iter()
        .map(|s| pdme(query, s, &model))
        .collect::<Result<Vec<_>>>()?;
    Ok(Walkthrough {
        min_distance: hamming.iter().copied().min().unwrap_or(0),
        hamming,
        fnn: fnn_decide(query, train)?,
        ann: ann_classify(query, train, cfg.tie_rule)?,
        sample_weights: train.samples().iter().map(|s| weights.sample_weight(s)).collect(),
        query_weight: weights.sample_weight(query),
        wann: wann_classify(query, train, &weights, cfg.tie_rule)?,
        feature_counts: weights.counts,
        trim_fraction: cfg.trim_fraction,
        kmnn: kmnn_trace(query, train, &cfg.kmnn())?,
        pdme_distances,
        pdme: pdme_classify(query, train, &model, cfg.tie_rule)?,
    })
}

fn names(rows: &[usize]) -> String {
    let v: Vec<String> = rows.iter().map(|i| format!("S{}", i + 1)).collect();
    format!("{{{}}}", v.join(","))
}

fn one_based(v: &SparseBinaryVector) -> String {
    let v: Vec<String> = v.indices().iter().map(|i| (i + 1).to_string()).collect();
    v.join(" ")
}

impl Walkthrough {
    /// Plain-text tables; samples are `S1..Sn` and features are 1-based.
    pub fn render(&self, train: &LabeledDataset, query: &SparseBinaryVector) -> String {
        let mut out = String::new();
        let mut line = |s: String| {
            out.push_str(&s);
            out.push('\n');
        };
        line(format!("query X: {}", one_based(query)));
        line(String::new());
        line("sample  features        label  hamming  weight  pdme".into());
        for (i, (s, l)) in train.iter().enumerate() {
            line(format!(
                "{:<7} {:<15} {:<6} {:<8} {:<7} {:.5}",
                format!("S{}", i + 1),
                one_based(s),
                l.as_u8(),
                self.hamming[i],
                self.sample_weights[i],
                self.pdme_distances[i]
            ));
        }
        line(String::new());
        let feats: Vec<String> = (1..=self.feature_counts.len()).map(|j| format!("{j:>3}")).collect();
        let counts: Vec<String> = self.feature_counts.iter().map(|c| format!("{c:>3}")).collect();
        line(format!("feature {}", feats.join("")));
        line(format!("count   {}", counts.join("")));
        line(String::new());

        line(format!("FNN   first nearest {} -> {}", names(&self.fnn.voters), self.fnn.label));
        line(format!(
            "ANN   nearest {} at distance {} -> {}",
            names(&self.ann.voters),
            self.min_distance,
            self.ann.label
        ));
        line(format!(
            "WANN  w(X) = {}, selected {} -> {}",
            self.query_weight,
            names(&self.wann.voters),
            self.wann.label
        ));
        let k = &self.kmnn;
        let members = &k.neighbors.member_indices;
        if let Some(c) = &k.clustering {
            let cluster = |which| -> Vec<usize> { c.members_of(which).iter().map(|&p| members[p]).collect() };
            line(format!(
                "KMNN  heads S{} / S{}, clusters {} / {}",
                members[c.head_a] + 1,
                members[c.head_b] + 1,
                names(&cluster(Cluster::A)),
                names(&cluster(Cluster::B))
            ));
            let scores: Vec<String> = members
                .iter()
                .zip(&k.scores)
                .map(|(i, s)| format!("S{}={}", i + 1, s))
                .collect();
            line(format!("      head-distance scores {}", scores.join(" ")));
        }
        line(format!(
            "      trim {}: survivors {} -> {}",
            self.trim_fraction,
            names(&k.survivors),
            k.decision.label
        ));
        line(format!("PDME  nearest {} -> {}", names(&self.pdme.voters), self.pdme.label));
        line(String::new());
        line(format!(
            "FNN={} ANN={} WANN={} KMNN={} PDME={}",
            self.fnn.label, self.ann.label, self.wann.label, k.decision.label, self.pdme.label
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example_tables() {
        let cfg = ClassifierConfig {
            trim_fraction: 0.25,
            ..Default::default()
        };
        let w = walkthrough(&dataset(), &query(), &cfg).unwrap();
        assert_eq!(w.hamming, vec![3, 2, 4, 2, 4, 4, 2, 2, 4, 3]);
        assert_eq!(w.feature_counts, vec![3, 3, 2, 3, 1, 1, 2, 3, 3, 1]);
        assert_eq!(w.sample_weights, vec![8, 6, 6, 5, 6, 2, 6, 5, 3, 9]);
        assert_eq!(w.query_weight, 6);
        assert_eq!(w.kmnn.scores, vec![4, 4, 6, 6]);
        assert_eq!(w.kmnn.survivors, vec![1, 3, 6]);
        let text = w.render(&dataset(), &query());
        assert!(text.contains("clusters {S2,S8} / {S4,S7}"), "{text}");
        assert!(text.contains("FNN=0 ANN=1 WANN=1 KMNN=1"), "{text}");
    }
}
