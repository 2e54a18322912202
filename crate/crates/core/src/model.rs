//! One entry point for the five detectors, with per-training-set state
//! (feature weights, entropy model) computed once.

use std::fmt;
use std::str::FromStr;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{
    ann_classify, compute_feature_weights, fnn_decide, kmnn_classify, wann_select, Decision,
    FeatureWeights, KmnnConfig, TieRule,
};
use crate::error::{Error, Result};
use crate::feature_space::{check_dims, LabeledDataset, SparseBinaryVector};
use crate::pdme::{pdme_neighbors, train_entropies, EntropyModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Fnn,
    Ann,
    Wann,
    Kmnn,
    Pdme,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Fnn,
        Algorithm::Ann,
        Algorithm::Wann,
        Algorithm::Kmnn,
        Algorithm::Pdme,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fnn => "fnn",
            Algorithm::Ann => "ann",
            Algorithm::Wann => "wann",
            Algorithm::Kmnn => "kmnn",
            Algorithm::Pdme => "pdme",
        }
    }

    /// FNN's single voter gives a score in {0, 1}, which makes a degenerate
    /// ROC curve.
    pub fn has_graded_score(self) -> bool {
        self != Algorithm::Fnn
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::param(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub tie_rule: TieRule,
    pub trim_fraction: f64,
    pub log_base: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            tie_rule: TieRule::Malware,
            trim_fraction: KmnnConfig::default().trim_fraction,
            log_base: std::f64::consts::E,
        }
    }
}

impl ClassifierConfig {
    pub fn kmnn(&self) -> KmnnConfig {
        KmnnConfig {
            trim_fraction: self.trim_fraction,
            tie_rule: self.tie_rule,
        }
    }
}

enum State {
    Plain,
    Weighted {
        weights: FeatureWeights,
        sample_weights: Vec<u64>,
    },
    Entropy {
        model: EntropyModel,
        entropies: Vec<f64>,
    },
}

/// A detector bound to a training set.
pub struct Model<'a> {
    algorithm: Algorithm,
    cfg: ClassifierConfig,
    train: &'a LabeledDataset,
    state: State,
}

impl<'a> Model<'a> {
    pub fn fit(algorithm: Algorithm, train: &'a LabeledDataset, cfg: ClassifierConfig) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("training set"));
        }
        cfg.kmnn().validate()?;
        let state = match algorithm {
            Algorithm::Wann => {
                let weights = compute_feature_weights(train);
                let sample_weights = train.samples().iter().map(|s| weights.sample_weight(s)).collect();
                State::Weighted {
                    weights,
                    sample_weights,
                }
            }
            Algorithm::Pdme => {
                let model = EntropyModel::fit(train, cfg.log_base)?;
                let entropies = train_entropies(train, &model)?;
                State::Entropy { model, entropies }
            }
            _ => State::Plain,
        };
        Ok(Self {
            algorithm,
            cfg,
            train,
            state,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn train(&self) -> &LabeledDataset {
        self.train
    }

    pub fn entropy_model(&self) -> Option<&EntropyModel> {
        match &self.state {
            State::Entropy { model, .. } => Some(model),
            _ => None,
        }
    }

    pub fn feature_weights(&self) -> Option<&FeatureWeights> {
        match &self.state {
            State::Weighted { weights, .. } => Some(weights),
            _ => None,
        }
    }

    pub fn decide(&self, query: &SparseBinaryVector) -> Result<Decision> {
        let train = self.train;
        match (&self.state, self.algorithm) {
            (_, Algorithm::Fnn) => fnn_decide(query, train),
            (_, Algorithm::Ann) => ann_classify(query, train, self.cfg.tie_rule),
            (_, Algorithm::Kmnn) => kmnn_classify(query, train, &self.cfg.kmnn()),
            (
                State::Weighted {
                    weights,
                    sample_weights,
                },
                Algorithm::Wann,
            ) => {
                check_dims(query.dim(), train.dim())?;
                let voters = wann_select(weights.sample_weight(query), sample_weights);
                Decision::vote(voters, train, self.cfg.tie_rule)
            }
            (State::Entropy { model, entropies }, Algorithm::Pdme) => {
                let (voters, _) = pdme_neighbors(query, train, entropies, model)?;
                Decision::vote(voters, train, self.cfg.tie_rule)
            }
            _ => unreachable!("state is built to match the algorithm"),
        }
    }

    /// Decisions for every sample of `queries`, in order.
    pub fn decide_all(&self, queries: &LabeledDataset) -> Result<Vec<Decision>> {
        #[cfg(feature = "parallel")]
        let it = queries.samples().par_iter();
        #[cfg(not(feature = "parallel"))]
        let it = queries.samples().iter();
        it.map(|q| self.decide(q)).collect()
    }
}
