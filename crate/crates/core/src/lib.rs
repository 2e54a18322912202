//! Similarity-based Android malware detection over sparse binary feature
//! vectors: nearest-neighbor classifiers (FNN, ANN, WANN, KMNN), an
//! entropy-based similarity (PDME), random-forest feature ranking, and an
//! evaluation harness with maximum-achievable-accuracy bounds.
//!
//! ```
//! use simdetect::{ann_classify, toy, Label, TieRule};
//!
//! let train = toy::dataset();
//! let d = ann_classify(&toy::query(), &train, TieRule::Malware).unwrap();
//! assert_eq!(d.label, Label::Malware);
//! assert_eq!(d.voters, vec![1, 3, 6, 7]);
//! ```

pub mod classifiers;
pub mod error;
pub mod evaluation;
pub mod feature_space;
pub mod io;
pub mod kmedoids;
pub mod model;
pub mod pdme;
pub mod protocol;
pub mod ranking;
pub mod synth;
pub mod toy;

pub use classifiers::{
    ann_classify, ann_neighbors, compute_feature_weights, fnn_classify, fnn_decide, kmnn_classify,
    kmnn_trace, majority_vote, wann_classify, Decision, FeatureWeights, KmnnConfig, KmnnTrace,
    NeighborSet, TieRule,
};
pub use error::{Error, Result};
pub use evaluation::{
    compute_metrics, confusion, maa_bounds, roc_curve, ConfusionCounts, MaaBounds, MetricSet,
    RocCurve, RocPoint,
};
pub use feature_space::{
    distance, hamming_distance, lp_distance, nearest_indices, DenseBits, Label, LabeledDataset,
    Metric, SparseBinaryVector,
};
pub use io::{read_dataset_file, SparseDatasetFile};
pub use kmedoids::{ch_distance_scores, two_medoid_cluster, Cluster, MedoidClustering};
pub use model::{Algorithm, ClassifierConfig, Model};
pub use pdme::{pdme, pdme_classify, EntropyModel};
pub use protocol::{run_maa, run_protocol, EvaluationReport, ExperimentSpec, MaaRow, RankingMode};
pub use ranking::{
    fit_forest_importance, select_top_fraction, FeatureProjection, ForestConfig, RankedFeatures,
};
pub use synth::{generate_synthetic, SyntheticSpec};
