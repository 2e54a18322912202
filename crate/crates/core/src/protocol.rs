//! Repeated train/validation/test holdout over a grid of feature fractions.
//!
//! Each repeat shuffles the data with its own seed, splits it 60/20/20 (by
//! default), ranks features on the training fold, projects every fold onto
//! the top α% features and scores each detector on the validation and test
//! folds. Reports are deterministic functions of the data and the
//! [`ExperimentSpec`].

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{
    compute_metrics, confusion, maa_bounds, roc_from_decisions, MaaBounds, MetricSet, RocPoint,
};
use crate::feature_space::LabeledDataset;
use crate::model::{Algorithm, ClassifierConfig, Model};
use crate::ranking::{fit_forest_importance, select_top_fraction, FeatureProjection, ForestConfig, RankedFeatures};

pub const DEFAULT_ALPHA_GRID: [u32; 10] = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankingMode {
    /// Rank on each repeat's training fold.
    #[default]
    PerFold,
    /// Rank once on the whole dataset (leaks test labels into selection).
    Global,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub algorithms: Vec<Algorithm>,
    pub alphas: Vec<u32>,
    pub repeats: usize,
    pub master_seed: u64,
    /// Explicit per-repeat seeds; derived from `master_seed` when absent.
    pub seeds: Option<Vec<u64>>,
    /// Train and validation fractions; the test fold takes the rest.
    pub train_fraction: f64,
    pub valid_fraction: f64,
    pub classifier: ClassifierConfig,
    pub forest: ForestConfig,
    pub ranking: RankingMode,
    /// Include ROC points of the test fold in the report.
    pub keep_roc: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            algorithms: vec![Algorithm::Fnn, Algorithm::Ann, Algorithm::Wann, Algorithm::Kmnn],
            alphas: vec![100],
            repeats: 10,
            master_seed: 0,
            seeds: None,
            train_fraction: 0.6,
            valid_fraction: 0.2,
            classifier: ClassifierConfig::default(),
            forest: ForestConfig::default(),
            ranking: RankingMode::default(),
            keep_roc: false,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::param("no algorithm selected"));
        }
        if self.alphas.is_empty() {
            return Err(Error::param("empty alpha grid"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(1..=100).contains(*a)) {
            return Err(Error::param(format!("alpha must be in [1, 100], got {a}")));
        }
        if self.repeats == 0 {
            return Err(Error::param("repeats must be >= 1"));
        }
        let (t, v) = (self.train_fraction, self.valid_fraction);
        if !(t > 0.0 && v > 0.0 && t + v < 1.0) {
            return Err(Error::param(format!(
                "split fractions must be positive and leave room for a test fold, got {t}/{v}"
            )));
        }
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.repeats {
                return Err(Error::param(format!(
                    "{} seeds given for {} repeats",
                    seeds.len(),
                    self.repeats
                )));
            }
            let mut sorted = seeds.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != seeds.len() {
                return Err(Error::param("repeat seeds must be distinct"));
            }
        }
        self.classifier.kmnn().validate()?;
        self.forest.validate()
    }

    /// Per-repeat seeds: the explicit list, or distinct draws from the master seed.
    pub fn repeat_seeds(&self) -> Vec<u64> {
        if let Some(s) = &self.seeds {
            return s.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        let mut out: Vec<u64> = Vec::with_capacity(self.repeats);
        while out.len() < self.repeats {
            let s = rng.next_u64();
            if !out.contains(&s) {
                out.push(s);
            }
        }
        out
    }

    fn needs_ranking(&self) -> bool {
        self.alphas.iter().any(|&a| a != 100)
    }
}

/// Row indices of one shuffled split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

/// Fold sizes: `floor(t·n)`, `floor(v·n)` and the remainder.
pub fn fold_sizes(n: usize, train_fraction: f64, valid_fraction: f64) -> (usize, usize, usize) {
    let train = (train_fraction * n as f64 + 1e-9).floor() as usize;
    let valid = (valid_fraction * n as f64 + 1e-9).floor() as usize;
    (train, valid, n - train - valid)
}

pub fn split_indices(n: usize, spec: &ExperimentSpec, seed: u64) -> Result<Split> {
    let (nt, nv, ns) = fold_sizes(n, spec.train_fraction, spec.valid_fraction);
    if nt == 0 || nv == 0 || ns == 0 {
        return Err(Error::param(format!(
            "{n} samples cannot fill train/validation/test folds ({nt}/{nv}/{ns})"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Split {
        train: idx[..nt].to_vec(),
        valid: idx[nt..nt + nv].to_vec(),
        test: idx[nt + nv..].to_vec(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub repeat: usize,
    pub seed: u64,
    pub alpha: u32,
    pub features: usize,
    pub algorithm: Algorithm,
    pub valid: MetricSet,
    pub test: MetricSet,
    /// Trapezoidal ROC area on the test fold; absent for FNN.
    pub auc_roc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roc: Option<Vec<RocPoint>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaaRow {
    pub repeat: usize,
    pub seed: u64,
    pub alpha: u32,
    pub valid: MaaBounds,
    pub test: MaaBounds,
}

/// Arithmetic mean over repeats of the headline test-fold numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub alpha: u32,
    pub algorithm: Algorithm,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr_paper: f64,
    pub fpr_standard: f64,
    pub auc_paper: f64,
    pub auc_roc: Option<f64>,
    pub valid_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaaMeanRow {
    pub alpha: u32,
    pub max_accuracy: f64,
    pub min_fpr: f64,
    pub max_auc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub spec: ExperimentSpec,
    pub n_samples: usize,
    pub dim: usize,
    pub seeds: Vec<u64>,
    pub fold_sizes: [usize; 3],
    pub runs: Vec<RunRow>,
    pub maa: Vec<MaaRow>,
    pub mean: Vec<MeanRow>,
    pub maa_mean: Vec<MaaMeanRow>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    s / n as f64
}

struct RepeatOutput {
    runs: Vec<RunRow>,
    maa: Vec<MaaRow>,
}

fn run_repeat(
    data: &LabeledDataset,
    spec: &ExperimentSpec,
    repeat: usize,
    seed: u64,
    global_rank: Option<&RankedFeatures>,
    algorithms: &[Algorithm],
) -> Result<RepeatOutput> {
    let split = split_indices(data.len(), spec, seed)?;
    let train = data.subset(&split.train);
    let valid = data.subset(&split.valid);
    let test = data.subset(&split.test);

    let ranked = match (global_rank, spec.needs_ranking()) {
        (Some(r), _) => Some(r.clone()),
        (None, true) => {
            let forest = ForestConfig {
                seed: seed ^ spec.forest.seed,
                ..spec.forest
            };
            Some(fit_forest_importance(&train, &forest)?)
        }
        (None, false) => None,
    };

    let mut runs = Vec::new();
    let mut maa = Vec::new();
    for &alpha in &spec.alphas {
        let projection = match &ranked {
            Some(r) => select_top_fraction(r, alpha)?,
            None => FeatureProjection::identity(data.dim()),
        };
        let (ptrain, pvalid, ptest) = if alpha == 100 {
            (train.clone(), valid.clone(), test.clone())
        } else {
            (
                projection.project_dataset(&train)?,
                projection.project_dataset(&valid)?,
                projection.project_dataset(&test)?,
            )
        };

        maa.push(MaaRow {
            repeat,
            seed,
            alpha,
            valid: maa_bounds(&pvalid, &ptrain)?,
            test: maa_bounds(&ptest, &ptrain)?,
        });

        for &algorithm in algorithms {
            let model = Model::fit(algorithm, &ptrain, spec.classifier)?;
            let score = |fold: &LabeledDataset| -> Result<(MetricSet, Vec<crate::Decision>)> {
                let decisions = model.decide_all(fold)?;
                let predicted: Vec<_> = decisions.iter().map(|d| d.label).collect();
                Ok((compute_metrics(&confusion(&predicted, fold.labels())?)?, decisions))
            };
            let (valid_metrics, _) = score(&pvalid)?;
            let (test_metrics, test_decisions) = score(&ptest)?;
            let roc = if algorithm.has_graded_score() {
                Some(roc_from_decisions(&test_decisions, ptest.labels())?)
            } else {
                None
            };
            runs.push(RunRow {
                repeat,
                seed,
                alpha,
                features: projection.target_dim(),
                algorithm,
                valid: valid_metrics,
                test: test_metrics,
                auc_roc: roc.as_ref().map(|r| r.auc()),
                roc: roc.filter(|_| spec.keep_roc).map(|r| r.points),
            });
        }
    }
    Ok(RepeatOutput { runs, maa })
}

struct Repeats {
    seeds: Vec<u64>,
    fold_sizes: [usize; 3],
    runs: Vec<RunRow>,
    maa: Vec<MaaRow>,
}

fn run_repeats(data: &LabeledDataset, spec: &ExperimentSpec, algorithms: &[Algorithm]) -> Result<Repeats> {
    let (nt, nv, ns) = fold_sizes(data.len(), spec.train_fraction, spec.valid_fraction);
    if nt == 0 || nv == 0 || ns == 0 {
        return Err(Error::param(format!(
            "{} samples cannot fill train/validation/test folds ({nt}/{nv}/{ns})",
            data.len()
        )));
    }
    let seeds = spec.repeat_seeds();

    let global_rank = if spec.ranking == RankingMode::Global && spec.needs_ranking() {
        let forest = ForestConfig {
            seed: spec.master_seed ^ spec.forest.seed,
            ..spec.forest
        };
        Some(fit_forest_importance(data, &forest)?)
    } else {
        None
    };

    let job = |(r, &seed): (usize, &u64)| run_repeat(data, spec, r, seed, global_rank.as_ref(), algorithms);
    #[cfg(feature = "parallel")]
    let outputs: Vec<Result<RepeatOutput>> = seeds.par_iter().enumerate().map(job).collect();
    #[cfg(not(feature = "parallel"))]
    let outputs: Vec<Result<RepeatOutput>> = seeds.iter().enumerate().map(job).collect();

    let mut runs = Vec::new();
    let mut maa = Vec::new();
    for o in outputs {
        let o = o?;
        runs.extend(o.runs);
        maa.extend(o.maa);
    }
    Ok(Repeats {
        seeds,
        fold_sizes: [nt, nv, ns],
        runs,
        maa,
    })
}

/// MAA bounds only, on exactly the splits and projections `run_protocol`
/// uses for the same spec. `spec.algorithms` is ignored.
pub fn run_maa(data: &LabeledDataset, spec: &ExperimentSpec) -> Result<Vec<MaaRow>> {
    ExperimentSpec {
        algorithms: vec![Algorithm::Ann],
        ..spec.clone()
    }
    .validate()?;
    Ok(run_repeats(data, spec, &[])?.maa)
}

pub fn run_protocol(data: &LabeledDataset, spec: &ExperimentSpec) -> Result<EvaluationReport> {
    spec.validate()?;
    let Repeats {
        seeds,
        fold_sizes: folds,
        runs,
        maa,
    } = run_repeats(data, spec, &spec.algorithms)?;

    let mut mean_rows = Vec::new();
    let mut maa_mean = Vec::new();
    for &alpha in &spec.alphas {
        for &algorithm in &spec.algorithms {
            let rows: Vec<&RunRow> = runs
                .iter()
                .filter(|r| r.alpha == alpha && r.algorithm == algorithm)
                .collect();
            let m = |f: fn(&MetricSet) -> f64| mean(rows.iter().map(|r| f(&r.test)));
            mean_rows.push(MeanRow {
                alpha,
                algorithm,
                accuracy: m(|s| s.accuracy),
                precision: m(|s| s.precision),
                recall: m(|s| s.recall),
                f1: m(|s| s.f1),
                fpr_paper: m(|s| s.fpr_paper),
                fpr_standard: m(|s| s.fpr_standard),
                auc_paper: m(|s| s.auc_paper),
                auc_roc: algorithm
                    .has_graded_score()
                    .then(|| mean(rows.iter().filter_map(|r| r.auc_roc))),
                valid_accuracy: mean(rows.iter().map(|r| r.valid.accuracy)),
            });
        }
        let rows: Vec<&MaaRow> = maa.iter().filter(|r| r.alpha == alpha).collect();
        maa_mean.push(MaaMeanRow {
            alpha,
            max_accuracy: mean(rows.iter().map(|r| r.test.max_accuracy)),
            min_fpr: mean(rows.iter().map(|r| r.test.min_fpr)),
            max_auc: mean(rows.iter().map(|r| r.test.max_auc)),
        });
    }

    Ok(EvaluationReport {
        spec: spec.clone(),
        n_samples: data.len(),
        dim: data.dim(),
        seeds,
        fold_sizes: folds,
        runs,
        maa,
        mean: mean_rows,
        maa_mean,
    })
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Mean test metrics laid out as the detection literature tabulates
    /// them: one row per feature fraction, then Acc / FPR / AUC for every
    /// algorithm and for the MAA bound. All three are percentages with two
    /// decimals; FPR is `ρ / (τ + δ)`.
    pub fn to_table_csv(&self) -> String {
        let mut out = String::from("FR");
        for a in &self.spec.algorithms {
            let name = a.name().to_ascii_uppercase();
            out.push_str(&format!(",{name} Acc,{name} FPR,{name} AUC"));
        }
        out.push_str(",MAA Acc,MAA FPR,MAA AUC\n");
        for &alpha in &self.spec.alphas {
            out.push_str(&format!("{alpha}%"));
            for &a in &self.spec.algorithms {
                let r = self
                    .mean
                    .iter()
                    .find(|r| r.alpha == alpha && r.algorithm == a)
                    .expect("one mean row per (alpha, algorithm)");
                out.push_str(&format!(
                    ",{:.2},{:.2},{:.2}",
                    100.0 * r.accuracy,
                    100.0 * r.fpr_paper,
                    100.0 * r.auc_paper
                ));
            }
            let m = self
                .maa_mean
                .iter()
                .find(|r| r.alpha == alpha)
                .expect("one MAA row per alpha");
            out.push_str(&format!(
                ",{:.2},{:.2},{:.2}\n",
                100.0 * m.max_accuracy,
                100.0 * m.min_fpr,
                100.0 * m.max_auc
            ));
        }
        out
    }

    /// One line per (repeat, alpha, algorithm) with test and validation metrics.
    pub fn to_runs_csv(&self) -> String {
        let mut out = String::from(
            "repeat,seed,alpha,features,algorithm,fold,accuracy,precision,recall,f1,fpr_paper,fpr_standard,auc_paper,auc_roc\n",
        );
        for r in &self.runs {
            for (fold, m) in [("valid", &r.valid), ("test", &r.test)] {
                let auc_roc = match (fold, r.auc_roc) {
                    ("test", Some(a)) => a.to_string(),
                    _ => String::new(),
                };
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    r.repeat,
                    r.seed,
                    r.alpha,
                    r.features,
                    r.algorithm,
                    fold,
                    m.accuracy,
                    m.precision,
                    m.recall,
                    m.f1,
                    m.fpr_paper,
                    m.fpr_standard,
                    m.auc_paper,
                    auc_roc
                ));
            }
        }
        out
    }
}
