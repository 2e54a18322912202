//! Sample representation and distance kernels.
//!
//! A sample is a point of `{0,1}^m` stored as the sorted list of positions
//! holding a 1. On such vectors the Hamming distance is the size of the
//! symmetric difference of the two index sets, and the Manhattan and
//! Minkowski distances collapse onto it (`L_p = H^(1/p)`), so every metric
//! here induces the same nearest-neighbor sets.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::classifiers::NeighborSet;
use crate::error::{Error, Result};

/// Largest dimension the packed bitset backend accepts by default.
pub const DEFAULT_DENSE_CAP: usize = 1 << 16;

/// Binary class label. `Malware` is the positive class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Benign = 0,
    Malware = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn is_malware(self) -> bool {
        self == Label::Malware
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Label::Malware
        } else {
            Label::Benign
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.as_u8()
    }
}

impl TryFrom<u8> for Label {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Label::Benign),
            1 => Ok(Label::Malware),
            other => Err(Error::InvalidLabel(other as i64)),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// One sample `x ∈ {0,1}^m`, stored as strictly increasing 0-based indices of
/// its set bits.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SparseBinaryVector {
    indices: Vec<u32>,
    dim: usize,
}

impl SparseBinaryVector {
    /// Builds a vector from indices that must already be strictly increasing
    /// and inside `[0, dim)`.
    pub fn new(indices: Vec<u32>, dim: usize) -> Result<Self> {
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::UnsortedIndices {
                    prev: w[0],
                    next: w[1],
                });
            }
        }
        if let Some(&last) = indices.last() {
            if last as usize >= dim {
                return Err(Error::IndexOutOfRange { index: last, dim });
            }
        }
        Ok(Self { indices, dim })
    }

    /// Sorts and deduplicates `positions` before validating the range.
    pub fn from_positions(positions: impl IntoIterator<Item = u32>, dim: usize) -> Result<Self> {
        let mut indices: Vec<u32> = positions.into_iter().collect();
        indices.sort_unstable();
        indices.dedup();
        Self::new(indices, dim)
    }

    /// Builds a vector from a dense 0/1 slice; any non-zero entry counts as set.
    pub fn from_dense(bits: &[u8]) -> Self {
        let indices = bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0)
            .map(|(i, _)| i as u32)
            .collect();
        Self {
            indices,
            dim: bits.len(),
        }
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            indices: Vec::new(),
            dim,
        }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of set bits.
    pub fn count_ones(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, feature: u32) -> bool {
        self.indices.binary_search(&feature).is_ok()
    }

    pub fn to_dense(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.dim];
        for &i in &self.indices {
            out[i as usize] = 1;
        }
        out
    }

    /// Index-set union, same dimension.
    pub fn union(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim, other.dim)?;
        let (a, b) = (&self.indices, &other.indices);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Ok(Self {
            indices: out,
            dim: self.dim,
        })
    }
}

/// A labeled training or test set sharing one dimension `m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDataset {
    samples: Vec<SparseBinaryVector>,
    labels: Vec<Label>,
    dim: usize,
}

impl LabeledDataset {
    pub fn new(samples: Vec<SparseBinaryVector>, labels: Vec<Label>, dim: usize) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: samples.len(),
                right: labels.len(),
            });
        }
        for s in &samples {
            check_dims(s.dim, dim)?;
        }
        Ok(Self {
            samples,
            labels,
            dim,
        })
    }

    pub fn samples(&self) -> &[SparseBinaryVector] {
        &self.samples
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, i: usize) -> (&SparseBinaryVector, Label) {
        (&self.samples[i], self.labels[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SparseBinaryVector, Label)> {
        self.samples.iter().zip(self.labels.iter().copied())
    }

    /// Total number of set bits across all samples.
    pub fn total_ones(&self) -> usize {
        self.samples.iter().map(|s| s.count_ones()).sum()
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            samples: rows.iter().map(|&r| self.samples[r].clone()).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            dim: self.dim,
        }
    }

    pub fn into_parts(self) -> (Vec<SparseBinaryVector>, Vec<Label>, usize) {
        (self.samples, self.labels, self.dim)
    }
}

/// Distance used to rank training samples against a query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Hamming,
    Manhattan,
    Minkowski(u32),
}

pub(crate) fn check_dims(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::DimensionMismatch { left, right });
    }
    Ok(())
}

/// Size of the intersection of two strictly increasing index lists.
pub(crate) fn intersection_count(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        let (x, y) = (a[i], b[j]);
        n += (x == y) as usize;
        i += (x <= y) as usize;
        j += (y <= x) as usize;
    }
    n
}

/// `#((X ∪ Y) − (X ∩ Y))` without materializing either set.
#[inline]
pub(crate) fn symmetric_difference_count(a: &[u32], b: &[u32]) -> usize {
    a.len() + b.len() - 2 * intersection_count(a, b)
}

/// Hamming distance between two binary vectors of equal dimension.
pub fn hamming_distance(a: &SparseBinaryVector, b: &SparseBinaryVector) -> Result<usize> {
    check_dims(a.dim, b.dim)?;
    Ok(symmetric_difference_count(&a.indices, &b.indices))
}

/// `(Σ|x_i − y_i|^p)^(1/p)` over the dense coordinates. Every non-zero
/// coordinate difference of binary vectors is 1, so the sum is the Hamming
/// distance.
pub fn lp_distance(a: &SparseBinaryVector, b: &SparseBinaryVector, p: u32) -> Result<f64> {
    if p < 1 {
        return Err(Error::param(format!("Minkowski order must be >= 1, got {p}")));
    }
    let h = hamming_distance(a, b)? as f64;
    Ok(match p {
        1 => h,
        2 => h.sqrt(),
        _ => h.powf(1.0 / p as f64),
    })
}

/// Distance under `metric`, as a real.
pub fn distance(a: &SparseBinaryVector, b: &SparseBinaryVector, metric: Metric) -> Result<f64> {
    match metric {
        Metric::Hamming => hamming_distance(a, b).map(|d| d as f64),
        Metric::Manhattan => lp_distance(a, b, 1),
        Metric::Minkowski(p) => lp_distance(a, b, p),
    }
}

/// All training samples at the minimum distance from `query`, in ascending
/// training-index order.
pub fn nearest_indices(
    query: &SparseBinaryVector,
    train: &LabeledDataset,
    metric: Metric,
) -> Result<NeighborSet> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    check_dims(query.dim, train.dim)?;
    if let Metric::Minkowski(p) = metric {
        if p < 1 {
            return Err(Error::param(format!("Minkowski order must be >= 1, got {p}")));
        }
    }
    if metric == Metric::Hamming {
        let (members, d) = hamming_argmin(query, train);
        return Ok(NeighborSet::from_members(members, train, d as f64));
    }

    let mut best = f64::INFINITY;
    let mut members = Vec::new();
    for (i, s) in train.samples.iter().enumerate() {
        let d = distance(query, s, metric)?;
        if d < best {
            best = d;
            members.clear();
            members.push(i);
        } else if d == best {
            members.push(i);
        }
    }
    Ok(NeighborSet::from_members(members, train, best))
}

/// Integer Hamming argmin scan; caller has checked dims and non-emptiness.
pub(crate) fn hamming_argmin(query: &SparseBinaryVector, train: &LabeledDataset) -> (Vec<usize>, usize) {
    let q = query.indices();
    let mut best = usize::MAX;
    let mut members = Vec::new();
    for (i, s) in train.samples.iter().enumerate() {
        let si = s.indices();
        // |q| + |s| - 2|q ∩ s| >= ||q| - |s||, so skip hopeless rows cheaply.
        if q.len().abs_diff(si.len()) > best {
            continue;
        }
        let d = symmetric_difference_count(q, si);
        if d < best {
            best = d;
            members.clear();
            members.push(i);
        } else if d == best {
            members.push(i);
        }
    }
    (members, best)
}

/// Packed bitset form of a sample, for dimensions up to a configurable cap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenseBits {
    words: Vec<u64>,
    dim: usize,
}

impl DenseBits {
    pub fn from_sparse(v: &SparseBinaryVector) -> Result<Self> {
        Self::from_sparse_capped(v, DEFAULT_DENSE_CAP)
    }

    pub fn from_sparse_capped(v: &SparseBinaryVector, cap: usize) -> Result<Self> {
        if v.dim > cap {
            return Err(Error::param(format!(
                "dimension {} exceeds dense backend cap {cap}",
                v.dim
            )));
        }
        let mut words = vec![0u64; v.dim.div_ceil(64)];
        for &i in &v.indices {
            words[i as usize / 64] |= 1u64 << (i % 64);
        }
        Ok(Self { words, dim: v.dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Popcount of the XOR of the two bitsets.
    pub fn hamming(&self, other: &Self) -> Result<usize> {
        check_dims(self.dim, other.dim)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v1(one_based: &[u32], dim: usize) -> SparseBinaryVector {
        SparseBinaryVector::new(one_based.iter().map(|i| i - 1).collect(), dim).unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, dim: usize, p: f64) -> SparseBinaryVector {
        let bits: Vec<u8> = (0..dim).map(|_| rng.random_bool(p) as u8).collect();
        SparseBinaryVector::from_dense(&bits)
    }

    fn dense_oracle(a: &SparseBinaryVector, b: &SparseBinaryVector) -> usize {
        let (da, db) = (a.to_dense(), b.to_dense());
        let mut n = 0;
        for j in 0..da.len() {
            if da[j] != db[j] {
                n += 1;
            }
        }
        n
    }

    fn dense_lp_oracle(a: &SparseBinaryVector, b: &SparseBinaryVector, p: u32) -> f64 {
        let (da, db) = (a.to_dense(), b.to_dense());
        let s: f64 = da
            .iter()
            .zip(&db)
            .map(|(&x, &y)| (x as f64 - y as f64).abs().powi(p as i32))
            .sum();
        s.powf(1.0 / p as f64)
    }

    #[test]
    fn rejects_bad_indices() {
        assert!(matches!(
            SparseBinaryVector::new(vec![3, 3], 10),
            Err(Error::UnsortedIndices { .. })
        ));
        assert!(matches!(
            SparseBinaryVector::new(vec![5, 2], 10),
            Err(Error::UnsortedIndices { .. })
        ));
        assert!(matches!(
            SparseBinaryVector::new(vec![10], 10),
            Err(Error::IndexOutOfRange { index: 10, dim: 10 })
        ));
        let v = SparseBinaryVector::from_positions([7, 1, 7, 3], 8).unwrap();
        assert_eq!(v.indices(), &[1, 3, 7]);
        assert_eq!(v.to_dense().iter().filter(|&&b| b == 1).count(), 3);
    }

    #[test]
    fn toy_distances() {
        let x = v1(&[4, 8], 10);
        let s1 = v1(&[2, 7, 8], 10);
        let s2 = v1(&[4, 9], 10);
        assert_eq!(hamming_distance(&x, &s1).unwrap(), 3);
        assert_eq!(hamming_distance(&x, &x).unwrap(), 0);
        assert_eq!(lp_distance(&x, &s2, 1).unwrap(), 2.0);
        assert_eq!(lp_distance(&x, &x, 3).unwrap(), 0.0);
        assert!((lp_distance(&x, &s1, 2).unwrap() - 3f64.sqrt()).abs() < 1e-12);
        assert!((lp_distance(&x, &s1, 2).unwrap() - dense_lp_oracle(&x, &s1, 2)).abs() < 1e-12);
    }

    #[test]
    fn dimension_and_order_errors() {
        let a = SparseBinaryVector::empty(4);
        let b = SparseBinaryVector::empty(5);
        assert!(matches!(
            hamming_distance(&a, &b),
            Err(Error::DimensionMismatch { left: 4, right: 5 })
        ));
        assert!(lp_distance(&a, &a, 0).is_err());
        assert!(lp_distance(&a, &b, 2).is_err());
        let empty = LabeledDataset::new(vec![], vec![], 4).unwrap();
        assert!(matches!(
            nearest_indices(&a, &empty, Metric::Hamming),
            Err(Error::Empty(_))
        ));
        assert!(LabeledDataset::new(vec![a.clone()], vec![], 4).is_err());
        assert!(LabeledDataset::new(vec![b], vec![Label::Benign], 4).is_err());
    }

    #[test]
    fn sparse_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let a = random_vec(&mut rng, 64, 0.3);
            let b = random_vec(&mut rng, 64, 0.3);
            let d = hamming_distance(&a, &b).unwrap();
            assert_eq!(d, dense_oracle(&a, &b));
            let packed = DenseBits::from_sparse(&a).unwrap().hamming(&DenseBits::from_sparse(&b).unwrap());
            assert_eq!(packed.unwrap(), d);
        }
    }

    #[test]
    fn metric_axioms_and_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let a = random_vec(&mut rng, 64, 0.25);
            let b = random_vec(&mut rng, 64, 0.25);
            let c = random_vec(&mut rng, 64, 0.25);
            let ab = hamming_distance(&a, &b).unwrap();
            assert_eq!(ab, hamming_distance(&b, &a).unwrap());
            assert_eq!(ab == 0, a == b);
            assert!(
                hamming_distance(&a, &c).unwrap()
                    <= ab + hamming_distance(&b, &c).unwrap()
            );
            let bound = a.count_ones() + b.count_ones();
            assert!(ab <= bound);
            assert_eq!(ab == bound, intersection_count(a.indices(), b.indices()) == 0);
        }
    }

    #[test]
    fn dense_backend_cap() {
        let v = SparseBinaryVector::empty(100);
        assert!(DenseBits::from_sparse_capped(&v, 99).is_err());
        let d = DenseBits::from_sparse_capped(&v, 100).unwrap();
        assert_eq!(d.dim(), 100);
        let w = DenseBits::from_sparse(&SparseBinaryVector::empty(101)).unwrap();
        assert!(d.hamming(&w).is_err());
    }

    #[test]
    fn toy_nearest() {
        let rows: [&[u32]; 10] = [
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
        let labels = [0u8, 0, 1, 1, 1, 0, 1, 1, 0, 0];
        let train = LabeledDataset::new(
            rows.iter().map(|r| v1(r, 10)).collect(),
            labels.iter().map(|&l| Label::try_from(l).unwrap()).collect(),
            10,
        )
        .unwrap();
        let x = v1(&[4, 8], 10);
        for metric in [
            Metric::Hamming,
            Metric::Manhattan,
            Metric::Minkowski(2),
            Metric::Minkowski(3),
        ] {
            let nn = nearest_indices(&x, &train, metric).unwrap();
            assert_eq!(nn.member_indices, vec![1, 3, 6, 7]);
        }
        let nn = nearest_indices(&x, &train, Metric::Hamming).unwrap();
        assert_eq!(nn.min_distance, 2.0);

        let self_query = train.samples()[9].clone();
        let nn = nearest_indices(&self_query, &train, Metric::Hamming).unwrap();
        assert_eq!(nn.member_indices, vec![9]);
        assert_eq!(nn.min_distance, 0.0);
    }

    #[test]
    fn argmin_invariant_across_metrics() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let samples: Vec<_> = (0..20).map(|_| random_vec(&mut rng, 16, 0.4)).collect();
            let labels = (0..20).map(|_| Label::from_bit(rng.random_bool(0.5))).collect();
            let train = LabeledDataset::new(samples, labels, 16).unwrap();
            let q = random_vec(&mut rng, 16, 0.4);

            // exhaustive scan on dense L_p values
            let scan = |p: u32| -> Vec<usize> {
                let d: Vec<f64> = train.samples().iter().map(|s| dense_lp_oracle(&q, s, p)).collect();
                let m = d.iter().cloned().fold(f64::INFINITY, f64::min);
                (0..d.len()).filter(|&i| d[i] == m).collect()
            };
            let expected = scan(1);
            assert_eq!(scan(2), expected);
            assert_eq!(scan(3), expected);
            for metric in [
                Metric::Hamming,
                Metric::Manhattan,
                Metric::Minkowski(2),
                Metric::Minkowski(3),
            ] {
                assert_eq!(nearest_indices(&q, &train, metric).unwrap().member_indices, expected);
            }
        }
    }

    #[test]
    fn union_merges() {
        let a = SparseBinaryVector::new(vec![1, 4, 9], 10).unwrap();
        let b = SparseBinaryVector::new(vec![0, 4, 8], 10).unwrap();
        assert_eq!(a.union(&b).unwrap().indices(), &[0, 1, 4, 8, 9]);
    }

    #[test]
    fn label_conversions() {
        assert_eq!(Label::try_from(1u8).unwrap(), Label::Malware);
        assert!(Label::try_from(2u8).is_err());
        assert_eq!(serde_json::to_string(&Label::Benign).unwrap(), "0");
    }
}
