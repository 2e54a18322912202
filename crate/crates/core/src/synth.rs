//! Seeded planted-block datasets for desk-scale experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_space::{Label, LabeledDataset, SparseBinaryVector};

/// Each class sets the bits of its own half-open feature block; every bit
/// of every sample is then flipped independently with probability `noise`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_per_class: usize,
    pub dim: usize,
    pub benign_block: (usize, usize),
    pub malware_block: (usize, usize),
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Disjoint adjacent blocks `[0, block)` and `[block, 2·block)`.
    pub fn two_blocks(n_per_class: usize, dim: usize, block: usize, noise: f64, seed: u64) -> Self {
        Self {
            n_per_class,
            dim,
            benign_block: (0, block),
            malware_block: (block, 2 * block),
            noise,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_per_class == 0 {
            return Err(Error::param("need at least one sample per class"));
        }
        if !(0.0..0.5).contains(&self.noise) {
            return Err(Error::param(format!(
                "noise must be in [0, 0.5), got {}",
                self.noise
            )));
        }
        for (name, (lo, hi)) in [("benign", self.benign_block), ("malware", self.malware_block)] {
            if lo > hi || hi > self.dim {
                return Err(Error::param(format!(
                    "{name} block [{lo}, {hi}) does not fit in dimension {}",
                    self.dim
                )));
            }
        }
        Ok(())
    }
}

/// Samples alternate benign, malware, benign, ...
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = Vec::with_capacity(2 * spec.n_per_class);
    let mut labels = Vec::with_capacity(2 * spec.n_per_class);
    for _ in 0..spec.n_per_class {
        for (label, (lo, hi)) in [
            (Label::Benign, spec.benign_block),
            (Label::Malware, spec.malware_block),
        ] {
            let idx: Vec<u32> = (0..spec.dim)
                .filter(|&j| {
                    let planted = (lo..hi).contains(&j);
                    let flip = spec.noise > 0.0 && rng.random_bool(spec.noise);
                    planted != flip
                })
                .map(|j| j as u32)
                .collect();
            samples.push(SparseBinaryVector::new(idx, spec.dim)?);
            labels.push(label);
        }
    }
    LabeledDataset::new(samples, labels, spec.dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_is_the_block() {
        let d = generate_synthetic(&SyntheticSpec::two_blocks(5, 30, 4, 0.0, 1)).unwrap();
        assert_eq!(d.len(), 10);
        for (s, l) in d.iter() {
            let want: Vec<u32> = if l.is_malware() { (4..8).collect() } else { (0..4).collect() };
            assert_eq!(s.indices(), want.as_slice());
        }
    }

    #[test]
    fn seeded() {
        let spec = SyntheticSpec::two_blocks(20, 50, 5, 0.1, 9);
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
        let other = SyntheticSpec { seed: 10, ..spec.clone() };
        assert_ne!(generate_synthetic(&spec).unwrap(), generate_synthetic(&other).unwrap());
    }

    #[test]
    fn invalid_specs() {
        let ok = SyntheticSpec::two_blocks(2, 10, 3, 0.1, 0);
        assert!(ok.validate().is_ok());
        assert!(SyntheticSpec { noise: 0.5, ..ok.clone() }.validate().is_err());
        assert!(SyntheticSpec { malware_block: (8, 12), ..ok.clone() }.validate().is_err());
        assert!(SyntheticSpec { n_per_class: 0, ..ok }.validate().is_err());
    }
}
