//! Exact two-medoid partitioning of a small set of binary vectors.
//!
//! The sets clustered here are nearest-neighbor sets, i.e. samples that all
//! sit at one distance from a query, so they are small and often contain
//! exact duplicates. Every head pair is tried; identical members are folded
//! into weighted groups first, which turns the common all-duplicates case
//! into a single group.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_space::{symmetric_difference_count, SparseBinaryVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cluster {
    A,
    B,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedoidClustering {
    /// Member position of the first head; always smaller than `head_b`.
    pub head_a: usize,
    pub head_b: usize,
    /// Cluster of each member, aligned with the input.
    pub assignment: Vec<Cluster>,
    /// `Σ min(d(x, head_a), d(x, head_b))` over all members.
    pub cost: usize,
}

impl MedoidClustering {
    pub fn members_of(&self, cluster: Cluster) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == cluster)
            .collect()
    }
}

/// Selects the head pair of minimal total assignment cost. Ties go to the
/// lexicographically smallest `(head_a, head_b)` member pair; members at equal
/// distance from both heads join cluster A.
pub fn two_medoid_cluster(members: &[&SparseBinaryVector]) -> Result<MedoidClustering> {
    if members.len() < 2 {
        return Err(Error::param(format!(
            "two-medoid clustering needs at least 2 members, got {}",
            members.len()
        )));
    }
    let dim = members[0].dim();
    if let Some(m) = members.iter().find(|m| m.dim() != dim) {
        return Err(Error::DimensionMismatch {
            left: dim,
            right: m.dim(),
        });
    }

    // positions of each distinct vector, in member order
    let mut group_of: HashMap<&[u32], usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (pos, m) in members.iter().enumerate() {
        let g = *group_of.entry(m.indices()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(pos);
    }

    let u = groups.len();
    let reps: Vec<&[u32]> = groups.iter().map(|g| members[g[0]].indices()).collect();
    let mut dist = vec![0usize; u * u];
    for g in 0..u {
        for h in (g + 1)..u {
            let d = symmetric_difference_count(reps[g], reps[h]);
            dist[g * u + h] = d;
            dist[h * u + g] = d;
        }
    }
    let mult: Vec<usize> = groups.iter().map(|g| g.len()).collect();

    let mut best: Option<(usize, (usize, usize))> = None;
    let mut consider = |cost: usize, pair: (usize, usize)| {
        if best.is_none_or(|(c, p)| (cost, pair) < (c, p)) {
            best = Some((cost, pair));
        }
    };
    for g in 0..u {
        // two copies of the same vector as heads
        if mult[g] >= 2 {
            let cost = (0..u).map(|k| mult[k] * dist[k * u + g]).sum();
            consider(cost, (groups[g][0], groups[g][1]));
        }
        for h in (g + 1)..u {
            let cost = (0..u)
                .map(|k| mult[k] * dist[k * u + g].min(dist[k * u + h]))
                .sum();
            let (a, b) = (groups[g][0], groups[h][0]);
            consider(cost, (a.min(b), a.max(b)));
        }
    }
    let (cost, (head_a, head_b)) = best.expect("at least two members");

    let (ha, hb) = (members[head_a].indices(), members[head_b].indices());
    let assignment = members
        .iter()
        .enumerate()
        .map(|(pos, m)| {
            if pos == head_a {
                Cluster::A
            } else if pos == head_b {
                Cluster::B
            } else if symmetric_difference_count(m.indices(), ha)
                <= symmetric_difference_count(m.indices(), hb)
            {
                Cluster::A
            } else {
                Cluster::B
            }
        })
        .collect();

    Ok(MedoidClustering {
        head_a,
        head_b,
        assignment,
        cost,
    })
}

/// `d(x, head_a) + d(x, head_b)` for every member.
pub fn ch_distance_scores(members: &[&SparseBinaryVector], clustering: &MedoidClustering) -> Vec<usize> {
    let ha = members[clustering.head_a].indices();
    let hb = members[clustering.head_b].indices();
    members
        .iter()
        .map(|m| symmetric_difference_count(m.indices(), ha) + symmetric_difference_count(m.indices(), hb))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_space::hamming_distance;
    use crate::toy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Every ordered head pair a < b, cost by direct summation.
    fn enumerate_best(members: &[&SparseBinaryVector]) -> (usize, (usize, usize)) {
        let d = |i: usize, j: usize| hamming_distance(members[i], members[j]).unwrap();
        let mut best = (usize::MAX, (0, 0));
        for a in 0..members.len() {
            for b in (a + 1)..members.len() {
                let cost: usize = (0..members.len()).map(|x| d(x, a).min(d(x, b))).sum();
                if cost < best.0 {
                    best = (cost, (a, b));
                }
            }
        }
        best
    }

    #[test]
    fn toy_neighbor_set() {
        let train = toy::dataset();
        let members: Vec<_> = [1usize, 3, 6, 7].iter().map(|&i| &train.samples()[i]).collect();
        let c = two_medoid_cluster(&members).unwrap();
        assert_eq!((c.head_a, c.head_b), (0, 1));
        assert_eq!(c.members_of(Cluster::A), vec![0, 3]);
        assert_eq!(c.members_of(Cluster::B), vec![1, 2]);
        assert_eq!(c.cost, 4);
        assert_eq!(ch_distance_scores(&members, &c), vec![4, 4, 6, 6]);
    }

    #[test]
    fn two_members() {
        let a = SparseBinaryVector::new(vec![0, 1], 5).unwrap();
        let b = SparseBinaryVector::new(vec![3], 5).unwrap();
        let c = two_medoid_cluster(&[&a, &b]).unwrap();
        assert_eq!(c.assignment, vec![Cluster::A, Cluster::B]);
        assert_eq!(c.cost, 0);
        // a head's score is its distance to the other head
        assert_eq!(ch_distance_scores(&[&a, &b], &c), vec![3, 3]);
        assert!(two_medoid_cluster(&[&a]).is_err());
    }

    #[test]
    fn duplicate_heads_keep_own_cluster() {
        let a = SparseBinaryVector::new(vec![2], 5).unwrap();
        let c = two_medoid_cluster(&[&a, &a, &a]).unwrap();
        assert_eq!((c.head_a, c.head_b), (0, 1));
        assert_eq!(c.assignment, vec![Cluster::A, Cluster::B, Cluster::A]);
        assert_eq!(c.cost, 0);
    }

    #[test]
    fn matches_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let k = rng.random_range(2..=8);
            let pool: Vec<SparseBinaryVector> = (0..k)
                .map(|_| {
                    // small dimension so duplicates show up
                    let bits: Vec<u8> = (0..6).map(|_| rng.random_bool(0.4) as u8).collect();
                    SparseBinaryVector::from_dense(&bits)
                })
                .collect();
            let members: Vec<_> = pool.iter().collect();
            let c = two_medoid_cluster(&members).unwrap();
            let (cost, pair) = enumerate_best(&members);
            assert_eq!(c.cost, cost);
            assert_eq!((c.head_a, c.head_b), pair);

            let scores = ch_distance_scores(&members, &c);
            for (i, s) in scores.iter().enumerate() {
                let direct = hamming_distance(members[i], members[c.head_a]).unwrap()
                    + hamming_distance(members[i], members[c.head_b]).unwrap();
                assert_eq!(*s, direct);
            }
            for (i, cl) in c.assignment.iter().enumerate() {
                if i == c.head_a || i == c.head_b {
                    continue;
                }
                let da = hamming_distance(members[i], members[c.head_a]).unwrap();
                let db = hamming_distance(members[i], members[c.head_b]).unwrap();
                assert_eq!(*cl, if da <= db { Cluster::A } else { Cluster::B });
            }
        }
    }

    #[test]
    fn permutation_keeps_cost_and_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..30 {
            let pool: Vec<SparseBinaryVector> = (0..7)
                .map(|_| {
                    let bits: Vec<u8> = (0..10).map(|_| rng.random_bool(0.5) as u8).collect();
                    SparseBinaryVector::from_dense(&bits)
                })
                .collect();
            let members: Vec<_> = pool.iter().collect();
            let mut shuffled = members.clone();
            shuffled.reverse();
            shuffled.swap(0, 3);
            let c1 = two_medoid_cluster(&members).unwrap();
            let c2 = two_medoid_cluster(&shuffled).unwrap();
            assert_eq!(c1.cost, c2.cost);

            // with a unique optimal head pair the scores are a relabeling
            let d = |i: usize, j: usize| hamming_distance(members[i], members[j]).unwrap();
            let optimal = (0..7)
                .flat_map(|a| ((a + 1)..7).map(move |b| (a, b)))
                .filter(|&(a, b)| (0..7).map(|x| d(x, a).min(d(x, b))).sum::<usize>() == c1.cost)
                .count();
            if optimal == 1 {
                let mut s1 = ch_distance_scores(&members, &c1);
                let mut s2 = ch_distance_scores(&shuffled, &c2);
                s1.sort_unstable();
                s2.sort_unstable();
                assert_eq!(s1, s2);
            }
        }
    }
}
