//! Brute-force reference implementations on dense 0/1 rows. They share no
//! code with the library beyond constructing its input types.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simdetect::{Label, LabeledDataset, SparseBinaryVector};

pub type Row = Vec<u8>;

#[derive(Clone, Debug)]
pub struct Instance {
    pub rows: Vec<Row>,
    pub labels: Vec<u8>,
    pub query: Row,
}

impl Instance {
    pub fn dataset(&self) -> LabeledDataset {
        to_dataset(&self.rows, &self.labels)
    }

    pub fn query_vec(&self) -> SparseBinaryVector {
        SparseBinaryVector::from_dense(&self.query)
    }
}

pub fn to_dataset(rows: &[Row], labels: &[u8]) -> LabeledDataset {
    let dim = rows[0].len();
    LabeledDataset::new(
        rows.iter().map(|r| SparseBinaryVector::from_dense(r)).collect(),
        labels.iter().map(|&l| Label::from_bit(l == 1)).collect(),
        dim,
    )
    .unwrap()
}

/// Small random instance with many exact distance ties and duplicate rows.
pub fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> Instance {
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(1..=max_m);
    let density = rng.random_range(0.05..0.6);
    let mut rows: Vec<Row> = Vec::with_capacity(n);
    for _ in 0..n {
        if !rows.is_empty() && rng.random_bool(0.15) {
            let k = rng.random_range(0..rows.len());
            rows.push(rows[k].clone());
        } else {
            rows.push((0..m).map(|_| rng.random_bool(density) as u8).collect());
        }
    }
    let labels = (0..n).map(|_| rng.random_bool(0.5) as u8).collect();
    let query = if rng.random_bool(0.2) {
        rows[rng.random_range(0..n)].clone()
    } else {
        (0..m).map(|_| rng.random_bool(density) as u8).collect()
    };
    Instance { rows, labels, query }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Majority with ties going to malware.
pub fn vote(labels: &[u8]) -> u8 {
    let ones = labels.iter().filter(|&&l| l == 1).count();
    (2 * ones >= labels.len()) as u8
}

fn argmins(d: &[f64], tol: f64) -> Vec<usize> {
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    (0..d.len()).filter(|&i| d[i] - min <= tol).collect()
}

fn hamming_all(inst: &Instance) -> Vec<f64> {
    inst.rows.iter().map(|r| hamming(r, &inst.query) as f64).collect()
}

fn labels_of(inst: &Instance, idx: &[usize]) -> Vec<u8> {
    idx.iter().map(|&i| inst.labels[i]).collect()
}

pub fn fnn(inst: &Instance) -> (Vec<usize>, u8) {
    let first = argmins(&hamming_all(inst), 0.0)[0];
    (vec![first], inst.labels[first])
}

pub fn ann_set(inst: &Instance) -> Vec<usize> {
    argmins(&hamming_all(inst), 0.0)
}

pub fn ann(inst: &Instance) -> u8 {
    vote(&labels_of(inst, &ann_set(inst)))
}

pub fn wann(inst: &Instance) -> (Vec<usize>, u8) {
    let m = inst.query.len();
    let counts: Vec<u64> = (0..m)
        .map(|j| inst.rows.iter().map(|r| r[j] as u64).sum())
        .collect();
    let w = |r: &Row| -> i64 { (0..m).map(|j| r[j] as u64 * counts[j]).sum::<u64>() as i64 };
    let wq = w(&inst.query);
    let d: Vec<f64> = inst.rows.iter().map(|r| (w(r) - wq).abs() as f64).collect();
    let sel = argmins(&d, 0.0);
    let label = vote(&labels_of(inst, &sel));
    (sel, label)
}

/// Exhaustive head-pair search, distance-to-both-heads trimming, vote.
pub fn kmnn(inst: &Instance, trim: f64) -> (Vec<usize>, u8) {
    let nn = ann_set(inst);
    let k = nn.len();
    if k < 2 {
        return (nn.clone(), vote(&labels_of(inst, &nn)));
    }
    let row = |p: usize| &inst.rows[nn[p]];
    let mut best: Option<(usize, usize, usize)> = None;
    for a in 0..k {
        for b in (a + 1)..k {
            let cost: usize = (0..k)
                .map(|x| hamming(row(x), row(a)).min(hamming(row(x), row(b))))
                .sum();
            if best.is_none_or(|(c, _, _)| cost < c) {
                best = Some((cost, a, b));
            }
        }
    }
    let (_, a, b) = best.unwrap();
    let score = |x: usize| hamming(row(x), row(a)) + hamming(row(x), row(b));
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&x| (score(x), nn[x]));
    let drop = ((trim * k as f64 - 1e-9).ceil().max(0.0) as usize).min(k - 1);
    let mut kept: Vec<usize> = order[..k - drop].iter().map(|&x| nn[x]).collect();
    kept.sort_unstable();
    let label = vote(&labels_of(inst, &kept));
    (kept, label)
}

/// Natural-log entropy similarity with probabilities from column frequencies.
pub fn pdme(inst: &Instance) -> (Vec<usize>, u8) {
    let n = inst.rows.len() as f64;
    let m = inst.query.len();
    let term: Vec<f64> = (0..m)
        .map(|j| {
            let p = inst.rows.iter().filter(|r| r[j] == 1).count() as f64 / n;
            if p == 0.0 || p == 1.0 {
                0.0
            } else {
                -p * p.ln()
            }
        })
        .collect();
    let en = |bits: &dyn Fn(usize) -> bool| -> f64 { (0..m).filter(|&j| bits(j)).map(|j| term[j]).sum() };
    let q = &inst.query;
    let d: Vec<f64> = inst
        .rows
        .iter()
        .map(|r| {
            let eq = en(&|j| q[j] == 1);
            let er = en(&|j| r[j] == 1);
            let eu = en(&|j| q[j] == 1 || r[j] == 1);
            if eu == 0.0 {
                0.0
            } else {
                1.0 - (eq + er - eu) / eu
            }
        })
        .collect();
    let sel = argmins(&d, 1e-12);
    let label = vote(&labels_of(inst, &sel));
    (sel, label)
}
