//! Retrieval and consistency metrics.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::retrieval::CorpusIndex;

/// P@1 and R@k for one query, `recall[i]` pairing with `ks[i]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionRecall {
    pub p_at_1: f64,
    pub recall: Vec<f64>,
}

/// `None` when `gt` is empty; such queries are excluded from averages.
pub fn precision_recall<T: Ord>(ranked: &[T], gt: &BTreeSet<T>, ks: &[usize]) -> Option<PrecisionRecall> {
    if gt.is_empty() {
        return None;
    }
    let p_at_1 = match ranked.first() {
        Some(d) if gt.contains(d) => 1.0,
        _ => 0.0,
    };
    let recall = ks
        .iter()
        .map(|&k| {
            let hits = ranked.iter().take(k).filter(|d| gt.contains(d)).count();
            hits as f64 / gt.len() as f64
        })
        .collect();
    Some(PrecisionRecall { p_at_1, recall })
}

/// 1-based full-corpus ranks of one negation query's gold and excluded docs.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationCase {
    pub gt_ranks: Vec<usize>,
    pub excluded_ranks: Vec<usize>,
}

impl ViolationCase {
    /// `None` when either side is empty.
    pub fn is_violation(&self) -> Option<bool> {
        if self.gt_ranks.is_empty() || self.excluded_ranks.is_empty() {
            return None;
        }
        Some(mean_rank(&self.excluded_ranks) < mean_rank(&self.gt_ranks))
    }
}

fn mean_rank(r: &[usize]) -> f64 {
    r.iter().sum::<usize>() as f64 / r.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViolationSummary {
    /// `None` when no query is eligible.
    pub rate: Option<f64>,
    pub violations: usize,
    pub eligible: usize,
    pub skipped: usize,
}

pub fn violation_rate(cases: &[ViolationCase]) -> ViolationSummary {
    let mut s = ViolationSummary {
        rate: None,
        violations: 0,
        eligible: 0,
        skipped: 0,
    };
    for c in cases {
        match c.is_violation() {
            Some(v) => {
                s.eligible += 1;
                s.violations += v as usize;
            }
            None => s.skipped += 1,
        }
    }
    if s.eligible > 0 {
        s.rate = Some(s.violations as f64 / s.eligible as f64);
    }
    s
}

/// Documents of the negated atom that the query itself does not retrieve.
pub fn excluded_docs<T: Ord + Clone>(negated_atom_gt: &BTreeSet<T>, query_gt: &BTreeSet<T>) -> BTreeSet<T> {
    negated_atom_gt.difference(query_gt).cloned().collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Mean pairwise cosine of a group's query embeddings; `None` below two members.
pub fn avg_group_sim(embeddings: &[Vec<f64>]) -> Option<f64> {
    let n = embeddings.len();
    if n < 2 {
        return None;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += cosine(&embeddings[i], &embeddings[j]);
        }
    }
    Some(2.0 * sum / (n * (n - 1)) as f64)
}

/// Sample Pearson correlation; `None` on length mismatch, fewer than two
/// points, or a constant vector.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correlation {
    pub pearson_r: Option<f64>,
    pub overlap: usize,
    pub pool_size: usize,
}

/// Pearson r of two queries' cosine scores over the union of their top-`k`
/// documents, plus the size of the top-`k` intersection.
pub fn similarity_correlation(index: &CorpusIndex, q1: &[f64], q2: &[f64], k: usize) -> Correlation {
    let top1: BTreeSet<usize> = index.rank("", q1, k).docs.into_iter().collect();
    let top2: BTreeSet<usize> = index.rank("", q2, k).docs.into_iter().collect();
    let pool: Vec<usize> = top1.union(&top2).copied().collect();
    let s1 = index.scores(q1);
    let s2 = index.scores(q2);
    let x: Vec<f64> = pool.iter().map(|&d| s1[d]).collect();
    let y: Vec<f64> = pool.iter().map(|&d| s2[d]).collect();
    Correlation {
        pearson_r: pearson(&x, &y),
        overlap: top1.intersection(&top2).count(),
        pool_size: pool.len(),
    }
}
