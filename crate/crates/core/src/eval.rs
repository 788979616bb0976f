//! Evaluation of a trained encoder on one split of a dataset.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{build_groups, groups_in_split, Dataset, Split};
use crate::encoder::EncoderModel;
use crate::error::{Error, Result};
use crate::logic::Template;
use crate::metrics::{
    avg_group_sim, excluded_docs, precision_recall, similarity_correlation, violation_rate, Correlation,
    PrecisionRecall, ViolationCase, ViolationSummary,
};
use crate::retrieval::{build_index, CorpusIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    pub correlation_k: usize,
    pub split: Split,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ks: vec![5, 20, 100, 1000],
            correlation_k: 100,
            split: Split::Test,
        }
    }
}

/// Cutoffs actually reported for a corpus of `n` documents: below 1000
/// documents any `k ≥ 1000` becomes `⌈n/3⌉`, and every `k` is capped at `n`.
pub fn effective_ks(ks: &[usize], n: usize) -> Vec<usize> {
    ks.iter()
        .map(|&k| if n < 1000 && k >= 1000 { n.div_ceil(3) } else { k })
        .map(|k| k.min(n).max(1))
        .collect()
}

/// Macro averages over the queries of one slice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub queries: usize,
    pub p_at_1: f64,
    pub recall: Vec<f64>,
}

impl MetricSummary {
    fn from_results(results: &[&PrecisionRecall], n_ks: usize) -> Self {
        let n = results.len();
        let mut s = Self {
            queries: n,
            p_at_1: 0.0,
            recall: vec![0.0; n_ks],
        };
        if n == 0 {
            return s;
        }
        for r in results {
            s.p_at_1 += r.p_at_1;
            for (acc, v) in s.recall.iter_mut().zip(&r.recall) {
                *acc += v;
            }
        }
        s.p_at_1 /= n as f64;
        s.recall.iter_mut().for_each(|v| *v /= n as f64);
        s
    }

    /// Recall at the cutoff `k`, if reported.
    pub fn recall_at(&self, ks: &[usize], k: usize) -> Option<f64> {
        ks.iter().position(|&x| x == k).map(|i| self.recall[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSim {
    pub atom_ids: Vec<String>,
    pub size: usize,
    pub sim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRecord {
    pub q1: String,
    pub q2: String,
    pub template1: Template,
    pub template2: Template,
    #[serde(flatten)]
    pub correlation: Correlation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub model_tag: String,
    pub split: Split,
    pub corpus_size: usize,
    pub ks: Vec<usize>,
    /// Queries left out because their ground truth is empty.
    pub skipped_empty_gt: usize,
    pub overall: MetricSummary,
    pub per_template: BTreeMap<String, MetricSummary>,
    pub per_category: BTreeMap<String, MetricSummary>,
    pub violation: ViolationSummary,
    pub group_sims: Vec<GroupSim>,
    pub mean_group_sim: Option<f64>,
    pub correlation_k: usize,
    pub correlations: Vec<CorrelationRecord>,
    pub mean_pearson_r: Option<f64>,
    pub mean_overlap: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// AND-vs-NOT pairs of one split: `A∧B` with `A∖B`, and `A∧B∧C` with
/// `A∧B∖C`, over identical atom lists.
pub fn and_not_pairs(dataset: &Dataset, split: Split) -> Vec<(usize, usize)> {
    let mut by_atoms: BTreeMap<&[String], Vec<usize>> = BTreeMap::new();
    for i in dataset.split_indices(split) {
        by_atoms.entry(dataset.queries[i].expr.atoms()).or_default().push(i);
    }
    let mut pairs = Vec::new();
    for members in by_atoms.values() {
        for &a in members {
            for &b in members {
                let ta = dataset.queries[a].expr.template();
                let tb = dataset.queries[b].expr.template();
                if matches!((ta, tb), (Template::And, Template::Diff) | (Template::And3, Template::AndDiff)) {
                    pairs.push((a, b));
                }
            }
        }
    }
    pairs
}

/// Embeds every query of the dataset in dataset order.
pub fn embed_queries(model: &EncoderModel, dataset: &Dataset) -> Vec<Vec<f64>> {
    dataset.queries.par_iter().map(|q| model.embed_text(&q.text)).collect()
}

pub fn correlation_records(
    index: &CorpusIndex,
    dataset: &Dataset,
    query_emb: &[Vec<f64>],
    pairs: &[(usize, usize)],
    k: usize,
) -> Vec<CorrelationRecord> {
    pairs
        .par_iter()
        .map(|&(a, b)| CorrelationRecord {
            q1: dataset.queries[a].id.clone(),
            q2: dataset.queries[b].id.clone(),
            template1: dataset.queries[a].expr.template(),
            template2: dataset.queries[b].expr.template(),
            correlation: similarity_correlation(index, &query_emb[a], &query_emb[b], k),
        })
        .collect()
}

pub fn evaluate(model: &EncoderModel, dataset: &Dataset, config: &EvalConfig) -> Result<EvalReport> {
    let index = build_index(model, &dataset.documents);
    evaluate_with_index(model, &index, dataset, config)
}

pub fn evaluate_with_index(
    model: &EncoderModel,
    index: &CorpusIndex,
    dataset: &Dataset,
    config: &EvalConfig,
) -> Result<EvalReport> {
    index.check_model(model)?;
    if index.doc_ids.len() != dataset.documents.len() {
        return Err(Error::LengthMismatch(index.doc_ids.len(), dataset.documents.len()));
    }
    if config.ks.is_empty() {
        return Err(Error::Config("at least one cutoff k is required".into()));
    }
    let n = index.len();
    let ks = effective_ks(&config.ks, n);
    let max_k = ks.iter().copied().max().unwrap_or(0);
    let selected = dataset.split_indices(config.split);
    let query_emb = embed_queries(model, dataset);
    let atom_sets = dataset.atom_sets();
    let doc_pos: HashMap<&str, usize> = index.doc_ids.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();

    struct PerQuery {
        pr: Option<PrecisionRecall>,
        violation: Option<ViolationCase>,
    }
    let per_query: Vec<PerQuery> = selected
        .par_iter()
        .map(|&qi| {
            let q = &dataset.queries[qi];
            let ranking = index.rank(&q.id, &query_emb[qi], max_k);
            let ranked: Vec<&str> = ranking.docs.iter().map(|&d| index.doc_ids[d].as_str()).collect();
            let gt: BTreeSet<&str> = q.gt_docs.iter().map(String::as_str).collect();
            let pr = precision_recall(&ranked, &gt, &ks);
            let violation = q.expr.negated_atom().map(|neg| {
                let excluded = atom_sets
                    .get(neg)
                    .map(|s| excluded_docs(s, &q.gt_docs))
                    .unwrap_or_default();
                let ranks = index.full_ranks(&query_emb[qi]);
                let lookup = |ids: &BTreeSet<String>| -> Vec<usize> {
                    ids.iter().filter_map(|d| doc_pos.get(d.as_str())).map(|&p| ranks[p]).collect()
                };
                ViolationCase {
                    gt_ranks: lookup(&q.gt_docs),
                    excluded_ranks: lookup(&excluded),
                }
            });
            PerQuery { pr, violation }
        })
        .collect();

    let mut all = Vec::new();
    let mut by_template: BTreeMap<String, Vec<&PrecisionRecall>> = BTreeMap::new();
    let mut by_category: BTreeMap<String, Vec<&PrecisionRecall>> = BTreeMap::new();
    let mut skipped = 0;
    for (&qi, r) in selected.iter().zip(&per_query) {
        let Some(pr) = &r.pr else {
            skipped += 1;
            continue;
        };
        let t = dataset.queries[qi].expr.template();
        all.push(pr);
        by_template.entry(t.symbol().to_string()).or_default().push(pr);
        by_category.entry(t.category().name().to_string()).or_default().push(pr);
    }
    let summarize = |m: BTreeMap<String, Vec<&PrecisionRecall>>| {
        m.into_iter()
            .map(|(k, v)| (k, MetricSummary::from_results(&v, ks.len())))
            .collect()
    };
    let cases: Vec<ViolationCase> = per_query.iter().filter_map(|r| r.violation.clone()).collect();

    let groups = groups_in_split(&build_groups(&dataset.queries), &dataset.queries, config.split);
    let group_sims: Vec<GroupSim> = groups
        .iter()
        .filter_map(|g| {
            let embs: Vec<Vec<f64>> = g.members.iter().map(|&m| query_emb[m].clone()).collect();
            avg_group_sim(&embs).map(|sim| GroupSim {
                atom_ids: g.atom_ids.clone(),
                size: g.members.len(),
                sim,
            })
        })
        .collect();

    let correlation_k = config.correlation_k.min(n).max(1);
    let pairs = and_not_pairs(dataset, config.split);
    let correlations = correlation_records(index, dataset, &query_emb, &pairs, correlation_k);

    Ok(EvalReport {
        model_tag: index.model_tag.clone(),
        split: config.split,
        corpus_size: n,
        skipped_empty_gt: skipped,
        overall: MetricSummary::from_results(&all, ks.len()),
        per_template: summarize(by_template),
        per_category: summarize(by_category),
        violation: violation_rate(&cases),
        mean_group_sim: mean(group_sims.iter().map(|g| g.sim)),
        group_sims,
        correlation_k,
        mean_pearson_r: mean(correlations.iter().filter_map(|c| c.correlation.pearson_r)),
        mean_overlap: mean(correlations.iter().map(|c| c.correlation.overlap as f64)),
        correlations,
        ks,
    })
}
