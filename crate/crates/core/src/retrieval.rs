//! Exact dense retrieval by full scan.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{write_atomic, Document};
use crate::encoder::EncoderModel;
use crate::error::{Error, Result};

/// Unit document embeddings tagged with the fingerprint of the model that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub model_tag: String,
    pub dim: usize,
    pub doc_ids: Vec<String>,
    /// Row-major `N × dim`.
    pub rows: Vec<f64>,
    #[serde(skip)]
    id_order: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    pub query_id: String,
    /// Document positions in the index, best first.
    pub docs: Vec<usize>,
    pub scores: Vec<f64>,
}

impl CorpusIndex {
    pub fn new(model_tag: String, dim: usize, doc_ids: Vec<String>, rows: Vec<f64>) -> Self {
        let mut idx = Self {
            model_tag,
            dim,
            doc_ids,
            rows,
            id_order: Vec::new(),
        };
        idx.compute_id_order();
        idx
    }

    fn compute_id_order(&mut self) {
        let mut by_id: Vec<usize> = (0..self.doc_ids.len()).collect();
        by_id.sort_by(|&a, &b| self.doc_ids[a].cmp(&self.doc_ids[b]));
        self.id_order = vec![0; by_id.len()];
        for (rank, &i) in by_id.iter().enumerate() {
            self.id_order[i] = rank as u32;
        }
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn scores(&self, query: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.row(i).iter().zip(query).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Descending score, ties by ascending document id.
    fn cmp(&self, scores: &[f64], a: usize, b: usize) -> Ordering {
        scores[b]
            .total_cmp(&scores[a])
            .then(self.id_order[a].cmp(&self.id_order[b]))
    }

    /// Exact top-`k` by cosine; `k` is clamped to the corpus size.
    pub fn rank(&self, query_id: &str, query: &[f64], k: usize) -> Ranking {
        let scores = self.scores(query);
        let k = k.min(self.len());
        let mut order: Vec<usize> = (0..self.len()).collect();
        if k > 0 && k < order.len() {
            order.select_nth_unstable_by(k - 1, |&a, &b| self.cmp(&scores, a, b));
            order.truncate(k);
        }
        order.sort_by(|&a, &b| self.cmp(&scores, a, b));
        order.truncate(k);
        Ranking {
            query_id: query_id.to_string(),
            scores: order.iter().map(|&i| scores[i]).collect(),
            docs: order,
        }
    }

    /// 1-based rank of every document under the full ordering.
    pub fn full_ranks(&self, query: &[f64]) -> Vec<usize> {
        let r = self.rank("", query, self.len());
        let mut ranks = vec![0; self.len()];
        for (pos, &d) in r.docs.iter().enumerate() {
            ranks[d] = pos + 1;
        }
        ranks
    }

    pub fn check_model(&self, model: &EncoderModel) -> Result<()> {
        let tag = model.fingerprint();
        if tag != self.model_tag {
            return Err(Error::VersionMismatch {
                index: self.model_tag.clone(),
                model: tag,
            });
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_vec(self)?)
    }

    /// Loads an index and refuses it unless it was built by `model`.
    pub fn load(path: &Path, model: &EncoderModel) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut idx: CorpusIndex = serde_json::from_slice(&bytes)?;
        if idx.rows.len() != idx.doc_ids.len() * idx.dim {
            return Err(Error::Checkpoint("index rows do not match its header".into()));
        }
        idx.check_model(model)?;
        idx.compute_id_order();
        Ok(idx)
    }
}

pub fn build_index(model: &EncoderModel, documents: &[Document]) -> CorpusIndex {
    let rows: Vec<Vec<f64>> = documents
        .par_iter()
        .map(|d| model.embed_text(&d.text))
        .collect();
    CorpusIndex::new(
        model.fingerprint(),
        model.dim(),
        documents.iter().map(|d| d.id.clone()).collect(),
        rows.concat(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{EncoderConfig, HashConfig};

    fn unit(v: &[f64]) -> Vec<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect()
    }

    fn toy() -> CorpusIndex {
        let rows = [
            unit(&[1.0, 0.0]),
            unit(&[0.0, 1.0]),
            unit(&[1.0, 1.0]),
            unit(&[1.0, 0.0]),
            unit(&[-1.0, 0.2]),
        ];
        CorpusIndex::new(
            "t".into(),
            2,
            vec!["d3".into(), "d1".into(), "d2".into(), "d0".into(), "d4".into()],
            rows.concat(),
        )
    }

    #[test]
    fn ties_break_by_doc_id() {
        let idx = toy();
        let r = idx.rank("q", &[1.0, 0.0], 5);
        let ids: Vec<&str> = r.docs.iter().map(|&d| idx.doc_ids[d].as_str()).collect();
        assert_eq!(ids, vec!["d0", "d3", "d2", "d1", "d4"]);
        assert!(r.scores.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(idx.rank("q", &[1.0, 0.0], 2).docs, r.docs[..2].to_vec());
        assert_eq!(idx.full_ranks(&[1.0, 0.0]), vec![2, 4, 3, 1, 5]);
    }

    #[test]
    fn empty_corpus() {
        let m = EncoderModel::new(
            EncoderConfig {
                dim: 4,
                hash: HashConfig {
                    buckets_log2: 6,
                    ..Default::default()
                },
                init_std: 0.1,
            },
            0,
        )
        .unwrap();
        let idx = build_index(&m, &[]);
        assert!(idx.is_empty());
        assert!(idx.rank("q", &[1.0, 0.0, 0.0, 0.0], 10).docs.is_empty());
    }
}
