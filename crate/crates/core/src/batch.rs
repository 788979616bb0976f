//! Mini-batch construction: random, grouped and mixed batching.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{QueryGroup, QueryRecord};
use crate::error::{Error, Result};
use crate::logic::{derive_relation, Relation, RelationEdge, Template};

/// Queries, their sampled documents, in-batch positives and relation edges.
/// Positions in `positives` and `edges` index into `documents` and
/// `queries` respectively.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MiniBatch {
    pub queries: Vec<usize>,
    pub documents: Vec<usize>,
    pub positives: Vec<Vec<usize>>,
    pub edges: Vec<RelationEdge>,
}

impl MiniBatch {
    pub fn validate(&self) -> Result<()> {
        if self.positives.len() != self.queries.len() {
            return Err(Error::Batch("one positive set per query required".into()));
        }
        for (i, p) in self.positives.iter().enumerate() {
            if p.is_empty() {
                return Err(Error::Batch(format!("query position {i} has no positive document")));
            }
            if let Some(bad) = p.iter().find(|&&j| j >= self.documents.len()) {
                return Err(Error::Batch(format!("positive {bad} out of range")));
            }
        }
        let mut seen = HashSet::new();
        if !self.documents.iter().all(|d| seen.insert(*d)) {
            return Err(Error::Batch("duplicate document".into()));
        }
        for e in &self.edges {
            if e.src >= self.queries.len() || e.dst >= self.queries.len() || e.src == e.dst {
                return Err(Error::Batch(format!("edge {e:?} out of range")));
            }
        }
        Ok(())
    }

    pub fn edges_of(&self, kind: Relation) -> impl Iterator<Item = &RelationEdge> {
        self.edges.iter().filter(move |e| e.kind == kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Grouped,
    Mixed { alpha: f64 },
}

impl Strategy {
    fn random_slots(self, batch_size: usize) -> usize {
        match self {
            Strategy::Random => batch_size,
            Strategy::Grouped => 0,
            Strategy::Mixed { alpha } => ((alpha * batch_size as f64).ceil() as usize).min(batch_size),
        }
    }
}

/// Relation edges over every pair of expressions. Logically equivalent
/// pairs keep a single Subset edge (lower position first); exclusions are
/// stored once with `src < dst`.
pub fn batch_edges(queries: &[&QueryRecord]) -> Vec<RelationEdge> {
    let mut edges = Vec::new();
    for i in 0..queries.len() {
        for j in i + 1..queries.len() {
            let fwd = derive_relation(&queries[i].expr, &queries[j].expr);
            let back = derive_relation(&queries[j].expr, &queries[i].expr);
            let edge = |src, dst, kind| RelationEdge { src, dst, kind };
            if fwd == Some(Relation::Subset) {
                edges.push(edge(i, j, Relation::Subset));
            }
            if back == Some(Relation::Subset) && fwd != Some(Relation::Subset) {
                edges.push(edge(j, i, Relation::Subset));
            }
            if fwd == Some(Relation::Exclusion) || back == Some(Relation::Exclusion) {
                edges.push(edge(i, j, Relation::Exclusion));
            }
        }
    }
    edges
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerStats {
    pub batches: usize,
    /// Group slots filled randomly because no eligible group was left.
    pub fallback_slots: usize,
    /// Draws skipped because the query was already in the batch.
    pub duplicate_skips: usize,
    pub merged_documents: usize,
}

/// Stateful sampler. Queries and groups are drawn without replacement and
/// reshuffled once exhausted, so one pass over each queue is one epoch.
pub struct BatchSampler<'a> {
    queries: &'a [QueryRecord],
    /// Ground truth per query as sorted document indices.
    gt: &'a [Vec<usize>],
    pool: Vec<usize>,
    groups: Vec<QueryGroup>,
    random_queue: Vec<usize>,
    group_queue: Vec<usize>,
    rng: ChaCha8Rng,
    pub stats: SamplerStats,
}

impl<'a> BatchSampler<'a> {
    /// `pool` lists the queries eligible for random slots; `groups` those for
    /// group slots. Every eligible query needs a non-empty ground truth.
    pub fn new(
        queries: &'a [QueryRecord],
        gt: &'a [Vec<usize>],
        pool: Vec<usize>,
        groups: Vec<QueryGroup>,
        seed: u64,
    ) -> Result<Self> {
        let eligible = pool.iter().chain(groups.iter().flat_map(|g| &g.members));
        for &q in eligible {
            if gt.get(q).is_none_or(|g| g.is_empty()) {
                return Err(Error::Batch(format!("query {} has no ground truth", queries[q].id)));
            }
        }
        Ok(Self {
            queries,
            gt,
            pool,
            groups,
            random_queue: Vec::new(),
            group_queue: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            stats: SamplerStats::default(),
        })
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }

    fn next_random(&mut self) -> Option<usize> {
        if self.random_queue.is_empty() {
            if self.pool.is_empty() {
                return None;
            }
            self.random_queue = self.pool.clone();
            self.random_queue.shuffle(&mut self.rng);
            // popped from the back
            self.random_queue.reverse();
        }
        self.random_queue.pop()
    }

    fn next_group(&mut self) -> Option<usize> {
        if self.group_queue.is_empty() {
            if self.groups.is_empty() {
                return None;
            }
            self.group_queue = (0..self.groups.len()).collect();
            self.group_queue.shuffle(&mut self.rng);
            self.group_queue.reverse();
        }
        self.group_queue.pop()
    }

    fn fill_random(&mut self, chosen: &mut Vec<usize>, seen: &mut HashSet<usize>, target: usize) {
        let mut misses = 0;
        while chosen.len() < target && misses <= self.pool.len() {
            match self.next_random() {
                Some(q) if seen.insert(q) => {
                    chosen.push(q);
                    misses = 0;
                }
                Some(_) => {
                    self.stats.duplicate_skips += 1;
                    misses += 1;
                }
                None => break,
            }
        }
    }

    pub fn sample_batch(&mut self, strategy: Strategy, batch_size: usize) -> Result<MiniBatch> {
        if batch_size < 2 {
            return Err(Error::Batch("batch_size must be at least 2".into()));
        }
        if let Strategy::Mixed { alpha } = strategy {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::Batch(format!("alpha {alpha} outside [0, 1]")));
            }
        }
        let mut chosen = Vec::with_capacity(batch_size);
        let mut seen = HashSet::new();
        self.fill_random(&mut chosen, &mut seen, strategy.random_slots(batch_size));

        let mut idle = 0;
        while chosen.len() < batch_size {
            let Some(g) = self.next_group() else {
                self.stats.fallback_slots += batch_size - chosen.len();
                self.fill_random(&mut chosen, &mut seen, batch_size);
                break;
            };
            let group = &self.groups[g];
            let (mut atoms, mut complex): (Vec<usize>, Vec<usize>) = group
                .members
                .iter()
                .copied()
                .filter(|m| !seen.contains(m))
                .partition(|&m| self.queries[m].expr.template() == Template::Atom);
            complex.shuffle(&mut self.rng);
            atoms.extend(complex);
            if atoms.is_empty() {
                idle += 1;
                if idle > self.groups.len() {
                    self.stats.fallback_slots += batch_size - chosen.len();
                    self.fill_random(&mut chosen, &mut seen, batch_size);
                    break;
                }
                continue;
            }
            idle = 0;
            let room = batch_size - chosen.len();
            for m in atoms.into_iter().take(room) {
                seen.insert(m);
                chosen.push(m);
            }
        }
        if chosen.len() < 2 {
            return Err(Error::Batch("fewer than two eligible queries".into()));
        }

        let mut documents: Vec<usize> = Vec::with_capacity(chosen.len());
        let mut doc_pos: HashMap<usize, usize> = HashMap::new();
        for &q in &chosen {
            let &d = self.gt[q].choose(&mut self.rng).expect("checked non-empty");
            if let Entry::Vacant(e) = doc_pos.entry(d) {
                e.insert(documents.len());
                documents.push(d);
            } else {
                self.stats.merged_documents += 1;
            }
        }
        let positives = chosen
            .iter()
            .map(|&q| {
                (0..documents.len())
                    .filter(|&j| self.gt[q].binary_search(&documents[j]).is_ok())
                    .collect()
            })
            .collect();
        let records: Vec<&QueryRecord> = chosen.iter().map(|&q| &self.queries[q]).collect();
        let batch = MiniBatch {
            edges: batch_edges(&records),
            queries: chosen,
            documents,
            positives,
        };
        self.stats.batches += 1;
        debug_assert!(batch.validate().is_ok());
        Ok(batch)
    }
}
