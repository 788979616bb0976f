//! Hashed-feature linear text encoder with exact gradients.
//!
//! Text is lowercased, split on non-alphanumerics, and word unigrams and
//! bigrams are hashed (FNV-1a) into `F = 2^buckets_log2` buckets. The
//! embedding is `normalize(Wᵀx)` for a dense `F × d` matrix `W`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const CHECKPOINT_MAGIC: &[u8; 8] = b"LOGICOL\0";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HashConfig {
    pub buckets_log2: u32,
    pub hash_seed: u64,
    pub bigrams: bool,
}

impl Default for HashConfig {
    fn default() -> Self {
        Self {
            buckets_log2: 15,
            hash_seed: 0,
            bigrams: true,
        }
    }
}

impl HashConfig {
    pub fn buckets(&self) -> usize {
        1 << self.buckets_log2
    }

    fn bucket(&self, kind: u8, parts: &[&str]) -> u32 {
        let mut h = FNV_OFFSET ^ self.hash_seed.wrapping_mul(FNV_PRIME);
        let mut feed = |b: u8| {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        };
        feed(kind);
        for (i, p) in parts.iter().enumerate() {
            if i > 0 {
                feed(b' ');
            }
            p.bytes().for_each(&mut feed);
        }
        (h & (self.buckets() as u64 - 1)) as u32
    }

    pub fn featurize(&self, text: &str) -> FeatureVector {
        let lower = text.to_lowercase();
        let tokens: Vec<&str> = lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .collect();
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for t in &tokens {
            *counts.entry(self.bucket(b'u', &[t])).or_default() += 1.0;
        }
        if self.bigrams {
            for w in tokens.windows(2) {
                *counts.entry(self.bucket(b'b', w)).or_default() += 1.0;
            }
        }
        FeatureVector {
            entries: counts.into_iter().collect(),
        }
    }
}

/// Sparse bucket counts, sorted by bucket.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureVector {
    pub entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            entries: self.entries.iter().map(|&(i, c)| (i, c * s)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub dim: usize,
    pub hash: HashConfig,
    /// Standard deviation of the Gaussian initialization.
    pub init_std: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            hash: HashConfig::default(),
            init_std: 0.1,
        }
    }
}

/// A unit embedding plus what the backward pass needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub vector: Vec<f64>,
    /// `‖Wᵀx‖` before normalization; zero when the fallback was used.
    pub norm: f64,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    pub config: EncoderConfig,
    /// Row-major `F × d`.
    pub weights: Vec<f64>,
}

impl EncoderModel {
    pub fn new(config: EncoderConfig, init_seed: u64) -> Result<Self> {
        if config.dim == 0 || config.hash.buckets_log2 == 0 || config.hash.buckets_log2 > 24 {
            return Err(Error::Config("dim must be > 0 and buckets_log2 in 1..=24".into()));
        }
        let normal = Normal::new(0.0, config.init_std)
            .map_err(|e| Error::Config(format!("init_std: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
        let weights = (0..config.hash.buckets() * config.dim)
            .map(|_| normal.sample(&mut rng))
            .collect();
        Ok(Self { config, weights })
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn featurize(&self, text: &str) -> FeatureVector {
        self.config.hash.featurize(text)
    }

    /// Unit vector returned when `Wᵀx = 0`.
    pub fn fallback_vector(&self) -> Vec<f64> {
        vec![1.0 / (self.dim() as f64).sqrt(); self.dim()]
    }

    pub fn embed(&self, x: &FeatureVector) -> Embedding {
        let d = self.dim();
        let mut z = vec![0.0; d];
        for &(row, c) in &x.entries {
            let w = &self.weights[row as usize * d..(row as usize + 1) * d];
            for (zi, wi) in z.iter_mut().zip(w) {
                *zi += c * wi;
            }
        }
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            z.iter_mut().for_each(|v| *v /= norm);
            Embedding {
                vector: z,
                norm,
                fallback: false,
            }
        } else {
            Embedding {
                vector: self.fallback_vector(),
                norm: 0.0,
                fallback: true,
            }
        }
    }

    pub fn embed_text(&self, text: &str) -> Vec<f64> {
        self.embed(&self.featurize(text)).vector
    }

    /// Chain rule through `y = z/‖z‖, z = Wᵀx`: each item contributes
    /// `x (I − yyᵀ) g / ‖z‖` to the rows it touches.
    pub fn backward(&self, items: &[(&FeatureVector, &Embedding)], upstream: &[Vec<f64>]) -> Gradient {
        let d = self.dim();
        let mut rows: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for ((x, emb), g) in items.iter().zip(upstream) {
            if emb.fallback {
                continue;
            }
            let y = &emb.vector;
            let proj: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
            let dz: Vec<f64> = g
                .iter()
                .zip(y)
                .map(|(gi, yi)| (gi - proj * yi) / emb.norm)
                .collect();
            for &(row, c) in &x.entries {
                let acc = rows.entry(row).or_insert_with(|| vec![0.0; d]);
                for (a, v) in acc.iter_mut().zip(&dz) {
                    *a += c * v;
                }
            }
        }
        Gradient { dim: d, rows }
    }

    /// Hex digest of the configuration and weights.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.config).expect("config serializes"));
        for w in &self.weights {
            h.update(w.to_le_bytes());
        }
        hex::encode(&h.finalize()[..12])
    }

    /// Binary checkpoint: magic, version, header length, JSON header, then
    /// row-major little-endian `f64` weights.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&CheckpointHeader {
            version: CHECKPOINT_VERSION,
            buckets: self.config.hash.buckets(),
            dim: self.dim(),
            config: self.config,
        })
        .expect("header serializes");
        let mut out = Vec::with_capacity(16 + header.len() + self.weights.len() * 8);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "version {version} does not match supported version {CHECKPOINT_VERSION}"
            )));
        }
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let header_end = 16 + hlen;
        if bytes.len() < header_end {
            return Err(bad("truncated header"));
        }
        let header: CheckpointHeader = serde_json::from_slice(&bytes[16..header_end])?;
        if header.version != version
            || header.buckets != header.config.hash.buckets()
            || header.dim != header.config.dim
        {
            return Err(bad("inconsistent header"));
        }
        let n = header.buckets * header.dim;
        let body = &bytes[header_end..];
        if body.len() != n * 8 {
            return Err(bad("weight block has the wrong length"));
        }
        let weights = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            config: header.config,
            weights,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::dataset::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    version: u32,
    buckets: usize,
    dim: usize,
    config: EncoderConfig,
}

/// Row-sparse parameter gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub dim: usize,
    pub rows: BTreeMap<u32, Vec<f64>>,
}

impl Gradient {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.rows.get(&(row as u32)).map_or(0.0, |r| r[col])
    }

    pub fn is_finite(&self) -> bool {
        self.rows.values().flatten().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments over every parameter of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl OptimizerState {
    pub fn new(config: AdamConfig, model: &EncoderModel) -> Self {
        Self {
            config,
            step: 0,
            first: vec![0.0; model.weights.len()],
            second: vec![0.0; model.weights.len()],
        }
    }

    /// One Adam update. Rows absent from the gradient see a zero gradient.
    /// A non-finite gradient leaves model and state untouched.
    pub fn step(&mut self, model: &mut EncoderModel, grad: &Gradient) -> Result<()> {
        if !grad.is_finite() {
            return Err(Error::NonFinite("parameter gradient".into()));
        }
        if grad.dim != model.dim() || self.first.len() != model.weights.len() {
            return Err(Error::LengthMismatch(grad.dim, model.dim()));
        }
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let d = model.dim();
        let mut sparse = grad.rows.iter().peekable();
        for (r, ((w, m), v)) in model
            .weights
            .chunks_exact_mut(d)
            .zip(self.first.chunks_exact_mut(d))
            .zip(self.second.chunks_exact_mut(d))
            .enumerate()
        {
            let g_row = sparse
                .next_if(|(&row, _)| row as usize == r)
                .map(|(_, g)| g.as_slice());
            for j in 0..d {
                let g = g_row.map_or(0.0, |g| g[j]);
                m[j] = beta1 * m[j] + (1.0 - beta1) * g;
                v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
                w[j] -= learning_rate * (m[j] / c1) / ((v[j] / c2).sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
