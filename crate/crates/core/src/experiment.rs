//! Experiment driver: synthesis to disk, training under an ablation variant,
//! evaluation, run manifests and alpha sweeps.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::batch::{BatchSampler, SamplerStats, Strategy};
use crate::dataset::{
    build_groups, groups_in_split, write_atomic, Dataset, Split, ATOMS_FILE, BASELINE_QUERIES_FILE, DOCUMENTS_FILE,
    QUERIES_FILE,
};
use crate::encoder::{AdamConfig, EncoderConfig, EncoderModel, FeatureVector, OptimizerState};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalConfig, EvalReport};
use crate::logic::{Relation, Template};
use crate::loss::{joint_loss, Embeddings, LossConfig};
use crate::synth::{synthesize, SynthConfig, SynthReport};

pub const MODEL_FILE: &str = "model.ckpt";
pub const REPORT_FILE: &str = "report.json";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SYNTH_REPORT_FILE: &str = "synth_report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "supcon")]
    SupCon,
    #[serde(rename = "no-group-no-constraints")]
    NoGroupNoConstraints,
    #[serde(rename = "no-mix-no-constraints")]
    NoMixNoConstraints,
    #[serde(rename = "no-constraints")]
    NoConstraints,
    #[serde(rename = "full")]
    Full,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::SupCon,
        Variant::NoGroupNoConstraints,
        Variant::NoMixNoConstraints,
        Variant::NoConstraints,
        Variant::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::SupCon => "supcon",
            Variant::NoGroupNoConstraints => "no-group-no-constraints",
            Variant::NoMixNoConstraints => "no-mix-no-constraints",
            Variant::NoConstraints => "no-constraints",
            Variant::Full => "full",
        }
    }

    /// Training data, batching and constraint weights of this variant.
    pub fn ablation(self, alpha: f64, loss: &LossConfig) -> Ablation {
        let (queries_file, strategy, constraints) = match self {
            Variant::SupCon => (BASELINE_QUERIES_FILE, Strategy::Random, false),
            Variant::NoGroupNoConstraints => (QUERIES_FILE, Strategy::Random, false),
            Variant::NoMixNoConstraints => (QUERIES_FILE, Strategy::Grouped, false),
            Variant::NoConstraints => (QUERIES_FILE, Strategy::Mixed { alpha }, false),
            Variant::Full => (QUERIES_FILE, Strategy::Mixed { alpha }, true),
        };
        let (lambda_e, lambda_s) = if constraints {
            (loss.lambda_e, loss.lambda_s)
        } else {
            (0.0, 0.0)
        };
        Ablation {
            variant: self,
            queries_file: queries_file.to_string(),
            strategy,
            lambda_e,
            lambda_s,
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub variant: Variant,
    pub queries_file: String,
    pub strategy: Strategy,
    pub lambda_e: f64,
    pub lambda_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Share of random slots in mixed batches.
    pub alpha: f64,
    /// Write an intermediate checkpoint every this many epochs; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 16,
            alpha: 0.5,
            checkpoint_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data_dir: PathBuf,
    pub variant: Variant,
    pub seed: u64,
    pub train: TrainConfig,
    pub loss: LossConfig,
    pub encoder: EncoderConfig,
    pub adam: AdamConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            variant: Variant::Full,
            seed: 0,
            train: TrainConfig::default(),
            loss: LossConfig::default(),
            encoder: EncoderConfig::default(),
            adam: AdamConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        let t = &self.train;
        if t.epochs == 0 || t.batch_size < 2 {
            return Err(Error::Config("epochs must be positive and batch_size at least 2".into()));
        }
        if !(0.0..=1.0).contains(&t.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", t.alpha)));
        }
        if self.adam.learning_rate.is_nan() || self.adam.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn ablation(&self) -> Ablation {
        self.variant.ablation(self.train.alpha, &self.loss)
    }
}

/// Independent seeds per concern, so variants sharing a base seed share
/// their initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub base: u64,
    pub init: u64,
    pub batching: u64,
}

pub fn derive_seed(base: u64, concern: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(concern.as_bytes());
    h.update(base.to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest has 32 bytes"))
}

impl Seeds {
    pub fn new(base: u64) -> Self {
        Self {
            base,
            init: derive_seed(base, "init"),
            batching: derive_seed(base, "batching"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepLog {
    pub epoch: usize,
    pub step: usize,
    pub queries: usize,
    pub documents: usize,
    pub subset_edges: usize,
    pub exclusion_edges: usize,
    pub supcon: f64,
    pub supcon_mean: f64,
    pub exclusion: f64,
    pub subset: f64,
    pub joint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub steps: usize,
    pub supcon: f64,
    pub exclusion: f64,
    pub subset: f64,
    pub joint: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: EncoderModel,
    pub steps: Vec<StepLog>,
    pub epochs: Vec<EpochSummary>,
    pub sampler: SamplerStats,
}

impl TrainOutcome {
    pub fn log_csv(&self) -> String {
        let mut out = String::from(
            "epoch,step,queries,documents,subset_edges,exclusion_edges,supcon,supcon_mean,exclusion,subset,joint\n",
        );
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                s.epoch,
                s.step,
                s.queries,
                s.documents,
                s.subset_edges,
                s.exclusion_edges,
                s.supcon,
                s.supcon_mean,
                s.exclusion,
                s.subset,
                s.joint
            );
        }
        out
    }
}

/// Trains a fresh encoder on the training split of `dataset`. `on_epoch`
/// runs after every epoch with the 1-based epoch number.
pub fn train(
    config: &ExperimentConfig,
    dataset: &Dataset,
    mut on_epoch: impl FnMut(usize, &EncoderModel) -> Result<()>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let ablation = config.ablation();
    let seeds = Seeds::new(config.seed);
    let loss_cfg = LossConfig {
        lambda_e: ablation.lambda_e,
        lambda_s: ablation.lambda_s,
        ..config.loss
    };

    let doc_pos = dataset.doc_index();
    let gt: Vec<Vec<usize>> = dataset
        .queries
        .iter()
        .map(|q| {
            let mut v: Vec<usize> = q.gt_docs.iter().filter_map(|d| doc_pos.get(d.as_str()).copied()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    let pool: Vec<usize> = dataset
        .split_indices(Split::Train)
        .into_iter()
        .filter(|&i| !gt[i].is_empty())
        .collect();
    if pool.len() < 2 {
        return Err(Error::Batch("fewer than two training queries".into()));
    }
    let groups = groups_in_split(&build_groups(&dataset.queries), &dataset.queries, Split::Train);

    let mut model = EncoderModel::new(config.encoder, seeds.init)?;
    let mut opt = OptimizerState::new(config.adam, &model);
    let query_features: Vec<FeatureVector> = dataset.queries.iter().map(|q| model.featurize(&q.text)).collect();
    let doc_features: Vec<FeatureVector> = dataset.documents.iter().map(|d| model.featurize(&d.text)).collect();
    let mut sampler = BatchSampler::new(&dataset.queries, &gt, pool.clone(), groups, seeds.batching)?;
    let steps_per_epoch = pool.len().div_ceil(config.train.batch_size);

    let mut steps = Vec::new();
    let mut epochs = Vec::new();
    let mut step = 0;
    for epoch in 1..=config.train.epochs {
        let mut acc = EpochSummary {
            epoch,
            steps: 0,
            supcon: 0.0,
            exclusion: 0.0,
            subset: 0.0,
            joint: 0.0,
        };
        for _ in 0..steps_per_epoch {
            let batch = sampler.sample_batch(ablation.strategy, config.train.batch_size)?;
            let q_emb: Vec<_> = batch.queries.iter().map(|&q| model.embed(&query_features[q])).collect();
            let d_emb: Vec<_> = batch.documents.iter().map(|&d| model.embed(&doc_features[d])).collect();
            let emb = Embeddings {
                queries: q_emb.iter().map(|e| e.vector.clone()).collect(),
                docs: d_emb.iter().map(|e| e.vector.clone()).collect(),
            };
            let j = joint_loss(&batch, &emb, &loss_cfg)?;
            let items: Vec<(&FeatureVector, _)> = batch
                .queries
                .iter()
                .map(|&q| &query_features[q])
                .zip(&q_emb)
                .chain(batch.documents.iter().map(|&d| &doc_features[d]).zip(&d_emb))
                .collect();
            let upstream: Vec<Vec<f64>> = j.grad_queries.iter().chain(&j.grad_docs).cloned().collect();
            let grad = model.backward(&items, &upstream);
            opt.step(&mut model, &grad)?;

            step += 1;
            acc.steps += 1;
            acc.supcon += j.supcon.value;
            acc.exclusion += j.exclusion.value;
            acc.subset += j.subset.value;
            acc.joint += j.total;
            steps.push(StepLog {
                epoch,
                step,
                queries: batch.queries.len(),
                documents: batch.documents.len(),
                subset_edges: batch.edges_of(Relation::Subset).count(),
                exclusion_edges: batch.edges_of(Relation::Exclusion).count(),
                supcon: j.supcon.value,
                supcon_mean: j.supcon.mean(),
                exclusion: j.exclusion.value,
                subset: j.subset.value,
                joint: j.total,
            });
        }
        let n = acc.steps.max(1) as f64;
        acc.supcon /= n;
        acc.exclusion /= n;
        acc.subset /= n;
        acc.joint /= n;
        log::info!(
            "epoch {epoch}: supcon {:.4} exclusion {:.4} subset {:.4} joint {:.4}",
            acc.supcon,
            acc.exclusion,
            acc.subset,
            acc.joint
        );
        epochs.push(acc);
        on_epoch(epoch, &model)?;
    }
    Ok(TrainOutcome {
        model,
        steps,
        epochs,
        sampler: sampler.stats.clone(),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_checksum(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Checksums of every dataset file present in `dir`.
pub fn dataset_checksums(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for name in [DOCUMENTS_FILE, ATOMS_FILE, QUERIES_FILE, BASELINE_QUERIES_FILE] {
        let p = dir.join(name);
        if p.exists() {
            out.insert(name.to_string(), file_checksum(&p)?);
        }
    }
    Ok(out)
}

/// Loads a dataset and fails unless every stored ground truth matches the
/// one derived from the atoms.
pub fn load_checked(dir: &Path, queries_file: &str) -> Result<Dataset> {
    let (dataset, report) = Dataset::load_with_queries(dir, queries_file)?;
    if !report.is_clean() {
        return Err(Error::Integrity(format!(
            "{} queries in {queries_file} disagree with their derived ground truth (first: {})",
            report.gt_mismatches.len(),
            report.gt_mismatches[0]
        )));
    }
    Ok(dataset)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub load_ms: u128,
    pub train_ms: u128,
    pub eval_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: String,
    pub code_version: String,
    pub config: ExperimentConfig,
    pub ablation: Ablation,
    pub seeds: Seeds,
    pub dataset_checksums: BTreeMap<String, String>,
    pub epochs: Vec<EpochSummary>,
    pub sampler: SamplerStats,
    /// Checksums of the files written next to the manifest.
    pub outputs: BTreeMap<String, String>,
    pub timings: Timings,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Fails if the dataset files no longer match the recorded checksums.
    pub fn verify_dataset(&self) -> Result<()> {
        let now = dataset_checksums(&self.config.data_dir)?;
        for (name, sum) in &self.dataset_checksums {
            if now.get(name) != Some(sum) {
                return Err(Error::Integrity(format!("{name} changed since the run was recorded")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: EvalReport,
    pub manifest: RunManifest,
}

fn to_json_pretty<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Trains the configured variant, evaluates it on the variants query set
/// and writes checkpoint, training log, report and manifest into `out`.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    config.validate()?;
    let ablation = config.ablation();
    let t0 = Instant::now();
    let dataset_checksums = dataset_checksums(&config.data_dir)?;
    let train_data = load_checked(&config.data_dir, &ablation.queries_file)?;
    let eval_data = if ablation.queries_file == QUERIES_FILE {
        train_data.clone()
    } else {
        load_checked(&config.data_dir, QUERIES_FILE)?
    };
    let load_ms = t0.elapsed().as_millis();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let t1 = Instant::now();
    let every = config.train.checkpoint_every;
    let outcome = train(config, &train_data, |epoch, model| {
        if every > 0 && epoch % every == 0 && epoch < config.train.epochs {
            let dir = out.join("checkpoints");
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            model.save(&dir.join(format!("epoch-{epoch:03}.ckpt")))?;
        }
        Ok(())
    })?;
    let train_ms = t1.elapsed().as_millis();

    let t2 = Instant::now();
    let report = evaluate(&outcome.model, &eval_data, &config.eval)?;
    let eval_ms = t2.elapsed().as_millis();

    let ckpt = outcome.model.to_bytes();
    let log = outcome.log_csv().into_bytes();
    let report_bytes = to_json_pretty(&report)?;
    write_atomic(&out.join(MODEL_FILE), &ckpt)?;
    write_atomic(&out.join(TRAIN_LOG_FILE), &log)?;
    write_atomic(&out.join(REPORT_FILE), &report_bytes)?;

    let outputs = BTreeMap::from([
        (MODEL_FILE.to_string(), sha256_hex(&ckpt)),
        (TRAIN_LOG_FILE.to_string(), sha256_hex(&log)),
        (REPORT_FILE.to_string(), sha256_hex(&report_bytes)),
    ]);
    let manifest = RunManifest {
        kind: "train".into(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        ablation,
        seeds: Seeds::new(config.seed),
        dataset_checksums,
        epochs: outcome.epochs,
        sampler: outcome.sampler,
        outputs,
        timings: Timings {
            load_ms,
            train_ms,
            eval_ms,
        },
    };
    write_atomic(&out.join(MANIFEST_FILE), &to_json_pretty(&manifest)?)?;
    Ok(RunOutcome { report, manifest })
}

/// Re-runs whatever a manifest records (a training run or a synthesis) into
/// `out` and returns the names of outputs whose checksums differ.
pub fn reproduce(manifest_path: &Path, out: &Path) -> Result<Vec<String>> {
    let bytes = fs::read(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let value: serde_json::Value = serde_json::from_slice(&bytes)?;
    let (recorded, now) = match value.get("kind").and_then(|k| k.as_str()) {
        Some("train") => {
            let m: RunManifest = serde_json::from_value(value)?;
            m.verify_dataset()?;
            let rerun = run_experiment(&m.config, out)?;
            (m.outputs, rerun.manifest.outputs)
        }
        Some("synthesize") => {
            let m: SynthManifest = serde_json::from_value(value)?;
            synthesize_to_dir(&m.config, m.seed, out)?;
            (m.outputs, dataset_checksums(out)?)
        }
        other => return Err(Error::Config(format!("unsupported manifest kind {other:?}"))),
    };
    Ok(recorded
        .iter()
        .filter(|(name, sum)| now.get(*name) != Some(*sum))
        .map(|(name, _)| name.clone())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub kind: String,
    pub code_version: String,
    pub seed: u64,
    pub config: SynthConfig,
    pub outputs: BTreeMap<String, String>,
}

/// Synthesizes a dataset into `out` with its baseline query set, counts
/// report and manifest.
pub fn synthesize_to_dir(config: &SynthConfig, seed: u64, out: &Path) -> Result<SynthReport> {
    let s = synthesize(config, seed)?;
    s.dataset.save(out)?;
    crate::dataset::save_queries(&out.join(BASELINE_QUERIES_FILE), &s.baseline_queries)?;
    write_atomic(&out.join(SYNTH_REPORT_FILE), &to_json_pretty(&s.report)?)?;
    let manifest = SynthManifest {
        kind: "synthesize".into(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        seed,
        config: config.clone(),
        outputs: dataset_checksums(out)?,
    };
    write_atomic(&out.join(MANIFEST_FILE), &to_json_pretty(&manifest)?)?;
    Ok(s.report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub report: EvalReport,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// One Full run per alpha with shared seeds. Each run lands in
/// `out/alpha-<value>`; `sweep.csv` and `sweep_groups.csv` summarize them.
pub fn alpha_sweep(values: &[f64], base: &ExperimentConfig, out: &Path) -> Result<Vec<SweepPoint>> {
    if let Some(bad) = values.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::Config(format!("alpha {bad} outside [0, 1]")));
    }
    let mut points = Vec::new();
    for &alpha in values {
        let mut cfg = base.clone();
        cfg.variant = Variant::Full;
        cfg.train.alpha = alpha;
        let run = run_experiment(&cfg, &out.join(format!("alpha-{alpha}")))?;
        points.push(SweepPoint {
            alpha,
            report: run.report,
        });
    }

    let mut csv = String::from("alpha,p_at_1");
    let mut groups_csv = String::from("alpha,atoms,size,avg_group_sim\n");
    if let Some(first) = points.first() {
        for k in &first.report.ks {
            let _ = write!(csv, ",recall_at_{k}");
        }
        for t in Template::ALL {
            for k in &first.report.ks {
                let _ = write!(csv, ",{}_recall_at_{k}", t.symbol());
            }
        }
    }
    csv.push_str(",mean_group_sim,violation_rate\n");
    for p in &points {
        let r = &p.report;
        let _ = write!(csv, "{},{:.6}", p.alpha, r.overall.p_at_1);
        for v in &r.overall.recall {
            let _ = write!(csv, ",{v:.6}");
        }
        for t in Template::ALL {
            for i in 0..r.ks.len() {
                let v = r.per_template.get(t.symbol()).map(|s| s.recall[i]);
                let _ = write!(csv, ",{}", fmt_opt(v));
            }
        }
        let _ = writeln!(csv, ",{},{}", fmt_opt(r.mean_group_sim), fmt_opt(r.violation.rate));
        for g in &r.group_sims {
            let _ = writeln!(groups_csv, "{},{},{},{:.6}", p.alpha, g.atom_ids.join(" "), g.size, g.sim);
        }
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_atomic(&out.join("sweep.csv"), csv.as_bytes())?;
    write_atomic(&out.join("sweep_groups.csv"), groups_csv.as_bytes())?;
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variants_map_to_their_training_setup() {
        let loss = LossConfig::default();
        let s = Variant::SupCon.ablation(0.5, &loss);
        assert_eq!((s.queries_file.as_str(), s.strategy, s.lambda_e), (BASELINE_QUERIES_FILE, Strategy::Random, 0.0));
        let s = Variant::NoGroupNoConstraints.ablation(0.5, &loss);
        assert_eq!((s.queries_file.as_str(), s.strategy, s.lambda_s), (QUERIES_FILE, Strategy::Random, 0.0));
        assert_eq!(Variant::NoMixNoConstraints.ablation(0.5, &loss).strategy, Strategy::Grouped);
        let s = Variant::NoConstraints.ablation(0.3, &loss);
        assert_eq!((s.strategy, s.lambda_e), (Strategy::Mixed { alpha: 0.3 }, 0.0));
        let s = Variant::Full.ablation(0.3, &loss);
        assert_eq!((s.lambda_e, s.lambda_s), (0.1, 0.1));
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
    }

    #[test]
    fn config_parses_partial_toml() {
        let cfg = ExperimentConfig::from_toml(
            "data_dir = \"d\"\nvariant = \"no-constraints\"\nseed = 3\n[train]\nepochs = 2\n[loss]\ntau = 0.1\n",
        )
        .unwrap();
        assert_eq!(cfg.variant, Variant::NoConstraints);
        assert_eq!((cfg.train.epochs, cfg.train.batch_size), (2, 16));
        assert_eq!((cfg.loss.tau, cfg.loss.gamma_e), (0.1, 0.2));
        assert!(ExperimentConfig::from_toml("[train]\nalpha = 2.0\n").is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn seeds_differ_per_concern() {
        let s = Seeds::new(7);
        assert_ne!(s.init, s.batching);
        assert_eq!(s, Seeds::new(7));
        assert_ne!(s.init, Seeds::new(8).init);
    }
}
