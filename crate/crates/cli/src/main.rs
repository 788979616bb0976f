use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use logicol::dataset::{Split, QUERIES_FILE};
use logicol::encoder::EncoderModel;
use logicol::eval::{and_not_pairs, correlation_records, embed_queries, evaluate_with_index, EvalConfig};
use logicol::experiment::{
    alpha_sweep, load_checked, reproduce, run_experiment, synthesize_to_dir, ExperimentConfig, Variant,
};
use logicol::retrieval::build_index;
use logicol::synth::SynthConfig;

#[derive(Parser)]
#[command(name = "logicol", version, about = "Logically consistent dense retrieval experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus, atoms and query sets.
    Synthesize {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// TOML synthesis settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one ablation variant and evaluate it.
    Train {
        /// TOML experiment settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a dataset split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Experiment TOML whose `[eval]` table is used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
        #[arg(long, value_parser = parse_split)]
        split: Option<Split>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Similarity analyses of a trained model.
    Analyze {
        #[command(subcommand)]
        what: Analysis,
    },
    /// Full-variant runs over a list of alpha values.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        alphas: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run a recorded training run and compare output checksums.
    Reproduce {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum Analysis {
    /// Pearson r and top-k overlap of query pairs over their pooled top-k.
    Correlation {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// File of `q1,q2` id pairs, one per line; AND-vs-NOT test pairs when absent.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "validation" => Ok(Split::Validation),
        "test" => Ok(Split::Test),
        _ => Err(format!("unknown split {s:?}")),
    }
}

fn experiment_config(path: Option<&Path>, seed: Option<u64>, data: Option<PathBuf>) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(d) = data {
        cfg.data_dir = d;
    }
    Ok(cfg)
}

fn read_pairs(path: &Path, ids: &HashMap<&str, usize>) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split([',', ' ', '\t']).filter(|s| !s.is_empty()).collect();
        let [a, b] = parts[..] else {
            bail!("{}:{}: expected two query ids", path.display(), n + 1);
        };
        let look = |id: &str| ids.get(id).copied().with_context(|| format!("{}:{}: unknown query {id}", path.display(), n + 1));
        pairs.push((look(a)?, look(b)?));
    }
    Ok(pairs)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synthesize { seed, config, out } => {
            let cfg: SynthConfig = match config {
                Some(p) => toml::from_str(&fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?)?,
                None => SynthConfig::default(),
            };
            let report = synthesize_to_dir(&cfg, seed, &out)?;
            println!(
                "{} documents, {} atoms, {} pair pools, {} triple pools -> {}",
                report.documents,
                report.atoms_retained,
                report.pair_pools,
                report.triple_pools,
                out.display()
            );
        }
        Command::Train {
            config,
            seed,
            variant,
            data,
            out,
        } => {
            let mut cfg = experiment_config(config.as_deref(), seed, data)?;
            if let Some(v) = variant {
                cfg.variant = v;
            }
            let run = run_experiment(&cfg, &out)?;
            let r = &run.report;
            println!(
                "{}: P@1 {:.4}, R@{:?} {:?}, violation rate {:?} -> {}",
                cfg.variant.name(),
                r.overall.p_at_1,
                r.ks,
                r.overall.recall,
                r.violation.rate,
                out.display()
            );
        }
        Command::Eval {
            model,
            data,
            config,
            ks,
            split,
            out,
        } => {
            let mut eval = match config {
                Some(p) => ExperimentConfig::load(&p)?.eval,
                None => EvalConfig::default(),
            };
            if let Some(ks) = ks {
                eval.ks = ks;
            }
            if let Some(s) = split {
                eval.split = s;
            }
            let model = EncoderModel::load(&model)?;
            let dataset = load_checked(&data, QUERIES_FILE)?;
            let index = build_index(&model, &dataset.documents);
            let report = evaluate_with_index(&model, &index, &dataset, &eval)?;
            let mut bytes = serde_json::to_vec_pretty(&report)?;
            bytes.push(b'\n');
            fs::write(&out, bytes).with_context(|| format!("writing {}", out.display()))?;
            println!("P@1 {:.4}, R@{:?} {:?} -> {}", report.overall.p_at_1, report.ks, report.overall.recall, out.display());
        }
        Command::Analyze {
            what:
                Analysis::Correlation {
                    model,
                    data,
                    pairs,
                    k,
                    out,
                },
        } => {
            let model = EncoderModel::load(&model)?;
            let dataset = load_checked(&data, QUERIES_FILE)?;
            let ids: HashMap<&str, usize> = dataset.queries.iter().enumerate().map(|(i, q)| (q.id.as_str(), i)).collect();
            let pairs = match pairs {
                Some(p) => read_pairs(&p, &ids)?,
                None => and_not_pairs(&dataset, Split::Test),
            };
            let index = build_index(&model, &dataset.documents);
            let emb = embed_queries(&model, &dataset);
            let k = k.min(index.len()).max(1);
            let mut csv = String::from("q1,q2,template1,template2,pearson_r,overlap,pool_size\n");
            for r in correlation_records(&index, &dataset, &emb, &pairs, k) {
                let c = &r.correlation;
                let pr = c.pearson_r.map(|v| format!("{v:.6}")).unwrap_or_default();
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{pr},{},{}",
                    r.q1,
                    r.q2,
                    r.template1.symbol(),
                    r.template2.symbol(),
                    c.overlap,
                    c.pool_size
                );
            }
            fs::write(&out, csv).with_context(|| format!("writing {}", out.display()))?;
            println!("{} pairs at k={k} -> {}", pairs.len(), out.display());
        }
        Command::Sweep {
            config,
            seed,
            data,
            alphas,
            out,
        } => {
            let cfg = experiment_config(config.as_deref(), seed, data)?;
            let points = alpha_sweep(&alphas, &cfg, &out)?;
            for p in &points {
                println!(
                    "alpha {}: R@{:?} {:?}, mean group sim {:?}",
                    p.alpha, p.report.ks, p.report.overall.recall, p.report.mean_group_sim
                );
            }
        }
        Command::Reproduce { manifest, out } => {
            let diffs = reproduce(&manifest, &out)?;
            if !diffs.is_empty() {
                bail!("outputs differ from the manifest: {}", diffs.join(", "));
            }
            println!("all outputs match {}", manifest.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
