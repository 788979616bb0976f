//! Synthetic entity corpus with category atoms and templated query variants.
//!
//! Entities belong to one domain and carry a handful of that domain's
//! categories, drawn with a Zipf-like popularity skew. Atom pools are taken
//! from the category sets of anchor entities, so every pool co-occurs at
//! least once and its conjunction is non-empty.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Document, QueryRecord, Split};
use crate::error::{Error, Result};
use crate::logic::{derive_ground_truth, AtomicQuery, QueryExpr, Template};

const DOMAINS: [(&str, &str); 6] = [
    ("films set in", "Film"),
    ("novels about", "Novel"),
    ("orchids of", "Orchid"),
    ("birds of", "Bird"),
    ("songs about", "Song"),
    ("paintings of", "Painting"),
];

// Category values per domain, indexed like DOMAINS.
const VALUES: [[&str; 20]; 6] = [
    [
        "libya", "tunisia", "egypt", "morocco", "algeria", "sudan", "kenya", "uganda", "ghana", "nigeria",
        "senegal", "mali", "chad", "niger", "angola", "zambia", "malawi", "botswana", "namibia", "ethiopia",
    ],
    [
        "war", "dragons", "friendship", "betrayal", "revenge", "exile", "childhood", "marriage", "pirates", "witches",
        "detectives", "robots", "famine", "slavery", "monarchy", "sailors", "orphans", "ghosts", "vampires", "spies",
    ],
    [
        "malaysia", "thailand", "indonesia", "vietnam", "laos", "cambodia", "myanmar", "borneo", "sumatra", "java",
        "taiwan", "japan", "korea", "mongolia", "nepal", "bhutan", "tibet", "sikkim", "assam", "yunnan",
    ],
    [
        "peru", "chile", "bolivia", "ecuador", "colombia", "venezuela", "guyana", "suriname", "paraguay", "uruguay",
        "brazil", "argentina", "mexico", "cuba", "jamaica", "haiti", "panama", "belize", "honduras", "nicaragua",
    ],
    [
        "winter", "rivers", "horses", "trains", "cities", "mountains", "harbors", "storms", "gardens", "deserts",
        "love", "summer", "roads", "oceans", "rain", "freedom", "home", "night", "youth", "money",
    ],
    [
        "norway", "sweden", "finland", "iceland", "denmark", "estonia", "latvia", "lithuania", "poland", "austria",
        "hungary", "romania", "bulgaria", "serbia", "croatia", "greece", "turkey", "cyprus", "malta", "portugal",
    ],
];

const SYLLABLES: [&str; 12] = ["ka", "lo", "mi", "ru", "te", "sa", "vo", "ne", "pi", "da", "zu", "ber"];

fn surfaces(t: Template) -> &'static [&'static str] {
    match t {
        Template::Atom => &["{h} {a}"],
        Template::And => &["{h} {a} and {b}", "{h} both {a} and {b}"],
        Template::Or => &["{h} {a} or {b}", "{h} either {a} or {b}"],
        Template::Diff => &["{h} {a} but not {b}", "{h} {a} and not {b}"],
        Template::And3 => &["{h} {a}, {b} and {c}", "{h} {a} and {b} and {c}"],
        Template::AndDiff => &["{h} {a} and {b}, but not {c}", "{h} {a} and {b} but not {c}"],
        Template::Or3 => &["{h} {a}, {b} or {c}", "{h} {a} or {b} or {c}"],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.6,
            validation: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_entities: usize,
    pub n_atoms: usize,
    pub n_domains: usize,
    /// Mean number of categories per entity (one plus a Poisson draw).
    pub mean_categories: f64,
    /// Exponent of the within-domain category popularity weights `1/(r+1)^s`.
    pub popularity_skew: f64,
    pub n_pair_pools: usize,
    pub n_triple_pools: usize,
    pub split: SplitRatios,
    /// Templates to compose; all seven when absent.
    pub templates: Option<Vec<String>>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_entities: 2000,
            n_atoms: 60,
            n_domains: 4,
            mean_categories: 3.0,
            popularity_skew: 0.8,
            n_pair_pools: 110,
            n_triple_pools: 60,
            split: SplitRatios::default(),
            templates: None,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<Vec<Template>> {
        if self.n_atoms < 3 {
            return Err(Error::Config("n_atoms must be at least 3".into()));
        }
        if self.n_domains == 0 || self.n_domains > DOMAINS.len() || self.n_domains > self.n_atoms {
            return Err(Error::Config(format!("n_domains must be in 1..={}", DOMAINS.len())));
        }
        if self.mean_categories.is_nan() || self.mean_categories < 1.0 {
            return Err(Error::Config("mean_categories must be >= 1".into()));
        }
        let s = &self.split;
        if s.train < 0.0 || s.validation < 0.0 || s.train + s.validation > 1.0 {
            return Err(Error::Config("split ratios must be non-negative and sum to <= 1".into()));
        }
        match &self.templates {
            None => Ok(Template::ALL.to_vec()),
            Some(names) => names.iter().map(|n| n.parse()).collect(),
        }
    }
}

/// Counts emitted next to the synthesized files.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SynthReport {
    pub seed: u64,
    pub documents: usize,
    pub atoms_retained: usize,
    pub atoms_discarded: usize,
    pub pair_pools: usize,
    pub triple_pools: usize,
    pub variants_dropped_empty: usize,
    /// template -> split -> count, for the variants query set.
    pub variants: BTreeMap<String, BTreeMap<String, usize>>,
    /// template -> count, for the baseline (train-only) query set.
    pub baseline: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    /// Train atoms plus one original complex query per train pool.
    pub baseline_queries: Vec<QueryRecord>,
    pub report: SynthReport,
}

/// Surface parts of an atom, needed to render composite queries.
#[derive(Debug, Clone)]
struct AtomParts {
    head: &'static str,
    value: String,
}

/// Value word for the `local`-th category of `domain`; past the fixed list a
/// pseudo-word derived from the global atom index keeps values distinct.
fn value_word(domain: usize, local: usize, global: usize) -> String {
    if let Some(v) = VALUES[domain].get(local) {
        return v.to_string();
    }
    let mut n = global;
    let mut w = String::new();
    for _ in 0..3 {
        w.push_str(SYLLABLES[n % SYLLABLES.len()]);
        n /= SYLLABLES.len();
    }
    format!("{w}{}", SYLLABLES[n % SYLLABLES.len()])
}

/// Corpus and atom synthesis. Atoms with no document are discarded; the
/// second value counts them.
pub fn synthesize_corpus(
    config: &SynthConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Document>, Vec<AtomicQuery>, usize)> {
    config.validate()?;
    let (docs, atoms, _, discarded) = corpus_with_parts(config, rng)?;
    Ok((docs, atoms, discarded))
}

type Corpus = (Vec<Document>, Vec<AtomicQuery>, HashMap<String, AtomParts>, usize);

fn corpus_with_parts(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Corpus> {
    let n_domains = config.n_domains;
    // atoms are dealt to domains in contiguous blocks
    let domain_atoms: Vec<Vec<usize>> = (0..n_domains)
        .map(|d| {
            let lo = d * config.n_atoms / n_domains;
            let hi = (d + 1) * config.n_atoms / n_domains;
            (lo..hi).collect()
        })
        .collect();
    let mut atom_domain = vec![0; config.n_atoms];
    for (d, atoms) in domain_atoms.iter().enumerate() {
        for &a in atoms {
            atom_domain[a] = d;
        }
    }
    let extra = Poisson::new(config.mean_categories - 1.0).ok();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); config.n_atoms];
    let mut entity_cats: Vec<Vec<usize>> = Vec::with_capacity(config.n_entities);
    for e in 0..config.n_entities {
        let d = rng.random_range(0..n_domains);
        let pool = &domain_atoms[d];
        let k = match &extra {
            Some(p) => 1 + p.sample(rng) as usize,
            None => 1,
        }
        .min(pool.len());
        let mut weights: Vec<f64> = (0..pool.len())
            .map(|r| 1.0 / ((r + 1) as f64).powf(config.popularity_skew))
            .collect();
        let mut cats = Vec::with_capacity(k);
        for _ in 0..k {
            let total: f64 = weights.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut pick = weights.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 && u < *w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            // guard against rounding at the tail landing on a taken slot
            while weights[pick] == 0.0 {
                pick -= 1;
            }
            weights[pick] = 0.0;
            cats.push(pool[pick]);
        }
        cats.sort_unstable();
        for &c in &cats {
            members[c].push(e);
        }
        entity_cats.push(cats);
    }

    let atom_id = |a: usize| format!("a{a:03}");
    let doc_id = |e: usize| format!("d{e:05}");
    let parts: Vec<AtomParts> = (0..config.n_atoms)
        .map(|a| AtomParts {
            head: DOMAINS[atom_domain[a]].0,
            value: value_word(atom_domain[a], a - domain_atoms[atom_domain[a]][0], a),
        })
        .collect();
    let atom_text = |a: usize| format!("{} {}", parts[a].head, parts[a].value);

    let documents: Vec<Document> = (0..config.n_entities)
        .map(|e| {
            let d = atom_domain[entity_cats[e][0]];
            let title = format!("{} {}", DOMAINS[d].1, e + 1);
            let cats: Vec<String> = entity_cats[e].iter().map(|&c| atom_text(c)).collect();
            let listed = match cats.len() {
                1 => cats[0].clone(),
                n => format!("{} and {}", cats[..n - 1].join(", "), cats[n - 1]),
            };
            Document {
                id: doc_id(e),
                text: format!("{title} is listed among {listed}."),
                title,
            }
        })
        .collect();

    let mut atoms = Vec::new();
    let mut atom_parts = HashMap::new();
    let mut discarded = 0;
    for a in 0..config.n_atoms {
        if members[a].is_empty() {
            discarded += 1;
            continue;
        }
        atoms.push(AtomicQuery {
            id: atom_id(a),
            text: atom_text(a),
            doc_ids: members[a].iter().map(|&e| doc_id(e)).collect(),
        });
        atom_parts.insert(atom_id(a), parts[a].clone());
    }
    if discarded > 0 {
        log::warn!("{discarded} atoms had no documents and were discarded");
    }
    Ok((documents, atoms, atom_parts, discarded))
}

fn render(template: Template, head: &str, values: &[&str], rng: &mut ChaCha8Rng) -> String {
    let pattern = surfaces(template).choose(rng).expect("non-empty surface list");
    let mut out = pattern.replace("{h}", head);
    for (slot, v) in ["{a}", "{b}", "{c}"].iter().zip(values) {
        out = out.replace(slot, v);
    }
    out
}

/// Composes the template variants of one atom pool. The pool's own atom
/// queries are included; variants with an empty ground truth are dropped.
/// Pools of two use the two-atom templates, pools of three the three-atom
/// ones. Records come back with empty ids and the `Train` split.
pub fn compose_variants(
    pool: &[AtomicQuery],
    templates: &[Template],
    rng: &mut ChaCha8Rng,
) -> Vec<QueryRecord> {
    let heads: Vec<(&str, &str)> = pool.iter().map(|a| split_head(&a.text)).collect();
    let parts: HashMap<String, AtomParts> = pool
        .iter()
        .zip(&heads)
        .map(|(a, (h, v))| {
            (
                a.id.clone(),
                AtomParts {
                    head: leak_head(h),
                    value: v.to_string(),
                },
            )
        })
        .collect();
    compose_with_parts(pool, &parts, templates, rng).0
}

// Heads are from the fixed domain table; anything else falls back to the
// whole text as value with an empty head.
fn split_head(text: &str) -> (&str, &str) {
    for (h, _) in DOMAINS {
        if let Some(rest) = text.strip_prefix(h) {
            return (h, rest.trim_start());
        }
    }
    ("", text)
}

fn leak_head(h: &str) -> &'static str {
    DOMAINS.iter().map(|d| d.0).find(|d| *d == h).unwrap_or("")
}

fn compose_with_parts(
    pool: &[AtomicQuery],
    parts: &HashMap<String, AtomParts>,
    templates: &[Template],
    rng: &mut ChaCha8Rng,
) -> (Vec<QueryRecord>, usize) {
    let sets: HashMap<&str, BTreeSet<String>> = pool
        .iter()
        .map(|a| (a.id.as_str(), a.doc_ids.iter().cloned().collect()))
        .collect();
    let ids: Vec<String> = pool.iter().map(|a| a.id.clone()).collect();
    let mut out = Vec::new();
    let mut dropped = 0;
    let wanted: &[Template] = match pool.len() {
        2 => &Template::PAIR,
        3 => &Template::TRIPLE,
        _ => &[],
    };
    let mut candidates: Vec<QueryExpr> = ids.iter().map(|a| QueryExpr::atom(a.clone())).collect();
    for t in wanted {
        candidates.push(QueryExpr::new(*t, ids.clone()).expect("pool atoms are distinct"));
    }
    for expr in candidates {
        if !templates.contains(&expr.template()) {
            continue;
        }
        let gt = derive_ground_truth(&expr, |a| sets.get(a)).expect("pool covers its atoms");
        if gt.is_empty() {
            dropped += 1;
            continue;
        }
        let head = parts.get(&expr.atoms()[0]).map(|p| p.head).unwrap_or("");
        let values: Vec<&str> = expr
            .atoms()
            .iter()
            .map(|a| parts.get(a).map(|p| p.value.as_str()).unwrap_or(a.as_str()))
            .collect();
        let text = render(expr.template(), head, &values, rng).trim().to_string();
        out.push(QueryRecord {
            id: String::new(),
            expr,
            text,
            gt_docs: gt,
            split: Split::Train,
        });
    }
    (out, dropped)
}

fn draw_split(ratios: &SplitRatios, rng: &mut ChaCha8Rng) -> Split {
    let u: f64 = rng.random();
    if u < ratios.train {
        Split::Train
    } else if u < ratios.train + ratios.validation {
        Split::Validation
    } else {
        Split::Test
    }
}

fn sample_pools(
    atoms: &[AtomicQuery],
    size: usize,
    count: usize,
    used: &mut BTreeSet<Vec<String>>,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<String>> {
    // entity -> retained atoms carrying it
    let mut carried: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for a in atoms {
        for d in &a.doc_ids {
            carried.entry(d.as_str()).or_default().push(a.id.as_str());
        }
    }
    let anchors: Vec<&Vec<&str>> = carried.values().filter(|c| c.len() >= size).collect();
    let mut pools = Vec::new();
    if anchors.is_empty() {
        return pools;
    }
    let mut attempts = 0;
    while pools.len() < count && attempts < 50 * count.max(1) {
        attempts += 1;
        let cats = anchors[rng.random_range(0..anchors.len())];
        let mut pick: Vec<String> = cats.choose_multiple(rng, size).map(|s| s.to_string()).collect();
        pick.shuffle(rng);
        let mut key = pick.clone();
        key.sort();
        if used.insert(key) {
            pools.push(pick);
        }
    }
    pools
}

/// Full synthesis: corpus, atoms, pooled variants, splits and the baseline
/// query set. A pure function of `config` and `seed`.
pub fn synthesize(config: &SynthConfig, seed: u64) -> Result<SynthOutput> {
    let templates = config.validate()?;
    let mut corpus_rng = ChaCha8Rng::seed_from_u64(seed);
    let (documents, atoms, parts, discarded) = corpus_with_parts(config, &mut corpus_rng)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_9001);

    let by_id: HashMap<&str, &AtomicQuery> = atoms.iter().map(|a| (a.id.as_str(), a)).collect();
    let mut used = BTreeSet::new();
    let mut pools = sample_pools(&atoms, 2, config.n_pair_pools, &mut used, &mut rng);
    let pair_pools = pools.len();
    pools.extend(sample_pools(&atoms, 3, config.n_triple_pools, &mut used, &mut rng));
    let triple_pools = pools.len() - pair_pools;

    let mut report = SynthReport {
        seed,
        documents: documents.len(),
        atoms_retained: atoms.len(),
        atoms_discarded: discarded,
        pair_pools,
        triple_pools,
        ..Default::default()
    };

    let mut queries: Vec<QueryRecord> = Vec::new();
    // one single-atom query per retained atom, split drawn per atom
    if templates.contains(&Template::Atom) {
        for a in &atoms {
            let split = draw_split(&config.split, &mut rng);
            queries.push(QueryRecord {
                id: String::new(),
                expr: QueryExpr::atom(a.id.clone()),
                text: a.text.clone(),
                gt_docs: a.doc_ids.iter().cloned().collect(),
                split,
            });
        }
    }
    let complex_templates: Vec<Template> =
        templates.iter().copied().filter(|t| *t != Template::Atom).collect();
    let mut pool_records: Vec<Vec<usize>> = Vec::new();
    for pool in &pools {
        let members: Vec<AtomicQuery> = pool.iter().map(|a| by_id[a.as_str()].clone()).collect();
        let split = draw_split(&config.split, &mut rng);
        let (records, dropped) = compose_with_parts(&members, &parts, &complex_templates, &mut rng);
        report.variants_dropped_empty += dropped;
        let mut idx = Vec::new();
        for mut r in records {
            r.split = split;
            idx.push(queries.len());
            queries.push(r);
        }
        pool_records.push(idx);
    }
    for (i, q) in queries.iter_mut().enumerate() {
        q.id = format!("q{i:05}");
    }

    let mut baseline: Vec<QueryRecord> = queries
        .iter()
        .filter(|q| q.expr.template() == Template::Atom && q.split == Split::Train)
        .cloned()
        .collect();
    for idx in &pool_records {
        if let Some(&first) = idx.first() {
            if queries[first].split == Split::Train {
                let &pick = idx.choose(&mut rng).expect("non-empty");
                baseline.push(queries[pick].clone());
            }
        }
    }
    baseline.sort_by(|a, b| a.id.cmp(&b.id));

    for q in &queries {
        *report
            .variants
            .entry(q.expr.template().symbol().to_string())
            .or_default()
            .entry(q.split.name().to_string())
            .or_default() += 1;
    }
    for q in &baseline {
        *report
            .baseline
            .entry(q.expr.template().symbol().to_string())
            .or_default() += 1;
    }

    Ok(SynthOutput {
        dataset: Dataset {
            documents,
            atoms,
            queries,
        },
        baseline_queries: baseline,
        report,
    })
}
