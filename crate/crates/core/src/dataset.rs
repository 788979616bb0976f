//! Corpus, atoms and query records, their JSONL layout, and query groups.
//!
//! A dataset directory holds `documents.jsonl`, `atoms.jsonl` and
//! `queries.jsonl`. Loading checks every record against the atom sets and
//! counts ground-truth disagreements instead of failing on them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::logic::{derive_ground_truth, AtomicQuery, QueryExpr, Template};

pub const DOCUMENTS_FILE: &str = "documents.jsonl";
pub const ATOMS_FILE: &str = "atoms.jsonl";
pub const QUERIES_FILE: &str = "queries.jsonl";
pub const BASELINE_QUERIES_FILE: &str = "baseline_queries.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "validation" => Some(Split::Validation),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryRecord {
    pub id: String,
    pub expr: QueryExpr,
    pub text: String,
    pub gt_docs: BTreeSet<String>,
    pub split: Split,
}

#[derive(Serialize)]
struct QueryLine<'a> {
    id: &'a str,
    template: &'a str,
    atoms: &'a [String],
    text: &'a str,
    gt_docs: Vec<&'a str>,
    split: &'a str,
}

/// Queries sharing one atom pool, plus the pool's single-atom queries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueryGroup {
    pub atom_ids: Vec<String>,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    /// Ids of queries whose stored `gt_docs` differ from the derived set.
    pub gt_mismatches: Vec<String>,
}

impl LoadReport {
    pub fn is_clean(&self) -> bool {
        self.gt_mismatches.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub documents: Vec<Document>,
    pub atoms: Vec<AtomicQuery>,
    pub queries: Vec<QueryRecord>,
}

impl Dataset {
    pub fn atom_sets(&self) -> HashMap<&str, BTreeSet<String>> {
        self.atoms
            .iter()
            .map(|a| (a.id.as_str(), a.doc_ids.iter().cloned().collect()))
            .collect()
    }

    pub fn doc_index(&self) -> HashMap<&str, usize> {
        self.documents
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.as_str(), i))
            .collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join(DOCUMENTS_FILE), &self.documents)?;
        write_jsonl(&dir.join(ATOMS_FILE), &self.atoms)?;
        save_queries(&dir.join(QUERIES_FILE), &self.queries)
    }

    pub fn load(dir: &Path) -> Result<(Self, LoadReport)> {
        Self::load_with_queries(dir, QUERIES_FILE)
    }

    /// Loads documents and atoms from `dir` and the query records from
    /// `dir/queries_file`.
    pub fn load_with_queries(dir: &Path, queries_file: &str) -> Result<(Self, LoadReport)> {
        let documents = load_documents(&dir.join(DOCUMENTS_FILE))?;
        let atoms = load_atoms(&dir.join(ATOMS_FILE))?;
        let mut seen = BTreeSet::new();
        for d in &documents {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::Integrity(format!("duplicate document id {}", d.id)));
            }
        }
        let mut seen_atoms = BTreeSet::new();
        for a in &atoms {
            if !seen_atoms.insert(a.id.as_str()) {
                return Err(Error::Integrity(format!("duplicate atom id {}", a.id)));
            }
            if let Some(bad) = a.doc_ids.iter().find(|d| !seen.contains(d.as_str())) {
                return Err(Error::Integrity(format!("atom {} lists unknown document {bad}", a.id)));
            }
        }
        let path = dir.join(queries_file);
        let queries = load_queries(&path)?;
        let mut ds = Dataset {
            documents,
            atoms,
            queries,
        };
        let report = ds.check(&path)?;
        Ok((ds, report))
    }

    /// Verifies every query against the atom sets. Unknown atoms or documents
    /// are errors; ground-truth disagreements are counted.
    fn check(&mut self, path: &Path) -> Result<LoadReport> {
        let sets = self.atom_sets();
        let docs: BTreeSet<&str> = self.documents.iter().map(|d| d.id.as_str()).collect();
        let mut report = LoadReport::default();
        let mut ids = BTreeSet::new();
        for (line, q) in self.queries.iter().enumerate() {
            let parse_err = |field: &str, message: String| Error::Parse {
                path: path.to_path_buf(),
                line: line + 1,
                field: field.into(),
                message,
            };
            if !ids.insert(q.id.as_str()) {
                return Err(parse_err("id", format!("duplicate query id {}", q.id)));
            }
            let derived = derive_ground_truth(&q.expr, |a| sets.get(a))
                .map_err(|e| parse_err("atoms", e.to_string()))?;
            if let Some(bad) = q.gt_docs.iter().find(|d| !docs.contains(d.as_str())) {
                return Err(parse_err("gt_docs", format!("unknown document {bad}")));
            }
            if derived != q.gt_docs {
                log::warn!("query {} ground truth disagrees with its atoms", q.id);
                report.gt_mismatches.push(q.id.clone());
            }
        }
        Ok(report)
    }

    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        (0..self.queries.len())
            .filter(|&i| self.queries[i].split == split)
            .collect()
    }
}

/// Groups queries by their distinct atom pool. Each multi-atom query lands in
/// exactly one group; the pool's single-atom queries are listed first. Pools
/// that would end up with fewer than two members are left out.
pub fn build_groups(queries: &[QueryRecord]) -> Vec<QueryGroup> {
    let mut atom_queries: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut pools: BTreeMap<Vec<String>, Vec<usize>> = BTreeMap::new();
    for (i, q) in queries.iter().enumerate() {
        if q.expr.template() == Template::Atom {
            atom_queries.entry(q.expr.atoms()[0].as_str()).or_default().push(i);
        } else {
            let mut pool = q.expr.atoms().to_vec();
            pool.sort();
            pools.entry(pool).or_default().push(i);
        }
    }
    pools
        .into_iter()
        .filter_map(|(atom_ids, complex)| {
            let mut members: Vec<usize> = atom_ids
                .iter()
                .flat_map(|a| atom_queries.get(a.as_str()).into_iter().flatten().copied())
                .collect();
            members.extend(complex);
            (members.len() >= 2).then_some(QueryGroup { atom_ids, members })
        })
        .collect()
}

/// Restricts groups to members of one split, dropping any left with fewer
/// than two members.
pub fn groups_in_split(groups: &[QueryGroup], queries: &[QueryRecord], split: Split) -> Vec<QueryGroup> {
    groups
        .iter()
        .filter_map(|g| {
            let members: Vec<usize> = g
                .members
                .iter()
                .copied()
                .filter(|&m| queries[m].split == split)
                .collect();
            (members.len() >= 2).then(|| QueryGroup {
                atom_ids: g.atom_ids.clone(),
                members,
            })
        })
        .collect()
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item)?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

/// Writes through a temporary sibling and renames into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp~");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn save_queries(path: &Path, queries: &[QueryRecord]) -> Result<()> {
    let mut buf = Vec::new();
    for q in queries {
        let line = QueryLine {
            id: &q.id,
            template: q.expr.template().symbol(),
            atoms: q.expr.atoms(),
            text: &q.text,
            gt_docs: q.gt_docs.iter().map(String::as_str).collect(),
            split: q.split.name(),
        };
        serde_json::to_writer(&mut buf, &line)?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

struct LineCtx<'a> {
    path: &'a Path,
    line: usize,
}

impl LineCtx<'_> {
    fn err(&self, field: &str, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn str_field(&self, obj: &Value, field: &str) -> Result<String> {
        obj.get(field)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| self.err(field, "missing or not a string"))
    }

    fn str_list(&self, obj: &Value, field: &str) -> Result<Vec<String>> {
        let arr = obj
            .get(field)
            .and_then(Value::as_array)
            .ok_or_else(|| self.err(field, "missing or not an array"))?;
        arr.iter()
            .map(|v| v.as_str().map(str::to_string).ok_or_else(|| self.err(field, "non-string entry")))
            .collect()
    }
}

fn read_lines(path: &Path) -> Result<Vec<(LineCtx<'_>, Value)>> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, raw) in body.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let ctx = LineCtx { path, line: i + 1 };
        let v: Value = serde_json::from_str(raw).map_err(|e| ctx.err("<json>", e.to_string()))?;
        if !v.is_object() {
            return Err(ctx.err("<json>", "expected an object"));
        }
        out.push((ctx, v));
    }
    Ok(out)
}

pub fn load_documents(path: &Path) -> Result<Vec<Document>> {
    read_lines(path)?
        .into_iter()
        .map(|(ctx, v)| {
            let text = ctx.str_field(&v, "text")?;
            if text.is_empty() {
                return Err(ctx.err("text", "empty document text"));
            }
            Ok(Document {
                id: ctx.str_field(&v, "id")?,
                title: ctx.str_field(&v, "title")?,
                text,
            })
        })
        .collect()
}

pub fn load_atoms(path: &Path) -> Result<Vec<AtomicQuery>> {
    read_lines(path)?
        .into_iter()
        .map(|(ctx, v)| {
            Ok(AtomicQuery {
                id: ctx.str_field(&v, "id")?,
                text: ctx.str_field(&v, "text")?,
                doc_ids: ctx.str_list(&v, "doc_ids")?,
            })
        })
        .collect()
}

pub fn load_queries(path: &Path) -> Result<Vec<QueryRecord>> {
    read_lines(path)?
        .into_iter()
        .map(|(ctx, v)| {
            let template: Template = ctx
                .str_field(&v, "template")?
                .parse()
                .map_err(|e: Error| ctx.err("template", e.to_string()))?;
            let atoms = ctx.str_list(&v, "atoms")?;
            let expr = QueryExpr::new(template, atoms).map_err(|e| ctx.err("atoms", e.to_string()))?;
            let split_raw = ctx.str_field(&v, "split")?;
            let split = Split::parse(&split_raw)
                .ok_or_else(|| ctx.err("split", format!("unknown split `{split_raw}`")))?;
            let text = ctx.str_field(&v, "text")?;
            if text.is_empty() {
                return Err(ctx.err("text", "empty query text"));
            }
            Ok(QueryRecord {
                id: ctx.str_field(&v, "id")?,
                expr,
                text,
                gt_docs: ctx.str_list(&v, "gt_docs")?.into_iter().collect(),
                split,
            })
        })
        .collect()
}
