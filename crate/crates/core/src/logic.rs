//! Boolean query algebra over atomic sub-queries.
//!
//! A [`QueryExpr`] is one of seven fixed templates over one to three distinct
//! atoms. Ground-truth sets are derived with set operations, and relations
//! between two expressions are decided by enumerating every truth assignment
//! over the union of their atoms (at most six, so at most 64 rows).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An atomic sub-query with its directly given ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicQuery {
    pub id: String,
    pub text: String,
    pub doc_ids: Vec<String>,
}

/// The seven logical templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Template {
    /// `A`
    Atom,
    /// `A ∩ B`
    And,
    /// `A ∪ B`
    Or,
    /// `A ∖ B`
    Diff,
    /// `A ∩ B ∩ C`
    And3,
    /// `A ∩ B ∖ C`
    AndDiff,
    /// `A ∪ B ∪ C`
    Or3,
}

/// Coarse operator family used for per-category breakdowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    None,
    Intersection,
    Negation,
    Union,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::None => "none",
            Category::Intersection => "intersection",
            Category::Negation => "negation",
            Category::Union => "union",
        }
    }
}

impl Template {
    pub const ALL: [Template; 7] = [
        Template::Atom,
        Template::And,
        Template::Or,
        Template::Diff,
        Template::And3,
        Template::AndDiff,
        Template::Or3,
    ];

    pub const PAIR: [Template; 3] = [Template::And, Template::Or, Template::Diff];
    pub const TRIPLE: [Template; 3] = [Template::And3, Template::AndDiff, Template::Or3];

    pub fn arity(self) -> usize {
        match self {
            Template::Atom => 1,
            Template::And | Template::Or | Template::Diff => 2,
            Template::And3 | Template::AndDiff | Template::Or3 => 3,
        }
    }

    /// Wire symbol used in `queries.jsonl`.
    pub fn symbol(self) -> &'static str {
        match self {
            Template::Atom => "A",
            Template::And => "A&B",
            Template::Or => "A|B",
            Template::Diff => "A-B",
            Template::And3 => "A&B&C",
            Template::AndDiff => "A&B-C",
            Template::Or3 => "A|B|C",
        }
    }

    pub fn category(self) -> Category {
        match self {
            Template::Atom => Category::None,
            Template::And | Template::And3 => Category::Intersection,
            Template::Diff | Template::AndDiff => Category::Negation,
            Template::Or | Template::Or3 => Category::Union,
        }
    }

    /// True for templates with a negated final atom.
    pub fn is_negation(self) -> bool {
        matches!(self, Template::Diff | Template::AndDiff)
    }

    fn eval(self, v: &[bool]) -> bool {
        match self {
            Template::Atom => v[0],
            Template::And => v[0] && v[1],
            Template::Or => v[0] || v[1],
            Template::Diff => v[0] && !v[1],
            Template::And3 => v[0] && v[1] && v[2],
            Template::AndDiff => v[0] && v[1] && !v[2],
            Template::Or3 => v[0] || v[1] || v[2],
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Template::ALL
            .iter()
            .copied()
            .find(|t| t.symbol() == s)
            .ok_or_else(|| Error::UnknownTemplate(s.to_string()))
    }
}

impl Serialize for Template {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for Template {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A template applied to an ordered list of distinct atom ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QueryExpr {
    template: Template,
    atoms: Vec<String>,
}

impl QueryExpr {
    pub fn new(template: Template, atoms: Vec<String>) -> Result<Self> {
        if atoms.len() != template.arity() {
            return Err(Error::InvalidExpr(format!(
                "template {} takes {} atoms, got {}",
                template,
                template.arity(),
                atoms.len()
            )));
        }
        for (i, a) in atoms.iter().enumerate() {
            if atoms[..i].contains(a) {
                return Err(Error::InvalidExpr(format!("atom {a} repeated")));
            }
        }
        Ok(Self { template, atoms })
    }

    pub fn atom(id: impl Into<String>) -> Self {
        Self {
            template: Template::Atom,
            atoms: vec![id.into()],
        }
    }

    pub fn template(&self) -> Template {
        self.template
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    /// The atom under negation for `A-B` and `A&B-C`.
    pub fn negated_atom(&self) -> Option<&str> {
        if self.template.is_negation() {
            self.atoms.last().map(String::as_str)
        } else {
            None
        }
    }
}

/// Evaluates the expression under a truth assignment to its atoms.
pub fn eval_expr<F>(expr: &QueryExpr, membership: F) -> Result<bool>
where
    F: Fn(&str) -> Option<bool>,
{
    let mut values = [false; 3];
    for (slot, atom) in values.iter_mut().zip(&expr.atoms) {
        *slot = membership(atom).ok_or_else(|| Error::MissingAtom(atom.clone()))?;
    }
    Ok(expr.template.eval(&values[..expr.atoms.len()]))
}

/// Applies the template's set operations to the atoms' ground-truth sets.
pub fn derive_ground_truth<'a, T, F>(expr: &QueryExpr, atom_sets: F) -> Result<BTreeSet<T>>
where
    T: Ord + Clone + 'a,
    F: Fn(&str) -> Option<&'a BTreeSet<T>>,
{
    let mut sets = Vec::with_capacity(3);
    for atom in &expr.atoms {
        sets.push(atom_sets(atom).ok_or_else(|| Error::MissingAtom(atom.clone()))?);
    }
    let and = |a: &BTreeSet<T>, b: &BTreeSet<T>| a.intersection(b).cloned().collect::<BTreeSet<T>>();
    let or = |a: &BTreeSet<T>, b: &BTreeSet<T>| a.union(b).cloned().collect::<BTreeSet<T>>();
    let diff = |a: &BTreeSet<T>, b: &BTreeSet<T>| a.difference(b).cloned().collect::<BTreeSet<T>>();
    Ok(match expr.template {
        Template::Atom => sets[0].clone(),
        Template::And => and(sets[0], sets[1]),
        Template::Or => or(sets[0], sets[1]),
        Template::Diff => diff(sets[0], sets[1]),
        Template::And3 => and(&and(sets[0], sets[1]), sets[2]),
        Template::AndDiff => diff(&and(sets[0], sets[1]), sets[2]),
        Template::Or3 => or(&or(sets[0], sets[1]), sets[2]),
    })
}

/// Logical relation between an ordered pair of expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    /// The first expression implies the second.
    Subset,
    /// The conjunction is unsatisfiable.
    Exclusion,
}

/// A relation between two in-batch query positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationEdge {
    pub src: usize,
    pub dst: usize,
    pub kind: Relation,
}

/// Decides `Subset` (e1 ⇒ e2) or `Exclusion` (e1 ∧ e2 unsatisfiable) by
/// truth-table enumeration. Subset is checked first, so an unsatisfiable
/// `e1` yields `Subset`.
pub fn derive_relation(e1: &QueryExpr, e2: &QueryExpr) -> Option<Relation> {
    let mut vars: Vec<&str> = Vec::with_capacity(6);
    for a in e1.atoms.iter().chain(&e2.atoms) {
        if !vars.contains(&a.as_str()) {
            vars.push(a);
        }
    }
    let pos = |e: &QueryExpr| -> Vec<usize> {
        e.atoms
            .iter()
            .map(|a| vars.iter().position(|v| *v == a).unwrap())
            .collect()
    };
    let (p1, p2) = (pos(e1), pos(e2));

    let mut implies = true;
    let mut disjoint = true;
    let mut v1 = [false; 3];
    let mut v2 = [false; 3];
    for row in 0u32..(1 << vars.len()) {
        for (slot, &p) in v1.iter_mut().zip(&p1) {
            *slot = row >> p & 1 == 1;
        }
        for (slot, &p) in v2.iter_mut().zip(&p2) {
            *slot = row >> p & 1 == 1;
        }
        let a = e1.template.eval(&v1[..p1.len()]);
        let b = e2.template.eval(&v2[..p2.len()]);
        if a && !b {
            implies = false;
        }
        if a && b {
            disjoint = false;
        }
    }
    if implies {
        Some(Relation::Subset)
    } else if disjoint {
        Some(Relation::Exclusion)
    } else {
        None
    }
}
