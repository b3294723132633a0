//! Multi-indices, preorderings and their lattice operations.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A tuple of non-negative integers indexing products of test functions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct MultiIndex(Vec<u32>);

impl TryFrom<Vec<u32>> for MultiIndex {
    type Error = Error;

    fn try_from(entries: Vec<u32>) -> Result<Self> {
        MultiIndex::new(entries)
    }
}

impl From<MultiIndex> for Vec<u32> {
    fn from(m: MultiIndex) -> Self {
        m.0
    }
}

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidMultiIndex("needs at least one entry".into()));
        }
        Ok(MultiIndex(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        MultiIndex(vec![0; dim.max(1)])
    }

    pub fn ones(dim: usize) -> Self {
        MultiIndex(vec![1; dim.max(1)])
    }

    /// The unit tuple with a one in slot `i` (zero-based).
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut e = vec![0; dim.max(1)];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0)
    }

    pub fn is_binary(&self) -> bool {
        self.0.iter().all(|&v| v <= 1)
    }

    /// Coordinatewise order.
    pub fn is_below(&self, other: &MultiIndex) -> bool {
        self.dim() == other.dim() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Slots (zero-based) with a nonzero entry.
    pub fn support(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.0[i] > 0).collect()
    }

    /// The sorted word of slot indices, each slot repeated by its multiplicity.
    fn word(&self) -> Vec<usize> {
        self.0.iter().enumerate().flat_map(|(i, &k)| std::iter::repeat_n(i, k as usize)).collect()
    }

    /// Lexicographic order on index words: `() < (1) < (1,2) < (1,3) < (2) < ...`.
    pub fn lex_cmp(&self, other: &MultiIndex) -> Ordering {
        self.word().cmp(&other.word())
    }

    /// Every tuple below `self` in the coordinatewise order, lexicographically sorted.
    pub fn predecessors(&self) -> Vec<MultiIndex> {
        let mut out = vec![Vec::with_capacity(self.dim())];
        for &bound in &self.0 {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..=bound).map(move |v| {
                        let mut next = prefix.clone();
                        next.push(v);
                        next
                    })
                })
                .collect();
        }
        let mut out: Vec<MultiIndex> = out.into_iter().map(MultiIndex).collect();
        out.sort_by(|a, b| a.lex_cmp(b));
        out
    }

    /// Comma-separated key form, e.g. `1,0,1`.
    pub fn key(&self) -> String {
        self.0.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
    }

    pub fn parse_key(key: &str) -> Result<Self> {
        let entries = key
            .split(',')
            .map(|t| t.trim().parse::<u32>().map_err(|_| Error::InvalidMultiIndex(format!("bad key {key:?}"))))
            .collect::<Result<Vec<_>>>()?;
        MultiIndex::new(entries)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.key())
    }
}

/// Splits the predecessors of a 0/1 tuple by parity of total degree.
pub fn parity_split(lambda: &MultiIndex) -> Result<(Vec<MultiIndex>, Vec<MultiIndex>)> {
    if !lambda.is_binary() {
        return Err(Error::Unsupported(format!("parity split needs 0/1 entries, got {lambda}")));
    }
    if lambda.is_zero() {
        return Err(Error::InvalidMultiIndex("parity split of the zero tuple".into()));
    }
    Ok(lambda.predecessors().into_iter().partition(|p| p.degree() % 2 == 0))
}

/// A finite, covering set of multi-indices of a common length.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MultiIndex>", into = "Vec<MultiIndex>")]
pub struct Preordering {
    elements: Vec<MultiIndex>,
}

impl TryFrom<Vec<MultiIndex>> for Preordering {
    type Error = Error;

    fn try_from(v: Vec<MultiIndex>) -> Result<Self> {
        Preordering::new(v)
    }
}

impl From<Preordering> for Vec<MultiIndex> {
    fn from(p: Preordering) -> Self {
        p.elements
    }
}

/// Shape of a preordering's set of maximal elements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Classification {
    StandardAmple { top: MultiIndex },
    Ample { top: MultiIndex },
    StandardNearlyAmple { top: MultiIndex, first: MultiIndex, second: MultiIndex },
    NearlyAmple { top: MultiIndex, first: MultiIndex, second: MultiIndex },
    General,
}

impl Classification {
    pub fn is_ample(&self) -> bool {
        matches!(self, Self::Ample { .. } | Self::StandardAmple { .. })
    }

    /// The dominating element for ample and nearly-ample shapes.
    pub fn top(&self) -> Option<&MultiIndex> {
        match self {
            Self::StandardAmple { top }
            | Self::Ample { top }
            | Self::StandardNearlyAmple { top, .. }
            | Self::NearlyAmple { top, .. } => Some(top),
            Self::General => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::StandardAmple { .. } => "standard-ample",
            Self::Ample { .. } => "ample",
            Self::StandardNearlyAmple { .. } => "standard-nearly-ample",
            Self::NearlyAmple { .. } => "nearly-ample",
            Self::General => "general",
        }
    }
}

impl Preordering {
    pub fn new(elements: Vec<MultiIndex>) -> Result<Self> {
        let Some(first) = elements.first() else {
            return Err(Error::InvalidPreordering("empty".into()));
        };
        let dim = first.dim();
        if let Some(bad) = elements.iter().find(|e| e.dim() != dim) {
            return Err(Error::InvalidPreordering(format!(
                "{bad} has length {} but {first} has length {dim}",
                bad.dim()
            )));
        }
        let unique: BTreeSet<&MultiIndex> = elements.iter().collect();
        if unique.len() != elements.len() {
            return Err(Error::InvalidPreordering("duplicate elements".into()));
        }
        if let Some(i) = (0..dim).find(|&i| elements.iter().all(|e| e.0[i] == 0)) {
            return Err(Error::InvalidPreordering(format!("no element covers coordinate {}", i + 1)));
        }
        let mut elements = elements;
        elements.sort_by(|a, b| a.lex_cmp(b));
        Ok(Preordering { elements })
    }

    pub fn from_entries(entries: &[&[u32]]) -> Result<Self> {
        let elems = entries.iter().map(|e| MultiIndex::new(e.to_vec())).collect::<Result<Vec<_>>>()?;
        Preordering::new(elems)
    }

    /// `{e_1, ..., e_d}`.
    pub fn classical(dim: usize) -> Self {
        Preordering::new((0..dim).map(|i| MultiIndex::unit(dim, i)).collect())
            .expect("unit tuples cover every coordinate")
    }

    /// `{(1, ..., 1)}`.
    pub fn standard_ample(dim: usize) -> Self {
        Preordering::new(vec![MultiIndex::ones(dim)]).expect("all-ones tuple covers")
    }

    /// The all-ones tuple with slot `drop` cleared (zero-based), paired with the one for `drop2`.
    pub fn standard_nearly_ample(dim: usize, drop: usize, drop2: usize) -> Result<Self> {
        if drop == drop2 || drop >= dim || drop2 >= dim {
            return Err(Error::InvalidPreordering("nearly-ample needs two distinct slots".into()));
        }
        let mut a = MultiIndex::ones(dim);
        a.0[drop] = 0;
        let mut b = MultiIndex::ones(dim);
        b.0[drop2] = 0;
        Preordering::new(vec![a, b])
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn elements(&self) -> &[MultiIndex] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, m: &MultiIndex) -> bool {
        self.elements.contains(m)
    }

    /// Every tuple lying below some element, the zero tuple included.
    pub fn maximal_closure(&self) -> Preordering {
        let all: BTreeSet<MultiIndex> = self.elements.iter().flat_map(MultiIndex::predecessors).collect();
        let mut elements: Vec<MultiIndex> = all.into_iter().collect();
        elements.sort_by(|a, b| a.lex_cmp(b));
        Preordering { elements }
    }

    /// The maximal elements.
    pub fn minimal_reduction(&self) -> Preordering {
        let elements =
            self.elements.iter().filter(|a| !self.elements.iter().any(|b| *a != b && a.is_below(b))).cloned().collect();
        Preordering { elements }
    }

    pub fn classify(&self) -> Classification {
        let maxima = self.minimal_reduction().elements;
        match maxima.as_slice() {
            [top] => {
                let top = top.clone();
                if top.entries().iter().all(|&v| v == 1) {
                    Classification::StandardAmple { top }
                } else {
                    Classification::Ample { top }
                }
            }
            [a, b] => {
                let top = MultiIndex(a.0.iter().zip(&b.0).map(|(x, y)| *x.max(y)).collect());
                let gap = |m: &MultiIndex| -> Option<usize> {
                    let diffs: Vec<usize> = (0..m.dim()).filter(|&i| top.0[i] != m.0[i]).collect();
                    match diffs.as_slice() {
                        [i] if top.0[*i] == m.0[*i] + 1 => Some(*i),
                        _ => None,
                    }
                };
                match (gap(a), gap(b)) {
                    (Some(i), Some(j)) if i != j => {
                        let (first, second) = (a.clone(), b.clone());
                        if top.entries().iter().all(|&v| v == 1) {
                            Classification::StandardNearlyAmple { top, first, second }
                        } else {
                            Classification::NearlyAmple { top, first, second }
                        }
                    }
                    _ => Classification::General,
                }
            }
            _ => Classification::General,
        }
    }
}

impl fmt::Display for Preordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.elements.iter().map(ToString::to_string).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}
