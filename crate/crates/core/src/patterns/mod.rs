//! Boolean AND patterns over binary attributes, models built from them, and the
//! coding-flip transform.
//!
//! A pattern `B_J(x)` is the product of the attributes indexed by `J`; the empty
//! pattern is the constant. Indices are stored 0-based and rendered 1-based
//! (or by variable name) in reports.

mod dataset;
mod design;

pub use dataset::BinaryDataset;
pub use design::{build_design, DesignMatrix};

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{LpsError, Result};

/// Separator used in the textual form of a pattern.
pub const PATTERN_SEPARATOR: &str = "×";

/// An AND monomial over a strictly increasing set of variable indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "Vec<usize>", try_from = "Vec<usize>")]
pub struct Pattern {
    indices: Vec<usize>,
}

impl Pattern {
    /// Builds a pattern from 0-based indices, which must be strictly increasing.
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LpsError::InvalidArgument(format!(
                "pattern indices must be strictly increasing, got {indices:?}"
            )));
        }
        Ok(Self { indices })
    }

    /// Builds a pattern from 1-based indices, in any order.
    pub fn one_based(indices: &[usize]) -> Result<Self> {
        if indices.contains(&0) {
            return Err(LpsError::InvalidArgument(
                "1-based pattern index 0 is not valid".into(),
            ));
        }
        let mut idx: Vec<usize> = indices.iter().map(|i| i - 1).collect();
        idx.sort_unstable();
        Self::new(idx)
    }

    pub fn constant() -> Self {
        Self { indices: Vec::new() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn order(&self) -> usize {
        self.indices.len()
    }

    pub fn is_constant(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, var: usize) -> bool {
        self.indices.binary_search(&var).is_ok()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.last().copied()
    }

    /// `B_J(x)`: 1 iff every variable in the pattern is 1.
    pub fn matches(&self, x: &[u8]) -> bool {
        self.indices.iter().all(|&j| x[j] == 1)
    }

    pub fn is_subset_of(&self, other: &Pattern) -> bool {
        self.indices.iter().all(|&j| other.contains(j))
    }

    /// Re-indexes through `map` (position -> new index); used to lift patterns
    /// found on a screened dataset back to the original variables.
    pub fn remap(&self, map: &[usize]) -> Pattern {
        let mut idx: Vec<usize> = self.indices.iter().map(|&j| map[j]).collect();
        idx.sort_unstable();
        Pattern { indices: idx }
    }

    /// Variable names joined by `×`, or `constant`.
    pub fn label(&self, names: &[String]) -> String {
        if self.is_constant() {
            return "constant".to_string();
        }
        self.indices
            .iter()
            .map(|&j| names.get(j).cloned().unwrap_or_else(|| format!("x{}", j + 1)))
            .join(PATTERN_SEPARATOR)
    }
}

impl Ord for Pattern {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| self.indices.cmp(&other.indices))
    }
}

impl PartialOrd for Pattern {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_constant() {
            return write!(f, "constant");
        }
        write!(f, "B{}", self.indices.iter().map(|j| j + 1).join("_"))
    }
}

impl From<Pattern> for Vec<usize> {
    fn from(p: Pattern) -> Self {
        p.indices.into_iter().map(|j| j + 1).collect()
    }
}

impl TryFrom<Vec<usize>> for Pattern {
    type Error = LpsError;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Pattern::one_based(&v)
    }
}

/// Number of non-constant patterns of order at most `q` over `p` variables.
pub fn pattern_count(p: usize, q: usize) -> usize {
    (1..=q.min(p)).map(|r| binomial(p, r)).sum()
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc.min(usize::MAX as u128) as usize
}

/// All non-constant patterns up to order `q`, ordered by order and then
/// lexicographically on their indices.
pub fn enumerate_patterns(p: usize, q: usize) -> Result<Vec<Pattern>> {
    if q < 1 || q > p {
        return Err(LpsError::InvalidArgument(format!(
            "maximum order q={q} must satisfy 1 <= q <= p={p}"
        )));
    }
    let mut out = Vec::with_capacity(pattern_count(p, q));
    for r in 1..=q {
        out.extend((0..p).combinations(r).map(|indices| Pattern { indices }));
    }
    Ok(out)
}

/// A logit expressed as intercept plus a sum of pattern terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternModel {
    pub n_vars: usize,
    pub intercept: f64,
    pub terms: Vec<PatternTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternTerm {
    pub pattern: Pattern,
    pub coef: f64,
}

impl PatternModel {
    pub fn new(n_vars: usize, intercept: f64, terms: Vec<(Pattern, f64)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for (pat, _) in &terms {
            if pat.is_constant() {
                return Err(LpsError::InvalidArgument(
                    "the constant belongs in the intercept, not in the terms".into(),
                ));
            }
            if pat.max_index().is_some_and(|m| m >= n_vars) {
                return Err(LpsError::InvalidArgument(format!(
                    "pattern {pat} refers to a variable beyond p={n_vars}"
                )));
            }
            if !seen.insert(pat.clone()) {
                return Err(LpsError::InvalidArgument(format!("duplicate pattern {pat}")));
            }
        }
        Ok(Self {
            n_vars,
            intercept,
            terms: terms
                .into_iter()
                .map(|(pattern, coef)| PatternTerm { pattern, coef })
                .collect(),
        })
    }

    pub fn null(n_vars: usize, intercept: f64) -> Self {
        Self { n_vars, intercept, terms: Vec::new() }
    }

    pub fn patterns(&self) -> impl Iterator<Item = &Pattern> {
        self.terms.iter().map(|t| &t.pattern)
    }

    pub fn coefficient(&self, pattern: &Pattern) -> Option<f64> {
        if pattern.is_constant() {
            return Some(self.intercept);
        }
        self.terms.iter().find(|t| &t.pattern == pattern).map(|t| t.coef)
    }

    /// Logit `f(x) = mu + sum c_l B_l(x)`.
    pub fn evaluate(&self, x: &[u8]) -> Result<f64> {
        if x.len() != self.n_vars {
            return Err(LpsError::InvalidArgument(format!(
                "attribute vector has length {}, model expects {}",
                x.len(),
                self.n_vars
            )));
        }
        Ok(self.logit_unchecked(x))
    }

    pub(crate) fn logit_unchecked(&self, x: &[u8]) -> f64 {
        self.intercept
            + self
                .terms
                .iter()
                .filter(|t| t.pattern.matches(x))
                .map(|t| t.coef)
                .sum::<f64>()
    }

    /// Re-expresses the model after recoding `x_j -> 1 - x_j` for `j` in
    /// `flipped` (0-based), so that `g(x') == f(x)` where `x'` is the recoded
    /// attribute vector.
    ///
    /// The coefficient of `B_J` in `g` is
    /// `(-1)^{|J ∩ S|} * sum c_T` over `J ⊆ T ⊆ J ∪ S`; each term of `f` is
    /// expanded into the subsets of its flipped variables. Exact zeros are dropped.
    pub fn flip_coding(&self, flipped: &[usize]) -> Result<PatternModel> {
        if let Some(&bad) = flipped.iter().find(|&&j| j >= self.n_vars) {
            return Err(LpsError::InvalidArgument(format!(
                "flip variable {} is beyond p={}",
                bad + 1,
                self.n_vars
            )));
        }
        let in_s = |j: usize| flipped.contains(&j);

        let mut acc: BTreeMap<Pattern, f64> = BTreeMap::new();
        let all_terms = std::iter::once((Pattern::constant(), self.intercept))
            .chain(self.terms.iter().map(|t| (t.pattern.clone(), t.coef)));
        for (pat, coef) in all_terms {
            let (flip, keep): (Vec<usize>, Vec<usize>) =
                pat.indices().iter().partition(|&&j| in_s(j));
            for mask in 0u64..(1u64 << flip.len()) {
                let mut idx = keep.clone();
                let mut picked = 0u32;
                for (b, &j) in flip.iter().enumerate() {
                    if mask & (1 << b) != 0 {
                        idx.push(j);
                        picked += 1;
                    }
                }
                idx.sort_unstable();
                let sign = if picked.is_multiple_of(2) { 1.0 } else { -1.0 };
                *acc.entry(Pattern { indices: idx }).or_insert(0.0) += sign * coef;
            }
        }

        let intercept = acc.remove(&Pattern::constant()).unwrap_or(0.0);
        let terms = acc
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(pattern, coef)| PatternTerm { pattern, coef })
            .collect();
        Ok(PatternModel { n_vars: self.n_vars, intercept, terms })
    }

    /// Terms ordered by pattern order then lexicographically.
    pub fn sorted(mut self) -> Self {
        self.terms.sort_by(|a, b| a.pattern.cmp(&b.pattern));
        self
    }

    pub fn describe(&self, names: &[String]) -> String {
        let mut s = format!("{:.4}", self.intercept);
        for t in &self.terms {
            let sign = if t.coef < 0.0 { '-' } else { '+' };
            s.push_str(&format!(" {sign} {:.4}*{}", t.coef.abs(), t.pattern.label(names)));
        }
        s
    }
}
