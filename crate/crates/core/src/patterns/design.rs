use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{BinaryDataset, Pattern};
use crate::error::{LpsError, Result};

/// Column-sparse 0/1 design. Column 0 is the constant; each column stores the
/// ascending row indices where its pattern equals 1.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    n: usize,
    columns: Vec<Vec<u32>>,
    patterns: Vec<Pattern>,
}

impl DesignMatrix {
    pub const CONSTANT: usize = 0;

    /// Wraps raw indicator columns (constant prepended). Column `j >= 1` is
    /// labelled as the single-variable pattern `{j}`; useful for designs that
    /// are not derived from a `BinaryDataset`.
    pub fn from_indicator_columns(n: usize, cols: Vec<Vec<u32>>) -> Result<Self> {
        let patterns = (0..cols.len()).map(|j| Pattern { indices: vec![j] }).collect();
        Self::from_parts(n, cols, patterns)
    }

    /// Builds from dense rows of 0/1 (no constant column in `rows`).
    pub fn from_dense_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        let cols = (0..m)
            .map(|j| {
                (0..n)
                    .filter(|&i| rows[i][j] == 1)
                    .map(|i| i as u32)
                    .collect()
            })
            .collect();
        Self::from_indicator_columns(n, cols)
    }

    fn from_parts(n: usize, cols: Vec<Vec<u32>>, patterns: Vec<Pattern>) -> Result<Self> {
        if n == 0 {
            return Err(LpsError::InvalidData("design needs at least one row".into()));
        }
        for c in &cols {
            if c.windows(2).any(|w| w[0] >= w[1]) || c.last().is_some_and(|&i| i as usize >= n) {
                return Err(LpsError::InvalidData(
                    "column row indices must be strictly increasing and < n".into(),
                ));
            }
        }
        let mut columns = Vec::with_capacity(cols.len() + 1);
        columns.push((0..n as u32).collect());
        columns.extend(cols);
        let mut pats = Vec::with_capacity(patterns.len() + 1);
        pats.push(Pattern::constant());
        pats.extend(patterns);
        Ok(Self { n, columns, patterns: pats })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `N_B`, constant included.
    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[u32] {
        &self.columns[j]
    }

    pub fn pattern(&self, j: usize) -> &Pattern {
        &self.patterns[j]
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn column_of(&self, pattern: &Pattern) -> Option<usize> {
        self.patterns.iter().position(|p| p == pattern)
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    /// `f += scale * B_j`.
    #[inline]
    pub fn axpy(&self, j: usize, scale: f64, f: &mut [f64]) {
        for &i in &self.columns[j] {
            f[i as usize] += scale;
        }
    }

    /// `B_j' v`.
    #[inline]
    pub fn dot(&self, j: usize, v: &[f64]) -> f64 {
        self.columns[j].iter().map(|&i| v[i as usize]).sum()
    }

    /// Logits `B z` for a sparse coefficient list.
    pub fn logits(&self, coefs: &[(usize, f64)]) -> Vec<f64> {
        let mut f = vec![0.0; self.n];
        for &(j, c) in coefs {
            if c != 0.0 {
                self.axpy(j, c, &mut f);
            }
        }
        f
    }

    /// `B_s' diag(w) B_s` for the columns `cols`.
    pub fn weighted_gram(&self, cols: &[usize], w: &[f64]) -> DMatrix<f64> {
        let k = cols.len();
        let mut g = DMatrix::zeros(k, k);
        let mut scratch = vec![0.0; self.n];
        for a in 0..k {
            for &i in &self.columns[cols[a]] {
                scratch[i as usize] = w[i as usize];
            }
            for b in a..k {
                let v = self.dot(cols[b], &scratch);
                g[(a, b)] = v;
                g[(b, a)] = v;
            }
            for &i in &self.columns[cols[a]] {
                scratch[i as usize] = 0.0;
            }
        }
        g
    }

    /// Dense `n x |cols|` copy of the selected columns.
    pub fn dense(&self, cols: &[usize]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, cols.len());
        for (a, &j) in cols.iter().enumerate() {
            for &i in &self.columns[j] {
                m[(i as usize, a)] = 1.0;
            }
        }
        m
    }

    /// Sub-design keeping the constant plus `cols` (which must exclude 0), in
    /// the given order.
    pub fn restrict(&self, cols: &[usize]) -> DesignMatrix {
        let mut columns = vec![self.columns[0].clone()];
        let mut patterns = vec![Pattern::constant()];
        for &j in cols.iter().filter(|&&j| j != Self::CONSTANT) {
            columns.push(self.columns[j].clone());
            patterns.push(self.patterns[j].clone());
        }
        DesignMatrix { n: self.n, columns, patterns }
    }
}

/// Evaluates `patterns` on `data`. Column order is the constant followed by
/// `patterns` in input order.
pub fn build_design(data: &BinaryDataset, patterns: &[Pattern]) -> Result<DesignMatrix> {
    if let Some(bad) = patterns.iter().find(|p| p.max_index().is_some_and(|m| m >= data.p())) {
        return Err(LpsError::InvalidArgument(format!(
            "pattern {bad} refers to a variable beyond p={}",
            data.p()
        )));
    }
    let var_rows: Vec<Vec<u32>> = (0..data.p()).map(|j| data.rows_with(j)).collect();
    let cols: Vec<Vec<u32>> = patterns
        .par_iter()
        .map(|pat| {
            let idx = pat.indices();
            if idx.is_empty() {
                return (0..data.n() as u32).collect();
            }
            // start from the sparsest variable and filter by the rest
            let (&seed, _) = idx
                .iter()
                .map(|j| (j, var_rows[*j].len()))
                .min_by_key(|&(_, len)| len)
                .expect("non-empty pattern");
            var_rows[seed]
                .iter()
                .copied()
                .filter(|&i| idx.iter().all(|&j| data.value(i as usize, j) == 1))
                .collect()
        })
        .collect();
    let mut columns = Vec::with_capacity(cols.len() + 1);
    columns.push((0..data.n() as u32).collect());
    columns.extend(cols);
    let mut pats = Vec::with_capacity(patterns.len() + 1);
    pats.push(Pattern::constant());
    pats.extend(patterns.iter().cloned());
    Ok(DesignMatrix { n: data.n(), columns, patterns: pats })
}
