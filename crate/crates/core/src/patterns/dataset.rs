use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LpsError, Result};

/// `n` subjects by `p` binary attributes plus a binary response.
///
/// Attributes are stored row-major. `groups` ties together dummy variables
/// that came from one multi-level source variable; by default every variable
/// is its own group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryDataset {
    n: usize,
    p: usize,
    x: Vec<u8>,
    y: Vec<u8>,
    var_names: Vec<String>,
    coding_notes: Vec<String>,
    groups: Vec<usize>,
}

impl BinaryDataset {
    pub fn new(rows: Vec<Vec<u8>>, y: Vec<u8>, var_names: Vec<String>) -> Result<Self> {
        let n = rows.len();
        let p = var_names.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(LpsError::InvalidData(format!(
                "every row must have {p} attributes"
            )));
        }
        Self::from_flat(n, p, rows.into_iter().flatten().collect(), y, var_names)
    }

    /// Builds a dataset from a row-major `n*p` buffer.
    pub fn from_flat(
        n: usize,
        p: usize,
        x: Vec<u8>,
        y: Vec<u8>,
        var_names: Vec<String>,
    ) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(LpsError::InvalidData(format!(
                "dataset needs n >= 1 and p >= 1 (got n={n}, p={p})"
            )));
        }
        if x.len() != n * p || y.len() != n || var_names.len() != p {
            return Err(LpsError::InvalidData("inconsistent dataset dimensions".into()));
        }
        if let Some(pos) = x.iter().position(|&v| v > 1) {
            return Err(LpsError::InvalidData(format!(
                "attribute at row {}, column {} is {}, expected 0 or 1",
                pos / p + 1,
                pos % p + 1,
                x[pos]
            )));
        }
        if let Some(pos) = y.iter().position(|&v| v > 1) {
            return Err(LpsError::InvalidData(format!(
                "response at row {} is {}, expected 0 or 1",
                pos + 1,
                y[pos]
            )));
        }
        Ok(Self {
            n,
            p,
            x,
            y,
            var_names,
            coding_notes: vec![String::new(); p],
            groups: (0..p).collect(),
        })
    }

    pub fn with_coding_notes(mut self, notes: Vec<String>) -> Result<Self> {
        if notes.len() != self.p {
            return Err(LpsError::InvalidData("one coding note per variable".into()));
        }
        self.coding_notes = notes;
        Ok(self)
    }

    /// Assigns group ids; variables sharing an id are screened jointly.
    pub fn with_groups(mut self, groups: Vec<usize>) -> Result<Self> {
        if groups.len() != self.p {
            return Err(LpsError::InvalidData("one group id per variable".into()));
        }
        self.groups = groups;
        Ok(self)
    }

    /// Same attributes with a replacement response vector.
    pub fn with_response(&self, y: Vec<u8>) -> Result<Self> {
        if y.len() != self.n || y.iter().any(|&v| v > 1) {
            return Err(LpsError::InvalidData("response must be n binary values".into()));
        }
        Ok(Self { y, ..self.clone() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.x.chunks_exact(self.p)
    }

    pub fn value(&self, i: usize, j: usize) -> u8 {
        self.x[i * self.p + j]
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn y_f64(&self) -> Vec<f64> {
        self.y.iter().map(|&v| v as f64).collect()
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn coding_notes(&self) -> &[String] {
        &self.coding_notes
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    /// Rows (ascending) where variable `j` equals 1.
    pub fn rows_with(&self, j: usize) -> Vec<u32> {
        (0..self.n)
            .filter(|&i| self.value(i, j) == 1)
            .map(|i| i as u32)
            .collect()
    }

    pub fn column(&self, j: usize) -> Vec<u8> {
        (0..self.n).map(|i| self.value(i, j)).collect()
    }

    pub fn incidence(&self) -> f64 {
        self.y.iter().map(|&v| v as f64).sum::<f64>() / self.n as f64
    }

    /// Keeps only the listed variables, in the listed order.
    pub fn select_variables(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(LpsError::InvalidData("no variables selected".into()));
        }
        if let Some(&bad) = keep.iter().find(|&&j| j >= self.p) {
            return Err(LpsError::InvalidArgument(format!("variable {bad} out of range")));
        }
        let mut x = Vec::with_capacity(self.n * keep.len());
        for i in 0..self.n {
            x.extend(keep.iter().map(|&j| self.value(i, j)));
        }
        Ok(Self {
            n: self.n,
            p: keep.len(),
            x,
            y: self.y.clone(),
            var_names: keep.iter().map(|&j| self.var_names[j].clone()).collect(),
            coding_notes: keep.iter().map(|&j| self.coding_notes[j].clone()).collect(),
            groups: keep.iter().map(|&j| self.groups[j]).collect(),
        })
    }

    /// SHA-256 over dimensions, attributes and response, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        h.update((self.p as u64).to_le_bytes());
        h.update(&self.x);
        h.update(&self.y);
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(p: usize) -> Vec<String> {
        (1..=p).map(|j| format!("x{j}")).collect()
    }

    #[test]
    fn rejects_non_binary_and_empty() {
        assert!(BinaryDataset::new(vec![vec![0, 2]], vec![1], names(2)).is_err());
        assert!(BinaryDataset::new(vec![vec![0, 1]], vec![3], names(2)).is_err());
        assert!(BinaryDataset::new(vec![], vec![], names(2)).is_err());
        assert!(BinaryDataset::new(vec![vec![0, 1]], vec![1], vec![]).is_err());
    }

    #[test]
    fn select_keeps_order() {
        let d = BinaryDataset::new(vec![vec![1, 0, 1], vec![0, 1, 1]], vec![1, 0], names(3)).unwrap();
        let s = d.select_variables(&[2, 0]).unwrap();
        assert_eq!(s.row(0), &[1, 1]);
        assert_eq!(s.row(1), &[1, 0]);
        assert_eq!(s.var_names(), &["x3".to_string(), "x1".to_string()]);
    }

    #[test]
    fn digest_tracks_response() {
        let d = BinaryDataset::new(vec![vec![1, 0], vec![0, 1]], vec![1, 0], names(2)).unwrap();
        let e = d.with_response(vec![0, 1]).unwrap();
        assert_ne!(d.digest(), e.digest());
        assert_eq!(d.digest(), d.clone().digest());
    }
}
