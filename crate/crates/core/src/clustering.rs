//! Canonical clusterings and contingency tables.
//!
//! A [`Clustering`] stores one label per data unit in canonical form: the
//! first unit carries label 0 and every new label is the smallest unused
//! non-negative integer. Two clusterings describe the same partition exactly
//! when their canonical label vectors are equal.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Clustering {
    labels: Vec<u32>,
    num_clusters: usize,
}

impl Clustering {
    /// Renumbers arbitrary identifiers by order of first occurrence.
    pub fn canonicalize<T: Hash + Eq>(raw: &[T]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Empty("clustering needs at least one unit"));
        }
        let mut seen: HashMap<&T, u32> = HashMap::new();
        let labels = raw
            .iter()
            .map(|id| {
                let next = seen.len() as u32;
                *seen.entry(id).or_insert(next)
            })
            .collect();
        Ok(Clustering {
            labels,
            num_clusters: seen.len(),
        })
    }

    /// Accepts labels that must already be canonical.
    pub fn from_canonical(labels: Vec<u32>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("clustering needs at least one unit"));
        }
        let mut next = 0u32;
        for (unit, &label) in labels.iter().enumerate() {
            if label == next {
                next += 1;
            } else if label > next {
                return Err(Error::invalid(format!(
                    "labels are not canonical: unit {unit} has label {label}, expected at most {next}"
                )));
            }
        }
        Ok(Clustering {
            labels,
            num_clusters: next as usize,
        })
    }

    /// A single cluster holding all `n` units.
    pub fn single(n: usize) -> Result<Self> {
        Self::from_canonical(vec![0; n])
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    /// Cluster sizes indexed by canonical label.
    pub fn cluster_sizes(&self) -> Vec<u64> {
        let mut sizes = vec![0u64; self.num_clusters];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }
}

impl TryFrom<Vec<u32>> for Clustering {
    type Error = Error;

    fn try_from(labels: Vec<u32>) -> Result<Self> {
        Clustering::canonicalize(&labels)
    }
}

impl From<Clustering> for Vec<u32> {
    fn from(c: Clustering) -> Self {
        c.labels
    }
}

impl fmt::Display for Clustering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.labels.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// Cross-tabulation `n_ij` of two clusterings over the same units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    pub fn new(a: &Clustering, b: &Clustering) -> Result<Self> {
        if a.n() != b.n() {
            return Err(Error::LengthMismatch {
                left: a.n(),
                right: b.n(),
            });
        }
        let (rows, cols) = (a.num_clusters(), b.num_clusters());
        let mut counts = vec![0u64; rows * cols];
        for (&i, &j) in a.labels().iter().zip(b.labels()) {
            counts[i as usize * cols + j as usize] += 1;
        }
        Ok(Self::from_flat(rows, cols, counts))
    }

    /// Builds a table from explicit cell counts, one inner vector per row.
    pub fn from_counts(cells: &[Vec<u64>]) -> Result<Self> {
        let rows = cells.len();
        if rows == 0 {
            return Err(Error::Empty("contingency table has no rows"));
        }
        let cols = cells[0].len();
        if cols == 0 || cells.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("contingency table rows must share a non-zero width"));
        }
        let table = Self::from_flat(rows, cols, cells.concat());
        if table.total == 0 {
            return Err(Error::Empty("contingency table has zero total"));
        }
        Ok(table)
    }

    fn from_flat(rows: usize, cols: usize, counts: Vec<u64>) -> Self {
        let mut row_sums = vec![0u64; rows];
        let mut col_sums = vec![0u64; cols];
        for i in 0..rows {
            for j in 0..cols {
                let c = counts[i * cols + j];
                row_sums[i] += c;
                col_sums[j] += c;
            }
        }
        let total = row_sums.iter().sum();
        ContingencyTable {
            rows,
            cols,
            counts,
            row_sums,
            col_sums,
            total,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.counts[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0u64; self.rows * self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                counts[j * self.rows + i] = self.get(i, j);
            }
        }
        Self::from_flat(self.cols, self.rows, counts)
    }

    /// Sum of the largest cell in each row.
    pub fn row_max_sum(&self) -> u64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().copied().max().unwrap_or(0))
            .sum()
    }

    /// Sum of the largest cell in each column.
    pub fn col_max_sum(&self) -> u64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j)).max().unwrap_or(0))
            .sum()
    }

    /// Writes the table as CSV with a header row of column labels and a
    /// trailing row/column of marginal sums.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cluster");
        for j in 0..self.cols {
            out.push_str(&format!(",{j}"));
        }
        out.push_str(",row_sum\n");
        for i in 0..self.rows {
            out.push_str(&i.to_string());
            for c in self.row(i) {
                out.push_str(&format!(",{c}"));
            }
            out.push_str(&format!(",{}\n", self.row_sums[i]));
        }
        out.push_str("col_sum");
        for c in &self.col_sums {
            out.push_str(&format!(",{c}"));
        }
        out.push_str(&format!(",{}\n", self.total));
        out
    }
}
