//! Numeric datasets: CSV loading, column slicing and the 1-D normal-mixture
//! generator used by the simulated examples.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::clustering::Clustering;
use crate::error::{Error, Result};

/// An `n x d` matrix of finite reals, one row per data unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    values: Vec<f64>,
    column_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Empty("dataset has no rows"));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::Empty("dataset has no columns"));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::invalid(format!(
                "row {bad} has {} columns, expected {d}",
                rows[bad].len()
            )));
        }
        Self::from_flat(n, d, rows.concat())
    }

    pub fn from_flat(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Empty("dataset must have at least one row and column"));
        }
        if values.len() != n * d {
            return Err(Error::invalid(format!(
                "expected {} values for a {n}x{d} dataset, got {}",
                n * d,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / d,
                col: pos % d,
            });
        }
        Ok(Dataset {
            n,
            d,
            values,
            column_names: None,
        })
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d {
            return Err(Error::invalid(format!(
                "{} column names for {} columns",
                names.len(),
                self.d
            )));
        }
        self.column_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// Column means.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for r in self.rows() {
            for (acc, v) in m.iter_mut().zip(r) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|x| *x /= self.n as f64);
        m
    }

    /// Sample covariance (divisor `n - 1`, zero matrix when `n == 1`),
    /// row-major `d x d`.
    pub fn covariance(&self) -> Vec<f64> {
        let mean = self.mean();
        let d = self.d;
        let mut cov = vec![0.0; d * d];
        for r in self.rows() {
            for a in 0..d {
                let da = r[a] - mean[a];
                for b in 0..d {
                    cov[a * d + b] += da * (r[b] - mean[b]);
                }
            }
        }
        if self.n > 1 {
            let denom = (self.n - 1) as f64;
            cov.iter_mut().for_each(|x| *x /= denom);
        }
        cov
    }

    /// Column-sliced copy in the requested order.
    pub fn feature_subset(&self, columns: &[usize]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::invalid("feature subset selects no columns"));
        }
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.d) {
            return Err(Error::invalid(format!(
                "column index {bad} out of range for {} columns",
                self.d
            )));
        }
        let values = self
            .rows()
            .flat_map(|r| columns.iter().map(move |&c| r[c]))
            .collect();
        let mut out = Self::from_flat(self.n, columns.len(), values)?;
        if let Some(names) = &self.column_names {
            out.column_names = Some(columns.iter().map(|&c| names[c].clone()).collect());
        }
        Ok(out)
    }

    /// Keeps every `step`-th row starting from the first.
    pub fn thin_rows(&self, step: usize) -> Result<Self> {
        if step == 0 {
            return Err(Error::invalid("row thinning step must be positive"));
        }
        let values: Vec<f64> = self.rows().step_by(step).flatten().copied().collect();
        let mut out = Self::from_flat(values.len() / self.d, self.d, values)?;
        out.column_names = self.column_names.clone();
        Ok(out)
    }

    /// Writes CSV with a header line; values use the shortest representation
    /// that parses back to the same `f64`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header = match &self.column_names {
            Some(names) => names.join(","),
            None => (0..self.d).map(|j| format!("x{j}")).collect::<Vec<_>>().join(","),
        };
        let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            writeln!(w, "{header}")?;
            for r in self.rows() {
                let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", line.join(","))?;
            }
            w.flush()
        };
        write(&mut w).map_err(|e| Error::io(path, e))
    }
}

/// Reads a numeric CSV. The first line is taken as a header when any of its
/// fields fails to parse as a number.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);

    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut names: Option<Vec<String>> = None;
    let mut values = Vec::new();
    let mut d = 0usize;
    let mut n = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(idx + 1);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(idx + 1);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> = record.iter().map(str::parse::<f64>).collect();
        if n == 0 && names.is_none() && parsed.iter().any(|p| p.is_err()) {
            names = Some(record.iter().map(str::to_string).collect());
            d = record.len();
            continue;
        }
        if d == 0 {
            d = record.len();
        }
        if record.len() != d {
            return Err(parse_err(line, format!("expected {d} fields, found {}", record.len())));
        }
        for (col, (p, raw)) in parsed.into_iter().zip(record.iter()).enumerate() {
            let v = p.map_err(|_| parse_err(line, format!("column {col}: {raw:?} is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column {col}: non-finite value {raw:?}")));
            }
            values.push(v);
        }
        n += 1;
    }
    let data = Dataset::from_flat(n, d, values)?;
    match names {
        Some(names) => data.with_column_names(names),
        None => Ok(data),
    }
}

/// Draws from an equal-weight mixture of `N(mean_c, sigma^2)` components.
#[derive(Clone, Debug)]
pub struct SimulatedData {
    pub data: Dataset,
    /// Generating component index of each row.
    pub components: Vec<usize>,
    pub truth: Clustering,
}

pub fn generate_mixture_1d(n: usize, means: &[f64], sigma: f64, seed: u64) -> Result<SimulatedData> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if means.is_empty() {
        return Err(Error::invalid("at least one component mean is required"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive and finite, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut values = Vec::with_capacity(n);
    let mut components = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.random_range(0..means.len());
        components.push(c);
        values.push(means[c] + noise.sample(&mut rng));
    }
    let data = Dataset::from_flat(n, 1, values)?.with_column_names(vec!["y".into()])?;
    let truth = Clustering::canonicalize(&components)?;
    Ok(SimulatedData {
        data,
        components,
        truth,
    })
}
