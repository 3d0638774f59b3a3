//! Distances between clusterings.
//!
//! The exact distance is the fraction of units left off the best one-to-one
//! matching of clusters; the matching is found with a maximum-weight
//! assignment on the contingency table. The approximate distance replaces the
//! matching by per-row (and per-column) maxima and keeps the larger of the two
//! directed values. Both are computed as an integer count of mismatched units
//! over the unit count, so comparisons between them are exact.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::max_weight_assignment;
use crate::clustering::{Clustering, ContingencyTable};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Exact,
    #[default]
    Approx,
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::Exact => "exact",
            DistanceKind::Approx => "approx",
        })
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(DistanceKind::Exact),
            "approx" => Ok(DistanceKind::Approx),
            other => Err(Error::invalid(format!("unknown metric kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub value: f64,
    pub kind: DistanceKind,
    /// `(d~(a,b), d~(b,a))`, present for the approximate distance.
    pub directed_pair: Option<(f64, f64)>,
    /// Units outside the matching; `value == mismatches / total`.
    pub mismatches: u64,
    pub total: u64,
}

fn ratio(mismatches: u64, total: u64) -> f64 {
    mismatches as f64 / total as f64
}

/// Exact distance computed from a contingency table.
pub fn exact_from_table(table: &ContingencyTable) -> DistanceResult {
    let (matched, _) = max_weight_assignment(
        &(0..table.rows()).flat_map(|i| table.row(i).to_vec()).collect::<Vec<_>>(),
        table.rows(),
        table.cols(),
    );
    let total = table.total();
    DistanceResult {
        value: ratio(total - matched, total),
        kind: DistanceKind::Exact,
        directed_pair: None,
        mismatches: total - matched,
        total,
    }
}

/// Symmetrized row/column-maximum approximation computed from a table.
pub fn approx_from_table(table: &ContingencyTable) -> DistanceResult {
    let total = table.total();
    let row_miss = total - table.row_max_sum();
    let col_miss = total - table.col_max_sum();
    let mismatches = row_miss.max(col_miss);
    DistanceResult {
        value: ratio(mismatches, total),
        kind: DistanceKind::Approx,
        directed_pair: Some((ratio(row_miss, total), ratio(col_miss, total))),
        mismatches,
        total,
    }
}

pub fn exact_distance(a: &Clustering, b: &Clustering) -> Result<DistanceResult> {
    Ok(exact_from_table(&ContingencyTable::new(a, b)?))
}

pub fn approx_distance(a: &Clustering, b: &Clustering) -> Result<DistanceResult> {
    Ok(approx_from_table(&ContingencyTable::new(a, b)?))
}

pub fn distance(a: &Clustering, b: &Clustering, kind: DistanceKind) -> Result<DistanceResult> {
    match kind {
        DistanceKind::Exact => exact_distance(a, b),
        DistanceKind::Approx => approx_distance(a, b),
    }
}

/// `1 - m k / n_00` with `m = floor(n_00 / k^2)`: the distance reached when
/// every cell of a `k x k` table holds the same count.
pub fn distance_upper_bound(total: u64, k: u64) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("cluster count must be positive"));
    }
    if total == 0 {
        return Err(Error::invalid("unit count must be positive"));
    }
    let m = total / (k * k);
    Ok(ratio(total - m * k, total))
}

/// Pairwise distances over a sequence of clusterings.
///
/// Entries that are identical clusterings share one row: distances are stored
/// for the distinct clusterings only, together with each one's multiplicity
/// and first position. `origin` maps positions back to the trace the matrix
/// was built from (identity unless the matrix is a restriction).
#[derive(Clone, Debug)]
pub struct DistanceMatrix {
    kind: DistanceKind,
    units: u64,
    entry_unique: Vec<usize>,
    unique_first: Vec<usize>,
    unique_mult: Vec<u64>,
    mismatches: Vec<u64>,
    origin: Vec<usize>,
}

impl DistanceMatrix {
    pub fn new<'a, I>(samples: I, kind: DistanceKind) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Clustering>,
    {
        let samples: Vec<&Clustering> = samples.into_iter().collect();
        let first = samples.first().ok_or(Error::Empty("no clusterings"))?;
        let n = first.n();
        if let Some(bad) = samples.iter().find(|c| c.n() != n) {
            return Err(Error::LengthMismatch {
                left: n,
                right: bad.n(),
            });
        }

        let mut index: HashMap<&Clustering, usize> = HashMap::new();
        let mut entry_unique = Vec::with_capacity(samples.len());
        let mut unique_first = Vec::new();
        let mut unique_mult: Vec<u64> = Vec::new();
        for (pos, c) in samples.iter().enumerate() {
            let next = unique_first.len();
            let u = *index.entry(*c).or_insert(next);
            if u == next {
                unique_first.push(pos);
                unique_mult.push(0);
            }
            unique_mult[u] += 1;
            entry_unique.push(u);
        }

        let reps: Vec<&Clustering> = unique_first.iter().map(|&p| samples[p]).collect();
        let u_len = reps.len();
        let rows: Vec<Vec<u64>> = (0..u_len)
            .into_par_iter()
            .map(|i| {
                ((i + 1)..u_len)
                    .map(|j| {
                        let table = ContingencyTable::new(reps[i], reps[j]).expect("lengths checked");
                        match kind {
                            DistanceKind::Exact => exact_from_table(&table).mismatches,
                            DistanceKind::Approx => approx_from_table(&table).mismatches,
                        }
                    })
                    .collect()
            })
            .collect();
        let mut mismatches = vec![0u64; u_len * u_len];
        for (i, row) in rows.into_iter().enumerate() {
            for (off, m) in row.into_iter().enumerate() {
                let j = i + 1 + off;
                mismatches[i * u_len + j] = m;
                mismatches[j * u_len + i] = m;
            }
        }

        Ok(DistanceMatrix {
            kind,
            units: n as u64,
            entry_unique,
            unique_first,
            unique_mult,
            mismatches,
            origin: (0..samples.len()).collect(),
        })
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    /// Number of data units per clustering.
    pub fn units(&self) -> u64 {
        self.units
    }

    /// Number of entries (trace positions).
    pub fn len(&self) -> usize {
        self.entry_unique.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entry_unique.is_empty()
    }

    pub fn unique_len(&self) -> usize {
        self.unique_first.len()
    }

    pub fn unique_of(&self, pos: usize) -> usize {
        self.entry_unique[pos]
    }

    /// First position holding distinct clustering `u`.
    pub fn first_position(&self, u: usize) -> usize {
        self.unique_first[u]
    }

    pub fn multiplicity(&self, u: usize) -> u64 {
        self.unique_mult[u]
    }

    /// Trace index of position `pos` in the trace this matrix was built from.
    pub fn origin(&self, pos: usize) -> usize {
        self.origin[pos]
    }

    pub fn unique_mismatches(&self, u: usize, v: usize) -> u64 {
        self.mismatches[u * self.unique_len() + v]
    }

    pub fn unique_distance(&self, u: usize, v: usize) -> f64 {
        ratio(self.unique_mismatches(u, v), self.units)
    }

    pub fn mismatches(&self, i: usize, j: usize) -> u64 {
        self.unique_mismatches(self.entry_unique[i], self.entry_unique[j])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        ratio(self.mismatches(i, j), self.units)
    }

    /// Full `len x len` matrix of distances.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| (0..self.len()).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// The sub-matrix over `positions` (in the given order). Origins are
    /// carried through so results can be reported against the full trace.
    pub fn restrict(&self, positions: &[usize]) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Empty("restriction selects no entries"));
        }
        let mut remap: HashMap<usize, usize> = HashMap::new();
        let mut entry_unique = Vec::with_capacity(positions.len());
        let mut unique_first = Vec::new();
        let mut unique_mult = Vec::new();
        let mut parent_unique = Vec::new();
        for (new_pos, &pos) in positions.iter().enumerate() {
            let pu = self.entry_unique[pos];
            let next = unique_first.len();
            let u = *remap.entry(pu).or_insert(next);
            if u == next {
                unique_first.push(new_pos);
                unique_mult.push(0);
                parent_unique.push(pu);
            }
            unique_mult[u] += 1;
            entry_unique.push(u);
        }
        let u_len = parent_unique.len();
        let mut mismatches = vec![0u64; u_len * u_len];
        for (i, &pi) in parent_unique.iter().enumerate() {
            for (j, &pj) in parent_unique.iter().enumerate() {
                mismatches[i * u_len + j] = self.unique_mismatches(pi, pj);
            }
        }
        Ok(DistanceMatrix {
            kind: self.kind,
            units: self.units,
            entry_unique,
            unique_first,
            unique_mult,
            mismatches,
            origin: positions.iter().map(|&p| self.origin[p]).collect(),
        })
    }
}

/// Dense pairwise distance matrix; `[i][j]` is the chosen distance between
/// samples `i` and `j`.
pub fn distance_matrix(samples: &[Clustering], kind: DistanceKind) -> Result<Vec<Vec<f64>>> {
    Ok(DistanceMatrix::new(samples, kind)?.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(labels: &[u32]) -> Clustering {
        Clustering::canonicalize(labels).unwrap()
    }

    #[test]
    fn identical_is_zero() {
        let a = c(&[0, 1, 1, 2, 0]);
        assert_eq!(exact_distance(&a, &a).unwrap().value, 0.0);
        let r = approx_distance(&a, &a).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.directed_pair, Some((0.0, 0.0)));
    }

    #[test]
    fn length_mismatch_is_error() {
        assert!(exact_distance(&c(&[0, 1]), &c(&[0])).is_err());
        assert!(approx_distance(&c(&[0, 1]), &c(&[0])).is_err());
    }

    #[test]
    fn upper_bound_examples() {
        assert_eq!(distance_upper_bound(100, 2).unwrap(), 0.5);
        assert_eq!(distance_upper_bound(5000, 5).unwrap(), 0.8);
        assert_eq!(distance_upper_bound(37, 1).unwrap(), 0.0);
        assert!(distance_upper_bound(10, 0).is_err());
    }

    #[test]
    fn split_cluster() {
        // a: one cluster of 4; b: two clusters of 2
        let a = c(&[0, 0, 0, 0]);
        let b = c(&[0, 0, 1, 1]);
        let d = exact_distance(&a, &b).unwrap();
        assert_eq!(d.mismatches, 2);
        let h = approx_distance(&a, &b).unwrap();
        assert_eq!(h.directed_pair, Some((0.5, 0.0)));
        assert_eq!(h.value, 0.5);
    }

    #[test]
    fn matrix_examples() {
        let a = c(&[0, 0, 1, 1, 2]);
        let b = c(&[0, 1, 1, 2, 2]);
        let m = distance_matrix(&[a.clone(), a.clone()], DistanceKind::Exact).unwrap();
        assert_eq!(m, vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        let m = distance_matrix(&[a.clone(), b, a], DistanceKind::Approx).unwrap();
        assert_eq!(m[0][2], 0.0);
        assert_eq!(m[0][1], m[2][1]);
        assert!(m[0][1] > 0.0);
    }

    #[test]
    fn matrix_matches_pairwise_calls() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let samples: Vec<Clustering> = (0..10)
            .map(|_| {
                let raw: Vec<u32> = (0..30).map(|_| rng.random_range(0..3)).collect();
                Clustering::canonicalize(&raw).unwrap()
            })
            .collect();
        for kind in [DistanceKind::Approx, DistanceKind::Exact] {
            let m = distance_matrix(&samples, kind).unwrap();
            for i in 0..10 {
                for j in 0..10 {
                    let direct = distance(&samples[i], &samples[j], kind).unwrap().value;
                    assert_eq!(m[i][j].to_bits(), direct.to_bits());
                }
            }
        }
    }

    #[test]
    fn matrix_rejects_heterogeneous_units() {
        assert!(DistanceMatrix::new(&[c(&[0, 1]), c(&[0, 1, 1])], DistanceKind::Approx).is_err());
        let none: Vec<Clustering> = Vec::new();
        assert!(DistanceMatrix::new(&none, DistanceKind::Approx).is_err());
    }

    #[test]
    fn restriction_keeps_origins_and_multiplicities() {
        let a = c(&[0, 0, 1]);
        let b = c(&[0, 1, 1]);
        let m = DistanceMatrix::new(&[a.clone(), b.clone(), a.clone(), b], DistanceKind::Exact).unwrap();
        assert_eq!(m.unique_len(), 2);
        assert_eq!(m.multiplicity(0), 2);
        let r = m.restrict(&[3, 2, 0]).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r.unique_len(), 2);
        assert_eq!(r.origin(0), 3);
        assert_eq!(r.first_position(1), 1);
        assert_eq!(r.multiplicity(1), 2);
        assert_eq!(r.get(0, 1), m.get(3, 2));
    }

    fn clustering_pair() -> impl Strategy<Value = (Clustering, Clustering)> {
        (1usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(0u32..5, n),
                prop::collection::vec(0u32..5, n),
            )
                .prop_map(|(a, b)| (Clustering::canonicalize(&a).unwrap(), Clustering::canonicalize(&b).unwrap()))
        })
    }

    proptest! {
        #[test]
        fn symmetric_and_ordered((a, b) in clustering_pair()) {
            let dab = exact_distance(&a, &b).unwrap();
            let dba = exact_distance(&b, &a).unwrap();
            let hab = approx_distance(&a, &b).unwrap();
            let hba = approx_distance(&b, &a).unwrap();
            prop_assert_eq!(dab.value.to_bits(), dba.value.to_bits());
            prop_assert_eq!(hab.value.to_bits(), hba.value.to_bits());
            prop_assert!(hab.mismatches <= dab.mismatches);
            prop_assert!((0.0..=1.0).contains(&dab.value));
            let (x, y) = hab.directed_pair.unwrap();
            prop_assert_eq!(hab.value, x.max(y));
            prop_assert_eq!(dab.value == 0.0, a == b);
            prop_assert_eq!(hab.value == 0.0, a == b);
        }

        #[test]
        fn invariant_under_row_and_column_permutation((a, b) in clustering_pair(), rot_r in 0usize..8, rot_c in 0usize..8) {
            let t = ContingencyTable::new(&a, &b).unwrap();
            let (r, k) = (t.rows(), t.cols());
            let cells: Vec<Vec<u64>> = (0..r)
                .map(|i| (0..k).map(|j| t.get((i + rot_r) % r, (k - 1 - j + rot_c) % k)).collect())
                .collect();
            let p = ContingencyTable::from_counts(&cells).unwrap();
            prop_assert_eq!(exact_from_table(&t), exact_from_table(&p));
            prop_assert_eq!(approx_from_table(&t), approx_from_table(&p));
        }
    }
}
