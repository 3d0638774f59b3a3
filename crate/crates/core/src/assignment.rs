//! Maximum-weight assignment on dense integer matrices.
//!
//! Shortest augmenting path Hungarian method with row and column potentials,
//! O(n^3) for an n x n problem. Rectangular inputs are padded with zero
//! weights to the larger side.

/// Returns `(total, col_of_row)` for a maximum-weight one-to-one matching of
/// the rows of `weights` (row-major, `rows x cols`) into its columns.
/// `col_of_row[i]` is `None` when row `i` was matched to a padding column.
pub fn max_weight_assignment(weights: &[u64], rows: usize, cols: usize) -> (u64, Vec<Option<usize>>) {
    assert_eq!(weights.len(), rows * cols, "weight matrix shape mismatch");
    let n = rows.max(cols);
    if n == 0 {
        return (0, Vec::new());
    }
    let max_w = weights.iter().copied().max().unwrap_or(0) as i64;
    // minimize max_w - w over the padded square matrix
    let cost = |i: usize, j: usize| -> i64 {
        if i < rows && j < cols {
            max_w - weights[i * cols + j] as i64
        } else {
            max_w
        }
    };

    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    // p[j]: row (1-based) matched to column j; p[0] is the row being inserted
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![None; rows];
    let mut total = 0u64;
    for j in 1..=n {
        let i = p[j] - 1;
        if i < rows && j - 1 < cols {
            col_of_row[i] = Some(j - 1);
            total += weights[i * cols + j - 1];
        }
    }
    (total, col_of_row)
}
