//! Minimum-cost bipartite assignment (Kuhn–Munkres with potentials).

use crate::error::{Error, Result};

/// Minimum-total-cost one-to-one assignment of rows to columns.
///
/// `f64::INFINITY` marks a forbidden pair. The result first maximises the
/// number of allowed pairs, then minimises their total cost; forbidden pairs
/// never appear. Pairs are returned sorted by row.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Vec<(usize, usize)>> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if let Some(r) = cost.iter().position(|row| row.len() != cols) {
        return Err(Error::Shape(format!("cost row {r} has {} entries, expected {cols}", cost[r].len())));
    }
    if rows == 0 || cols == 0 {
        return Ok(Vec::new());
    }
    let mut finite_sum = 0.0;
    for row in cost {
        for &c in row {
            if c.is_nan() || c == f64::NEG_INFINITY {
                return Err(Error::Argument(format!("invalid cost {c}")));
            }
            if c.is_finite() {
                finite_sum += c.abs();
            }
        }
    }
    // Any single forbidden pair outweighs every possible difference in the
    // finite part of two assignments.
    let forbidden = 2.0 * finite_sum + 1.0;
    let at = |r: usize, c: usize| {
        let v = cost[r][c];
        if v.is_finite() {
            v
        } else {
            forbidden
        }
    };

    let transposed = rows > cols;
    let (n, m) = if transposed { (cols, rows) } else { (rows, cols) };
    let a = |i: usize, j: usize| if transposed { at(j, i) } else { at(i, j) };

    // 1-based potentials; p[j] = row matched to column j.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
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

    let mut out: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| {
            let (i, j) = (p[j] - 1, j - 1);
            if transposed {
                (j, i)
            } else {
                (i, j)
            }
        })
        .filter(|&(r, c)| cost[r][c].is_finite())
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// Total cost of `pairs` under `cost`.
pub fn assignment_cost(cost: &[Vec<f64>], pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(r, c)| cost[r][c]).sum()
}
