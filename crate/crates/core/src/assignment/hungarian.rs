//! Shortest augmenting path Hungarian method, O(n^3).
//!
//! Rows are inserted one at a time; each insertion runs a Dijkstra-like
//! search over reduced costs and augments along the cheapest path. Ties are
//! resolved toward the lowest column index, so results are reproducible.

use super::{Assignment, CostMatrix, SolverKind};
use crate::error::Result;

/// Optimal assignment plus dual potentials `(u, v)` with
/// `u[i] + v[j] <= c(i, j)` and equality on matched pairs.
pub fn solve_hungarian_with_duals(cost: &CostMatrix) -> Result<(Assignment, Vec<f64>, Vec<f64>)> {
    cost.check_finite()?;
    let n = cost.size();
    // 1-based internal indexing; column 0 is the virtual start.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let row = cost.row(i0 - 1);
            let ui0 = u[i0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - ui0 - v[j];
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
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[row_of_col[j] - 1] = j - 1;
    }
    let a = Assignment::new(perm, cost, SolverKind::Hungarian);
    Ok((a, u[1..].to_vec(), v[1..].to_vec()))
}

/// Minimum-cost permutation of a square finite cost matrix.
pub fn solve_hungarian(cost: &CostMatrix) -> Result<Assignment> {
    solve_hungarian_with_duals(cost).map(|(a, _, _)| a)
}
