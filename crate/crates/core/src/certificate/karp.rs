//! Karp's minimum cycle mean and the k-step shortest path weights.

use log::warn;

use super::{ArcCosts, MeanCycle, PairingCosts};
use crate::error::{invalid, Result};

/// Minimum over directed cycles of (cycle cost) / (cycle length), with a
/// cycle attaining it.
///
/// `d[k][i]` is the cheapest `k`-arc walk from vertex 0 to `i`; the minimum
/// cycle mean is `min_i max_k (d[n][i] - d[k][i]) / (n - k)`. Parents are kept
/// so the critical walk can be unrolled into a witness cycle. O(n^3) time,
/// O(n^2) memory.
pub fn karp_min_mean_cycle(costs: &PairingCosts) -> Result<MeanCycle> {
    let n = costs.size();
    if n < 2 {
        return invalid(format!("minimum cycle mean needs at least 2 vertices, got {n}"));
    }
    let mut d = vec![f64::INFINITY; (n + 1) * n];
    let mut parent = vec![u32::MAX; (n + 1) * n];
    d[0] = 0.0;
    for k in 0..n {
        let (done, rest) = d.split_at_mut((k + 1) * n);
        let cur = &done[k * n..];
        let next = &mut rest[..n];
        let par = &mut parent[(k + 1) * n..(k + 2) * n];
        for (j, &dj) in cur.iter().enumerate() {
            if !dj.is_finite() {
                continue;
            }
            let row = costs.row(j);
            for i in 0..n {
                let cand = dj + row[i];
                if cand < next[i] {
                    next[i] = cand;
                    par[i] = j as u32;
                }
            }
        }
    }

    let dn = &d[n * n..];
    let mut best = f64::INFINITY;
    let mut best_i = 0;
    for i in 0..n {
        if !dn[i].is_finite() {
            continue;
        }
        let mut worst = f64::NEG_INFINITY;
        for k in 0..n {
            let dk = d[k * n + i];
            if dk.is_finite() {
                worst = worst.max((dn[i] - dk) / (n - k) as f64);
            }
        }
        if worst < best {
            best = worst;
            best_i = i;
        }
    }

    let mut walk = vec![0usize; n + 1];
    walk[n] = best_i;
    for k in (1..=n).rev() {
        walk[k - 1] = parent[k * n + walk[k]] as usize;
    }
    let cycle = cheapest_cycle_on_walk(&walk, costs).unwrap_or_default();
    Ok(MeanCycle { mean: best, cycle })
}

/// Among the simple cycles closed along `walk`, the one of least mean.
fn cheapest_cycle_on_walk<C: ArcCosts>(walk: &[usize], costs: &C) -> Option<Vec<usize>> {
    let mut last_seen = std::collections::HashMap::new();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for (p, &v) in walk.iter().enumerate() {
        if let Some(&q) = last_seen.get(&v) {
            let cyc = &walk[q..p];
            let mut uniq = cyc.to_vec();
            uniq.sort_unstable();
            uniq.dedup();
            if uniq.len() == cyc.len() {
                let m = super::cycle_mean(costs, cyc);
                if best.as_ref().is_none_or(|(b, _)| m < *b) {
                    best = Some((m, cyc.to_vec()));
                }
            }
        }
        last_seen.insert(v, p);
    }
    best.map(|(_, c)| c)
}

/// Weights `psi_i = -d~_i`, where `d~_i` is the shortest distance from
/// vertex 0 to `i` under `c(i, j) - epsilon_star` over walks of at most
/// `n - 1` arcs. Then `c(i, j) >= psi_i - psi_j + epsilon_star` for i != j.
pub fn optimal_weights(costs: &PairingCosts, epsilon_star: f64) -> Vec<f64> {
    let n = costs.size();
    if n == 1 {
        return vec![0.0];
    }
    let mut best = vec![f64::INFINITY; n];
    let mut cur = vec![f64::INFINITY; n];
    let mut next = vec![f64::INFINITY; n];
    cur[0] = 0.0;
    best[0] = 0.0;
    for _ in 1..n {
        next.fill(f64::INFINITY);
        for (j, &dj) in cur.iter().enumerate() {
            if !dj.is_finite() {
                continue;
            }
            let row = costs.row(j);
            for i in 0..n {
                let cand = dj + (row[i] - epsilon_star);
                if cand < next[i] {
                    next[i] = cand;
                }
            }
        }
        for i in 0..n {
            best[i] = best[i].min(next[i]);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let psi: Vec<f64> = best.iter().map(|d| -d).collect();

    let slack = super::min_reduced_cost(costs, &psi) - epsilon_star;
    let tol = super::zero_tolerance(costs);
    if slack < -tol {
        warn!("optimal weights violate feasibility by {:e} (tolerance {tol:e})", -slack);
    }
    psi
}
