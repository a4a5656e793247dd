//! Policy iteration (Howard's algorithm) for the minimum cycle mean.
//!
//! Each vertex keeps one outgoing arc; the resulting functional graph is
//! evaluated (cycle means and relative potentials) and arcs are switched
//! while that improves either the mean reached or the potential. At a fixed
//! point the potentials `x` satisfy `c(v, u) >= x_v - x_u + mean` on every
//! arc, which are the optimal weights of the smoothing LP. A sweep costs
//! O(n^2) arc evaluations and works on implicit costs, so no n x n matrix
//! is ever stored.

use log::debug;
use rayon::prelude::*;

use super::{ArcCosts, MeanCycle};
use crate::error::{invalid, Error, Result};

pub const POLICY_MAX_SWEEPS: usize = 10_000;

const REL_TOL: f64 = 1e-13;

struct Evaluation {
    eta: Vec<f64>,
    x: Vec<f64>,
    cycles: Vec<(f64, Vec<usize>)>,
}

fn evaluate<C: ArcCosts>(costs: &C, policy: &[usize], old_x: &[f64]) -> Evaluation {
    let n = policy.len();
    let mut state = vec![0u8; n];
    let mut eta = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut cycles = vec![];
    let mut path = Vec::with_capacity(n);
    for s in 0..n {
        if state[s] != 0 {
            continue;
        }
        path.clear();
        let mut v = s;
        while state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = policy[v];
        }
        let tail_end = if state[v] == 1 {
            let start = path.iter().position(|&u| u == v).expect("on path");
            let cyc = path[start..].to_vec();
            let mean = super::cycle_mean(costs, &cyc);
            let m = cyc.len();
            x[cyc[0]] = old_x[cyc[0]];
            for k in (1..m).rev() {
                let u = cyc[k];
                let w = cyc[(k + 1) % m];
                x[u] = costs.cost(u, w) - mean + x[w];
            }
            for &u in &cyc {
                eta[u] = mean;
                state[u] = 2;
            }
            cycles.push((mean, cyc));
            start
        } else {
            path.len()
        };
        for &u in path[..tail_end].iter().rev() {
            let w = policy[u];
            eta[u] = eta[w];
            x[u] = costs.cost(u, w) - eta[w] + x[w];
            state[u] = 2;
        }
    }
    Evaluation { eta, x, cycles }
}

#[inline]
fn tol(a: f64, b: f64) -> f64 {
    REL_TOL * (1.0 + a.abs() + b.abs())
}

/// Minimum cycle mean and optimal weights by policy iteration.
///
/// `init` seeds the first policy with `argmin_u c(v, u) + init_u`; dual
/// prices of the assignment problem make a good seed.
pub fn policy_iteration<C: ArcCosts>(costs: &C, init: Option<&[f64]>) -> Result<(MeanCycle, Vec<f64>)> {
    let n = costs.size();
    if n < 2 {
        return invalid(format!("minimum cycle mean needs at least 2 vertices, got {n}"));
    }
    let zeros = vec![0.0; n];
    let seed = match init {
        Some(w) if w.len() == n => w,
        Some(_) => return invalid("seed weights have the wrong length"),
        None => &zeros,
    };
    let argmin = |v: usize, pot: &[f64]| -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for u in 0..n {
            if u == v {
                continue;
            }
            let val = costs.cost(v, u) + pot[u];
            if val < best.1 {
                best = (u, val);
            }
        }
        best
    };
    // Seed weights psi give potentials x = psi; the tight arc minimizes c(v,u) + x_u.
    let mut policy: Vec<usize> = (0..n).into_par_iter().map(|v| argmin(v, seed).0).collect();
    let mut x = seed.to_vec();

    for sweep in 0..POLICY_MAX_SWEEPS {
        let ev = evaluate(costs, &policy, &x);
        x = ev.x;
        let eta_min = ev.cycles.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);

        let lagging: Vec<usize> = (0..n).filter(|&v| ev.eta[v] > eta_min + tol(ev.eta[v], eta_min)).collect();
        if !lagging.is_empty() {
            let pot: Vec<f64> = (0..n)
                .map(|u| if ev.eta[u] <= eta_min + tol(ev.eta[u], eta_min) { x[u] } else { f64::INFINITY })
                .collect();
            let updates: Vec<(usize, usize)> = lagging.par_iter().map(|&v| (v, argmin(v, &pot).0)).collect();
            for (v, u) in updates {
                if u != usize::MAX {
                    policy[v] = u;
                }
            }
            continue;
        }

        let updates: Vec<(usize, usize)> = (0..n)
            .into_par_iter()
            .filter_map(|v| {
                let (u, val) = argmin(v, &x);
                let cand = val - eta_min;
                (u != policy[v] && cand < x[v] - tol(cand, x[v])).then_some((v, u))
            })
            .collect();
        if updates.is_empty() {
            debug!("policy iteration converged after {} sweeps", sweep + 1);
            let (mean, cycle) =
                ev.cycles.into_iter().min_by(|a, b| a.0.total_cmp(&b.0)).expect("functional graph has a cycle");
            return Ok((MeanCycle { mean, cycle }, x));
        }
        for (v, u) in updates {
            policy[v] = u;
        }
    }
    Err(Error::SolverFailure(format!("policy iteration did not converge in {POLICY_MAX_SWEEPS} sweeps")))
}
