#![allow(dead_code, clippy::needless_range_loop)]

use centerout::certificate::PairingCosts;
use centerout::points::PointSet;
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_points(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> PointSet {
    let coords = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    PointSet::new(dim, coords).unwrap()
}

/// Minimum mean over all simple cycles, by depth-first enumeration from
/// each cycle's smallest vertex.
pub fn enumerate_min_cycle_mean(c: &PairingCosts) -> f64 {
    let n = c.size();
    let mut best = f64::INFINITY;
    fn walk(c: &PairingCosts, start: usize, v: usize, len: usize, cost: f64, used: &mut [bool], best: &mut f64) {
        for w in start..c.size() {
            if w == v {
                continue;
            }
            let step = cost + c.get(v, w);
            if w == start {
                *best = best.min(step / (len + 1) as f64);
            } else if !used[w] {
                used[w] = true;
                walk(c, start, w, len + 1, step, used, best);
                used[w] = false;
            }
        }
    }
    for s in 0..n {
        let mut used = vec![false; n];
        used[s] = true;
        walk(c, s, s, 0, 0.0, &mut used, &mut best);
    }
    best
}

/// `max eps` subject to `psi_i - psi_j + eps <= c(i, j)` for `i != j`,
/// with `psi_0 = 0`. Returns `(eps, psi)`.
pub fn lp_max_margin(c: &PairingCosts) -> (f64, Vec<f64>) {
    let n = c.size();
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let eps = p.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    let psi: Vec<_> = (0..n)
        .map(|i| if i == 0 { p.add_var(0.0, (0.0, 0.0)) } else { p.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)) })
        .collect();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p.add_constraint([(psi[i], 1.0), (psi[j], -1.0), (eps, 1.0)], ComparisonOp::Le, c.get(i, j));
            }
        }
    }
    let sol = p.solve().expect("margin LP is feasible and bounded for n >= 2");
    (sol[eps], psi.iter().map(|&v| sol[v]).collect())
}
