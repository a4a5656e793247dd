//! Exhaustive search over all n! permutations; a test oracle for tiny n.

use super::{Assignment, CostMatrix, SolverKind};
use crate::error::{invalid, Result};

pub const BRUTE_FORCE_MAX: usize = 10;

#[derive(Clone, Debug)]
pub struct BruteForce {
    pub assignment: Assignment,
    /// No other permutation attains the minimum.
    pub unique: bool,
}

/// Exact minimum by enumeration (Heap's algorithm). Equal totals are
/// compared exactly, so `unique` is about exact ties.
pub fn brute_force_assignment(cost: &CostMatrix) -> Result<BruteForce> {
    let n = cost.size();
    if n > BRUTE_FORCE_MAX {
        return invalid(format!("brute force refuses n = {n} > {BRUTE_FORCE_MAX}"));
    }
    cost.check_finite()?;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = cost.total(&perm);
    let mut ties = 1usize;
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let total = cost.total(&perm);
            if total < best_cost {
                best_cost = total;
                best.copy_from_slice(&perm);
                ties = 1;
            } else if total == best_cost {
                ties += 1;
            }
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(BruteForce { assignment: Assignment::new(best, cost, SolverKind::Brute), unique: ties == 1 })
}
