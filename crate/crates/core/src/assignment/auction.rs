//! Forward auction with epsilon scaling on integerized costs.
//!
//! Costs are scaled and rounded to integers, then multiplied by `n + 1` so
//! that an integer bid increment of 1 corresponds to `epsilon < 1 / n` in
//! the integer cost units: the final phase then returns an optimal
//! assignment of the integerized problem.

use log::{debug, warn};

use super::{Assignment, CostMatrix, SolverKind};
use crate::error::{invalid, Error, Result};

/// Strictly decreasing positive bid increments, in cost units.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonSchedule {
    steps: Vec<f64>,
}

impl EpsilonSchedule {
    pub fn new(steps: Vec<f64>) -> Result<Self> {
        if steps.is_empty() {
            return invalid("epsilon schedule is empty");
        }
        if steps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return invalid("epsilon schedule entries must be positive and finite");
        }
        if steps.windows(2).any(|w| w[1] >= w[0]) {
            return invalid("epsilon schedule must be strictly decreasing");
        }
        Ok(Self { steps })
    }

    /// `start, start * factor, ...` down to (and including) `end`.
    pub fn geometric(start: f64, factor: f64, end: f64) -> Result<Self> {
        if !(factor > 0.0 && factor < 1.0) || !(end > 0.0) || !(start >= end) {
            return invalid("geometric schedule needs start >= end > 0 and 0 < factor < 1");
        }
        let mut steps = vec![];
        let mut e = start;
        while e > end {
            steps.push(e);
            e *= factor;
        }
        steps.push(end);
        if steps.len() >= 2 && steps[steps.len() - 2] <= end {
            steps.remove(steps.len() - 2);
        }
        Self::new(steps)
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn last(&self) -> f64 {
        *self.steps.last().expect("non-empty")
    }
}

#[derive(Clone, Debug)]
pub struct AuctionConfig {
    /// Explicit schedule; `None` runs from a quarter of the largest cost
    /// down to the exactness threshold with factor `factor`.
    pub schedule: Option<EpsilonSchedule>,
    pub factor: f64,
    /// Costs are multiplied by this and rounded before bidding.
    pub scale: f64,
    /// Total bids allowed across all phases.
    pub max_bids: u64,
}

impl Default for AuctionConfig {
    fn default() -> Self {
        Self { schedule: None, factor: 0.25, scale: 1e9, max_bids: 4_000_000_000 }
    }
}

const MAX_BENEFIT: f64 = 9.0e15;

/// Auction solution within `n * epsilon_final` of optimal (exact for the
/// integerized costs with the default schedule).
pub fn solve_auction(cost: &CostMatrix, config: &AuctionConfig) -> Result<Assignment> {
    solve_auction_with_prices(cost, config).map(|(a, _)| a)
}

/// Also returns the final object prices, in cost units: with profits
/// `pi_i`, every pair satisfies `-c(i, j) - price_j <= pi_i` up to the last
/// bid increment.
pub fn solve_auction_with_prices(cost: &CostMatrix, config: &AuctionConfig) -> Result<(Assignment, Vec<f64>)> {
    cost.check_finite()?;
    if cost.entries.iter().any(|&c| c < 0.0) {
        return invalid("auction expects non-negative costs");
    }
    let n = cost.size();
    let mult = (n + 1) as f64;
    let max_cost = cost.max_entry();
    let mut scale = config.scale;
    if max_cost * scale * mult > MAX_BENEFIT {
        let fitted = MAX_BENEFIT / (max_cost * mult);
        warn!("auction: cost scale reduced from {scale:e} to {fitted:e} to avoid overflow");
        scale = fitted;
    }
    let unit = scale * mult;

    let benefit: Vec<i64> = cost.entries.iter().map(|&c| -((c * scale).round() as i64) * (n as i64 + 1)).collect();

    let steps: Vec<i64> = match &config.schedule {
        Some(s) => {
            let mut v: Vec<i64> = s.steps().iter().map(|e| ((e * unit).round() as i64).max(1)).collect();
            v.dedup();
            v
        }
        None => {
            let mut v = vec![];
            let mut e = (max_cost * unit / 4.0).max(1.0);
            while e > 1.0 {
                v.push(e.round() as i64);
                e *= config.factor;
            }
            v.push(1);
            v.dedup();
            v
        }
    };

    let mut price = vec![0i64; n];
    let mut owner = vec![usize::MAX; n];
    let mut assigned = vec![usize::MAX; n];
    let mut stack: Vec<usize> = Vec::with_capacity(n);
    let mut bids: u64 = 0;

    for &eps in &steps {
        owner.fill(usize::MAX);
        assigned.fill(usize::MAX);
        stack.clear();
        stack.extend((0..n).rev());
        let phase_start = bids;
        while let Some(i) = stack.pop() {
            bids += 1;
            if bids > config.max_bids {
                return Err(Error::SolverFailure(format!(
                    "auction exceeded {} bids at epsilon {:e} with {} persons unassigned",
                    config.max_bids,
                    eps as f64 / unit,
                    stack.len() + 1
                )));
            }
            let row = &benefit[i * n..(i + 1) * n];
            let mut best_j = 0;
            let mut best = i64::MIN;
            let mut second = i64::MIN;
            for (j, (&b, &p)) in row.iter().zip(&price).enumerate() {
                let val = b - p;
                if val > best {
                    second = best;
                    best = val;
                    best_j = j;
                } else if val > second {
                    second = val;
                }
            }
            let increment = if second == i64::MIN { eps } else { best - second + eps };
            price[best_j] += increment;
            let prev = owner[best_j];
            if prev != usize::MAX {
                assigned[prev] = usize::MAX;
                stack.push(prev);
            }
            owner[best_j] = i;
            assigned[i] = best_j;
        }
        debug!("auction phase eps={:e}: {} bids", eps as f64 / unit, bids - phase_start);
    }

    let prices = price.iter().map(|&p| p as f64 / unit).collect();
    Ok((Assignment::new(assigned, cost, SolverKind::Auction), prices))
}
