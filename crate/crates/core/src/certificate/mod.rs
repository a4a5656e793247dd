//! Cyclical monotonicity certificates for a matched sample.
//!
//! Sample point `x_i` is matched to target `y_i`. The pairing is cyclically
//! monotone iff every directed cycle has nonnegative total cost under
//! `c(i, j) = <x_i, y_i - y_j>`, and uniquely optimal iff the minimum cycle
//! mean `epsilon_star` is positive.

mod karp;
mod policy;

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::points::{dot, PointSet};
use crate::rng;

pub use karp::{karp_min_mean_cycle, optimal_weights};
pub use policy::{policy_iteration, POLICY_MAX_SWEEPS};

/// Arc costs of a complete digraph without self loops.
pub trait ArcCosts: Sync {
    fn size(&self) -> usize;
    fn cost(&self, i: usize, j: usize) -> f64;
}

/// Dense pairing costs `c(i, j) = <x_i, y_i - y_j>`, `+inf` on the diagonal.
#[derive(Debug, Clone)]
pub struct PairingCosts {
    n: usize,
    entries: Vec<f64>,
}

impl PairingCosts {
    /// Costs from arbitrary entries (row-major); the diagonal is ignored.
    pub fn from_entries(n: usize, mut entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return invalid(format!("expected {} entries, got {}", n * n, entries.len()));
        }
        for i in 0..n {
            entries[i * n + i] = f64::INFINITY;
        }
        if entries.iter().any(|c| c.is_nan() || *c == f64::NEG_INFINITY) {
            return invalid("pairing costs must not be NaN or -inf");
        }
        Ok(Self { n, entries })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Largest finite |c(i, j)|.
    pub fn magnitude(&self) -> f64 {
        self.entries.iter().filter(|c| c.is_finite()).fold(0.0, |m, c| m.max(c.abs()))
    }
}

impl ArcCosts for PairingCosts {
    fn size(&self) -> usize {
        self.n
    }
    fn cost(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }
}

/// Pairing costs evaluated on demand: `<x_i, y_i> - <x_i, y_j>`.
pub struct ImplicitPairingCosts<'a> {
    xs: &'a PointSet,
    ys: &'a PointSet,
    self_dot: Vec<f64>,
}

impl<'a> ImplicitPairingCosts<'a> {
    pub fn new(xs: &'a PointSet, ys: &'a PointSet) -> Result<Self> {
        check_pair(xs, ys)?;
        let self_dot = (0..xs.len()).map(|i| dot(xs.row(i), ys.row(i))).collect();
        Ok(Self { xs, ys, self_dot })
    }
}

impl ArcCosts for ImplicitPairingCosts<'_> {
    fn size(&self) -> usize {
        self.xs.len()
    }
    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        if i == j {
            f64::INFINITY
        } else {
            self.self_dot[i] - dot(self.xs.row(i), self.ys.row(j))
        }
    }
}

fn check_pair(xs: &PointSet, ys: &PointSet) -> Result<()> {
    if xs.len() != ys.len() || xs.dim() != ys.dim() {
        return invalid(format!(
            "sample ({} x {}) and targets ({} x {}) do not match",
            xs.len(),
            xs.dim(),
            ys.len(),
            ys.dim()
        ));
    }
    if xs.is_empty() {
        return invalid("empty sample");
    }
    if !xs.all_finite() || !ys.all_finite() {
        return invalid("points must be finite");
    }
    Ok(())
}

/// Dense pairing costs for `x_i` matched to `y_i`.
pub fn pairing_costs(xs: &PointSet, ys: &PointSet) -> Result<PairingCosts> {
    check_pair(xs, ys)?;
    let n = xs.len();
    let mut entries = vec![0.0; n * n];
    entries.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        let xi = xs.row(i);
        let base = dot(xi, ys.row(i));
        for (j, c) in row.iter_mut().enumerate() {
            *c = if i == j { f64::INFINITY } else { base - dot(xi, ys.row(j)) };
        }
    });
    Ok(PairingCosts { n, entries })
}

/// A cycle and its mean cost. An empty cycle means none exists (n = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCycle {
    pub mean: f64,
    pub cycle: Vec<usize>,
}

/// Mean cost of the closed walk `cycle[0] -> cycle[1] -> ... -> cycle[0]`.
pub fn cycle_mean<C: ArcCosts + ?Sized>(costs: &C, cycle: &[usize]) -> f64 {
    cycle_cost(costs, cycle) / cycle.len() as f64
}

pub fn cycle_cost<C: ArcCosts + ?Sized>(costs: &C, cycle: &[usize]) -> f64 {
    let m = cycle.len();
    (0..m).map(|k| costs.cost(cycle[k], cycle[(k + 1) % m])).sum()
}

/// `min_{i != j} c(i, j) - psi_i + psi_j`.
pub fn min_reduced_cost<C: ArcCosts>(costs: &C, psi: &[f64]) -> f64 {
    let n = costs.size();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut m = f64::INFINITY;
            for j in 0..n {
                if j != i {
                    m = m.min(costs.cost(i, j) - psi[i] + psi[j]);
                }
            }
            m
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Threshold below which a cycle mean counts as zero.
pub fn zero_tolerance(costs: &PairingCosts) -> f64 {
    1e-10 * costs.magnitude().max(1.0)
}

pub(crate) fn zero_tolerance_points(xs: &PointSet, ys: &PointSet) -> f64 {
    1e-10 * (2.0 * xs.max_norm() * ys.max_norm()).max(1.0)
}

/// Smoothing margin of weights `psi`:
/// `(1/2) min_i [(<x_i, y_i> - psi_i) - max_{j != i} (<x_i, y_j> - psi_j)]`.
///
/// Positive exactly when every `y_i` is the strict unique maximizer of
/// `<x_i, y_j> - psi_j`; `+inf` for a single point.
pub fn epsilon0(xs: &PointSet, ys: &PointSet, psi: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    if psi.len() != xs.len() {
        return invalid("weights have the wrong length");
    }
    let n = xs.len();
    let m = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = xs.row(i);
            let own = dot(xi, ys.row(i)) - psi[i];
            let mut other = f64::NEG_INFINITY;
            for j in 0..n {
                if j != i {
                    other = other.max(dot(xi, ys.row(j)) - psi[j]);
                }
            }
            own - other
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(0.5 * m)
}

/// Weights `psi_i = (|y_i|^2 - b_i) / 2` from column duals `b` of the
/// squared-distance assignment, both listed in sample order.
pub fn weights_from_duals(ys: &PointSet, column_duals: &[f64]) -> Vec<f64> {
    ys.rows().zip(column_duals).map(|(y, b)| 0.5 * (dot(y, y) - b)).collect()
}

/// Minimum cycle mean and LP-optimal weights, by Karp for small inputs and
/// by policy iteration above `KARP_MAX`.
pub const KARP_MAX: usize = 1500;

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub epsilon_star: f64,
    pub cycle: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Certificate for `x_i -> y_i`. `seed` (e.g. assignment duals converted by
/// [`weights_from_duals`]) only speeds up the large-n path.
pub fn certify_pairing(xs: &PointSet, ys: &PointSet, seed: Option<&[f64]>) -> Result<Certificate> {
    check_pair(xs, ys)?;
    let n = xs.len();
    if n == 1 {
        return Ok(Certificate { epsilon_star: f64::INFINITY, cycle: vec![], weights: vec![0.0] });
    }
    if n <= KARP_MAX {
        let costs = pairing_costs(xs, ys)?;
        let mc = karp_min_mean_cycle(&costs)?;
        let weights = optimal_weights(&costs, mc.mean);
        Ok(Certificate { epsilon_star: mc.mean, cycle: mc.cycle, weights })
    } else {
        let costs = ImplicitPairingCosts::new(xs, ys)?;
        let (mc, weights) = policy_iteration(&costs, seed)?;
        Ok(Certificate { epsilon_star: mc.mean, cycle: mc.cycle, weights })
    }
}

/// Outcome of a cyclical monotonicity check.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    /// Every cycle has positive cost: the pairing is the unique optimum.
    MonotoneUnique { epsilon_star: f64 },
    /// Some cycle has zero cost: optimal but not unique.
    MonotoneNonunique { epsilon_star: f64 },
    /// A negative cycle: swapping along it lowers the total cost.
    Violated { epsilon_star: f64, cycle: Vec<usize> },
}

impl Verdict {
    pub fn classify(epsilon_star: f64, cycle: Vec<usize>, tol: f64) -> Self {
        if epsilon_star > tol {
            Verdict::MonotoneUnique { epsilon_star }
        } else if epsilon_star >= -tol {
            Verdict::MonotoneNonunique { epsilon_star }
        } else {
            Verdict::Violated { epsilon_star, cycle }
        }
    }

    pub fn epsilon_star(&self) -> f64 {
        match self {
            Verdict::MonotoneUnique { epsilon_star }
            | Verdict::MonotoneNonunique { epsilon_star }
            | Verdict::Violated { epsilon_star, .. } => *epsilon_star,
        }
    }

    pub fn is_monotone(&self) -> bool {
        !matches!(self, Verdict::Violated { .. })
    }
}

/// How thoroughly to check.
#[derive(Debug, Clone, PartialEq)]
pub enum CheckMode {
    /// Exact minimum cycle mean over all cycles.
    Exact,
    /// Random cycles of length 2..=max_len; the reported value is the least
    /// mean seen, an upper bound on the true minimum.
    Sampled { max_len: usize, trials: usize, seed: u64 },
}

pub fn check_cyclical_monotonicity(xs: &PointSet, ys: &PointSet, mode: &CheckMode) -> Result<Verdict> {
    check_pair(xs, ys)?;
    let n = xs.len();
    if n == 1 {
        return Ok(Verdict::MonotoneUnique { epsilon_star: f64::INFINITY });
    }
    let tol = zero_tolerance_points(xs, ys);
    match mode {
        CheckMode::Exact => {
            let c = certify_pairing(xs, ys, None)?;
            Ok(Verdict::classify(c.epsilon_star, c.cycle, tol))
        }
        CheckMode::Sampled { max_len, trials, seed } => {
            if *max_len < 2 || *trials == 0 {
                return invalid("sampled check needs max_len >= 2 and trials >= 1");
            }
            let costs = ImplicitPairingCosts::new(xs, ys)?;
            let mut r = rng::seeded(*seed, rng::STREAM_CYCLES);
            let top = (*max_len).min(n);
            let mut best = MeanCycle { mean: f64::INFINITY, cycle: vec![] };
            for _ in 0..*trials {
                let len = r.random_range(2..=top);
                let cyc = sample_indices(&mut r, n, len).into_vec();
                let m = cycle_mean(&costs, &cyc);
                if m < best.mean {
                    best = MeanCycle { mean: m, cycle: cyc };
                }
            }
            Ok(Verdict::classify(best.mean, best.cycle, tol))
        }
    }
}

/// Optimal weights when the first `n0` targets coincide.
///
/// The tied targets are merged into one vertex whose outgoing arc cost is the
/// cheapest among its sample points, the minimum cycle mean is computed on
/// the contracted graph and the weights are expanded back (tied points share
/// one weight). Returns `(psi, epsilon_star)`.
pub fn weights_with_repetitions(xs: &PointSet, ys: &PointSet, n0: usize) -> Result<(Vec<f64>, f64)> {
    check_pair(xs, ys)?;
    let n = xs.len();
    if n0 > n {
        return invalid(format!("n0 = {n0} exceeds n = {n}"));
    }
    for i in 1..n0 {
        if ys.row(i) != ys.row(0) {
            return invalid("the first n0 targets must coincide");
        }
    }
    let keep = n0.max(1) - 1;
    let distinct = ys.select(&(keep..n).collect::<Vec<_>>());
    if crate::assignment::find_duplicate(&distinct).is_some() {
        return invalid("targets after the tied block must be distinct");
    }
    if n0 == n {
        return Ok((vec![0.0; n], f64::INFINITY));
    }
    if n0 <= 1 {
        let c = certify_pairing(xs, ys, None)?;
        return Ok((c.weights, c.epsilon_star));
    }

    // Vertex 0 is the tied block, vertex a >= 1 is sample n0 + a - 1.
    let m = n - n0 + 1;
    let members = |a: usize| if a == 0 { 0..n0 } else { n0 + a - 1..n0 + a };
    let target = |a: usize| if a == 0 { ys.row(0) } else { ys.row(n0 + a - 1) };
    let mut entries = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            let (ya, yb) = (target(a), target(b));
            entries[a * m + b] = members(a)
                .map(|i| {
                    let xi = xs.row(i);
                    dot(xi, ya) - dot(xi, yb)
                })
                .fold(f64::INFINITY, f64::min);
        }
    }
    let costs = PairingCosts::from_entries(m, entries)?;
    let mc = karp_min_mean_cycle(&costs)?;
    let small = optimal_weights(&costs, mc.mean);
    let mut psi = vec![small[0]; n];
    psi[n0..].copy_from_slice(&small[1..]);
    Ok((psi, mc.mean))
}

/// Targets, weights and margins that define a smoothed map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub targets: PointSet,
    pub weights: Vec<f64>,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub epsilon_star: f64,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub epsilon0: f64,
}

impl Potential {
    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return invalid("potential has no targets");
        }
        if self.weights.len() != self.targets.len() {
            return invalid("weights and targets differ in length");
        }
        if !self.targets.all_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return invalid("potential entries must be finite");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(Error::from)
    }
}
