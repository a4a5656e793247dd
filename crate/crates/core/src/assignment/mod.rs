//! Optimal L2 assignment of a sample to the ball grid.

mod auction;
mod brute;
mod hungarian;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::BallGrid;
use crate::points::{sq_dist, PointSet};

pub use auction::{solve_auction, solve_auction_with_prices, AuctionConfig, EpsilonSchedule};
pub use brute::{brute_force_assignment, BruteForce, BRUTE_FORCE_MAX};
pub use hungarian::{solve_hungarian, solve_hungarian_with_duals};

/// An n x d sample; duplicate rows are detected at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    points: PointSet,
    has_duplicates: bool,
}

impl Sample {
    pub fn new(points: PointSet) -> Result<Self> {
        if points.is_empty() {
            return invalid("sample is empty");
        }
        if !points.all_finite() {
            return invalid("sample has non-finite coordinates");
        }
        let has_duplicates = find_duplicate(&points).is_some();
        Ok(Self { points, has_duplicates })
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn into_points(self) -> PointSet {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn has_duplicates(&self) -> bool {
        self.has_duplicates
    }
}

/// First pair of identical rows, if any.
pub fn find_duplicate(points: &PointSet) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points
            .row(a)
            .iter()
            .zip(points.row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order.windows(2).find(|w| points.row(w[0]) == points.row(w[1])).map(|w| (w[0].min(w[1]), w[0].max(w[1])))
}

/// Dense square matrix of squared Euclidean distances.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return invalid(format!("expected {n}x{n} cost entries, got {}", entries.len()));
        }
        Ok(Self { n, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return invalid("cost matrix must be square");
        }
        Self::from_entries(n, rows.concat())
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    fn check_finite(&self) -> Result<()> {
        if self.entries.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            invalid("cost matrix has non-finite entries")
        }
    }

    /// Total cost of a permutation.
    pub fn total(&self, perm: &[usize]) -> f64 {
        perm.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum()
    }
}

/// Entry `(i, j)` is `|z_i - y_j|^2`.
pub fn cost_matrix(sample: &PointSet, targets: &PointSet) -> Result<CostMatrix> {
    if sample.dim() != targets.dim() {
        return invalid(format!("sample dimension {} differs from grid dimension {}", sample.dim(), targets.dim()));
    }
    if sample.len() != targets.len() {
        return invalid(format!("sample has {} points but the grid has {}", sample.len(), targets.len()));
    }
    let n = sample.len();
    let mut entries = vec![0.0; n * n];
    entries.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let z = sample.row(i);
        for (j, e) in row.iter_mut().enumerate() {
            *e = sq_dist(z, targets.row(j));
        }
    });
    CostMatrix::from_entries(n, entries)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Hungarian,
    Auction,
    Brute,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hungarian => "hungarian",
            Self::Auction => "auction",
            Self::Brute => "brute",
        })
    }
}

/// Which solver the pipeline runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    /// Hungarian up to [`HUNGARIAN_MAX_AUTO`] points, auction above.
    #[default]
    Auto,
    Hungarian,
    Auction,
    Brute,
}

pub const HUNGARIAN_MAX_AUTO: usize = 2000;

impl SolverChoice {
    pub fn resolve(self, n: usize) -> SolverKind {
        match self {
            Self::Auto if n <= HUNGARIAN_MAX_AUTO => SolverKind::Hungarian,
            Self::Auto => SolverKind::Auction,
            Self::Hungarian => SolverKind::Hungarian,
            Self::Auction => SolverKind::Auction,
            Self::Brute => SolverKind::Brute,
        }
    }
}

impl FromStr for SolverChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "hungarian" => Ok(Self::Hungarian),
            "auction" => Ok(Self::Auction),
            "brute" => Ok(Self::Brute),
            _ => invalid(format!("unknown solver '{s}'")),
        }
    }
}

/// Sample point `i` is sent to grid point `perm[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub perm: Vec<usize>,
    pub total_cost: f64,
    pub solver: SolverKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certified_unique: Option<bool>,
}

impl Assignment {
    pub(crate) fn new(perm: Vec<usize>, cost: &CostMatrix, solver: SolverKind) -> Self {
        let total_cost = cost.total(&perm);
        Self { perm, total_cost, solver, certified_unique: None }
    }

    /// Checks that `perm` is a permutation of `0..n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.perm.len() != n {
            return invalid(format!("assignment has {} entries, expected {n}", self.perm.len()));
        }
        let mut seen = vec![false; n];
        for &j in &self.perm {
            if j >= n || std::mem::replace(&mut seen[j], true) {
                return invalid("assignment is not a permutation");
            }
        }
        Ok(())
    }

    /// Targets in sample order: row `i` is grid point `perm[i]`.
    pub fn matched_targets(&self, grid: &BallGrid) -> PointSet {
        grid.points.select(&self.perm)
    }
}

/// Runs the requested solver on a prebuilt cost matrix.
pub fn solve(cost: &CostMatrix, kind: SolverKind, auction: &AuctionConfig) -> Result<Assignment> {
    match kind {
        SolverKind::Hungarian => solve_hungarian(cost),
        SolverKind::Auction => solve_auction(cost, auction),
        SolverKind::Brute => brute_force_assignment(cost).map(|b| b.assignment),
    }
}
