//! Smooth cyclically monotone interpolation through Moreau envelopes.
//!
//! A certified pairing `x_i -> y_i` with weights `psi` defines the convex
//! potential `phi(x) = max_j <x, y_j> - psi_j`. Its envelope `phi_eps` is
//! `C^1` and `T_eps = grad phi_eps` extends the pairing to all of `R^d`.

mod prox;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::Assignment;
use crate::certificate::{self, epsilon0, Certificate, Potential};
use crate::error::{invalid, Error, Result};
use crate::grid::{BallGrid, GridSpec};
use crate::points::{dot, norm, PointSet};

pub use prox::{phi, prox, Prox};

pub const DEFAULT_PROX_TOLERANCE: f64 = 1e-8;

/// Which way a smooth map goes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Sample space to the unit ball (distribution function).
    SampleToBall,
    /// Unit ball to sample space (quantile function).
    BallToSample,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::SampleToBall => "sample-to-ball",
            Direction::BallToSample => "ball-to-sample",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample-to-ball" => Ok(Direction::SampleToBall),
            "ball-to-sample" => Ok(Direction::BallToSample),
            other => invalid(format!("unknown direction {other:?}")),
        }
    }
}

/// A fitted interpolating map `T_eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothMap {
    pub direction: Direction,
    pub epsilon: f64,
    #[serde(flatten)]
    pub potential: Potential,
    pub prox_tolerance: f64,
    #[serde(default)]
    pub grid_spec: Option<GridSpec>,
    #[serde(default)]
    pub sample_hash: Option<String>,
}

impl SmoothMap {
    /// Map with smoothing `epsilon` (default: the largest admissible value).
    pub fn new(direction: Direction, potential: Potential, epsilon: Option<f64>, prox_tolerance: f64) -> Result<Self> {
        potential.validate()?;
        let bound = admissible_epsilon(direction, &potential)?;
        let epsilon = epsilon.unwrap_or(bound);
        let map = Self { direction, epsilon, potential, prox_tolerance, grid_spec: None, sample_hash: None };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        let bound = admissible_epsilon(self.direction, &self.potential)?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return invalid(format!("smoothing constant must be positive, got {}", self.epsilon));
        }
        if self.epsilon > bound * (1.0 + 1e-12) {
            return invalid(format!("smoothing constant {} exceeds the admissible bound {bound}", self.epsilon));
        }
        if !(self.prox_tolerance > 0.0 && self.prox_tolerance.is_finite()) {
            return invalid(format!("prox tolerance must be positive, got {}", self.prox_tolerance));
        }
        if self.direction == Direction::SampleToBall && self.y_norm_bound() > 1.0 + 1e-12 {
            return invalid("sample-to-ball targets must lie in the closed unit ball");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let map: Self = serde_json::from_str(text)?;
        map.validate()?;
        Ok(map)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(Error::from)
    }

    pub fn dim(&self) -> usize {
        self.potential.targets.dim()
    }

    pub fn epsilon0(&self) -> f64 {
        self.potential.epsilon0
    }

    /// `max_j |y_j|`.
    pub fn y_norm_bound(&self) -> f64 {
        self.potential.targets.max_norm()
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        phi(x, &self.potential)
    }

    pub fn prox(&self, x: &[f64]) -> Result<Prox> {
        prox(x, &self.potential, self.epsilon, self.prox_tolerance)
    }

    /// `T_eps(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.prox(x)?.gradient)
    }

    /// `phi_eps(x)`.
    pub fn envelope(&self, x: &[f64]) -> Result<f64> {
        Ok(self.prox(x)?.envelope)
    }

    /// `T_eps` on every row, in parallel.
    pub fn eval_batch(&self, xs: &PointSet) -> Result<PointSet> {
        if xs.dim() != self.dim() {
            return invalid(format!("points have dimension {}, map has {}", xs.dim(), self.dim()));
        }
        let rows: Vec<Vec<f64>> = (0..xs.len()).into_par_iter().map(|i| self.eval(xs.row(i))).collect::<Result<_>>()?;
        let mut coords = Vec::with_capacity(xs.len() * xs.dim());
        rows.iter().for_each(|r| coords.extend_from_slice(r));
        PointSet::new(xs.dim(), coords)
    }
}

/// Largest smoothing constant for which the map still interpolates.
///
/// Sample-to-ball targets lie in the unit ball and the bound is `eps0`
/// itself. Ball-to-sample targets are rescaled by `M = max_j |y_j|`; the
/// interpolation argument then requires `eps <= eps0 / max(1, M^2)`.
/// A single target interpolates for any `eps`; 1 is used.
pub fn admissible_epsilon(direction: Direction, potential: &Potential) -> Result<f64> {
    let e0 = potential.epsilon0;
    if e0.is_nan() || e0 <= 0.0 {
        return Err(Error::NotInterpolable(e0));
    }
    if e0.is_infinite() {
        return Ok(1.0);
    }
    Ok(match direction {
        Direction::SampleToBall => e0,
        Direction::BallToSample => e0 / potential.targets.max_norm().powi(2).max(1.0),
    })
}

/// Where the weights of a fit come from.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightsSource {
    /// Compute the certificate, optionally seeding the large-n solver.
    Compute { seed: Option<Vec<f64>> },
    /// A certificate already computed for the sample-to-grid pairing.
    Certified(Certificate),
    /// Explicit weights for the targets of the map being fitted.
    Explicit(Vec<f64>),
}

fn pairing(sample: &PointSet, grid: &BallGrid, assignment: &Assignment) -> Result<PointSet> {
    if sample.len() != grid.len() || sample.dim() != grid.dim() {
        return invalid("sample and grid do not match");
    }
    assignment.validate(sample.len())?;
    Ok(assignment.matched_targets(grid))
}

/// Smooth distribution function: sample points to their grid points.
pub fn fit_smooth_f(
    sample: &PointSet,
    grid: &BallGrid,
    assignment: &Assignment,
    weights: WeightsSource,
) -> Result<SmoothMap> {
    let targets = pairing(sample, grid, assignment)?;
    let (weights, epsilon_star) = match weights {
        WeightsSource::Compute { seed } => {
            let c = certificate::certify_pairing(sample, &targets, seed.as_deref())?;
            (c.weights, c.epsilon_star)
        }
        WeightsSource::Certified(c) => (c.weights, c.epsilon_star),
        WeightsSource::Explicit(w) => (w, f64::NAN),
    };
    finish(Direction::SampleToBall, sample, targets, weights, epsilon_star, grid)
}

/// Smooth quantile function: grid points to their sample points.
///
/// A certificate for the forward pairing transfers: with `psi'_i =
/// <x_i, y_i> - psi_i` the swapped LP has the same optimal value.
pub fn fit_smooth_q(
    sample: &PointSet,
    grid: &BallGrid,
    assignment: &Assignment,
    weights: WeightsSource,
) -> Result<SmoothMap> {
    let from = pairing(sample, grid, assignment)?;
    let (weights, epsilon_star) = match weights {
        WeightsSource::Compute { seed } => {
            let c = certificate::certify_pairing(&from, sample, seed.as_deref())?;
            (c.weights, c.epsilon_star)
        }
        WeightsSource::Certified(c) => (swap_weights(sample, &from, &c.weights), c.epsilon_star),
        WeightsSource::Explicit(w) => (w, f64::NAN),
    };
    finish(Direction::BallToSample, &from, sample.clone(), weights, epsilon_star, grid)
}

/// Weights for the reversed pairing `y_i -> x_i`.
pub fn swap_weights(xs: &PointSet, ys: &PointSet, psi: &[f64]) -> Vec<f64> {
    (0..xs.len()).map(|i| dot(xs.row(i), ys.row(i)) - psi[i]).collect()
}

fn finish(
    direction: Direction,
    from: &PointSet,
    targets: PointSet,
    weights: Vec<f64>,
    epsilon_star: f64,
    grid: &BallGrid,
) -> Result<SmoothMap> {
    if weights.len() != targets.len() {
        return invalid("weights and targets differ in length");
    }
    let e0 = epsilon0(from, &targets, &weights)?;
    let epsilon_star = if epsilon_star.is_nan() { 2.0 * e0 } else { epsilon_star };
    let potential = Potential { targets, weights, epsilon_star, epsilon0: e0 };
    let mut map = SmoothMap::new(direction, potential, None, DEFAULT_PROX_TOLERANCE)?;
    map.grid_spec = Some(grid.spec.clone());
    Ok(map)
}

/// Snaps `v` radially down to the ring grid: `|v|` becomes
/// `floor((n_R + 1) |v|) / (n_R + 1)` (at most `n_R / (n_R + 1)`), the
/// direction is kept and points inside the first ring go to the origin.
pub fn snap_to_rings(v: &[f64], n_r: usize) -> Vec<f64> {
    let r = norm(v);
    let scale = (n_r + 1) as f64;
    let k = ((scale * r + 1e-9).floor() as usize).min(n_r);
    if k == 0 {
        return vec![0.0; v.len()];
    }
    let target = k as f64 / scale;
    if (target - r).abs() <= 1e-12 {
        return v.to_vec();
    }
    v.iter().map(|c| c * target / r).collect()
}

/// Step-function version of a smooth distribution function.
pub fn step_f(map: &SmoothMap, x: &[f64], n_r: usize) -> Result<Vec<f64>> {
    if map.direction != Direction::SampleToBall {
        return invalid("step function needs a sample-to-ball map");
    }
    Ok(snap_to_rings(&map.eval(x)?, n_r))
}

#[cfg(test)]
mod tests;
