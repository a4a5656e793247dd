//! The augmented target grid in the closed unit ball.
//!
//! `n = n_R * n_S + n_0` points: `n_R` concentric spheres of radii
//! `j / (n_R + 1)` crossed with `n_S` unit directions, plus `n_0` copies of
//! the origin. In dimension one the directions are `{+1, -1}` and the grid
//! reduces to the classical center-outward grid on `(-1, 1)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::points::{norm, PointSet};
use crate::rng::{self, STREAM_DIRECTIONS, STREAM_TIE_BREAK};

/// How the `n_S` unit directions are laid out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionMethod {
    /// Equally spaced angles starting at `(1, 0)`; also `{+1, -1}` for d = 1.
    #[default]
    EqualAngle,
    /// Independent uniform directions drawn from the seed.
    RandomSphere,
    /// Fibonacci spiral on S^2.
    FibonacciSphere,
}

impl DirectionMethod {
    pub fn default_for(dim: usize) -> Self {
        if dim <= 2 {
            Self::EqualAngle
        } else {
            Self::RandomSphere
        }
    }

    fn check_dim(self, dim: usize) -> Result<()> {
        match (self, dim) {
            (Self::EqualAngle, 1 | 2) => Ok(()),
            (Self::RandomSphere, d) if d >= 2 => Ok(()),
            (Self::FibonacciSphere, 3) => Ok(()),
            _ => invalid(format!("direction method {self} is not available in dimension {dim}")),
        }
    }
}

impl fmt::Display for DirectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::EqualAngle => "equal-angle",
            Self::RandomSphere => "random-sphere",
            Self::FibonacciSphere => "fibonacci-sphere",
        })
    }
}

impl FromStr for DirectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal-angle" => Ok(Self::EqualAngle),
            "random-sphere" | "random" => Ok(Self::RandomSphere),
            "fibonacci-sphere" | "fibonacci" => Ok(Self::FibonacciSphere),
            _ => invalid(format!("unknown direction method '{s}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub dim: usize,
    pub n_r: usize,
    pub n_s: usize,
    pub n_0: usize,
    pub direction_method: DirectionMethod,
    pub seed: u64,
}

impl GridSpec {
    /// Explicit ring and direction counts; `n_0` is whatever remains.
    pub fn new(
        n: usize,
        dim: usize,
        n_r: usize,
        n_s: usize,
        direction_method: DirectionMethod,
        seed: u64,
    ) -> Result<Self> {
        let Some(n_0) = n.checked_sub(n_r * n_s) else {
            return invalid(format!("n_R * n_S = {} exceeds n = {n}", n_r * n_s));
        };
        let spec = Self { n, dim, n_r, n_s, n_0, direction_method, seed };
        spec.validate()?;
        Ok(spec)
    }

    /// Factorization chosen by [`factorize`] for `n` points in dimension `dim`.
    pub fn auto(n: usize, dim: usize, ratio: f64, direction_method: DirectionMethod, seed: u64) -> Result<Self> {
        let (n_r, n_s, _) = factorize(n, dim, ratio)?;
        Self::new(n, dim, n_r, n_s, direction_method, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.n_r == 0 || self.n_s == 0 {
            return invalid("dimension, n_R and n_S must all be at least 1");
        }
        if self.n != self.n_r * self.n_s + self.n_0 {
            return invalid("n must equal n_R * n_S + n_0");
        }
        if self.dim == 1 {
            if self.n_s != 2 || self.n_0 > 1 {
                return invalid("in dimension 1 the grid needs n_S = 2 and n_0 <= 1");
            }
        } else if self.n_0 >= self.n_r.min(self.n_s) {
            return invalid(format!(
                "n_0 = {} must be smaller than min(n_R, n_S) = {}",
                self.n_0,
                self.n_r.min(self.n_s)
            ));
        }
        self.direction_method.check_dim(self.dim)
    }

    /// Radius of ring `j` (0 is the origin).
    pub fn ring_radius(&self, j: usize) -> f64 {
        j as f64 / (self.n_r + 1) as f64
    }
}

/// Splits `n` into `n_R * n_S + n_0` with `0 <= n_0 < min(n_R, n_S)` and
/// `n_S` close to `ratio * n_R`.
///
/// Dimension one always uses `n_S = 2`, `n_R = floor(n / 2)` and
/// `n_0 = n mod 2`, whatever the ratio. Otherwise candidate ring counts
/// within two of `round(sqrt(n / ratio))` are scored by `n_0` (smaller is
/// better), then by `|n_S - ratio * n_R|`, then by the larger `n_R`.
pub fn factorize(n: usize, dim: usize, ratio: f64) -> Result<(usize, usize, usize)> {
    if n < 2 {
        return invalid(format!("need at least 2 points, got {n}"));
    }
    if dim == 0 {
        return invalid("dimension must be at least 1");
    }
    if dim == 1 {
        return Ok((n / 2, 2, n % 2));
    }
    if !(ratio.is_finite() && ratio > 0.0) {
        return invalid(format!("ratio must be positive, got {ratio}"));
    }
    let guess = (n as f64 / ratio).sqrt().round().max(1.0) as usize;
    let lo = guess.saturating_sub(2).max(1);
    type Key = (usize, f64, std::cmp::Reverse<usize>);
    let mut best: Option<(Key, (usize, usize, usize))> = None;
    for n_r in lo..=guess + 2 {
        let n_s = n / n_r;
        if n_s == 0 {
            continue;
        }
        let n_0 = n - n_r * n_s;
        if n_0 >= n_r.min(n_s) {
            continue;
        }
        let key = (n_0, (n_s as f64 - ratio * n_r as f64).abs(), std::cmp::Reverse(n_r));
        let better = match &best {
            None => true,
            Some((k, _)) => key.partial_cmp(k) == Some(std::cmp::Ordering::Less),
        };
        if better {
            best = Some((key, (n_r, n_s, n_0)));
        }
    }
    Ok(best.map(|(_, f)| f).unwrap_or((1, n, 0)))
}

/// `n_s` unit vectors in R^dim laid out by `method`.
pub fn unit_directions(n_s: usize, dim: usize, method: DirectionMethod, seed: u64) -> Result<PointSet> {
    if n_s == 0 {
        return invalid("need at least one direction");
    }
    method.check_dim(dim)?;
    let mut out = PointSet::zeros(n_s, dim);
    match method {
        DirectionMethod::EqualAngle if dim == 1 => {
            if n_s != 2 {
                return invalid("dimension 1 has exactly two directions");
            }
            out.row_mut(0)[0] = 1.0;
            out.row_mut(1)[0] = -1.0;
        }
        DirectionMethod::EqualAngle => {
            for k in 0..n_s {
                let theta = 2.0 * PI * k as f64 / n_s as f64;
                let row = out.row_mut(k);
                row[0] = theta.cos();
                row[1] = theta.sin();
            }
        }
        DirectionMethod::RandomSphere => {
            let mut rng = rng::seeded(seed, STREAM_DIRECTIONS);
            for k in 0..n_s {
                rng::unit_vector(&mut rng, dim, out.row_mut(k));
            }
        }
        DirectionMethod::FibonacciSphere => {
            let golden = PI * (3.0 - 5f64.sqrt());
            for k in 0..n_s {
                let z = 1.0 - (2 * k + 1) as f64 / n_s as f64;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let theta = golden * k as f64;
                let row = out.row_mut(k);
                row[0] = r * theta.cos();
                row[1] = r * theta.sin();
                row[2] = z;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallGrid {
    pub spec: GridSpec,
    pub points: PointSet,
    pub ties_broken: bool,
    /// Ring index per point, 0 for the origin copies.
    pub ring_of: Vec<usize>,
    /// Direction index per point, `None` for the origin copies.
    pub direction_of: Vec<Option<usize>>,
}

/// Rings in increasing radius, each listing all directions in order, then
/// the `n_0` origin copies.
pub fn build_grid(spec: &GridSpec) -> Result<BallGrid> {
    spec.validate()?;
    let dirs = unit_directions(spec.n_s, spec.dim, spec.direction_method, spec.seed)?;
    let mut points = PointSet::zeros(spec.n, spec.dim);
    let mut ring_of = Vec::with_capacity(spec.n);
    let mut direction_of = Vec::with_capacity(spec.n);
    let mut k = 0;
    for j in 1..=spec.n_r {
        let radius = spec.ring_radius(j);
        for (s, u) in dirs.rows().enumerate() {
            for (p, &c) in points.row_mut(k).iter_mut().zip(u) {
                *p = c * radius;
            }
            ring_of.push(j);
            direction_of.push(Some(s));
            k += 1;
        }
    }
    ring_of.resize(spec.n, 0);
    direction_of.resize(spec.n, None);
    Ok(BallGrid { spec: spec.clone(), points, ties_broken: false, ring_of, direction_of })
}

/// Replaces the `n_0 > 1` origin copies by i.i.d. uniform points on the
/// sphere of radius `1 / (2 (n_R + 1))`. With `n_0 <= 1` the grid is
/// returned unchanged (but flagged as tie-free).
pub fn break_ties(grid: &BallGrid, seed: u64) -> BallGrid {
    let mut out = grid.clone();
    out.ties_broken = true;
    if grid.spec.n_0 <= 1 || grid.ties_broken {
        return out;
    }
    let radius = 0.5 / (grid.spec.n_r + 1) as f64;
    let dim = grid.spec.dim;
    let mut rng = rng::seeded(seed, STREAM_TIE_BREAK);
    for k in 0..out.points.len() {
        if out.direction_of[k].is_none() {
            let row = out.points.row_mut(k);
            rng::unit_vector(&mut rng, dim, row);
            row.iter_mut().for_each(|v| *v *= radius);
        }
    }
    out
}

impl BallGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    /// Origin copies still present (so the grid is not injective).
    pub fn has_ties(&self) -> bool {
        !self.ties_broken && self.spec.n_0 > 1
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(s)?;
        g.spec.validate()?;
        if g.points.len() != g.spec.n
            || g.points.dim() != g.spec.dim
            || g.ring_of.len() != g.spec.n
            || g.direction_of.len() != g.spec.n
        {
            return invalid("grid arrays do not match its spec");
        }
        if g.ring_of.iter().any(|&j| j > g.spec.n_r)
            || g.direction_of.iter().flatten().any(|&s| s >= g.spec.n_s)
            || !g.points.all_finite()
            || g.points.rows().any(|p| norm(p) > 1.0 + 1e-12)
        {
            return invalid("grid entries out of range");
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn factorize_matches_known_cases() {
        assert_eq!(factorize(20000, 2, 2.0).unwrap(), (100, 200, 0));
        assert_eq!(factorize(7, 1, 2.0).unwrap(), (3, 2, 1));
        assert_eq!(factorize(6, 1, 9.0).unwrap(), (3, 2, 0));
        assert_eq!(factorize(2, 1, 1.0).unwrap(), (1, 2, 0));
    }

    /// Exhaustive search over every (n_R, n_S) with n_R * n_S <= 6 under the
    /// constraint, ranked by the same criteria as `factorize`.
    #[test]
    fn factorize_six_by_exhaustive_search() {
        let n = 6;
        let ratio = 1.5;
        let mut feasible = vec![];
        for n_r in 1..=n {
            for n_s in 1..=n / n_r {
                let n_0 = n - n_r * n_s;
                if n_0 < n_r.min(n_s) {
                    feasible.push((n_0, ((n_s as f64) - ratio * n_r as f64).abs(), n_r, n_s));
                }
            }
        }
        feasible.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (n_0, _, n_r, n_s) = feasible[0];
        assert_eq!((n_r, n_s, n_0), (2, 3, 0));
        assert_eq!(factorize(6, 2, 1.5).unwrap(), (2, 3, 0));
    }

    #[test]
    fn factorize_rejects_tiny_n_and_is_deterministic() {
        assert!(factorize(1, 2, 2.0).is_err());
        assert!(factorize(10, 2, 0.0).is_err());
        for n in 2..400 {
            let f = factorize(n, 2, 2.0).unwrap();
            assert_eq!(f, factorize(n, 2, 2.0).unwrap());
            let (n_r, n_s, n_0) = f;
            assert_eq!(n_r * n_s + n_0, n);
            assert!(n_0 < n_r.min(n_s), "n={n} gives {f:?}");
        }
    }

    #[test]
    fn equal_angle_directions() {
        let d = unit_directions(4, 2, DirectionMethod::EqualAngle, 0).unwrap();
        let expect = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (row, e) in d.rows().zip(expect) {
            assert_abs_diff_eq!(row[0], e[0], epsilon = 1e-15);
            assert_abs_diff_eq!(row[1], e[1], epsilon = 1e-15);
        }
        let one = unit_directions(1, 2, DirectionMethod::EqualAngle, 0).unwrap();
        assert_eq!(one.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn random_directions_are_balanced_and_reproducible() {
        let d = unit_directions(1000, 3, DirectionMethod::RandomSphere, 7).unwrap();
        let mut mean = [0.0; 3];
        for row in d.rows() {
            assert_abs_diff_eq!(norm(row), 1.0, epsilon = 1e-12);
            for k in 0..3 {
                mean[k] += row[k] / 1000.0;
            }
        }
        assert!(norm(&mean) < 0.08);
        assert_eq!(d, unit_directions(1000, 3, DirectionMethod::RandomSphere, 7).unwrap());
    }

    #[test]
    fn fibonacci_directions_are_unit() {
        let d = unit_directions(200, 3, DirectionMethod::FibonacciSphere, 0).unwrap();
        let mut mean = [0.0; 3];
        for row in d.rows() {
            assert_abs_diff_eq!(norm(row), 1.0, epsilon = 1e-12);
            for k in 0..3 {
                mean[k] += row[k] / 200.0;
            }
        }
        assert!(norm(&mean) < 1e-2);
    }

    #[test]
    fn method_dimension_mismatch() {
        assert!(unit_directions(3, 3, DirectionMethod::EqualAngle, 0).is_err());
        assert!(unit_directions(3, 2, DirectionMethod::FibonacciSphere, 0).is_err());
        assert!(unit_directions(2, 1, DirectionMethod::RandomSphere, 0).is_err());
        assert!(unit_directions(0, 2, DirectionMethod::EqualAngle, 0).is_err());
    }

    #[test]
    fn one_dimensional_grid_for_seven_points() {
        let spec = GridSpec::new(7, 1, 3, 2, DirectionMethod::EqualAngle, 0).unwrap();
        let g = build_grid(&spec).unwrap();
        let mut vals: Vec<f64> = g.points.rows().map(|r| r[0]).collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals, vec![-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75]);
        assert_eq!(g.ring_of, vec![1, 1, 2, 2, 3, 3, 0]);
        assert_eq!(g.direction_of[6], None);
    }

    #[test]
    fn small_planar_grids() {
        let g = build_grid(&GridSpec::new(4, 2, 1, 4, DirectionMethod::EqualAngle, 0).unwrap()).unwrap();
        for (k, p) in g.points.rows().enumerate() {
            assert_abs_diff_eq!(norm(p), 0.5, epsilon = 1e-15);
            let q = g.points.row((k + 1) % 4);
            assert_abs_diff_eq!(crate::points::dot(p, q), 0.0, epsilon = 1e-15);
        }
        let g = build_grid(&GridSpec::new(6, 2, 2, 3, DirectionMethod::EqualAngle, 0).unwrap()).unwrap();
        let mut norms: Vec<f64> = g.points.rows().map(norm).collect();
        norms.sort_by(f64::total_cmp);
        for (k, v) in norms.iter().enumerate() {
            let expect = if k < 3 { 1.0 / 3.0 } else { 2.0 / 3.0 };
            assert_abs_diff_eq!(*v, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(GridSpec::new(10, 2, 3, 2, DirectionMethod::EqualAngle, 0).is_err()); // n_0 = 4
        assert!(GridSpec::new(5, 2, 2, 3, DirectionMethod::EqualAngle, 0).is_err()); // 6 > 5
        assert!(GridSpec::new(7, 1, 2, 2, DirectionMethod::EqualAngle, 0).is_err()); // n_0 = 3
        assert!(GridSpec::new(3, 1, 1, 2, DirectionMethod::EqualAngle, 0).is_ok());
    }

    #[test]
    fn tie_breaking() {
        let spec = GridSpec::new(23, 2, 4, 5, DirectionMethod::EqualAngle, 3).unwrap();
        assert_eq!(spec.n_0, 3);
        let g = build_grid(&spec).unwrap();
        assert_eq!(g.points.rows().filter(|p| norm(p) == 0.0).count(), 3);
        let t = break_ties(&g, 11);
        assert!(t.ties_broken);
        let origins: Vec<&[f64]> = (0..23).filter(|&k| t.direction_of[k].is_none()).map(|k| t.points.row(k)).collect();
        assert_eq!(origins.len(), 3);
        for p in &origins {
            assert_abs_diff_eq!(norm(p), 0.1, epsilon = 1e-12);
        }
        assert!(origins[0] != origins[1] && origins[1] != origins[2] && origins[0] != origins[2]);
        assert_eq!(t, break_ties(&g, 11));
        for k in 0..20 {
            assert_eq!(t.points.row(k), g.points.row(k));
        }

        let g0 = build_grid(&GridSpec::new(6, 2, 2, 3, DirectionMethod::EqualAngle, 0).unwrap()).unwrap();
        let t0 = break_ties(&g0, 1);
        assert_eq!(t0.points, g0.points);
        assert!(t0.ties_broken);
    }

    #[test]
    fn equal_angle_moments() {
        let g = build_grid(&GridSpec::new(600, 2, 20, 30, DirectionMethod::EqualAngle, 0).unwrap()).unwrap();
        let n = g.len() as f64;
        let mut mean = [0.0; 2];
        let mut mean_norm = 0.0;
        for p in g.points.rows() {
            mean[0] += p[0] / n;
            mean[1] += p[1] / n;
            mean_norm += norm(p) / n;
        }
        assert!(norm(&mean) < 1e-9);
        // sum_j j / (n_R + 1) over n_R rings, averaged: exactly 1/2 when n_0 = 0
        assert_abs_diff_eq!(mean_norm, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn grid_json_round_trip() {
        let spec = GridSpec::new(23, 2, 4, 5, DirectionMethod::EqualAngle, 3).unwrap();
        let g = break_ties(&build_grid(&spec).unwrap(), 1);
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(BallGrid::from_json(&s).unwrap(), g);
        assert!(BallGrid::from_json("{}").is_err());
    }
}
