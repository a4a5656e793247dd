//! Center-outward ranks, signs, quantile contours and sign curves.

use serde::{Deserialize, Serialize};

use crate::assignment::Assignment;
use crate::error::{invalid, Result};
use crate::grid::{unit_directions, BallGrid, DirectionMethod};
use crate::moreau::{Direction, SmoothMap};
use crate::points::{norm, PointSet};
use crate::rng;

/// Ranks and signs of one observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSign {
    /// Image of the observation in the unit ball.
    pub f_value: Vec<f64>,
    /// `(n_R + 1) |f_value|`; an integer except for tie-broken origin points.
    pub rank: f64,
    /// Ring index, 0 for the center.
    pub ring: usize,
    /// Index of the sign among the grid directions, `None` at the center.
    pub direction: Option<usize>,
    /// Unit vector for `ring >= 1`, zero at the center.
    pub sign: Vec<f64>,
}

/// Ranks and signs of a whole sample. `F = rank / (n_R + 1) * sign`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSignTable {
    pub n_r: usize,
    pub n_s: usize,
    pub n_0: usize,
    pub rows: Vec<RankSign>,
}

impl RankSignTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.f_value.len())
    }

    /// Number of observations on each ring `0..=n_R`.
    pub fn ring_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_r + 1];
        self.rows.iter().for_each(|r| counts[r.ring] += 1);
        counts
    }

    /// Indices with ring exactly `j`.
    pub fn members(&self, j: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.rows[i].ring == j).collect()
    }

    /// Indices with ring at most `j`.
    pub fn region(&self, j: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.rows[i].ring <= j).collect()
    }

    /// The `F` values as a point set.
    pub fn f_values(&self) -> PointSet {
        let rows: Vec<&[f64]> = self.rows.iter().map(|r| r.f_value.as_slice()).collect();
        PointSet::from_rows(&rows).expect("table rows share a dimension")
    }
}

/// Ranks and signs from an assignment of the sample to the grid.
pub fn table(sample: &PointSet, grid: &BallGrid, assignment: &Assignment) -> Result<RankSignTable> {
    if sample.len() != grid.len() || sample.dim() != grid.dim() {
        return invalid("sample and grid do not match");
    }
    assignment.validate(sample.len())?;
    let scale = (grid.spec.n_r + 1) as f64;
    let rows = assignment
        .perm
        .iter()
        .map(|&k| {
            let f_value = grid.points.row(k).to_vec();
            let ring = grid.ring_of[k];
            let r = norm(&f_value);
            let (rank, sign) = if ring == 0 {
                (scale * r, vec![0.0; f_value.len()])
            } else {
                (ring as f64, f_value.iter().map(|v| v / r).collect())
            };
            RankSign { f_value, rank, ring, direction: grid.direction_of[k], sign }
        })
        .collect();
    Ok(RankSignTable { n_r: grid.spec.n_r, n_s: grid.spec.n_s, n_0: grid.spec.n_0, rows })
}

/// Fraction of the sample in the region of ring `j`: `(j n_S + n_0) / n`.
pub fn region_probability_by_rank(table: &RankSignTable, j: usize) -> f64 {
    table.region(j).len() as f64 / table.len() as f64
}

/// Points on the sphere of radius `q`: equally spaced angles starting at
/// `(q, 0)` in the plane, `{-q, q}` on the line, a Fibonacci mesh in three
/// dimensions and seeded uniform points above.
pub fn sphere_mesh(dim: usize, q: f64, mesh_size: usize) -> Result<PointSet> {
    let dirs = match dim {
        1 => PointSet::from_rows(&[[1.0], [-1.0]])?,
        2 => unit_directions(mesh_size, 2, DirectionMethod::EqualAngle, 0)?,
        3 => unit_directions(mesh_size, 3, DirectionMethod::FibonacciSphere, 0)?,
        _ => {
            let mut r = rng::seeded(0, rng::STREAM_MESH);
            let mut out = PointSet::zeros(mesh_size, dim);
            for k in 0..mesh_size {
                rng::unit_vector(&mut r, dim, out.row_mut(k));
            }
            out
        }
    };
    let coords = dirs.as_slice().iter().map(|v| v * q).collect();
    PointSet::new(dim, coords)
}

/// An empirical quantile contour and the observations it bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourSet {
    pub level: f64,
    /// Ring index when `level = j / (n_R + 1)`, otherwise the ring below.
    pub ring: usize,
    /// `level` is not one of the grid radii.
    pub interpolated: bool,
    /// Images of the sphere mesh; closed (last vertex joins the first) in the plane.
    pub polyline: PointSet,
    pub closed: bool,
    pub member_points: Vec<usize>,
    pub region_members: Vec<usize>,
}

fn ring_of_level(q: f64, n_r: usize) -> (usize, bool) {
    let x = q * (n_r + 1) as f64;
    let j = x.round();
    if (x - j).abs() <= 1e-9 {
        (j as usize, false)
    } else {
        (x.floor() as usize, true)
    }
}

/// Contour of probability content `q`: the quantile map on the radius-`q`
/// sphere. Member sets come from `table` when given.
pub fn contour(map: &SmoothMap, q: f64, mesh_size: usize, table: Option<&RankSignTable>) -> Result<ContourSet> {
    if map.direction != Direction::BallToSample {
        return invalid("contours need a ball-to-sample map");
    }
    if !(q > 0.0 && q < 1.0) {
        return invalid(format!("contour level must lie in (0, 1), got {q}"));
    }
    if mesh_size < 8 {
        return invalid(format!("mesh size must be at least 8, got {mesh_size}"));
    }
    let dim = map.dim();
    let polyline = map.eval_batch(&sphere_mesh(dim, q, mesh_size)?)?;
    let n_r = table.map(|t| t.n_r).or(map.grid_spec.as_ref().map(|g| g.n_r));
    let (ring, interpolated) = match n_r {
        Some(n_r) => ring_of_level(q, n_r),
        None => (0, true),
    };
    let (member_points, region_members) = match table {
        Some(t) => (if interpolated { vec![] } else { t.members(ring) }, t.region(ring)),
        None => (vec![], vec![]),
    };
    Ok(ContourSet { level: q, ring, interpolated, polyline, closed: dim == 2, member_points, region_members })
}

/// Image of a ray `{r u}` under the quantile map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignCurve {
    pub direction: Vec<f64>,
    pub radii: Vec<f64>,
    pub polyline: PointSet,
}

/// Sign curves `Q(r u)`, `r = k / m * n_R / (n_R + 1)` for `k = 1..m-1`.
pub fn sign_curves(map: &SmoothMap, directions: &PointSet, mesh_size: usize) -> Result<Vec<SignCurve>> {
    if map.direction != Direction::BallToSample {
        return invalid("sign curves need a ball-to-sample map");
    }
    if directions.dim() != map.dim() {
        return invalid("directions and map differ in dimension");
    }
    if mesh_size < 2 {
        return invalid("sign curves need a mesh of at least 2");
    }
    let top = map.grid_spec.as_ref().map_or(1.0, |g| g.n_r as f64 / (g.n_r + 1) as f64);
    let radii: Vec<f64> = (1..mesh_size).map(|k| k as f64 / mesh_size as f64 * top).collect();
    directions
        .rows()
        .map(|u| {
            let un = norm(u);
            if !(un > 0.0) {
                return invalid("sign curve direction must be nonzero");
            }
            let dir: Vec<f64> = u.iter().map(|v| v / un).collect();
            let coords = radii.iter().flat_map(|r| dir.iter().map(move |v| r * v)).collect();
            let polyline = map.eval_batch(&PointSet::new(dir.len(), coords)?)?;
            Ok(SignCurve { direction: dir, radii: radii.clone(), polyline })
        })
        .collect()
}

/// Even-odd rule; points on the boundary may land on either side.
pub fn point_in_polygon(p: &[f64], polygon: &PointSet) -> bool {
    let m = polygon.len();
    let mut inside = false;
    let mut j = m - 1;
    for i in 0..m {
        let (a, b) = (polygon.row(i), polygon.row(j));
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Fraction of `sample` inside a closed planar contour.
pub fn region_probability(contour: &ContourSet, sample: &PointSet) -> Result<f64> {
    if !contour.closed || contour.polyline.dim() != 2 || contour.polyline.len() < 3 {
        return invalid("region probability needs a closed planar contour");
    }
    if sample.dim() != 2 || sample.is_empty() {
        return invalid("sample must be a nonempty planar point set");
    }
    let inside = sample.rows().filter(|p| point_in_polygon(p, &contour.polyline)).count();
    Ok(inside as f64 / sample.len() as f64)
}

/// Empirical median set: the center observations when several share the
/// origin, otherwise the quantile map at the origin.
pub fn median_set(table: &RankSignTable, sample: &PointSet, quantile: Option<&SmoothMap>) -> Result<PointSet> {
    let center = table.members(0);
    match quantile {
        Some(q) if table.n_0 <= 1 => PointSet::from_rows(&[q.eval(&vec![0.0; q.dim()])?]),
        _ if center.is_empty() => invalid("no center observations and no quantile map"),
        _ => Ok(sample.select(&center)),
    }
}
