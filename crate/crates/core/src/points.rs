//! Dense row-major storage for finite point sets in R^d.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// `len()` points of dimension `dim`, stored row-major.
///
/// Serializes as a list of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be at least 1");
        }
        if !coords.len().is_multiple_of(dim) {
            return invalid(format!("{} coordinates do not split into rows of dimension {dim}", coords.len()));
        }
        Ok(Self { dim, coords })
    }

    pub fn zeros(len: usize, dim: usize) -> Self {
        assert!(dim > 0);
        Self { dim, coords: vec![0.0; len * dim] }
    }

    /// Builds from explicit rows; all rows must share one nonzero length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return invalid("empty point set has no dimension");
        };
        let dim = first.as_ref().len();
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return invalid(format!("row {i} has {} coordinates, expected {dim}", row.len()));
            }
            coords.extend_from_slice(row);
        }
        Self::new(dim, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.dim);
        self.coords.extend_from_slice(row);
    }

    /// Points reordered so that output row `k` is input row `order[k]`.
    pub fn select(&self, order: &[usize]) -> Self {
        let mut coords = Vec::with_capacity(order.len() * self.dim);
        for &i in order {
            coords.extend_from_slice(self.row(i));
        }
        Self { dim: self.dim, coords }
    }

    pub fn all_finite(&self) -> bool {
        self.coords.iter().all(|v| v.is_finite())
    }

    pub fn max_norm(&self) -> f64 {
        self.rows().map(norm).fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<Vec<f64>>> for PointSet {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<PointSet> for Vec<Vec<f64>> {
    fn from(p: PointSet) -> Self {
        p.rows().map(<[f64]>::to_vec).collect()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip_through_json() {
        let p = PointSet::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.5]]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0,4.5]]");
        let back: PointSet = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(PointSet::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(serde_json::from_str::<PointSet>("[[1.0],[2.0,3.0]]").is_err());
        assert!(serde_json::from_str::<PointSet>("[]").is_err());
    }

    #[test]
    fn select_reorders_rows() {
        let p = PointSet::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let q = p.select(&[2, 0, 1]);
        assert_eq!(q.as_slice(), &[2.0, 0.0, 1.0]);
    }
}
