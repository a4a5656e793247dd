//! Population references: spherical and elliptical distribution functions,
//! the one-dimensional empirical map, Gaussian mixtures and samplers.

use std::fmt;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::error::{invalid, Result};
use crate::points::{norm, PointSet};
use crate::ranks::{RankSign, RankSignTable};
use crate::rng;

/// Distribution of the modulus `|Z|` of a spherical law.
pub trait RadialCdf: Send + Sync {
    fn cdf(&self, r: f64) -> f64;

    /// Inverse by bisection.
    fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        let mut hi = 1.0;
        while self.cdf(hi) < p {
            hi *= 2.0;
            if hi > 1e300 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Chi law with `dim` degrees of freedom: the modulus of `N(0, I_d)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiRadialCdf {
    pub dim: usize,
}

pub fn chi_radial_cdf(dim: usize) -> ChiRadialCdf {
    assert!(dim >= 1, "dimension must be at least 1");
    ChiRadialCdf { dim }
}

impl RadialCdf for ChiRadialCdf {
    fn cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r.is_infinite() {
            return 1.0;
        }
        if self.dim == 2 {
            -(-0.5 * r * r).exp_m1()
        } else {
            gamma_lr(0.5 * self.dim as f64, 0.5 * r * r)
        }
    }
}

/// `F(z) = G(|z|) z / |z|` for a spherical law with radial cdf `G`.
pub fn spherical_f(z: &[f64], radial: &dyn RadialCdf) -> Vec<f64> {
    let r = norm(z);
    if r == 0.0 {
        return vec![0.0; z.len()];
    }
    let g = radial.cdf(r);
    z.iter().map(|v| v * g / r).collect()
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return invalid("scatter matrix must be square and nonempty");
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn check_spd(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) || (m - m.transpose()).abs().max() > 1e-12 * m.abs().max().max(1.0) {
        return invalid("scatter matrix must be finite and symmetric");
    }
    if m.clone().cholesky().is_none() {
        return invalid("scatter matrix is not positive definite");
    }
    Ok(())
}

/// `Sigma^{-1/2}` by symmetric eigendecomposition after a Cholesky check.
pub fn inverse_sqrt(sigma: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let m = matrix(sigma)?;
    check_spd(&m)?;
    let eig = m.symmetric_eigen();
    let d = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    let w = &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose();
    Ok(rows_of(&w))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

/// Mahalanobis ranks and signs: residuals `Z_i = Sigma^{-1/2}(X_i - mu)`,
/// `R_i` the rank of `|Z_i|` and `F_i = R_i / (n + 1) * Z_i / |Z_i|`.
/// Equal moduli are ranked by index.
pub fn elliptical_f_hat(sample: &PointSet, mu_hat: &[f64], sigma_hat: &[Vec<f64>]) -> Result<RankSignTable> {
    let d = sample.dim();
    if mu_hat.len() != d || sigma_hat.len() != d {
        return invalid("location or scatter does not match the sample dimension");
    }
    let w = matrix(&inverse_sqrt(sigma_hat)?)?;
    let n = sample.len();
    let resid: Vec<Vec<f64>> = sample
        .rows()
        .map(|x| {
            let c = DVector::from_iterator(d, x.iter().zip(mu_hat).map(|(a, b)| a - b));
            (&w * c).iter().cloned().collect()
        })
        .collect();
    let moduli: Vec<f64> = resid.iter().map(|z| norm(z)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| moduli[a].total_cmp(&moduli[b]).then(a.cmp(&b)));
    let mut rank = vec![0usize; n];
    order.iter().enumerate().for_each(|(k, &i)| rank[i] = k + 1);
    let scale = (n + 1) as f64;
    let rows = (0..n)
        .map(|i| {
            let r = moduli[i];
            let sign: Vec<f64> = if r > 0.0 { resid[i].iter().map(|v| v / r).collect() } else { vec![0.0; d] };
            let f_value = sign.iter().map(|u| u * (rank[i] as f64 / scale)).collect();
            RankSign { f_value, rank: rank[i] as f64, ring: rank[i], direction: None, sign }
        })
        .collect();
    Ok(RankSignTable { n_r: n, n_s: 1, n_0: 0, rows })
}

/// Empirical center-outward map on the line: with `m = floor(n/2)` the
/// sorted sample goes to `-m/(m+1), ..., m/(m+1)` (odd `n`, the median to
/// 0) or to `+-1/(m+1), ..., +-m/(m+1)` (even `n`). Ties are broken by index.
pub fn one_d_center_outward(sample: &[f64]) -> Result<RankSignTable> {
    let n = sample.len();
    if n == 0 {
        return invalid("empty sample");
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return invalid("sample must be finite");
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sample[a].total_cmp(&sample[b]).then(a.cmp(&b)));
    if order.windows(2).any(|w| sample[w[0]] == sample[w[1]]) {
        warn!("tied observations ranked by index");
    }
    let m = n / 2;
    let scale = (m + 1) as f64;
    let mut rows = vec![None; n];
    for (k, &i) in order.iter().enumerate() {
        // Signed position: -m..=m for odd n, skipping 0 for even n.
        let pos: i64 = if n.is_multiple_of(2) && k >= m { k as i64 - m as i64 + 1 } else { k as i64 - m as i64 };
        let ring = pos.unsigned_abs() as usize;
        let (sign, direction) = match pos.signum() {
            1 => (1.0, Some(0)),
            -1 => (-1.0, Some(1)),
            _ => (0.0, None),
        };
        let value = if ring == 0 { 0.0 } else { sign * (ring as f64 / scale) };
        rows[i] = Some(RankSign { f_value: vec![value], rank: ring as f64, ring, direction, sign: vec![sign] });
    }
    Ok(RankSignTable { n_r: m, n_s: 2, n_0: n % 2, rows: rows.into_iter().map(Option::unwrap).collect() })
}

/// Gaussian with mean `mu` and covariance `sigma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        if cov.len() != mean.len() {
            return invalid("mean and covariance differ in dimension");
        }
        check_spd(&matrix(&cov)?)?;
        Ok(Self { mean, cov })
    }

    pub fn standard(dim: usize) -> Self {
        let cov = (0..dim).map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Self { mean: vec![0.0; dim], cov }
    }

    fn cholesky(&self) -> DMatrix<f64> {
        matrix(&self.cov).expect("validated").cholesky().expect("validated").l()
    }
}

/// Elliptical law `mu + Sigma^{1/2} Z` with `Z` standard Gaussian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticalModel {
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

impl EllipticalModel {
    pub fn gaussian(mu: Vec<f64>, sigma: Vec<Vec<f64>>) -> Result<Self> {
        Gaussian::new(mu.clone(), sigma.clone())?;
        Ok(Self { mu, sigma })
    }

    pub fn radial_cdf(&self) -> ChiRadialCdf {
        chi_radial_cdf(self.mu.len())
    }

    /// Population distribution function `F(Sigma^{-1/2}(x - mu))`.
    pub fn population_f(&self, x: &[f64]) -> Result<Vec<f64>> {
        let w = inverse_sqrt(&self.sigma)?;
        let c: Vec<f64> = x.iter().zip(&self.mu).map(|(a, b)| a - b).collect();
        let z: Vec<f64> = w.iter().map(|row| row.iter().zip(&c).map(|(a, b)| a * b).sum()).collect();
        Ok(spherical_f(&z, &self.radial_cdf()))
    }
}

/// Finite Gaussian mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub weights: Vec<f64>,
    pub components: Vec<Gaussian>,
}

impl MixtureModel {
    pub fn new(weights: Vec<f64>, components: Vec<Gaussian>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return invalid("mixture needs one weight per component");
        }
        if weights.iter().any(|w| !(*w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return invalid("mixture weights must be positive and sum to 1");
        }
        let d = components[0].mean.len();
        if components.iter().any(|c| c.mean.len() != d) {
            return invalid("mixture components differ in dimension");
        }
        Ok(Self { weights, components })
    }
}

/// A sampling model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Elliptical(EllipticalModel),
    Mixture(MixtureModel),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Elliptical(e) => e.mu.len(),
            Model::Mixture(m) => m.components[0].mean.len(),
        }
    }

    /// Closed-form distribution function, when there is one.
    pub fn population_f(&self, x: &[f64]) -> Option<Result<Vec<f64>>> {
        match self {
            Model::Elliptical(e) => Some(e.population_f(x)),
            Model::Mixture(_) => None,
        }
    }

    pub fn has_closed_form(&self) -> bool {
        matches!(self, Model::Elliptical(_))
    }

    /// Component label of each draw (all 0 for an elliptical model).
    pub fn sample_labeled(&self, n: usize, seed: u64) -> (PointSet, Vec<usize>) {
        let d = self.dim();
        let mut r = rng::seeded(seed, rng::STREAM_SAMPLER);
        let (weights, gaussians): (Vec<f64>, Vec<Gaussian>) = match self {
            Model::Elliptical(e) => (vec![1.0], vec![Gaussian { mean: e.mu.clone(), cov: e.sigma.clone() }]),
            Model::Mixture(m) => (m.weights.clone(), m.components.clone()),
        };
        let factors: Vec<DMatrix<f64>> = gaussians.iter().map(Gaussian::cholesky).collect();
        let mut out = PointSet::zeros(n, d);
        let mut labels = Vec::with_capacity(n);
        let mut z = DVector::zeros(d);
        for i in 0..n {
            let c = if weights.len() == 1 {
                0
            } else {
                let u: f64 = r.random();
                let mut acc = 0.0;
                let mut pick = weights.len() - 1;
                for (k, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = k;
                        break;
                    }
                }
                pick
            };
            for v in z.iter_mut() {
                *v = r.sample(StandardNormal);
            }
            let x = &factors[c] * &z;
            for (o, (xk, mk)) in out.row_mut(i).iter_mut().zip(x.iter().zip(&gaussians[c].mean)) {
                *o = xk + mk;
            }
            labels.push(c);
        }
        (out, labels)
    }

    /// `n` i.i.d. draws, reproducible from `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> PointSet {
        self.sample_labeled(n, seed).0
    }
}

/// Names accepted by [`preset`].
pub const PRESETS: &[&str] =
    &["std-normal", "fig2-sep1", "fig2-sep2", "fig2-sep4", "fig3-center", "fig3-banana", "fig3-far"];

/// Named models. `std-normal` takes its dimension from `dim`; the others
/// are planar.
pub fn preset(name: &str, dim: usize) -> Result<Model> {
    let eye = || Gaussian::standard(2).cov;
    let g = |m: [f64; 2], c: Vec<Vec<f64>>| Gaussian::new(m.to_vec(), c);
    let s1 = || vec![vec![5.0, -4.0], vec![-4.0, 5.0]];
    let s2 = || vec![vec![5.0, 4.0], vec![4.0, 5.0]];
    let s3 = || vec![vec![4.0, 0.0], vec![0.0, 1.0]];
    let two = |a: f64| -> Result<Model> {
        Ok(Model::Mixture(MixtureModel::new(vec![0.5, 0.5], vec![g([-a, 0.0], eye())?, g([a, 0.0], eye())?])?))
    };
    let three = |h: f64, v: f64| -> Result<Model> {
        Ok(Model::Mixture(MixtureModel::new(
            vec![0.375, 0.375, 0.25],
            vec![g([-h, 0.0], s1())?, g([h, 0.0], s2())?, g([0.0, -v], s3())?],
        )?))
    };
    if name != "std-normal" && dim != 2 {
        return invalid(format!("model {name} is planar, got dimension {dim}"));
    }
    match name {
        "std-normal" => {
            if dim == 0 {
                return invalid("dimension must be at least 1");
            }
            Ok(Model::Elliptical(EllipticalModel::gaussian(vec![0.0; dim], Gaussian::standard(dim).cov)?))
        }
        "fig2-sep1" => two(1.0),
        "fig2-sep2" => two(2.0),
        "fig2-sep4" => two(4.0),
        "fig3-center" => three(0.0, 0.0),
        "fig3-banana" => three(3.0, 2.5),
        "fig3-far" => three(8.0, 5.0),
        other => invalid(format!("unknown model {other:?}; known: {}", PRESETS.join(", "))),
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::Elliptical(e) => write!(f, "elliptical Gaussian in dimension {}", e.mu.len()),
            Model::Mixture(m) => write!(f, "{}-component Gaussian mixture", m.weights.len()),
        }
    }
}

pub fn sample_mean(sample: &PointSet) -> Vec<f64> {
    let n = sample.len() as f64;
    let mut m = vec![0.0; sample.dim()];
    for x in sample.rows() {
        m.iter_mut().zip(x).for_each(|(a, b)| *a += b);
    }
    m.iter_mut().for_each(|a| *a /= n);
    m
}

/// Unbiased sample covariance.
pub fn sample_covariance(sample: &PointSet) -> Vec<Vec<f64>> {
    let d = sample.dim();
    let m = sample_mean(sample);
    let mut c = vec![vec![0.0; d]; d];
    for x in sample.rows() {
        for i in 0..d {
            for j in 0..d {
                c[i][j] += (x[i] - m[i]) * (x[j] - m[j]);
            }
        }
    }
    let denom = (sample.len().max(2) - 1) as f64;
    c.iter_mut().flatten().for_each(|v| *v /= denom);
    c
}
