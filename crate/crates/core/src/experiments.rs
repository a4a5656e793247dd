//! Monte-Carlo experiments and the linear-interpolation counterexample.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::assignment::{brute_force_assignment, cost_matrix, AuctionConfig};
use crate::certificate::{certify_pairing, check_cyclical_monotonicity, CheckMode, Verdict};
use crate::error::{invalid, Result};
use crate::grid::{build_grid, BallGrid, DirectionMethod, GridSpec};
use crate::pipeline::{empirical_f, fit, FitConfig};
use crate::points::{dist, PointSet};
use crate::ranks::RankSignTable;
use crate::reference::{elliptical_f_hat, preset, sample_covariance, sample_mean, Model};
use crate::rng;

/// `F` values with every center observation sent to the origin.
pub fn discrete_f(table: &RankSignTable) -> PointSet {
    let rows: Vec<Vec<f64>> =
        table.rows.iter().map(|r| if r.ring == 0 { vec![0.0; r.f_value.len()] } else { r.f_value.clone() }).collect();
    PointSet::from_rows(&rows).expect("table rows share a dimension")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcConfig {
    pub model: String,
    pub dim: usize,
    pub sizes: Vec<usize>,
    pub seeds: usize,
    pub master_seed: u64,
    /// Fresh points for the smoothed sup surrogate; 0 skips smoothing.
    pub sup_points: usize,
    pub fit: FitConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcRow {
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub n_r: usize,
    pub n_s: usize,
    pub n_0: usize,
    /// `max_i |F^(n)(Z_i) - F(Z_i)|`.
    pub max_error: f64,
    /// Same maximum over observations on rings `>= 0.9 n_R`.
    pub outer_error: f64,
    /// `max |Fbar(x) - F(x)|` over fresh draws (a lower bound of the sup);
    /// `None` when not computed.
    pub sup_error: Option<f64>,
}

/// Glivenko-Cantelli decay: one row per (size, replicate), in that order.
pub fn gc(config: &GcConfig) -> Result<Vec<GcRow>> {
    let model = preset(&config.model, config.dim)?;
    if !model.has_closed_form() {
        return invalid(format!("model {} has no closed-form distribution function", config.model));
    }
    if config.sizes.is_empty() || config.seeds == 0 {
        return invalid("need at least one size and one replicate");
    }
    let cells: Vec<(usize, usize)> =
        config.sizes.iter().flat_map(|&n| (0..config.seeds).map(move |r| (n, r))).collect();
    cells
        .par_iter()
        .enumerate()
        .map(|(k, &(n, replicate))| gc_cell(&model, config, n, replicate, rng::cell_seed(config.master_seed, k as u64)))
        .collect()
}

fn population(model: &Model, x: &[f64]) -> Result<Vec<f64>> {
    model.population_f(x).expect("closed form checked")
}

fn gc_cell(model: &Model, config: &GcConfig, n: usize, replicate: usize, seed: u64) -> Result<GcRow> {
    let sample = model.sample(n, seed);
    let mut fc = config.fit.clone();
    fc.smooth = config.sup_points > 0;
    fc.quantile = false;
    let f = fit(&sample, &fc)?;
    let disc = discrete_f(&f.table);
    let errors: Vec<f64> = sample
        .rows()
        .zip(disc.rows())
        .map(|(z, v)| population(model, z).map(|p| dist(&p, v)))
        .collect::<Result<_>>()?;
    let max_error = errors.iter().cloned().fold(0.0, f64::max);
    let outer = 0.9 * f.grid.spec.n_r as f64;
    let outer_error =
        f.table.rows.iter().zip(&errors).filter(|(r, _)| r.ring as f64 >= outer).map(|(_, e)| *e).fold(0.0, f64::max);
    let sup_error = match &f.forward {
        Some(map) => {
            let fresh = model.sample(config.sup_points, rng::cell_seed(seed, 1));
            let image = map.eval_batch(&fresh)?;
            let mut m: f64 = 0.0;
            for (x, v) in fresh.rows().zip(image.rows()) {
                m = m.max(dist(&population(model, x)?, v));
            }
            Some(m)
        }
        None => None,
    };
    let s = &f.grid.spec;
    Ok(GcRow { n, replicate, seed, n_r: s.n_r, n_s: s.n_s, n_0: s.n_0, max_error, outer_error, sup_error })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DfConfig {
    pub n_r: usize,
    pub n_s: usize,
    pub replications: usize,
    pub models: Vec<String>,
    pub master_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DfModelReport {
    pub model: String,
    /// Cell `(ring - 1) n_S + direction` of observation 1, counted.
    pub counts: Vec<u64>,
    pub uniformity: ChiSquareTest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DfReport {
    pub n: usize,
    pub models: Vec<DfModelReport>,
    /// Homogeneity of the cell frequencies across models.
    pub homogeneity: Option<ChiSquareTest>,
}

fn chi_square_p(statistic: f64, df: usize) -> f64 {
    ChiSquared::new(df as f64).map(|c| c.sf(statistic)).unwrap_or(f64::NAN)
}

/// Pearson goodness of fit against equal cell probabilities.
pub fn chi_square_uniform(counts: &[u64]) -> Result<ChiSquareTest> {
    let k = counts.len();
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / k as f64;
    if k < 2 || expected < 5.0 {
        return invalid(format!("expected cell count {expected} is below 5"));
    }
    let statistic = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    Ok(ChiSquareTest { statistic, df: k - 1, p_value: chi_square_p(statistic, k - 1) })
}

/// Pearson homogeneity test on an `r x k` contingency table.
pub fn chi_square_homogeneity(rows: &[Vec<u64>]) -> Result<ChiSquareTest> {
    let r = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if r < 2 || k < 2 || rows.iter().any(|row| row.len() != k) {
        return invalid("homogeneity needs at least a 2 x 2 table");
    }
    let row_tot: Vec<f64> = rows.iter().map(|row| row.iter().sum::<u64>() as f64).collect();
    let col_tot: Vec<f64> = (0..k).map(|j| rows.iter().map(|row| row[j]).sum::<u64>() as f64).collect();
    let total: f64 = row_tot.iter().sum();
    let mut statistic = 0.0;
    for i in 0..r {
        for j in 0..k {
            let e = row_tot[i] * col_tot[j] / total;
            if e < 5.0 {
                return invalid(format!("expected cell count {e} is below 5"));
            }
            statistic += (rows[i][j] as f64 - e).powi(2) / e;
        }
    }
    let df = (r - 1) * (k - 1);
    Ok(ChiSquareTest { statistic, df, p_value: chi_square_p(statistic, df) })
}

fn cell_of_first(sample: &PointSet, grid: &BallGrid, n_s: usize) -> Result<usize> {
    let cost = cost_matrix(sample, &grid.points)?;
    let a = if sample.len() <= 8 {
        brute_force_assignment(&cost)?.assignment
    } else {
        crate::assignment::solve_hungarian(&cost)?
    };
    let k = a.perm[0];
    let dir = grid.direction_of[k].expect("no center cells when n_0 = 0");
    Ok((grid.ring_of[k] - 1) * n_s + dir)
}

/// Distribution-freeness: the grid cell of observation 1 is uniform over
/// the `n = n_R n_S` cells whatever the (continuous) model.
pub fn dftest(config: &DfConfig) -> Result<DfReport> {
    let n = config.n_r * config.n_s;
    if config.models.is_empty() {
        return invalid("need at least one model");
    }
    let expected = config.replications as f64 / n as f64;
    if expected < 5.0 {
        return invalid(format!("{} replications over {n} cells leave fewer than 5 per cell", config.replications));
    }
    let spec = GridSpec::new(n, 2, config.n_r, config.n_s, DirectionMethod::EqualAngle, 0)?;
    if spec.n_0 != 0 {
        return invalid("distribution-freeness test needs n_0 = 0");
    }
    let grid = build_grid(&spec)?;
    let mut reports = vec![];
    for (m, name) in config.models.iter().enumerate() {
        let model = preset(name, 2)?;
        let base = rng::cell_seed(config.master_seed, m as u64);
        let cells: Vec<usize> = (0..config.replications)
            .into_par_iter()
            .map(|rep| cell_of_first(&model.sample(n, rng::cell_seed(base, rep as u64)), &grid, config.n_s))
            .collect::<Result<_>>()?;
        let mut counts = vec![0u64; n];
        cells.iter().for_each(|&c| counts[c] += 1);
        let uniformity = chi_square_uniform(&counts)?;
        reports.push(DfModelReport { model: name.clone(), counts, uniformity });
    }
    let homogeneity = if reports.len() >= 2 {
        Some(chi_square_homogeneity(&reports.iter().map(|r| r.counts.clone()).collect::<Vec<_>>())?)
    } else {
        None
    };
    Ok(DfReport { n, models: reports, homogeneity })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareEllReport {
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
    pub n_r: usize,
    pub n_s: usize,
    pub n_0: usize,
    /// `max_i |F_ell(Z_i) - F^(n)(Z_i)|`.
    pub max_discrepancy: f64,
    pub mean_discrepancy: f64,
}

/// Mahalanobis against center-outward ranks and signs on a spherical
/// Gaussian sample (location and scatter estimated).
pub fn compare_ell(n: usize, dim: usize, seed: u64, config: &FitConfig) -> Result<CompareEllReport> {
    let model = preset("std-normal", dim)?;
    let sample = model.sample(n, seed);
    let grid = crate::pipeline::grid_for(n, dim, &FitConfig { break_grid_ties: false, ..config.clone() })?;
    let (a, _) = empirical_f(&sample, &grid, config.solver.resolve(n), &AuctionConfig::default())?;
    let table = crate::ranks::table(&sample, &grid, &a)?;
    let ell = elliptical_f_hat(&sample, &sample_mean(&sample), &sample_covariance(&sample))?;
    let co = discrete_f(&table);
    let d: Vec<f64> = ell.rows.iter().zip(co.rows()).map(|(e, c)| dist(&e.f_value, c)).collect();
    let s = &grid.spec;
    Ok(CompareEllReport {
        n,
        dim,
        seed,
        n_r: s.n_r,
        n_s: s.n_s,
        n_0: s.n_0,
        max_discrepancy: d.iter().cloned().fold(0.0, f64::max),
        mean_discrepancy: d.iter().sum::<f64>() / n as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    /// Unique optimal pairing of the three base points (`x_i -> y_perm[i]`).
    pub base_pairing: Vec<usize>,
    pub base_unique: bool,
    /// Unique optimal pairing of the augmented sets, index 0 the mixture point.
    pub augmented_pairing: Vec<usize>,
    pub augmented_unique: bool,
    /// Minimum cycle mean of the pairing `x_i -> y_i` on the augmented sets.
    pub naive_epsilon_star: f64,
    pub naive_cyclically_monotone: bool,
    pub pass: bool,
}

/// The three-point configuration and its augmentation by `0.8, 0.1, 0.1`
/// mixtures, on which barycentric interpolation breaks monotonicity.
pub fn counterexample_points() -> (PointSet, PointSet, PointSet, PointSet) {
    let xs = PointSet::from_rows(&[[0.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).expect("valid");
    let ys = PointSet::from_rows(&[[-5.0, -0.01], [0.5, 0.01], [1.0, 0.0]]).expect("valid");
    let augment = |p: &PointSet| {
        let w = [0.8, 0.1, 0.1];
        let mix: Vec<f64> = (0..2).map(|k| (0..3).map(|i| w[i] * p.row(i)[k]).sum()).collect();
        let mut rows = vec![mix];
        rows.extend(p.rows().map(<[f64]>::to_vec));
        PointSet::from_rows(&rows).expect("valid")
    };
    let (x4, y4) = (augment(&xs), augment(&ys));
    (xs, ys, x4, y4)
}

pub fn counterexample() -> Result<CounterexampleReport> {
    let (xs, ys, x4, y4) = counterexample_points();
    let base = brute_force_assignment(&cost_matrix(&xs, &ys)?)?;
    let aug = brute_force_assignment(&cost_matrix(&x4, &y4)?)?;
    let naive = certify_pairing(&x4, &y4, None)?;
    let verdict = check_cyclical_monotonicity(&x4, &y4, &CheckMode::Exact)?;
    let naive_cyclically_monotone = verdict.is_monotone();
    let base_pairing = base.assignment.perm.clone();
    let augmented_pairing = aug.assignment.perm.clone();
    let pass = base.unique
        && base_pairing == [0, 1, 2]
        && aug.unique
        && augmented_pairing == [2, 1, 0, 3]
        && naive.epsilon_star < 0.0
        && matches!(verdict, Verdict::Violated { .. });
    Ok(CounterexampleReport {
        base_pairing,
        base_unique: base.unique,
        augmented_pairing,
        augmented_unique: aug.unique,
        naive_epsilon_star: naive.epsilon_star,
        naive_cyclically_monotone,
        pass,
    })
}
