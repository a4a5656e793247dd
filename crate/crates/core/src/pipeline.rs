//! Grid, assignment, certification and smoothing composed into one fit.

use log::{info, warn};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::assignment::{
    brute_force_assignment, cost_matrix, find_duplicate, solve_auction_with_prices, solve_hungarian_with_duals,
    Assignment, AuctionConfig, SolverChoice, SolverKind,
};
use crate::certificate::{certify_pairing, weights_from_duals, zero_tolerance_points, Certificate, Verdict};
use crate::error::{invalid, Error, Result};
use crate::grid::{break_ties, build_grid, BallGrid, DirectionMethod, GridSpec};
use crate::moreau::{fit_smooth_f, fit_smooth_q, SmoothMap, WeightsSource, DEFAULT_PROX_TOLERANCE};
use crate::points::PointSet;
use crate::ranks::{table, RankSignTable};
use crate::rng;

/// Options of a fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Target `n_S / n_R` when the grid is factorized automatically.
    pub ratio: f64,
    pub n_r: Option<usize>,
    pub n_s: Option<usize>,
    pub direction_method: Option<DirectionMethod>,
    pub grid_seed: u64,
    pub solver: SolverChoice,
    /// Replace repeated origin copies so the smoothed maps exist.
    pub break_grid_ties: bool,
    /// Re-solves with a finer auction resolution when the certificate fails.
    pub max_retries: usize,
    /// Auction resolution multiplier per retry.
    pub retry_factor: f64,
    /// Smoothing constant of the forward map; `None` for the largest valid one.
    pub epsilon: Option<f64>,
    pub prox_tolerance: f64,
    /// Certify and build the smoothed maps.
    pub smooth: bool,
    /// Also build the quantile map.
    pub quantile: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            ratio: 2.0,
            n_r: None,
            n_s: None,
            direction_method: None,
            grid_seed: 0,
            solver: SolverChoice::Auto,
            break_grid_ties: true,
            max_retries: 5,
            retry_factor: 0.1,
            epsilon: None,
            prox_tolerance: DEFAULT_PROX_TOLERANCE,
            smooth: true,
            quantile: true,
        }
    }
}

/// Grid for `n` points in dimension `dim`.
pub fn grid_for(n: usize, dim: usize, config: &FitConfig) -> Result<BallGrid> {
    let method = config.direction_method.unwrap_or_else(|| DirectionMethod::default_for(dim));
    let spec = match (config.n_r, config.n_s) {
        (Some(n_r), Some(n_s)) => GridSpec::new(n, dim, n_r, n_s, method, config.grid_seed)?,
        (None, None) => GridSpec::auto(n, dim, config.ratio, method, config.grid_seed)?,
        _ => return invalid("give both n_R and n_S or neither"),
    };
    let grid = build_grid(&spec)?;
    Ok(if config.break_grid_ties { break_ties(&grid, config.grid_seed) } else { grid })
}

/// Optimal assignment of the sample to the grid, with column duals listed
/// in sample order (`b_i` for the target of observation `i`).
pub fn empirical_f(
    sample: &PointSet,
    grid: &BallGrid,
    kind: SolverKind,
    auction: &AuctionConfig,
) -> Result<(Assignment, Option<Vec<f64>>)> {
    if sample.len() != grid.len() || sample.dim() != grid.dim() {
        return invalid(format!(
            "sample ({} x {}) does not match grid ({} x {})",
            sample.len(),
            sample.dim(),
            grid.len(),
            grid.dim()
        ));
    }
    let cost = cost_matrix(sample, &grid.points)?;
    match kind {
        SolverKind::Hungarian => {
            let (a, _, v) = solve_hungarian_with_duals(&cost)?;
            let duals = a.perm.iter().map(|&j| v[j]).collect();
            Ok((a, Some(duals)))
        }
        SolverKind::Auction => {
            let (a, p) = solve_auction_with_prices(&cost, auction)?;
            let duals = a.perm.iter().map(|&j| -p[j]).collect();
            Ok((a, Some(duals)))
        }
        SolverKind::Brute => Ok((brute_force_assignment(&cost)?.assignment, None)),
    }
}

/// An assignment together with its certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct Certified {
    pub assignment: Assignment,
    pub certificate: Certificate,
    pub retries: usize,
}

/// Solves and certifies. A negative minimum cycle mean means the solver
/// stopped short of the optimum; the auction is then rerun with its cost
/// resolution refined by `1 / retry_factor`, at most `max_retries` times.
/// A zero mean (a tie in the sample) cannot be repaired and fails at once.
pub fn certify(sample: &PointSet, grid: &BallGrid, config: &FitConfig) -> Result<Certified> {
    if !(config.retry_factor > 0.0 && config.retry_factor < 1.0) {
        return invalid("retry factor must lie in (0, 1)");
    }
    let n = sample.len();
    let mut kind = config.solver.resolve(n);
    let mut auction = AuctionConfig::default();
    let mut last = None;
    for attempt in 0..=config.max_retries {
        if attempt > 0 {
            kind = SolverKind::Auction;
            auction.scale /= config.retry_factor;
        }
        let (assignment, duals) = match empirical_f(sample, grid, kind, &auction) {
            Ok(r) => r,
            Err(Error::SolverFailure(msg)) if attempt > 0 => {
                warn!("retry {attempt}: {msg}");
                continue;
            }
            Err(e) => return Err(e),
        };
        let targets = assignment.matched_targets(grid);
        let seed = duals.map(|b| weights_from_duals(&targets, &b));
        let certificate = certify_pairing(sample, &targets, seed.as_deref())?;
        let verdict = Verdict::classify(
            certificate.epsilon_star,
            certificate.cycle.clone(),
            zero_tolerance_points(sample, &targets),
        );
        match verdict {
            Verdict::MonotoneUnique { .. } => {
                info!("certified with eps* = {:e} after {attempt} retries", certificate.epsilon_star);
                return Ok(Certified { assignment, certificate, retries: attempt });
            }
            Verdict::MonotoneNonunique { epsilon_star } => {
                return Err(Error::Certification { epsilon_star, cycle: certificate.cycle });
            }
            Verdict::Violated { epsilon_star, cycle } => {
                warn!("attempt {attempt}: pairing not cyclically monotone (eps* = {epsilon_star:e})");
                last = Some((epsilon_star, cycle));
            }
        }
    }
    let (epsilon_star, cycle) = last.unwrap_or((f64::NAN, vec![]));
    Err(Error::Certification { epsilon_star, cycle })
}

/// Everything a fit produces.
#[derive(Clone, Debug, PartialEq)]
pub struct Fit {
    pub sample: PointSet,
    pub grid: BallGrid,
    pub assignment: Assignment,
    pub table: RankSignTable,
    pub certificate: Option<Certificate>,
    pub forward: Option<SmoothMap>,
    pub quantile: Option<SmoothMap>,
    pub retries: usize,
}

/// Grid, assignment and, unless disabled, certificate and smoothed maps.
pub fn fit(sample: &PointSet, config: &FitConfig) -> Result<Fit> {
    if sample.is_empty() || !sample.all_finite() {
        return invalid("sample must be nonempty and finite");
    }
    let grid = grid_for(sample.len(), sample.dim(), config)?;
    if !config.smooth {
        let kind = config.solver.resolve(sample.len());
        let (assignment, _) = empirical_f(sample, &grid, kind, &AuctionConfig::default())?;
        let table = table(sample, &grid, &assignment)?;
        return Ok(Fit {
            sample: sample.clone(),
            grid,
            assignment,
            table,
            certificate: None,
            forward: None,
            quantile: None,
            retries: 0,
        });
    }
    let Certified { assignment, certificate, retries } = certify(sample, &grid, config)?;
    let mut forward = fit_smooth_f(sample, &grid, &assignment, WeightsSource::Certified(certificate.clone()))?;
    forward.prox_tolerance = config.prox_tolerance;
    if let Some(eps) = config.epsilon {
        forward.epsilon = eps;
    }
    forward.validate()?;
    let quantile = if config.quantile {
        let mut q = fit_smooth_q(sample, &grid, &assignment, WeightsSource::Certified(certificate.clone()))?;
        q.prox_tolerance = config.prox_tolerance;
        q.validate()?;
        Some(q)
    } else {
        None
    };
    let table = table(sample, &grid, &assignment)?;
    Ok(Fit {
        sample: sample.clone(),
        grid,
        assignment,
        table,
        certificate: Some(certificate),
        forward: Some(forward),
        quantile,
        retries,
    })
}

/// Copy of `points` where every repeated row gets seeded Gaussian noise of
/// relative size 1e-6. Returns the number of rows moved.
pub fn jitter_duplicates(points: &PointSet, seed: u64) -> (PointSet, usize) {
    let mut out = points.clone();
    let scale = 1e-6 * points.max_norm().max(1.0);
    let mut r = rng::seeded(seed, rng::STREAM_SAMPLE_JITTER);
    let mut moved = 0;
    while let Some((_, j)) = find_duplicate(&out) {
        for v in out.row_mut(j) {
            let g: f64 = StandardNormal.sample(&mut r);
            *v += scale * g;
        }
        moved += 1;
    }
    (out, moved)
}
