use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::prox::project_simplex;
use super::*;
use crate::assignment::{cost_matrix, solve_hungarian};
use crate::grid::{break_ties, build_grid, DirectionMethod};
use crate::points::dist;

fn gaussian(n: usize, d: usize, seed: u64) -> PointSet {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    PointSet::new(d, (0..n * d).map(|_| r.sample(StandardNormal)).collect()).unwrap()
}

fn fitted(n: usize, seed: u64) -> (PointSet, BallGrid, Assignment) {
    let xs = gaussian(n, 2, seed);
    let spec = GridSpec::auto(n, 2, 1.5, DirectionMethod::EqualAngle, seed).unwrap();
    let grid = break_ties(&build_grid(&spec).unwrap(), seed);
    let a = solve_hungarian(&cost_matrix(&xs, &grid.points).unwrap()).unwrap();
    (xs, grid, a)
}

fn random_potential(n: usize, d: usize, seed: u64) -> Potential {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let targets = PointSet::new(d, (0..n * d).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
    let weights = (0..n).map(|_| r.random_range(-0.5..0.5)).collect();
    Potential { targets, weights, epsilon_star: 1.0, epsilon0: 1.0 }
}

#[test]
fn phi_examples() {
    let p = random_potential(6, 2, 1);
    let x = [0.3, -0.8];
    let direct =
        (0..6).map(|j| x[0] * p.targets.row(j)[0] + x[1] * p.targets.row(j)[1] - p.weights[j]).fold(f64::MIN, f64::max);
    assert_eq!(phi(&x, &p), direct);
    let zero = Potential { weights: vec![0.0; 6], ..p };
    assert_eq!(phi(&[0.0, 0.0], &zero), 0.0);
}

#[test]
fn simplex_projection() {
    let mut v = vec![0.5, 0.2, -0.3];
    project_simplex(&mut v);
    assert_abs_diff_eq!(v.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(v[0], 0.65, epsilon = 1e-15);
    assert_abs_diff_eq!(v[1], 0.35, epsilon = 1e-15);
    assert_eq!(v[2], 0.0);
    let mut w = vec![0.1, 0.7, 0.2];
    project_simplex(&mut w);
    for (a, b) in w.iter().zip([0.1, 0.7, 0.2]) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
    }
}

/// Envelope by nested grid search on a shrinking box (the objective is convex).
fn envelope_by_search(x: &[f64], p: &Potential, eps: f64) -> f64 {
    let f = |y: [f64; 2]| phi(&y, p) + ((y[0] - x[0]).powi(2) + (y[1] - x[1]).powi(2)) / (2.0 * eps);
    let mut center = [x[0], x[1]];
    let mut half = eps * p.targets.max_norm() * 1.5;
    let mut best = f(center);
    for _ in 0..40 {
        let mut arg = center;
        for a in -20..=20 {
            for b in -20..=20 {
                let y = [center[0] + half * a as f64 / 20.0, center[1] + half * b as f64 / 20.0];
                let v = f(y);
                if v < best {
                    best = v;
                    arg = y;
                }
            }
        }
        center = arg;
        half /= 4.0;
    }
    best
}

#[test]
fn envelope_matches_grid_search() {
    for seed in 0..6 {
        let p = random_potential(10, 2, seed);
        let mut r = ChaCha8Rng::seed_from_u64(seed + 40);
        let x = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let eps = 0.3;
        let px = prox(&x, &p, eps, 1e-12).unwrap();
        assert_abs_diff_eq!(px.envelope, envelope_by_search(&x, &p, eps), epsilon = 1e-5);
        let m = &px.gradient;
        for k in 0..2 {
            assert_abs_diff_eq!(px.y0[k], x[k] - eps * m[k], epsilon = 1e-15);
        }
        assert_abs_diff_eq!(px.lambda.iter().map(|l| l.1).sum::<f64>(), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn single_target() {
    let p = Potential {
        targets: PointSet::from_rows(&[[0.4, -0.1]]).unwrap(),
        weights: vec![0.7],
        epsilon_star: f64::INFINITY,
        epsilon0: f64::INFINITY,
    };
    let px = prox(&[2.0, 3.0], &p, 0.5, 1e-8).unwrap();
    assert_eq!(px.y0, vec![2.0 - 0.2, 3.0 + 0.05]);
    assert_eq!(px.gradient, vec![0.4, -0.1]);
    let map = SmoothMap::new(Direction::SampleToBall, p, None, 1e-8).unwrap();
    assert_eq!(map.epsilon, 1.0);
}

#[test]
fn two_point_line_closed_form() {
    let xs = PointSet::from_rows(&[[-0.3], [0.9]]).unwrap();
    let ys = PointSet::from_rows(&[[-1.0], [1.0]]).unwrap();
    let c = certificate::certify_pairing(&xs, &ys, None).unwrap();
    let e0 = epsilon0(&xs, &ys, &c.weights).unwrap();
    let p = Potential { targets: ys, weights: c.weights, epsilon_star: c.epsilon_star, epsilon0: e0 };
    let map = SmoothMap::new(Direction::SampleToBall, p, None, 1e-12).unwrap();
    assert_abs_diff_eq!(map.epsilon, 0.6, epsilon = 1e-15);
    let mid = 0.3;
    for k in 0..=400 {
        let x = -2.0 + 4.0 * k as f64 / 400.0;
        let expected = ((x - mid) / map.epsilon).clamp(-1.0, 1.0);
        assert_abs_diff_eq!(map.eval(&[x]).unwrap()[0], expected, epsilon = 1e-8);
    }
}

#[test]
fn prox_near_data_point_selects_its_target() {
    let (xs, grid, a) = fitted(60, 3);
    let map = fit_smooth_f(&xs, &grid, &a, WeightsSource::Compute { seed: None }).unwrap();
    let e0 = map.epsilon0();
    let smaller = SmoothMap::new(Direction::SampleToBall, map.potential.clone(), Some(e0 / 2.0), 1e-10).unwrap();
    for i in [0, 17, 42] {
        let x: Vec<f64> = xs.row(i).iter().map(|v| v + e0 / 4.0 * 0.6).collect();
        let px = smaller.prox(&x).unwrap();
        assert_eq!(px.lambda, vec![(i, 1.0)]);
        assert_eq!(px.gradient, grid.points.row(a.perm[i]));
    }
}

#[test]
fn forward_map_interpolates_and_round_trips() {
    let (xs, grid, a) = fitted(200, 7);
    let map = fit_smooth_f(&xs, &grid, &a, WeightsSource::Compute { seed: None }).unwrap();
    assert_eq!(map.direction, Direction::SampleToBall);
    assert_eq!(map.epsilon, map.epsilon0());
    let tol = 10.0 * map.prox_tolerance / map.epsilon0();
    let image = map.eval_batch(&xs).unwrap();
    for i in 0..xs.len() {
        assert!(dist(image.row(i), grid.points.row(a.perm[i])) <= tol);
    }
    let back = SmoothMap::from_json(&map.to_json().unwrap()).unwrap();
    assert_eq!(back, map);
    let probe = gaussian(20, 2, 99);
    assert_eq!(back.eval_batch(&probe).unwrap(), map.eval_batch(&probe).unwrap());
}

#[test]
fn forward_map_on_a_line_is_nondecreasing() {
    let xs = PointSet::from_rows(&[[0.3], [-1.2], [2.5], [0.0], [-0.4], [1.1], [3.3]]).unwrap();
    let spec = GridSpec::auto(7, 1, 1.0, DirectionMethod::EqualAngle, 0).unwrap();
    let grid = build_grid(&spec).unwrap();
    let a = solve_hungarian(&cost_matrix(&xs, &grid.points).unwrap()).unwrap();
    let map = fit_smooth_f(&xs, &grid, &a, WeightsSource::Compute { seed: None }).unwrap();
    let mut prev = f64::NEG_INFINITY;
    for k in 0..=2000 {
        let x = -3.0 + 8.0 * k as f64 / 2000.0;
        let v = map.eval(&[x]).unwrap()[0];
        assert!(v >= prev - 1e-12, "decrease at {x}");
        prev = v;
    }
}

#[test]
fn quantile_map_interpolates_and_grows_radially() {
    let (xs, grid, a) = fitted(150, 11);
    let fwd = certificate::certify_pairing(&xs, &a.matched_targets(&grid), None).unwrap();
    let q = fit_smooth_q(&xs, &grid, &a, WeightsSource::Certified(fwd)).unwrap();
    assert_eq!(q.direction, Direction::BallToSample);
    assert!(q.epsilon0() > 0.0);
    let direct = fit_smooth_q(&xs, &grid, &a, WeightsSource::Compute { seed: None }).unwrap();
    assert_abs_diff_eq!(direct.potential.epsilon_star, q.potential.epsilon_star, epsilon = 1e-12);
    assert_abs_diff_eq!(direct.epsilon0(), q.epsilon0(), epsilon = 1e-12);

    let from = a.matched_targets(&grid);
    let tol = 10.0 * q.prox_tolerance / q.epsilon;
    for i in 0..xs.len() {
        assert!(dist(&q.eval(from.row(i)).unwrap(), xs.row(i)) <= tol);
    }
    for t in 0..8 {
        let th = t as f64 * 0.785;
        let u = [th.cos(), th.sin()];
        let mut prev = -1.0;
        for k in 1..10 {
            let r = k as f64 / 10.0;
            let v = norm(&q.eval(&[r * u[0], r * u[1]]).unwrap());
            assert!(v >= prev - 1e-9);
            prev = v;
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let (xs, grid, a) = fitted(80, 5);
    let map = fit_smooth_f(&xs, &grid, &a, WeightsSource::Compute { seed: None }).unwrap();
    let map = SmoothMap { prox_tolerance: 1e-14, ..map };
    let eps = map.epsilon;
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    while checked < 20 {
        let x = [r.random_range(-2.5..2.5), r.random_range(-2.5..2.5)];
        if xs.rows().any(|p| dist(p, &x) <= eps) {
            continue;
        }
        let t = map.eval(&x).unwrap();
        let h = 1e-3 * eps;
        for k in 0..2 {
            let (mut xp, mut xm) = (x, x);
            xp[k] += h;
            xm[k] -= h;
            let fd = (map.envelope(&xp).unwrap() - map.envelope(&xm).unwrap()) / (2.0 * h);
            assert!((fd - t[k]).abs() <= 1e-4 * norm(&t).max(1e-3), "fd {fd} vs {}", t[k]);
        }
        checked += 1;
    }
}

#[test]
fn envelope_bounds() {
    let p = random_potential(12, 2, 8);
    let m = p.targets.max_norm();
    let mut r = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let x = [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)];
        let eps = 0.2;
        let env = prox(&x, &p, eps, 1e-12).unwrap().envelope;
        let f = phi(&x, &p);
        assert!(env <= f + 1e-12);
        assert!(f - env <= eps / 2.0 * m * m + 1e-12);
    }
}

#[test]
fn step_function_snaps_radius() {
    let v = [0.37, 0.0];
    assert_abs_diff_eq!(norm(&snap_to_rings(&v, 4)), 0.2, epsilon = 1e-15);
    let s = snap_to_rings(&[0.0, -0.15], 4);
    assert_eq!(s, vec![0.0, 0.0]);
    let on = [0.6 * 0.6, 0.6 * 0.8];
    assert_eq!(snap_to_rings(&on, 4), on.to_vec());
    let u = snap_to_rings(&[0.3, 0.4], 9);
    assert_abs_diff_eq!(u[1] / u[0], 0.4 / 0.3, epsilon = 1e-14);
}

#[test]
fn rejects_bad_maps() {
    let p = random_potential(3, 2, 1);
    let bad = Potential { epsilon0: 0.0, ..p.clone() };
    assert!(matches!(SmoothMap::new(Direction::SampleToBall, bad, None, 1e-8), Err(Error::NotInterpolable(_))));
    assert!(SmoothMap::new(Direction::SampleToBall, p.clone(), Some(2.0), 1e-8).is_err());
    let far = Potential { targets: PointSet::from_rows(&[[2.0, 0.0], [0.0, 1.0], [0.0, 0.0]]).unwrap(), ..p };
    assert!(SmoothMap::new(Direction::SampleToBall, far.clone(), None, 1e-8).is_err());
    let q = SmoothMap::new(Direction::BallToSample, far, None, 1e-8).unwrap();
    assert_abs_diff_eq!(q.epsilon, 0.25, epsilon = 1e-15);
}
