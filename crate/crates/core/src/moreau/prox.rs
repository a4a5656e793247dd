//! Proximal point of the max-affine potential.
//!
//! `prox_eps(x)` minimizes `phi(y) + |y - x|^2 / (2 eps)` with
//! `phi(y) = max_j <y, y_j> - psi_j`. The dual is the concave quadratic
//! `D(l) = sum_j l_j s_j - (eps/2) |Y l|^2` over the probability simplex,
//! `s_j = <x, y_j> - psi_j`; at the optimum `T = Y l` and `y0 = x - eps T`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::certificate::Potential;
use crate::error::{invalid, Error, Result};
use crate::points::dot;

const ACTIVE_SET: usize = 32;
const MAX_ROUNDS: usize = 8;
const MAX_ITER: usize = 200_000;

/// Result of one proximal solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Prox {
    /// `T_eps(x) = (x - y0) / eps`.
    pub gradient: Vec<f64>,
    pub y0: Vec<f64>,
    /// Nonzero simplex weights as `(target index, weight)`.
    pub lambda: Vec<(usize, f64)>,
    /// Moreau envelope `phi_eps(x)` (dual value).
    pub envelope: f64,
    /// Duality gap at return.
    pub gap: f64,
}

/// `phi(x) = max_j <x, y_j> - psi_j`.
pub fn phi(x: &[f64], potential: &Potential) -> f64 {
    potential.targets.rows().zip(&potential.weights).map(|(y, w)| dot(x, y) - w).fold(f64::NEG_INFINITY, f64::max)
}

/// Dual problem restricted to a subset of targets.
struct Restricted {
    idx: Vec<usize>,
    ys: Vec<f64>,
    s0: Vec<f64>,
    dim: usize,
    eps: f64,
    lipschitz: f64,
}

impl Restricted {
    fn new(idx: Vec<usize>, s0_all: &[f64], potential: &Potential, eps: f64) -> Self {
        let dim = potential.targets.dim();
        let mut ys = Vec::with_capacity(idx.len() * dim);
        for &j in &idx {
            ys.extend_from_slice(potential.targets.row(j));
        }
        let s0 = idx.iter().map(|&j| s0_all[j]).collect();
        let gram = DMatrix::from_fn(dim, dim, |a, b| ys.chunks_exact(dim).map(|y| y[a] * y[b]).sum::<f64>());
        let top = SymmetricEigen::new(gram).eigenvalues.iter().cloned().fold(0.0, f64::max);
        let lipschitz = (eps * top).max(f64::MIN_POSITIVE);
        Self { idx, ys, s0, dim, eps, lipschitz }
    }

    fn len(&self) -> usize {
        self.idx.len()
    }

    fn y(&self, a: usize) -> &[f64] {
        &self.ys[a * self.dim..(a + 1) * self.dim]
    }

    fn mean(&self, lambda: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (a, &l) in lambda.iter().enumerate() {
            if l != 0.0 {
                for (mk, yk) in m.iter_mut().zip(self.y(a)) {
                    *mk += l * yk;
                }
            }
        }
        m
    }

    /// Dual gradient `g_a = s_a - eps <y_a, m>` and value.
    fn grad(&self, lambda: &[f64]) -> (Vec<f64>, f64) {
        let m = self.mean(lambda);
        let g = (0..self.len()).map(|a| self.s0[a] - self.eps * dot(self.y(a), &m)).collect();
        let value = dot(lambda, &self.s0) - 0.5 * self.eps * dot(&m, &m);
        (g, value)
    }

    fn gap(&self, lambda: &[f64]) -> f64 {
        let (g, _) = self.grad(lambda);
        let top = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (top - dot(lambda, &g)).max(0.0)
    }

    /// Accelerated projected gradient ascent with function-value restarts.
    fn solve(&self, lambda: &mut Vec<f64>, tol: f64) -> f64 {
        let k = self.len();
        let step = 1.0 / self.lipschitz;
        let mut z = lambda.clone();
        let mut t = 1.0f64;
        let (_, mut value) = self.grad(lambda);
        let mut gap = self.gap(lambda);
        let mut buf = vec![0.0; k];
        for it in 0..MAX_ITER {
            if gap <= tol {
                break;
            }
            let (gz, _) = self.grad(&z);
            for a in 0..k {
                buf[a] = z[a] + step * gz[a];
            }
            project_simplex(&mut buf);
            let (gn, vn) = self.grad(&buf);
            if vn < value && t > 1.0 {
                z.clone_from(lambda);
                t = 1.0;
                continue;
            }
            let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / tn;
            for a in 0..k {
                z[a] = buf[a] + beta * (buf[a] - lambda[a]);
            }
            std::mem::swap(lambda, &mut buf);
            t = tn;
            value = vn;
            let top = gn.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            gap = (top - dot(lambda, &gn)).max(0.0);
            if it % 64 == 63 {
                self.polish(lambda, &mut gap);
            }
        }
        self.polish(lambda, &mut gap);
        gap
    }

    /// Solves the optimality system on the current support exactly and keeps
    /// the result if it is feasible and no worse.
    fn polish(&self, lambda: &mut Vec<f64>, gap: &mut f64) {
        let support: Vec<usize> = (0..self.len()).filter(|&a| lambda[a] > 0.0).collect();
        let s = support.len();
        if s < 2 {
            return;
        }
        let mut mat = DMatrix::zeros(s + 1, s + 1);
        let mut rhs = DVector::zeros(s + 1);
        for (p, &a) in support.iter().enumerate() {
            for (q, &b) in support.iter().enumerate() {
                mat[(p, q)] = self.eps * dot(self.y(a), self.y(b));
            }
            mat[(p, s)] = 1.0;
            mat[(s, p)] = 1.0;
            rhs[p] = self.s0[a];
        }
        rhs[s] = 1.0;
        let sol = mat
            .clone()
            .lu()
            .solve(&rhs)
            .filter(|v| v.iter().all(|x| x.is_finite()))
            .or_else(|| mat.svd(true, true).solve(&rhs, 1e-14).ok());
        let Some(sol) = sol else { return };
        if sol.iter().take(s).any(|&l| !(l >= -1e-12)) {
            return;
        }
        let mut cand = vec![0.0; self.len()];
        for (p, &a) in support.iter().enumerate() {
            cand[a] = sol[p].max(0.0);
        }
        let total: f64 = cand.iter().sum();
        if !(total > 0.0) {
            return;
        }
        cand.iter_mut().for_each(|l| *l /= total);
        let cand_gap = self.gap(&cand);
        if cand_gap <= *gap {
            *lambda = cand;
            *gap = cand_gap;
        }
    }
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(v: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

/// Proximal point of `phi` at `x` with duality gap at most `tol`.
pub fn prox(x: &[f64], potential: &Potential, epsilon: f64, tol: f64) -> Result<Prox> {
    let targets = &potential.targets;
    if x.len() != targets.dim() {
        return invalid(format!("point has dimension {}, targets have {}", x.len(), targets.dim()));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return invalid(format!("smoothing constant must be positive, got {epsilon}"));
    }
    if !(tol > 0.0) {
        return invalid(format!("prox tolerance must be positive, got {tol}"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("point must be finite");
    }
    let n = targets.len();
    let s0: Vec<f64> = targets.rows().zip(&potential.weights).map(|(y, w)| dot(x, y) - w).collect();

    let mut order: Vec<usize> = (0..n).collect();
    let k = ACTIVE_SET.min(n);
    let by_value = |a: &usize, b: &usize| s0[*b].total_cmp(&s0[*a]).then(a.cmp(b));
    if k < n {
        order.select_nth_unstable_by(k - 1, by_value);
        order.truncate(k);
    }
    order.sort_unstable_by(by_value);

    let mut active = order;
    let mut lambda = vec![0.0; active.len()];
    lambda[0] = 1.0;
    let mut last_gap = f64::INFINITY;
    for round in 0..=MAX_ROUNDS {
        let full = round == MAX_ROUNDS;
        if full && active.len() < n {
            let mut weights = vec![0.0; n];
            for (a, &j) in active.iter().enumerate() {
                weights[j] = lambda[a];
            }
            active = (0..n).collect();
            lambda = weights;
        }
        let sub = Restricted::new(active.clone(), &s0, potential, epsilon);
        sub.solve(&mut lambda, 0.5 * tol);

        let m = sub.mean(&lambda);
        let mut inner = 0.0;
        for (a, &j) in active.iter().enumerate() {
            inner += lambda[a] * (s0[j] - epsilon * dot(targets.row(j), &m));
        }
        let g_all: Vec<f64> = (0..n).map(|j| s0[j] - epsilon * dot(targets.row(j), &m)).collect();
        let top = g_all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gap = (top - inner).max(0.0);
        last_gap = gap;
        if gap <= tol {
            let value = dot(&lambda, &sub.s0) - 0.5 * epsilon * dot(&m, &m);
            let y0 = x.iter().zip(&m).map(|(xi, mi)| xi - epsilon * mi).collect();
            let lambda = active.iter().zip(&lambda).filter(|(_, &l)| l > 0.0).map(|(&j, &l)| (j, l)).collect();
            return Ok(Prox { gradient: m, y0, lambda, envelope: value, gap });
        }
        if full || active.len() == n {
            break;
        }
        let mut in_active = vec![false; n];
        active.iter().for_each(|&j| in_active[j] = true);
        let mut violators: Vec<usize> = (0..n).filter(|&j| !in_active[j] && g_all[j] > inner).collect();
        violators.sort_unstable_by(|a, b| g_all[*b].total_cmp(&g_all[*a]).then(a.cmp(b)));
        violators.truncate(active.len().max(ACTIVE_SET));
        lambda.extend(std::iter::repeat_n(0.0, violators.len()));
        active.extend(violators);
    }
    Err(Error::SolverFailure(format!("prox did not reach tolerance {tol:e}; last gap {last_gap:e}")))
}
