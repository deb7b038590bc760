//! Dense strictly convex QP with inequality constraints,
//!
//! ```text
//! minimize  x'Hx/2 + q'x   subject to  Gx <= h
//! ```
//!
//! solved with the Goldfarb-Idnani dual active-set method. `H` and `G` are
//! fixed per instance so `H^-1 G'` and `G H^-1 G'` are formed once; every
//! iteration then only factors the small active-set block.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers, one per constraint row, zero when inactive.
    pub lambda: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
}

/// Primal violation accepted as feasible, absolute.
const FEAS_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DenseQp {
    h: DMatrix<f64>,
    h_inv: DMatrix<f64>,
    g: DMatrix<f64>,
    /// `H^-1 G'`, one column per constraint.
    z: DMatrix<f64>,
    /// `G H^-1 G'`.
    m: DMatrix<f64>,
}

impl DenseQp {
    /// `h` must be symmetric positive semidefinite; a small diagonal shift is
    /// added if its Cholesky factorization fails.
    pub fn new(h: DMatrix<f64>, g: DMatrix<f64>) -> Self {
        assert_eq!(h.nrows(), h.ncols());
        assert_eq!(g.ncols(), h.ncols());
        let n = h.nrows();
        let mut h = h;
        let chol = match Cholesky::new(h.clone()) {
            Some(c) => c,
            None => {
                let scale = h.diagonal().iter().fold(1.0f64, |acc, d| acc.max(d.abs()));
                for i in 0..n {
                    h[(i, i)] += 1e-10 * scale;
                }
                Cholesky::new(h.clone()).expect("regularized Hessian is positive definite")
            }
        };
        let h_inv = chol.inverse();
        let z = &h_inv * g.transpose();
        let m = &g * &z;
        Self { h, h_inv, g, z, m }
    }

    pub fn n(&self) -> usize {
        self.h.nrows()
    }

    pub fn m(&self) -> usize {
        self.g.nrows()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn constraints(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn objective(&self, q: &DVector<f64>, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + q.dot(x)
    }

    fn slack(&self, x: &DVector<f64>, h: &DVector<f64>, i: usize) -> f64 {
        self.g.row(i).transpose().dot(x) - h[i]
    }

    fn factor_active(&self, active: &[usize]) -> Option<Cholesky<f64, Dyn>> {
        let k = active.len();
        let block = DMatrix::from_fn(k, k, |r, c| self.m[(active[r], active[c])]);
        Cholesky::new(block)
    }

    pub fn solve(&self, q: &DVector<f64>, h: &DVector<f64>) -> QpSolution {
        let (n, m) = (self.n(), self.m());
        assert_eq!(q.len(), n);
        assert_eq!(h.len(), m);
        let max_iter = 10 * (n + m) + 50;

        let mut x = -(&self.h_inv * q);
        let mut active: Vec<usize> = Vec::new();
        let mut lam: Vec<f64> = Vec::new();
        let mut in_active = vec![false; m];
        let mut iterations = 0;

        let finish = |x: DVector<f64>, active: &[usize], lam: &[f64], status, iterations| {
            let mut lambda = DVector::zeros(m);
            for (&i, &l) in active.iter().zip(lam) {
                lambda[i] = l;
            }
            QpSolution {
                x,
                lambda,
                status,
                iterations,
            }
        };

        loop {
            // Most violated constraint, normalized by its row norm in the
            // H^-1 metric.
            let mut pick = None;
            let mut worst = 0.0;
            for i in 0..m {
                if in_active[i] {
                    continue;
                }
                let s = self.slack(&x, h, i);
                if s > FEAS_TOL {
                    let score = s / self.m[(i, i)].sqrt();
                    if score > worst {
                        worst = score;
                        pick = Some(i);
                    }
                }
            }
            let Some(p) = pick else {
                return finish(x, &active, &lam, QpStatus::Optimal, iterations);
            };

            let mut lam_p = 0.0;
            loop {
                iterations += 1;
                if iterations > max_iter {
                    return finish(x, &active, &lam, QpStatus::IterationLimit, iterations);
                }
                // Dual direction r and primal direction z for adding p.
                let r = if active.is_empty() {
                    DVector::zeros(0)
                } else {
                    let rhs = DVector::from_iterator(active.len(), active.iter().map(|&i| self.m[(i, p)]));
                    match self.factor_active(&active) {
                        Some(ch) => ch.solve(&rhs),
                        None => return finish(x, &active, &lam, QpStatus::IterationLimit, iterations),
                    }
                };
                let mut z = self.z.column(p).clone_owned();
                for (k, &i) in active.iter().enumerate() {
                    z.axpy(-r[k], &self.z.column(i), 1.0);
                }
                let gz = self.m[(p, p)]
                    - active
                        .iter()
                        .enumerate()
                        .map(|(k, &i)| self.m[(p, i)] * r[k])
                        .sum::<f64>();

                // Largest dual step keeping the active multipliers >= 0.
                let mut t1 = f64::INFINITY;
                let mut drop = None;
                for (k, &rk) in r.iter().enumerate() {
                    if rk > 1e-12 {
                        let t = lam[k] / rk;
                        if t < t1 {
                            t1 = t;
                            drop = Some(k);
                        }
                    }
                }
                // Full step that makes p active.
                let s_p = self.slack(&x, h, p);
                let t2 = if gz > 1e-12 * self.m[(p, p)] {
                    (s_p / gz).max(0.0)
                } else {
                    f64::INFINITY
                };

                if t1.is_infinite() && t2.is_infinite() {
                    return finish(x, &active, &lam, QpStatus::Infeasible, iterations);
                }
                let t = t1.min(t2);
                if t2.is_finite() {
                    x.axpy(-t, &z, 1.0);
                }
                for (k, l) in lam.iter_mut().enumerate() {
                    *l = (*l - t * r[k]).max(0.0);
                }
                lam_p += t;

                if t2 <= t1 {
                    active.push(p);
                    lam.push(lam_p);
                    in_active[p] = true;
                    break;
                }
                let k = drop.expect("finite t1 has a blocking constraint");
                in_active[active[k]] = false;
                active.remove(k);
                lam.remove(k);
            }
        }
    }

    /// Scaled KKT residual: the largest of relative stationarity, primal
    /// infeasibility, dual infeasibility and complementarity.
    pub fn kkt_residual(&self, q: &DVector<f64>, h: &DVector<f64>, sol: &QpSolution) -> f64 {
        let hx = &self.h * &sol.x;
        let gl = self.g.transpose() * &sol.lambda;
        let grad = &hx + q + &gl;
        let scale = 1.0f64.max(q.amax()).max(hx.amax()).max(gl.amax());
        let stationarity = grad.amax() / scale;

        let slack = &self.g * &sol.x - h;
        let h_scale = 1.0f64.max(h.amax());
        let primal = slack.iter().fold(0.0f64, |a, &s| a.max(s)) / h_scale;
        let lam_scale = 1.0f64.max(sol.lambda.amax());
        let dual = sol.lambda.iter().fold(0.0f64, |a, &l| a.max(-l)) / lam_scale;
        let comp = slack
            .iter()
            .zip(sol.lambda.iter())
            .fold(0.0f64, |a, (&s, &l)| a.max((s * l).abs()))
            / (scale * 1.0f64.max(sol.x.amax()));
        stationarity.max(primal).max(dual).max(comp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_minimum() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let g = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let qp = DenseQp::new(h, g);
        let q = DVector::from_vec(vec![-2.0, -4.0]);
        let sol = qp.solve(&q, &DVector::from_vec(vec![10.0]));
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-14 && (sol.x[1] - 1.0).abs() < 1e-14);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn box_projection() {
        // min |x - (3, -3)|^2 / 2 on the unit box.
        let h = DMatrix::identity(2, 2);
        let g = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let qp = DenseQp::new(h, g);
        let q = DVector::from_vec(vec![-3.0, 3.0]);
        let hv = DVector::from_element(4, 1.0);
        let sol = qp.solve(&q, &hv);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-12 && (sol.x[1] + 1.0).abs() < 1e-12);
        assert!((sol.lambda[0] - 2.0).abs() < 1e-12 && (sol.lambda[3] - 2.0).abs() < 1e-12);
        assert!(qp.kkt_residual(&q, &hv, &sol) < 1e-12);
    }

    #[test]
    fn coupled_constraint_drops_a_bound() {
        // min (x-2)^2 + (y-2)^2 s.t. x + y <= 2, x <= 0.5 -> (0.5, 1.5)
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        let qp = DenseQp::new(h, g);
        let q = DVector::from_vec(vec![-4.0, -4.0]);
        let hv = DVector::from_vec(vec![2.0, 0.5]);
        let sol = qp.solve(&q, &hv);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 0.5).abs() < 1e-12, "{}", sol.x);
        assert!((sol.x[1] - 1.5).abs() < 1e-12, "{}", sol.x);
        assert!(qp.kkt_residual(&q, &hv, &sol) < 1e-12);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let h = DMatrix::identity(1, 1);
        let g = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let qp = DenseQp::new(h, g);
        let sol = qp.solve(&DVector::from_vec(vec![0.0]), &DVector::from_vec(vec![-1.0, -1.0]));
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn singular_hessian_is_regularized() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let g = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -1.0]);
        let qp = DenseQp::new(h, g);
        let sol = qp.solve(&DVector::from_vec(vec![-1.0, 0.0]), &DVector::from_vec(vec![1.0, 1.0]));
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-6);
    }
}
