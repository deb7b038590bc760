use super::qp::{DenseQp, QpStatus};
use super::{cost, ControlPlan, GraspState, Limits, MpcParams, PlanStatus};
use crate::Result;
use nalgebra::{DMatrix, DVector};

/// The MPC problem with the dynamics eliminated: a QP in the input
/// sequence alone. Hessian and constraint matrix depend only on the
/// parameters, so one instance serves a whole closed-loop run.
#[derive(Debug, Clone)]
pub struct CondensedMpc {
    params: MpcParams,
    limits: Limits,
    /// Input-to-output rows for k = 0..=N: `c_k = free_c_k + gc[k] . a`.
    gc: Vec<DVector<f64>>,
    gv: Vec<DVector<f64>>,
    qp: DenseQp,
}

impl CondensedMpc {
    pub fn new(params: MpcParams, limits: Limits) -> Result<Self> {
        params.validate()?;
        limits.validate()?;
        let n = params.horizon;
        let dt = params.dt;
        let k_c = params.k_c_eff();

        let mut gc = vec![DVector::zeros(n)];
        let mut gp = vec![DVector::zeros(n)];
        let mut gv = vec![DVector::zeros(n)];
        for k in 0..n {
            let c = &gc[k] - &gv[k] * (k_c * dt);
            let mut p = &gp[k] + &gv[k] * dt;
            let mut v = gv[k].clone();
            p[k] += 0.5 * dt * dt;
            v[k] += dt;
            gc.push(c);
            gp.push(p);
            gv.push(v);
        }

        let mut h = DMatrix::identity(n, n) * params.q_a;
        for k in 1..=n {
            let w = if k == n { params.p_terminal } else { 1.0 };
            h.ger(w * params.q_c, &gc[k], &gc[k], 1.0);
            h.ger(w * params.q_v, &gv[k], &gv[k], 1.0);
        }

        let mut g = DMatrix::zeros(6 * n, n);
        for j in 0..n {
            g[(2 * j, j)] = 1.0;
            g[(2 * j + 1, j)] = -1.0;
        }
        for k in 1..=n {
            let rv = 2 * n + 2 * (k - 1);
            let rp = 4 * n + 2 * (k - 1);
            for j in 0..n {
                g[(rv, j)] = gv[k][j];
                g[(rv + 1, j)] = -gv[k][j];
                g[(rp, j)] = gp[k][j];
                g[(rp + 1, j)] = -gp[k][j];
            }
        }

        Ok(Self {
            params,
            limits,
            gc,
            gv,
            qp: DenseQp::new(h, g),
        })
    }

    pub fn params(&self) -> &MpcParams {
        &self.params
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }

    pub fn qp(&self) -> &DenseQp {
        &self.qp
    }

    /// Linear term and constraint bounds for an initial state.
    pub fn qp_data(&self, state: &GraspState) -> (DVector<f64>, DVector<f64>) {
        let n = self.params.horizon;
        let pr = &self.params;
        let lim = &self.limits;

        // Free response by the same recurrence as `predict`.
        let mut free = Vec::with_capacity(n + 1);
        let mut s = *state;
        free.push(s);
        for _ in 0..n {
            s = super::step_model(&s, 0.0, pr);
            free.push(s);
        }

        let mut q = DVector::zeros(n);
        for k in 1..=n {
            let w = if k == n { pr.p_terminal } else { 1.0 };
            q.axpy(w * pr.q_c * (free[k].c - pr.c_desired), &self.gc[k], 1.0);
            q.axpy(w * pr.q_v * free[k].v, &self.gv[k], 1.0);
        }

        let mut h = DVector::zeros(6 * n);
        for j in 0..n {
            h[2 * j] = lim.a_max;
            h[2 * j + 1] = lim.a_max;
        }
        for k in 1..=n {
            let rv = 2 * n + 2 * (k - 1);
            let rp = 4 * n + 2 * (k - 1);
            h[rv] = lim.v_max - free[k].v;
            h[rv + 1] = lim.v_max + free[k].v;
            h[rp] = lim.p_max - free[k].p;
            h[rp + 1] = free[k].p - lim.p_min;
        }
        (q, h)
    }

    pub fn solve(&self, state: &GraspState) -> Result<ControlPlan> {
        let (q, h) = self.qp_data(state);
        let sol = self.qp.solve(&q, &h);
        let kkt_residual = self.qp.kkt_residual(&q, &h, &sol);
        let status = match sol.status {
            QpStatus::Optimal => PlanStatus::Optimal,
            QpStatus::Infeasible => PlanStatus::Infeasible,
            QpStatus::IterationLimit => PlanStatus::IterationLimit,
        };
        let a_max = self.limits.a_max;
        let a: Vec<f64> = sol.x.iter().map(|&x| x.clamp(-a_max, a_max)).collect();
        let cost = cost(state, &a, &self.params)?;
        Ok(ControlPlan {
            a,
            cost,
            kkt_residual,
            status,
            iterations: sol.iterations,
        })
    }
}
