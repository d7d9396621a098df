//! Approximate effective accelerations over a horizon and the speed and
//! safety constraint functions built on them, with first and second
//! derivatives.

use nalgebra::{DMatrix, DVector};

use super::structural::{odd_lower, shifted_lower_ones};
use crate::platoon::VehicleParams;

/// Acceleration model of one follower at the current step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccelModel {
    pub c2: f64,
    pub c3: f64,
    pub v: f64,
    pub tau: f64,
    pub g: f64,
}

impl AccelModel {
    pub fn new(params: &VehicleParams, v: f64, tau: f64, g: f64) -> Self {
        Self { c2: params.c2, c3: params.c3, v, tau, g }
    }

    /// Approximate speeds v + τ(S̃u)_s entering the drag term of step s.
    fn drag_speeds(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::from_element(u.len(), self.v);
        let mut acc = 0.0;
        for s in 0..u.len() {
            out[s] += self.tau * acc;
            acc += u[s];
        }
        out
    }

    pub fn accel(&self, u: &DVector<f64>) -> DVector<f64> {
        let sp = self.drag_speeds(u);
        DVector::from_fn(u.len(), |s, _| u[s] - self.c2 * sp[s] * sp[s] - self.c3 * self.g)
    }

    pub fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let p = u.len();
        let sp = self.drag_speeds(u);
        let st = shifted_lower_ones(p);
        let mut jac = DMatrix::identity(p, p);
        for s in 0..p {
            for t in 0..s {
                jac[(s, t)] -= 2.0 * self.c2 * self.tau * sp[s] * st[(s, t)];
            }
        }
        jac
    }

    /// Hessian of the s-th approximate acceleration (0-based), independent of u.
    pub fn accel_hessian(&self, p: usize, s: usize) -> DMatrix<f64> {
        let k = -2.0 * self.c2 * self.tau * self.tau;
        DMatrix::from_fn(p, p, |a, b| if a < s && b < s { k } else { 0.0 })
    }

    /// Exact recursion of the nonlinear model over the horizon.
    pub fn exact_accel(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut v = self.v;
        DVector::from_fn(u.len(), |s, _| {
            let a = u[s] - self.c2 * v * v - self.c3 * self.g;
            v += self.tau * a;
            a
        })
    }

    /// Predicted speed after j steps (1-based) with gradient.
    pub fn speed(&self, u: &DVector<f64>, j: usize) -> (f64, DVector<f64>) {
        let a = self.accel(u);
        let jac = self.jacobian(u);
        let val = self.v + self.tau * a.rows(0, j).sum();
        let grad = jac.rows(0, j).row_sum().transpose() * self.tau;
        (val, grad)
    }

    pub fn speed_hessian(&self, p: usize, j: usize) -> DMatrix<f64> {
        (0..j).map(|s| self.accel_hessian(p, s)).fold(DMatrix::zeros(p, p), |a, b| a + b) * self.tau
    }
}

pub fn approx_accel_map(params: &VehicleParams, v: f64, u: &DVector<f64>, tau: f64, g: f64) -> DVector<f64> {
    AccelModel::new(params, v, tau, g).accel(u)
}

pub fn approx_accel_jacobian(params: &VehicleParams, v: f64, u: &DVector<f64>, tau: f64) -> DMatrix<f64> {
    AccelModel::new(params, v, tau, 0.0).jacobian(u)
}

pub fn speed_constraint_fn(params: &VehicleParams, v: f64, u: &DVector<f64>, j: usize, tau: f64, g: f64) -> (f64, DVector<f64>) {
    AccelModel::new(params, v, tau, g).speed(u, j)
}

/// The vehicle ahead of a follower: the leader with a constant plan or a
/// controlled vehicle with its own acceleration model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Predecessor {
    Leader { u0: f64 },
    Vehicle(AccelModel),
}

/// Data of the safety constraint between vehicle i and its predecessor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SafetyPair {
    pub length: f64,
    pub reaction: f64,
    pub a_min: f64,
    pub v_min: f64,
    /// x_{i-1} - x_i.
    pub gap: f64,
    /// v_{i-1} - v_i.
    pub rel: f64,
    pub own: AccelModel,
    pub pred: Predecessor,
}

#[derive(Clone, Debug)]
pub struct SafetyEval {
    pub value: f64,
    pub grad_own: DVector<f64>,
    pub grad_pred: Option<DVector<f64>>,
    pub hess_own: DMatrix<f64>,
    pub hess_pred: Option<DMatrix<f64>>,
}

impl SafetyPair {
    /// Approximate safety function at step j (1-based); nonpositive is safe.
    pub fn eval(&self, u_pred: Option<&DVector<f64>>, u_own: &DVector<f64>, j: usize) -> SafetyEval {
        let p = u_own.len();
        let tau = self.own.tau;
        let r = odd_lower(p);
        let (q, dq) = self.own.speed(u_own, j);
        let a_own = self.own.accel(u_own);
        let jac_own = self.own.jacobian(u_own);
        let half = 0.5 * tau * tau;
        let pred_term = match (&self.pred, u_pred) {
            (Predecessor::Leader { u0 }, _) => (0..j).map(|s| r[(j - 1, s)] * u0).sum::<f64>(),
            (Predecessor::Vehicle(m), Some(up)) => {
                let a = m.accel(up);
                (0..j).map(|s| r[(j - 1, s)] * a[s]).sum()
            }
            (Predecessor::Vehicle(_), None) => panic!("predecessor plan required"),
        };
        let own_term: f64 = (0..j).map(|s| r[(j - 1, s)] * a_own[s]).sum();
        let value = self.length + self.reaction * q - (q - self.v_min).powi(2) / (2.0 * self.a_min)
            - self.gap
            - j as f64 * tau * self.rel
            - half * (pred_term - own_term);
        let slope = self.reaction - (q - self.v_min) / self.a_min;
        let rj = r.row(j - 1).transpose();
        let grad_own = &dq * slope + jac_own.transpose() * &rj * half;
        let mut hess_own = self.own.speed_hessian(p, j) * slope - (&dq * dq.transpose()) / self.a_min;
        for s in 0..j {
            hess_own += self.own.accel_hessian(p, s) * (half * r[(j - 1, s)]);
        }
        let (grad_pred, hess_pred) = match (&self.pred, u_pred) {
            (Predecessor::Vehicle(m), Some(up)) => {
                let g = m.jacobian(up).transpose() * &rj * (-half);
                let mut h = DMatrix::zeros(p, p);
                for s in 0..j {
                    h -= m.accel_hessian(p, s) * (half * r[(j - 1, s)]);
                }
                (Some(g), Some(h))
            }
            _ => (None, None),
        };
        SafetyEval { value, grad_own, grad_pred, hess_own, hess_pred }
    }
}
