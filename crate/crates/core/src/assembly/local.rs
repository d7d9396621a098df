use nalgebra::{DMatrix, DVector};

use super::approx::{AccelModel, Predecessor, SafetyEval, SafetyPair};
use super::decompose::{decompose_model, DecomposedModel};
use super::quadratic::{assemble_quadratic_model, QuadraticModel};
use super::restricted::{restricted_set, RestrictedSet};
use crate::error::{PlatoonError, Result};
use crate::platoon::{PlatoonConfig, PlatoonState, TrackingState};
use crate::presets::WeightSchedule;

/// Everything needed to pose the horizon-p MPC problem at one sample time.
#[derive(Clone, Debug)]
pub struct MpcProblem {
    pub config: PlatoonConfig,
    pub p: usize,
    pub state: PlatoonState,
    pub tracking: TrackingState,
    pub model: QuadraticModel,
    pub decomposed: DecomposedModel,
}

#[derive(Clone, Debug)]
pub struct LocalEval {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl MpcProblem {
    pub fn new(config: &PlatoonConfig, weights: &WeightSchedule, state: &PlatoonState) -> Result<Self> {
        let tracking = TrackingState::from_state(state, config.delta);
        let model = assemble_quadratic_model(config, weights, &tracking, state.u0)?;
        let decomposed = decompose_model(&model)?;
        Ok(Self { config: config.clone(), p: weights.p, state: state.clone(), tracking, model, decomposed })
    }

    pub fn n(&self) -> usize {
        self.config.n()
    }

    pub fn dim(&self) -> usize {
        self.n() * self.p
    }

    pub fn accel_model(&self, i: usize) -> AccelModel {
        AccelModel::new(self.config.vehicle(i), self.state.v[i], self.config.tau, self.config.g)
    }

    pub fn safety_pair(&self, i: usize) -> SafetyPair {
        let prm = self.config.vehicle(i);
        SafetyPair {
            length: prm.length,
            reaction: prm.reaction_time,
            a_min: prm.a_min,
            v_min: self.config.v_min,
            gap: self.state.x[i - 1] - self.state.x[i],
            rel: self.state.v[i - 1] - self.state.v[i],
            own: self.accel_model(i),
            pred: if i == 1 {
                Predecessor::Leader { u0: self.state.u0 }
            } else {
                Predecessor::Vehicle(self.accel_model(i - 1))
            },
        }
    }

    /// Block of vehicle `i` (1-based) in a vehicle-grouped plan.
    pub fn block(&self, u: &DVector<f64>, i: usize) -> DVector<f64> {
        u.rows((i - 1) * self.p, self.p).into_owned()
    }

    pub fn accel_plan(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut a = DVector::zeros(self.dim());
        for i in 1..=self.n() {
            a.rows_mut((i - 1) * self.p, self.p).copy_from(&self.accel_model(i).accel(&self.block(u, i)));
        }
        a
    }

    /// J(u) with approximate accelerations.
    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        self.model.objective(&self.accel_plan(u), u)
    }

    /// J_i over the vehicles `decomposed.blocks[i-1]`; `u_local` stacks those
    /// vehicles' plans in order.
    pub fn local_objective(&self, i: usize, u_local: &DVector<f64>) -> LocalEval {
        let p = self.p;
        let blocks = &self.decomposed.blocks[i - 1];
        let dim = blocks.len() * p;
        let mut a = DVector::zeros(dim);
        let mut jac = DMatrix::zeros(dim, dim);
        let models: Vec<AccelModel> = blocks.iter().map(|&b| self.accel_model(b)).collect();
        for (k, m) in models.iter().enumerate() {
            let ub = u_local.rows(k * p, p).into_owned();
            a.rows_mut(k * p, p).copy_from(&m.accel(&ub));
            jac.view_mut((k * p, k * p), (p, p)).copy_from(&m.jacobian(&ub));
        }
        let own = blocks.iter().position(|&b| b == i).unwrap();
        let mut lin = DVector::zeros(dim);
        lin.rows_mut(own * p, p).copy_from(&self.decomposed.c_slices[i - 1]);
        let v = &self.decomposed.v_hat[i - 1];
        let psi = &self.decomposed.psi_hat[i - 1];
        let tau2 = self.config.tau * self.config.tau;
        let va = v * &a;
        let value = 0.5 * a.dot(&va) + lin.dot(&a) + self.decomposed.gamma_parts[i - 1]
            + 0.5 * tau2 * u_local.dot(&(psi * u_local));
        let outer = va + lin;
        let grad = jac.transpose() * &outer + psi * u_local * tau2;
        let mut hess = jac.transpose() * v * &jac + psi * tau2;
        for (k, m) in models.iter().enumerate() {
            for s in 0..p {
                let w = outer[k * p + s];
                if w != 0.0 && m.c2 != 0.0 {
                    let h = m.accel_hessian(p, s) * w;
                    let mut view = hess.view_mut((k * p, k * p), (p, p));
                    view += h;
                }
            }
        }
        LocalEval { value, grad, hess }
    }

    /// Predicted speed of vehicle `i` after j steps with gradient.
    pub fn speed(&self, i: usize, u_i: &DVector<f64>, j: usize) -> (f64, DVector<f64>) {
        self.accel_model(i).speed(u_i, j)
    }

    pub fn safety(&self, i: usize, u_pred: Option<&DVector<f64>>, u_i: &DVector<f64>, j: usize) -> SafetyEval {
        self.safety_pair(i).eval(u_pred, u_i, j)
    }

    pub fn restricted(&self, i: usize) -> RestrictedSet {
        restricted_set(&self.safety_pair(i), self.config.v_max, self.p)
    }

    /// Largest violation of the control box, approximate speed bounds and
    /// approximate safety constraints by the plan `u`.
    pub fn violation(&self, u: &DVector<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 1..=self.n() {
            let prm = self.config.vehicle(i);
            let ui = self.block(u, i);
            let up = (i > 1).then(|| self.block(u, i - 1));
            for j in 1..=self.p {
                worst = worst.max(prm.a_min - ui[j - 1]).max(ui[j - 1] - prm.a_max);
                let (q, _) = self.speed(i, &ui, j);
                worst = worst.max(self.config.v_min - q).max(q - self.config.v_max);
                worst = worst.max(self.safety(i, up.as_ref(), &ui, j).value);
            }
        }
        worst
    }

    /// Drag-compensating plan: zero effective acceleration at the current speed.
    pub fn cruise_plan(&self) -> DVector<f64> {
        let mut u = DVector::zeros(self.dim());
        for i in 1..=self.n() {
            let prm = self.config.vehicle(i);
            let v = self.state.v[i];
            let c = (prm.c2 * v * v + prm.c3 * self.config.g).clamp(prm.a_min, prm.a_max);
            u.rows_mut((i - 1) * self.p, self.p).fill(c);
        }
        u
    }

    pub fn check_plan(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.dim() {
            return Err(PlatoonError::DimensionMismatch { what: "control plan", expected: self.dim(), got: u.len() });
        }
        Ok(())
    }
}
