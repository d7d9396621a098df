//! Linear closed loop of the unconstrained drag-free controller.

use nalgebra::{DMatrix, DVector};

use crate::assembly::assemble_quadratic_model;
use crate::error::{PlatoonError, Result};
use crate::platoon::{PlatoonConfig, TrackingState};
use crate::presets::WeightSchedule;

/// Closed-loop data in the tracking coordinates x = [z; z′].
///
/// The controller minimizes ½uᵀHu + (Gx − u₀g)ᵀu over vehicle-grouped plans,
/// so the applied controls are u = Kx + u₀d and x⁺ = A_c x + u₀·`affine`.
#[derive(Clone, Debug)]
pub struct ClosedLoopMatrices {
    pub n: usize,
    pub p: usize,
    pub a: DMatrix<f64>,
    /// Follower controls to tracking state.
    pub b: DMatrix<f64>,
    /// Leader input direction.
    pub b0: DVector<f64>,
    pub h: DMatrix<f64>,
    pub g_mat: DMatrix<f64>,
    pub g_vec: DVector<f64>,
    pub k: DMatrix<f64>,
    pub d: DVector<f64>,
    pub a_c: DMatrix<f64>,
    pub affine: DVector<f64>,
}

impl ClosedLoopMatrices {
    pub fn step(&self, x: &DVector<f64>, u0: f64) -> DVector<f64> {
        &self.a_c * x + &self.affine * u0
    }

    pub fn controls(&self, x: &DVector<f64>, u0: f64) -> DVector<f64> {
        &self.k * x + &self.d * u0
    }
}

/// (Eu)_i = u_{i−1} − u_i with u_0 = 0.
pub fn difference_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            -1.0
        } else if r == c + 1 {
            1.0
        } else {
            0.0
        }
    })
}

/// Double integrator in tracking coordinates: (A, B_w) with
/// z⁺ = z + τz′ + τ²/2·w and z′⁺ = z′ + τw.
pub fn tracking_dynamics(n: usize, tau: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut a = DMatrix::identity(2 * n, 2 * n);
    let mut bw = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        a[(i, n + i)] = tau;
        bw[(i, i)] = 0.5 * tau * tau;
        bw[(n + i, i)] = tau;
    }
    (a, bw)
}

fn tracking_unit(n: usize, k: usize) -> TrackingState {
    let mut t = TrackingState::zeros(n);
    if k < n {
        t.z[k] = 1.0;
    } else {
        t.zp[k - n] = 1.0;
    }
    t
}

pub fn build_closed_loop(config: &PlatoonConfig, weights: &WeightSchedule) -> Result<ClosedLoopMatrices> {
    config.validate()?;
    let n = config.n();
    let p = weights.p;
    let tau = config.tau;
    let base = assemble_quadratic_model(config, weights, &TrackingState::zeros(n), 0.0)?;
    let h = base.w.clone();
    let mut g_mat = DMatrix::zeros(n * p, 2 * n);
    for k in 0..2 * n {
        let m = assemble_quadratic_model(config, weights, &tracking_unit(n, k), 0.0)?;
        g_mat.set_column(k, &m.c);
    }
    let g_vec = -assemble_quadratic_model(config, weights, &TrackingState::zeros(n), 1.0)?.c;
    let chol = h.clone().cholesky().ok_or_else(|| PlatoonError::InvalidConfig("H is not positive definite".into()))?;
    let hg = chol.solve(&g_mat);
    let hv = chol.solve(&g_vec);
    let k = DMatrix::from_fn(n, 2 * n, |i, c| -hg[(i * p, c)]);
    let d = DVector::from_fn(n, |i, _| hv[i * p]);
    let (a, bw) = tracking_dynamics(n, tau);
    let b = &bw * difference_matrix(n);
    let b0 = bw.column(0).into_owned();
    let a_c = &a + &b * &k;
    let affine = &b * &d + &b0;
    Ok(ClosedLoopMatrices { n, p, a, b, b0, h, g_mat, g_vec, k, d, a_c, affine })
}

/// One-step closed loop written in the relative inputs w_i = u_{i−1} − u_i:
/// w = −Ŵ[Q_z/2·(z + τz′) + Q_z′z′/τ] with Ŵ = [τ²Q_z/4 + Q_z′ + Q_w]⁻¹.
pub fn one_step_closed_loop(config: &PlatoonConfig, weights: &WeightSchedule) -> Result<DMatrix<f64>> {
    if weights.p != 1 {
        return Err(PlatoonError::InvalidConfig("the one-step closed form needs p = 1".into()));
    }
    let n = config.n();
    let tau = config.tau;
    let mut kw = DMatrix::zeros(n, 2 * n);
    for i in 0..n {
        let (qz, qzp, qw) = (weights.alpha[0][i], weights.beta[0][i], weights.zeta[0][i]);
        let w_hat = 1.0 / (tau * tau * qz / 4.0 + qzp + qw);
        kw[(i, i)] = -w_hat * qz / 2.0;
        kw[(i, n + i)] = -w_hat * (tau * qz / 2.0 + qzp / tau);
    }
    let (a, bw) = tracking_dynamics(n, tau);
    Ok(a + bw * kw)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchurCheck {
    pub radius: f64,
    pub stable: bool,
}

pub fn schur_check(a_c: &DMatrix<f64>) -> SchurCheck {
    let radius = a_c.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    SchurCheck { radius, stable: radius < 1.0 - 1e-9 }
}

fn cumulative(zp: &DVector<f64>) -> DVector<f64> {
    let mut acc = 0.0;
    zp.map(|x| {
        acc += x;
        acc
    })
}

/// D(φ_d) = −2·S⁻¹diag(c₂)S with S the lower-triangular ones matrix.
pub fn drag_matrix(config: &PlatoonConfig) -> DMatrix<f64> {
    let n = config.n();
    let s = DMatrix::from_fn(n, n, |r, c| if r >= c { 1.0 } else { 0.0 });
    let s_inv = -difference_matrix(n);
    let c2 = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| config.c2(i + 1)));
    s_inv * c2 * s * -2.0
}

/// Drag mismatch h_i(z′, v₀) = c₂ᵢ(vᵢ² − v₀²) − c₂,ᵢ₋₁(vᵢ₋₁² − v₀²), where
/// vᵢ = v₀ − Σ_{k≤i} z′_k.
pub fn drag_mismatch(config: &PlatoonConfig, zp: &DVector<f64>, v0: f64) -> DVector<f64> {
    let s = cumulative(zp);
    let term = |i: usize| -> f64 {
        if i == 0 {
            return 0.0;
        }
        let v = v0 - s[i - 1];
        config.c2(i) * (v * v - v0 * v0)
    };
    DVector::from_fn(zp.len(), |r, _| term(r + 1) - term(r))
}

/// Quadratic remainder h̃(z′) = h(z′, v₀) − v₀·D(φ_d)z′, independent of v₀.
pub fn h_tilde(config: &PlatoonConfig, zp: &DVector<f64>) -> DVector<f64> {
    let s = cumulative(zp);
    let term = |i: usize| if i == 0 { 0.0 } else { config.c2(i) * s[i - 1] * s[i - 1] };
    DVector::from_fn(zp.len(), |r, _| term(r + 1) - term(r))
}

/// Linear drag perturbation of the tracking dynamics at speed v₀.
pub fn drag_perturbation(config: &PlatoonConfig, v0: f64) -> DMatrix<f64> {
    let n = config.n();
    let tau = config.tau;
    let d = drag_matrix(config) * v0;
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, n), (n, n)).copy_from(&(&d * (0.5 * tau * tau)));
    out.view_mut((n, n), (n, n)).copy_from(&(&d * tau));
    out
}
