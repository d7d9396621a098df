use nalgebra::{DMatrix, DVector};

use super::structural::{build_structural, grouped_index};
use crate::error::{PlatoonError, Result};
use crate::platoon::{PlatoonConfig, TrackingState};
use crate::presets::WeightSchedule;

/// J(u) = ½ aᵀ V a + cᵀ a + γ + τ²/2 uᵀ Ψ u with V = W − τ²Ψ, where a is the
/// stacked effective acceleration plan grouped by vehicle.
#[derive(Clone, Debug)]
pub struct QuadraticModel {
    pub n: usize,
    pub p: usize,
    pub tau: f64,
    pub w: DMatrix<f64>,
    pub psi: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub c: DVector<f64>,
    pub gamma: f64,
    /// γ split by vehicle pair (i-1, i).
    pub gamma_parts: Vec<f64>,
}

impl QuadraticModel {
    pub fn objective(&self, a: &DVector<f64>, u: &DVector<f64>) -> f64 {
        0.5 * a.dot(&(&self.v * a))
            + self.c.dot(a)
            + self.gamma
            + 0.5 * self.tau * self.tau * u.dot(&(&self.psi * u))
    }

    /// Objective of the double integrator, where a = u.
    pub fn objective_linear(&self, u: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(&self.w * u)) + self.c.dot(u) + self.gamma
    }

    /// Slice of c belonging to vehicle `i` (1-based).
    pub fn c_block(&self, i: usize) -> DVector<f64> {
        self.c.rows((i - 1) * self.p, self.p).into_owned()
    }
}

/// Weight on position error j steps ahead of each earlier step's relative
/// acceleration: τ²(2(j-s)-1)/2 for s = 0..j-1.
pub fn spacing_coefficients(tau: f64, j: usize) -> Vec<f64> {
    (0..j).map(|s| 0.5 * tau * tau * (2 * (j - s) - 1) as f64).collect()
}

/// Ψ = Eᵀ diag(S_n⁻ᵀ Q_{w,s} S_n⁻¹) E.
pub fn comfort_matrix(weights: &WeightSchedule, n: usize) -> DMatrix<f64> {
    let p = weights.p;
    let st = build_structural(n, p);
    let mut inner = DMatrix::zeros(n * p, n * p);
    for s in 0..p {
        let q = DMatrix::from_diagonal(&DVector::from_column_slice(&weights.zeta[s]));
        let blk = st.s_n_inv.transpose() * q * &st.s_n_inv;
        inner.view_mut((s * n, s * n), (n, n)).copy_from(&blk);
    }
    st.e.transpose() * inner * &st.e
}

pub fn assemble_quadratic_model(
    config: &PlatoonConfig,
    weights: &WeightSchedule,
    tracking: &TrackingState,
    u0: f64,
) -> Result<QuadraticModel> {
    let n = config.n();
    weights.validate(n)?;
    if tracking.z.len() != n || tracking.zp.len() != n {
        return Err(PlatoonError::DimensionMismatch { what: "tracking state", expected: n, got: tracking.z.len() });
    }
    let p = weights.p;
    let tau = config.tau;
    let dim = n * p;
    let mut w = DMatrix::zeros(dim, dim);
    let mut c = DVector::zeros(dim);
    let mut gamma_parts = vec![0.0; n];
    let mut row = DVector::zeros(dim);
    for i in 0..n {
        for j in 1..=p {
            let spacing = spacing_coefficients(tau, j);
            let speed = vec![tau; j];
            let terms = [
                (weights.alpha[j - 1][i], &spacing, tracking.z[i] + j as f64 * tau * tracking.zp[i]),
                (weights.beta[j - 1][i], &speed, tracking.zp[i]),
            ];
            for (weight, coef, base) in terms {
                row.fill(0.0);
                let mut off = base;
                for (s, &k) in coef.iter().enumerate() {
                    if i == 0 {
                        off += k * u0;
                    } else {
                        row[grouped_index(p, i - 1, s)] += k;
                    }
                    row[grouped_index(p, i, s)] -= k;
                }
                w.ger(weight, &row, &row, 1.0);
                c.axpy(weight * off, &row, 1.0);
                gamma_parts[i] += 0.5 * weight * off * off;
            }
        }
    }
    let psi = comfort_matrix(weights, n);
    let v = w.clone();
    w += &psi * (tau * tau);
    Ok(QuadraticModel { n, p, tau, w, psi, v, c, gamma: gamma_parts.iter().sum(), gamma_parts })
}
