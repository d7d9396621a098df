use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::quadratic::QuadraticModel;
use crate::error::{PlatoonError, Result};

const PSD_TOL: f64 = 1e-10;

/// Per-agent split of W and Ψ. Block s covers vehicles `blocks[s-1]`, the
/// agent itself plus its predecessor and successor where they exist.
#[derive(Clone, Debug)]
pub struct DecomposedModel {
    pub n: usize,
    pub p: usize,
    pub blocks: Vec<Vec<usize>>,
    pub w_hat: Vec<DMatrix<f64>>,
    pub psi_hat: Vec<DMatrix<f64>>,
    pub v_hat: Vec<DMatrix<f64>>,
    pub c_slices: Vec<DVector<f64>>,
    pub gamma_parts: Vec<f64>,
}

impl DecomposedModel {
    fn embed(&self, s: usize, m: &DMatrix<f64>) -> DMatrix<f64> {
        let p = self.p;
        let mut out = DMatrix::zeros(self.n * p, self.n * p);
        for (a, &va) in self.blocks[s].iter().enumerate() {
            for (b, &vb) in self.blocks[s].iter().enumerate() {
                out.view_mut(((va - 1) * p, (vb - 1) * p), (p, p))
                    .copy_from(&m.view((a * p, b * p), (p, p)));
            }
        }
        out
    }

    pub fn reconstruct_w(&self) -> DMatrix<f64> {
        (0..self.n).map(|s| self.embed(s, &self.w_hat[s])).fold(DMatrix::zeros(self.n * self.p, self.n * self.p), |a, b| a + b)
    }

    pub fn reconstruct_psi(&self) -> DMatrix<f64> {
        (0..self.n).map(|s| self.embed(s, &self.psi_hat[s])).fold(DMatrix::zeros(self.n * self.p, self.n * self.p), |a, b| a + b)
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

fn block(m: &DMatrix<f64>, p: usize, i: usize, j: usize) -> DMatrix<f64> {
    m.view(((i - 1) * p, (j - 1) * p), (p, p)).into_owned()
}

fn vehicle_blocks(n: usize) -> Vec<Vec<usize>> {
    (1..=n).map(|s| (s.saturating_sub(1).max(1)..=(s + 1).min(n)).collect()).collect()
}

/// Splits a block-tridiagonal matrix that is a sum of pair terms
/// [[Θ, -Θ], [-Θ, Θ]] on (i-1, i) plus Θ_1 on (1, 1).
fn split_chain(m: &DMatrix<f64>, n: usize, p: usize, blocks: &[Vec<usize>]) -> Result<Vec<DMatrix<f64>>> {
    let scale = 1.0 + m.amax();
    for i in 1..=n {
        for j in (i + 2)..=n {
            if block(m, p, i, j).amax() > 1e-12 * scale {
                return Err(PlatoonError::InvalidConfig(format!(
                    "matrix couples non-adjacent vehicles {i} and {j}"
                )));
            }
        }
    }
    let mut theta = vec![DMatrix::zeros(p, p); n + 2];
    for i in 2..=n {
        let t = -block(m, p, i - 1, i);
        theta[i] = (&t + t.transpose()) * 0.5;
    }
    theta[1] = block(m, p, 1, 1) - &theta[2];
    let mut out: Vec<DMatrix<f64>> = blocks.iter().map(|b| DMatrix::zeros(b.len() * p, b.len() * p)).collect();
    let pos = |s: usize, v: usize| blocks[s - 1].iter().position(|&x| x == v).unwrap() * p;
    let mut add = |s: usize, i: usize, j: usize, blk: &DMatrix<f64>| {
        let (a, b) = (pos(s, i), pos(s, j));
        let mut view = out[s - 1].view_mut((a, b), (p, p));
        view += blk;
    };
    add(1, 1, 1, &theta[1]);
    for i in 2..=n {
        let half = &theta[i] * 0.5;
        for s in [i - 1, i] {
            add(s, i - 1, i - 1, &half);
            add(s, i, i, &half);
            add(s, i - 1, i, &(-&half));
            add(s, i, i - 1, &(-&half));
        }
    }
    for i in 1..=n {
        let resid = block(m, p, i, i) - &theta[i] - &theta[i + 1];
        if i > 1 {
            add(i, i, i, &resid);
        }
    }
    Ok(out)
}

pub fn decompose_model(model: &QuadraticModel) -> Result<DecomposedModel> {
    let (n, p) = (model.n, model.p);
    let blocks = vehicle_blocks(n);
    let w_hat = split_chain(&model.w, n, p, &blocks)?;
    let psi_hat = split_chain(&model.psi, n, p, &blocks)?;
    let tau2 = model.tau * model.tau;
    let v_hat: Vec<DMatrix<f64>> = w_hat.iter().zip(&psi_hat).map(|(w, s)| w - s * tau2).collect();
    for (s, m) in w_hat.iter().chain(&psi_hat).chain(&v_hat).enumerate() {
        let e = min_eigenvalue(m);
        if e < -PSD_TOL * (1.0 + m.amax()) {
            return Err(PlatoonError::PsdRepairFailed { block: s % n + 1, min_eig: e });
        }
    }
    Ok(DecomposedModel {
        n,
        p,
        blocks,
        w_hat,
        psi_hat,
        v_hat,
        c_slices: (1..=n).map(|i| model.c_block(i)).collect(),
        gamma_parts: model.gamma_parts.clone(),
    })
}
