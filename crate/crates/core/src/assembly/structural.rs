use nalgebra::{DMatrix, DVector};

/// Fixed matrices of an n-vehicle, p-step horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuralMatrices {
    pub n: usize,
    pub p: usize,
    pub s_n: DMatrix<f64>,
    pub s_n_inv: DMatrix<f64>,
    pub s_p: DMatrix<f64>,
    /// Strictly lower-triangular ones: (S̃u)_s = Σ_{t<s} u_t.
    pub s_p_tilde: DMatrix<f64>,
    /// Maps vehicle-grouped stacking to time-stacked stacking.
    pub e: DMatrix<f64>,
    /// Row j holds 2j-1, ..., 3, 1.
    pub r_p: DMatrix<f64>,
    pub p_vec: DVector<f64>,
}

pub fn lower_ones(m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |i, j| if j <= i { 1.0 } else { 0.0 })
}

pub fn shifted_lower_ones(m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |i, j| if j < i { 1.0 } else { 0.0 })
}

pub fn odd_lower(m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |i, j| if j <= i { (2 * (i - j) + 1) as f64 } else { 0.0 })
}

/// Index of (vehicle i, step s) in the vehicle-grouped stacking; both 0-based.
pub fn grouped_index(p: usize, i: usize, s: usize) -> usize {
    i * p + s
}

/// Index of (vehicle i, step s) in the time-stacked stacking; both 0-based.
pub fn time_index(n: usize, i: usize, s: usize) -> usize {
    s * n + i
}

pub fn permutation_e(n: usize, p: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(n * p, n * p);
    for i in 0..n {
        for s in 0..p {
            e[(time_index(n, i, s), grouped_index(p, i, s))] = 1.0;
        }
    }
    e
}

pub fn build_structural(n: usize, p: usize) -> StructuralMatrices {
    let s_n_inv = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else if i == j + 1 {
            -1.0
        } else {
            0.0
        }
    });
    StructuralMatrices {
        n,
        p,
        s_n: lower_ones(n),
        s_n_inv,
        s_p: lower_ones(p),
        s_p_tilde: shifted_lower_ones(p),
        e: permutation_e(n, p),
        r_p: odd_lower(p),
        p_vec: DVector::from_fn(p, |j, _| (j + 1) as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        let m = build_structural(2, 1);
        assert_eq!(m.s_n, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]));
        assert_eq!(m.s_n_inv, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 1.0]));
        assert_eq!(m.e, DMatrix::identity(2, 2));
        assert_eq!(&m.s_n * &m.s_n_inv, DMatrix::identity(2, 2));
        let r = odd_lower(3);
        assert_eq!(r.row(2).iter().copied().collect::<Vec<_>>(), vec![5.0, 3.0, 1.0]);
    }

    #[test]
    fn e_is_a_permutation() {
        let e = permutation_e(4, 3);
        for k in 0..12 {
            assert_eq!(e.row(k).sum(), 1.0);
            assert_eq!(e.column(k).sum(), 1.0);
        }
    }
}
