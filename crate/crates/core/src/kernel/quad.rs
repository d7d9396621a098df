use nalgebra::{DMatrix, DVector};

/// f(y) = ½ yᵀ P y + qᵀ y + r with symmetric P.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadForm {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub r: f64,
}

impl QuadForm {
    pub fn zero(dim: usize) -> Self {
        Self { p: DMatrix::zeros(dim, dim), q: DVector::zeros(dim), r: 0.0 }
    }

    /// aᵀ y + a0.
    pub fn affine(a: DVector<f64>, a0: f64) -> Self {
        let dim = a.len();
        Self { p: DMatrix::zeros(dim, dim), q: a, r: a0 }
    }

    /// weight · (aᵀ y + a0)².
    pub fn affine_square(a: &DVector<f64>, a0: f64, weight: f64) -> Self {
        Self {
            p: (a * a.transpose()) * (2.0 * weight),
            q: a * (2.0 * weight * a0),
            r: weight * a0 * a0,
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn value(&self, y: &DVector<f64>) -> f64 {
        0.5 * y.dot(&(&self.p * y)) + self.q.dot(y) + self.r
    }

    pub fn gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.p * y + &self.q
    }

    pub fn add_assign(&mut self, other: &QuadForm) {
        self.p += &other.p;
        self.q += &other.q;
        self.r += other.r;
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { p: &self.p * k, q: &self.q * k, r: self.r * k }
    }

    pub fn is_linear(&self) -> bool {
        self.p.iter().all(|&x| x == 0.0)
    }

    /// Re-express in a space of dimension `dim`, where local coordinate k maps
    /// to global coordinate `map[k]`.
    pub fn embed(&self, dim: usize, map: &[usize]) -> Self {
        let mut out = Self::zero(dim);
        for (a, &ga) in map.iter().enumerate() {
            out.q[ga] += self.q[a];
            for (b, &gb) in map.iter().enumerate() {
                out.p[(ga, gb)] += self.p[(a, b)];
            }
        }
        out.r = self.r;
        out
    }

    /// Adds `w/2 ‖y − c‖²` restricted to the coordinates in `idx`.
    pub fn add_proximal(&mut self, w: f64, center: &DVector<f64>, idx: &[usize]) {
        for &k in idx {
            self.p[(k, k)] += w;
            self.q[k] -= w * center[k];
            self.r += 0.5 * w * center[k] * center[k];
        }
    }
}
