//! Dense convex QCQP solvers: an active-set box QP for the common case where
//! no quadratic constraint binds, and a primal log-barrier method otherwise.

use nalgebra::{DMatrix, DVector};

use super::quad::QuadForm;
use crate::error::{PlatoonError, Result};

const NEWTON_REG: f64 = 1e-12;
const GAP_TOL: f64 = 1e-10;
const MAX_NEWTON_PER_STAGE: usize = 80;
const FAST_PATH_TOL: f64 = 1e-11;

/// minimize f(y) subject to lower ≤ y ≤ upper and g_k(y) ≤ 0.
#[derive(Clone, Debug)]
pub struct ConvexQcqp {
    pub objective: QuadForm,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub constraints: Vec<QuadForm>,
}

#[derive(Clone, Debug)]
pub struct QcqpSolution {
    pub x: DVector<f64>,
    pub multipliers: Vec<f64>,
    pub lower_mult: DVector<f64>,
    pub upper_mult: DVector<f64>,
    pub newton_steps: usize,
    pub fast_path: bool,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct KktResidual {
    pub stationarity: f64,
    pub complementarity: f64,
    pub primal: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.complementarity).max(self.primal)
    }
}

impl ConvexQcqp {
    pub fn unconstrained(objective: QuadForm) -> Self {
        let d = objective.dim();
        Self {
            objective,
            lower: DVector::from_element(d, f64::NEG_INFINITY),
            upper: DVector::from_element(d, f64::INFINITY),
            constraints: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn check(&self) -> Result<()> {
        let d = self.dim();
        for (what, got) in [
            ("qcqp lower bound", self.lower.len()),
            ("qcqp upper bound", self.upper.len()),
        ] {
            if got != d {
                return Err(PlatoonError::DimensionMismatch { what, expected: d, got });
            }
        }
        if let Some(c) = self.constraints.iter().find(|c| c.dim() != d) {
            return Err(PlatoonError::DimensionMismatch {
                what: "qcqp constraint",
                expected: d,
                got: c.dim(),
            });
        }
        if self.lower.iter().zip(self.upper.iter()).any(|(l, h)| l > h) {
            return Err(PlatoonError::InfeasibleSubproblem {
                agent: None,
                detail: "empty box".into(),
            });
        }
        Ok(())
    }

    /// Largest violation of box and constraint functions at `x`.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let mut v: f64 = 0.0;
        for k in 0..x.len() {
            v = v.max(self.lower[k] - x[k]).max(x[k] - self.upper[k]);
        }
        for c in &self.constraints {
            v = v.max(c.value(x));
        }
        v
    }

    pub fn kkt_residual(&self, sol: &QcqpSolution) -> KktResidual {
        let x = &sol.x;
        let mut grad = self.objective.gradient(x);
        let mut comp: f64 = 0.0;
        for (c, &lam) in self.constraints.iter().zip(&sol.multipliers) {
            grad += c.gradient(x) * lam;
            comp = comp.max((lam * c.value(x)).abs());
        }
        grad -= &sol.lower_mult;
        grad += &sol.upper_mult;
        for k in 0..x.len() {
            if self.lower[k].is_finite() {
                comp = comp.max((sol.lower_mult[k] * (x[k] - self.lower[k])).abs());
            }
            if self.upper[k].is_finite() {
                comp = comp.max((sol.upper_mult[k] * (self.upper[k] - x[k])).abs());
            }
        }
        KktResidual {
            stationarity: grad.amax(),
            complementarity: comp,
            primal: self.max_violation(x),
        }
    }
}

/// Minimizer of a·t² + b·t over [lo, hi] for a > 0.
pub fn box_prox(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    (-b / (2.0 * a)).clamp(lo, hi)
}

fn is_diagonal(p: &DMatrix<f64>) -> bool {
    let n = p.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || p[(i, j)] == 0.0))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Bound {
    Free,
    Lower,
    Upper,
    Fixed,
}

fn solve_spd(m: DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let n = m.nrows();
    if n == 0 {
        return DVector::zeros(0);
    }
    let reg = &m + DMatrix::identity(n, n) * NEWTON_REG;
    match reg.clone().cholesky() {
        Some(ch) => ch.solve(rhs),
        None => reg.lu().solve(rhs).unwrap_or_else(|| DVector::zeros(n)),
    }
}

/// Minimizes ½xᵀPx + qᵀx over lower ≤ x ≤ upper for positive definite P with a
/// primal active-set method. Diagonal P is solved coordinatewise.
pub fn box_qp(p: &DMatrix<f64>, q: &DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) -> DVector<f64> {
    let n = q.len();
    if is_diagonal(p) {
        return DVector::from_fn(n, |k, _| box_prox(0.5 * p[(k, k)], q[k], lower[k], upper[k]));
    }
    let mut state = vec![Bound::Free; n];
    let mut x = DVector::zeros(n);
    for k in 0..n {
        x[k] = box_prox(0.5 * p[(k, k)], q[k], lower[k], upper[k]);
        state[k] = if lower[k] == upper[k] {
            Bound::Fixed
        } else if x[k] == lower[k] {
            Bound::Lower
        } else if x[k] == upper[k] {
            Bound::Upper
        } else {
            Bound::Free
        };
    }
    let eps = 1e-12 * (1.0 + q.amax());
    for _ in 0..(50 + 20 * n) {
        let free: Vec<usize> = (0..n).filter(|&k| state[k] == Bound::Free).collect();
        if !free.is_empty() {
            let nf = free.len();
            let pff = DMatrix::from_fn(nf, nf, |a, b| p[(free[a], free[b])]);
            let mut rhs = DVector::from_fn(nf, |a, _| -q[free[a]]);
            for (a, &fa) in free.iter().enumerate() {
                for k in 0..n {
                    if state[k] != Bound::Free {
                        rhs[a] -= p[(fa, k)] * x[k];
                    }
                }
            }
            let target = solve_spd(pff, &rhs);
            let mut alpha = 1.0;
            let mut block = None;
            for (a, &k) in free.iter().enumerate() {
                let d = target[a] - x[k];
                if d < 0.0 && lower[k].is_finite() {
                    let s = (lower[k] - x[k]) / d;
                    if s < alpha {
                        alpha = s;
                        block = Some((k, Bound::Lower));
                    }
                } else if d > 0.0 && upper[k].is_finite() {
                    let s = (upper[k] - x[k]) / d;
                    if s < alpha {
                        alpha = s;
                        block = Some((k, Bound::Upper));
                    }
                }
            }
            let alpha = alpha.max(0.0);
            for (a, &k) in free.iter().enumerate() {
                x[k] += alpha * (target[a] - x[k]);
            }
            if let Some((k, side)) = block {
                x[k] = if side == Bound::Lower { lower[k] } else { upper[k] };
                state[k] = side;
                continue;
            }
        }
        let g = p * &x + q;
        let mut worst = None;
        let mut worst_val = eps;
        for k in 0..n {
            let viol = match state[k] {
                Bound::Lower => -g[k],
                Bound::Upper => g[k],
                _ => 0.0,
            };
            if viol > worst_val {
                worst_val = viol;
                worst = Some(k);
            }
        }
        match worst {
            Some(k) => state[k] = Bound::Free,
            None => break,
        }
    }
    x
}

fn box_multipliers(grad: &DVector<f64>, x: &DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let n = x.len();
    let mut lo = DVector::zeros(n);
    let mut hi = DVector::zeros(n);
    for k in 0..n {
        if x[k] <= lower[k] && grad[k] > 0.0 {
            lo[k] = grad[k];
        } else if x[k] >= upper[k] && grad[k] < 0.0 {
            hi[k] = -grad[k];
        }
    }
    (lo, hi)
}

/// Restriction of a problem to its non-fixed coordinates.
struct Reduced {
    problem: ConvexQcqp,
    free: Vec<usize>,
    full_x: DVector<f64>,
}

fn restrict(f: &QuadForm, free: &[usize], base: &DVector<f64>) -> QuadForm {
    let nf = free.len();
    let pb = &f.p * base;
    let mut out = QuadForm::zero(nf);
    for (a, &i) in free.iter().enumerate() {
        out.q[a] = f.q[i] + pb[i];
        for (b, &j) in free.iter().enumerate() {
            out.p[(a, b)] = f.p[(i, j)];
        }
    }
    // base has zeros at free coordinates, so this is f(base).
    out.r = f.value(base);
    out
}

fn reduce(problem: &ConvexQcqp) -> Option<Reduced> {
    let d = problem.dim();
    let fixed: Vec<usize> = (0..d).filter(|&k| problem.lower[k] == problem.upper[k]).collect();
    if fixed.is_empty() {
        return None;
    }
    let free: Vec<usize> = (0..d).filter(|&k| problem.lower[k] != problem.upper[k]).collect();
    let mut base = DVector::zeros(d);
    for &k in &fixed {
        base[k] = problem.lower[k];
    }
    let reduced = ConvexQcqp {
        objective: restrict(&problem.objective, &free, &base),
        lower: DVector::from_fn(free.len(), |a, _| problem.lower[free[a]]),
        upper: DVector::from_fn(free.len(), |a, _| problem.upper[free[a]]),
        constraints: problem.constraints.iter().map(|c| restrict(c, &free, &base)).collect(),
    };
    Some(Reduced { problem: reduced, free, full_x: base })
}

struct Barrier<'a> {
    obj: &'a QuadForm,
    cons: &'a [QuadForm],
    lower: &'a DVector<f64>,
    upper: &'a DVector<f64>,
}

impl Barrier<'_> {
    fn count(&self) -> usize {
        self.cons.len()
            + self.lower.iter().filter(|l| l.is_finite()).count()
            + self.upper.iter().filter(|u| u.is_finite()).count()
    }

    fn strictly_feasible(&self, y: &DVector<f64>) -> bool {
        (0..y.len()).all(|k| y[k] > self.lower[k] && y[k] < self.upper[k])
            && self.cons.iter().all(|c| c.value(y) < 0.0)
    }

    fn newton_system(&self, t: f64, y: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>, Vec<f64>) {
        let mut grad = self.obj.gradient(y) * t;
        let mut hess = &self.obj.p * t;
        let mut gvals = Vec::with_capacity(self.cons.len());
        for c in self.cons {
            let g = c.value(y);
            let dg = c.gradient(y);
            let inv = -1.0 / g;
            grad += &dg * inv;
            hess += &c.p * inv;
            hess += (&dg * dg.transpose()) * (inv * inv);
            gvals.push(g);
        }
        for k in 0..y.len() {
            if self.lower[k].is_finite() {
                let s = y[k] - self.lower[k];
                grad[k] -= 1.0 / s;
                hess[(k, k)] += 1.0 / (s * s);
            }
            if self.upper[k].is_finite() {
                let s = self.upper[k] - y[k];
                grad[k] += 1.0 / s;
                hess[(k, k)] += 1.0 / (s * s);
            }
        }
        (grad, hess, gvals)
    }

    /// Change of the barrier function along y + s·d, computed without
    /// subtracting large magnitudes. None when the step leaves the domain.
    fn delta(&self, t: f64, y: &DVector<f64>, d: &DVector<f64>, s: f64, gvals: &[f64], slopes: &[(f64, f64)], obj_lin: f64, obj_quad: f64) -> Option<f64> {
        let mut out = t * (s * obj_lin + 0.5 * s * s * obj_quad);
        for (&g, &(a, b)) in gvals.iter().zip(slopes) {
            let ratio = (s * a + 0.5 * s * s * b) / (-g);
            if ratio >= 1.0 {
                return None;
            }
            out -= (-ratio).ln_1p();
        }
        for k in 0..y.len() {
            if self.lower[k].is_finite() {
                let r = s * d[k] / (y[k] - self.lower[k]);
                if r <= -1.0 {
                    return None;
                }
                out -= r.ln_1p();
            }
            if self.upper[k].is_finite() {
                let r = -s * d[k] / (self.upper[k] - y[k]);
                if r <= -1.0 {
                    return None;
                }
                out -= r.ln_1p();
            }
        }
        Some(out)
    }

    /// Damped Newton centering at parameter t. Returns the number of steps.
    fn center(&self, t: f64, y: &mut DVector<f64>, stop: &mut dyn FnMut(&DVector<f64>) -> bool) -> (usize, bool) {
        for it in 0..MAX_NEWTON_PER_STAGE {
            let (grad, hess, gvals) = self.newton_system(t, y);
            let d = -solve_spd(hess, &grad);
            let dec = -grad.dot(&d);
            if !(dec > 1e-18) {
                return (it, false);
            }
            let obj_lin = self.obj.gradient(y).dot(&d);
            let obj_quad = d.dot(&(&self.obj.p * &d));
            let slopes: Vec<(f64, f64)> = self
                .cons
                .iter()
                .map(|c| (c.gradient(y).dot(&d), d.dot(&(&c.p * &d))))
                .collect();
            let mut s = 1.0;
            let mut accepted = false;
            while s > 1e-16 {
                if let Some(dphi) = self.delta(t, y, &d, s, &gvals, &slopes, obj_lin, obj_quad) {
                    if dphi <= -0.01 * s * dec || (dec < 1e-10 && dphi <= 1e-12 * t) {
                        accepted = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !accepted {
                return (it, false);
            }
            if s * d.amax() <= 1e-16 * (1.0 + y.amax()) {
                return (it, false);
            }
            y.axpy(s, &d, 1.0);
            if stop(y) {
                return (it + 1, true);
            }
            if dec < 1e-14 {
                return (it + 1, false);
            }
        }
        (MAX_NEWTON_PER_STAGE, false)
    }

    /// Path following from a strictly feasible point. `stop` ends early.
    fn run(&self, y: &mut DVector<f64>, stop: &mut dyn FnMut(&DVector<f64>) -> bool) -> (usize, f64, bool) {
        let m = self.count() as f64;
        let mut t = 1.0;
        let mut steps = 0;
        loop {
            let (k, stopped) = self.center(t, y, stop);
            steps += k;
            if stopped {
                return (steps, t, true);
            }
            if m == 0.0 || m / t < GAP_TOL {
                return (steps, t, false);
            }
            t *= 10.0;
        }
    }
}

/// Strictly feasible point via a phase-I barrier on max_k g_k(y).
fn phase_one(problem: &ConvexQcqp, start: &DVector<f64>) -> Result<DVector<f64>> {
    let d = problem.dim();
    let mut y0 = start.clone();
    for k in 0..d {
        let (lo, hi) = (problem.lower[k], problem.upper[k]);
        let margin = if lo.is_finite() && hi.is_finite() { (0.25 * (hi - lo)).min(1e-3) } else { 1e-3 };
        y0[k] = y0[k].clamp(lo + margin, hi - margin);
    }
    let worst = problem.constraints.iter().map(|c| c.value(&y0)).fold(f64::NEG_INFINITY, f64::max);
    if worst < 0.0 {
        return Ok(y0);
    }
    let ext = d + 1;
    let mut cons = Vec::with_capacity(problem.constraints.len());
    for c in &problem.constraints {
        let mut e = c.embed(ext, &(0..d).collect::<Vec<_>>());
        e.q[d] = -1.0;
        cons.push(e);
    }
    let mut obj = QuadForm::zero(ext);
    obj.q[d] = 1.0;
    let lower = DVector::from_fn(ext, |k, _| if k < d { problem.lower[k] } else { -1.0 });
    let upper = DVector::from_fn(ext, |k, _| if k < d { problem.upper[k] } else { f64::INFINITY });
    let mut y = DVector::from_fn(ext, |k, _| if k < d { y0[k] } else { worst + 1.0 });
    let barrier = Barrier { obj: &obj, cons: &cons, lower: &lower, upper: &upper };
    let mut stop = |y: &DVector<f64>| y[d] < -1e-9;
    let (_, _, found) = barrier.run(&mut y, &mut stop);
    let x = y.rows(0, d).into_owned();
    if found || problem.constraints.iter().all(|c| c.value(&x) < 0.0) {
        Ok(x)
    } else {
        Err(PlatoonError::InfeasibleSubproblem {
            agent: None,
            detail: format!("phase I stalled at max constraint {:e}", y[d]),
        })
    }
}

fn solve_full(problem: &ConvexQcqp, hint: Option<&DVector<f64>>) -> Result<QcqpSolution> {
    let box_x = box_qp(&problem.objective.p, &problem.objective.q, &problem.lower, &problem.upper);
    if problem.constraints.iter().all(|c| c.value(&box_x) <= FAST_PATH_TOL) {
        let grad = problem.objective.gradient(&box_x);
        let (lower_mult, upper_mult) = box_multipliers(&grad, &box_x, &problem.lower, &problem.upper);
        return Ok(QcqpSolution {
            x: box_x,
            multipliers: vec![0.0; problem.constraints.len()],
            lower_mult,
            upper_mult,
            newton_steps: 0,
            fast_path: true,
        });
    }
    let barrier = Barrier {
        obj: &problem.objective,
        cons: &problem.constraints,
        lower: &problem.lower,
        upper: &problem.upper,
    };
    let mut y = match hint.filter(|h| barrier.strictly_feasible(h)) {
        Some(h) => h.clone(),
        None => phase_one(problem, &box_x)?,
    };
    let (steps, t, _) = barrier.run(&mut y, &mut |_| false);
    let multipliers = problem.constraints.iter().map(|c| 1.0 / (t * -c.value(&y))).collect();
    let d = y.len();
    let lower_mult = DVector::from_fn(d, |k, _| {
        if problem.lower[k].is_finite() {
            1.0 / (t * (y[k] - problem.lower[k]))
        } else {
            0.0
        }
    });
    let upper_mult = DVector::from_fn(d, |k, _| {
        if problem.upper[k].is_finite() {
            1.0 / (t * (problem.upper[k] - y[k]))
        } else {
            0.0
        }
    });
    let mut sol = QcqpSolution { x: y, multipliers, lower_mult, upper_mult, newton_steps: steps, fast_path: false };
    if let Some(p) = polish(problem, &sol) {
        sol = p;
    }
    Ok(sol)
}

const ACTIVE_MULT: f64 = 1e-7;

/// Newton refinement of the KKT system on the active set identified by the
/// barrier multipliers. Returns None when the refined point fails a check.
fn polish(problem: &ConvexQcqp, sol: &QcqpSolution) -> Option<QcqpSolution> {
    let d = sol.x.len();
    let at_lower: Vec<bool> = (0..d).map(|k| sol.lower_mult[k] > ACTIVE_MULT).collect();
    let at_upper: Vec<bool> = (0..d).map(|k| !at_lower[k] && sol.upper_mult[k] > ACTIVE_MULT).collect();
    let free: Vec<usize> = (0..d).filter(|&k| !at_lower[k] && !at_upper[k]).collect();
    let active: Vec<usize> = (0..sol.multipliers.len()).filter(|&k| sol.multipliers[k] > ACTIVE_MULT).collect();
    let mut x = sol.x.clone();
    for k in 0..d {
        if at_lower[k] {
            x[k] = problem.lower[k];
        } else if at_upper[k] {
            x[k] = problem.upper[k];
        }
    }
    let mut lam: Vec<f64> = active.iter().map(|&k| sol.multipliers[k]).collect();
    let (nf, na) = (free.len(), active.len());
    let lagrangian_grad = |x: &DVector<f64>, lam: &[f64]| {
        let mut g = problem.objective.gradient(x);
        for (&k, &l) in active.iter().zip(lam) {
            g += problem.constraints[k].gradient(x) * l;
        }
        g
    };
    let mut converged = false;
    for _ in 0..20 {
        let grad = lagrangian_grad(&x, &lam);
        let mut rhs = DVector::zeros(nf + na);
        for (a, &k) in free.iter().enumerate() {
            rhs[a] = -grad[k];
        }
        for (b, &k) in active.iter().enumerate() {
            rhs[nf + b] = -problem.constraints[k].value(&x);
        }
        if rhs.amax() < 1e-13 * (1.0 + grad.amax()) {
            converged = true;
            break;
        }
        let mut hl = problem.objective.p.clone();
        for (&k, &l) in active.iter().zip(&lam) {
            hl += &problem.constraints[k].p * l;
        }
        let mut m = DMatrix::zeros(nf + na, nf + na);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                m[(a, b)] = hl[(i, j)];
            }
        }
        for (b, &k) in active.iter().enumerate() {
            let dg = problem.constraints[k].gradient(&x);
            for (a, &i) in free.iter().enumerate() {
                m[(nf + b, a)] = dg[i];
                m[(a, nf + b)] = dg[i];
            }
        }
        let step = m.lu().solve(&rhs)?;
        for (a, &i) in free.iter().enumerate() {
            x[i] += step[a];
        }
        for b in 0..na {
            lam[b] += step[nf + b];
        }
    }
    if !converged || lam.iter().any(|&l| l < -1e-10) {
        return None;
    }
    for &k in &free {
        if x[k] < problem.lower[k] - 1e-12 || x[k] > problem.upper[k] + 1e-12 {
            return None;
        }
        x[k] = x[k].clamp(problem.lower[k], problem.upper[k]);
    }
    let mut multipliers = vec![0.0; problem.constraints.len()];
    for (&k, &l) in active.iter().zip(&lam) {
        multipliers[k] = l.max(0.0);
    }
    if problem.constraints.iter().any(|c| c.value(&x) > 1e-12) {
        return None;
    }
    let grad = lagrangian_grad(&x, &lam);
    let mut lower_mult = DVector::zeros(d);
    let mut upper_mult = DVector::zeros(d);
    for k in 0..d {
        if at_lower[k] {
            if grad[k] < -1e-10 {
                return None;
            }
            lower_mult[k] = grad[k].max(0.0);
        } else if at_upper[k] {
            if grad[k] > 1e-10 {
                return None;
            }
            upper_mult[k] = (-grad[k]).max(0.0);
        }
    }
    Some(QcqpSolution { x, multipliers, lower_mult, upper_mult, newton_steps: sol.newton_steps, fast_path: false })
}

/// Solves a convex QCQP. `hint` is an optional strictly feasible point.
pub fn qcqp_solve(problem: &ConvexQcqp, hint: Option<&DVector<f64>>) -> Result<QcqpSolution> {
    problem.check()?;
    let Some(red) = reduce(problem) else {
        return solve_full(problem, hint);
    };
    let sub_hint = hint.map(|h| DVector::from_fn(red.free.len(), |a, _| h[red.free[a]]));
    let sol = solve_full(&red.problem, sub_hint.as_ref())?;
    let d = problem.dim();
    let mut x = red.full_x;
    for (a, &k) in red.free.iter().enumerate() {
        x[k] = sol.x[a];
    }
    let mut lower_mult = DVector::zeros(d);
    let mut upper_mult = DVector::zeros(d);
    for (a, &k) in red.free.iter().enumerate() {
        lower_mult[k] = sol.lower_mult[a];
        upper_mult[k] = sol.upper_mult[a];
    }
    // Fixed coordinates absorb the remaining stationarity residual.
    let mut grad = problem.objective.gradient(&x);
    for (c, &lam) in problem.constraints.iter().zip(&sol.multipliers) {
        grad += c.gradient(&x) * lam;
    }
    for k in (0..d).filter(|&k| problem.lower[k] == problem.upper[k]) {
        if grad[k] > 0.0 {
            lower_mult[k] = grad[k];
        } else {
            upper_mult[k] = -grad[k];
        }
    }
    Ok(QcqpSolution { x, multipliers: sol.multipliers, lower_mult, upper_mult, newton_steps: sol.newton_steps, fast_path: sol.fast_path })
}

/// argmin_y f(y) + ‖y − anchor‖²/(2ρ) over the feasible set.
pub fn qcqp_prox(problem: &ConvexQcqp, anchor: &DVector<f64>, rho: f64, hint: Option<&DVector<f64>>) -> Result<QcqpSolution> {
    let mut shifted = problem.clone();
    let all: Vec<usize> = (0..problem.dim()).collect();
    shifted.objective.add_proximal(1.0 / rho, anchor, &all);
    qcqp_solve(&shifted, hint)
}

/// Box-constrained proximal step (no quadratic constraints).
pub fn box_only_prox(problem: &ConvexQcqp, anchor: &DVector<f64>, rho: f64) -> DVector<f64> {
    let mut p = problem.objective.p.clone();
    let mut q = problem.objective.q.clone();
    for k in 0..anchor.len() {
        p[(k, k)] += 1.0 / rho;
        q[k] -= anchor[k] / rho;
    }
    box_qp(&p, &q, &problem.lower, &problem.upper)
}
