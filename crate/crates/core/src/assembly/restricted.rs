//! Convex inner approximations of the speed and safety constraints used to
//! compute a feasible starting plan.

use nalgebra::DVector;

use super::approx::{Predecessor, SafetyPair};
use super::structural::odd_lower;
use crate::kernel::QuadForm;

/// Upper bounds on the drag speeds inside the restricted set, index 0..p-1.
pub fn breve_speeds(pair: &SafetyPair, v_max: f64, p: usize) -> Vec<f64> {
    let m = &pair.own;
    let mut out = Vec::with_capacity(p);
    out.push(m.v);
    for j in 1..p {
        let sq: f64 = out.iter().map(|b| b * b).sum();
        out.push(v_max + m.tau * (j as f64 * m.c3 * m.g + m.c2 * sq));
    }
    out
}

/// Lower bounds on the drag speeds inside the restricted set, index 0..p-1.
pub fn grave_speeds(pair: &SafetyPair, p: usize) -> Vec<f64> {
    let m = &pair.own;
    (0..p)
        .map(|s| if s == 0 { m.v } else { pair.v_min + m.tau * s as f64 * m.c3 * m.g })
        .collect()
}

/// Restricted constraint set of one follower: box, polyhedral speed rows and
/// convex quadratic safety rows over (u_{i-1}, u_i), or u_1 alone for the
/// first follower.
#[derive(Clone, Debug)]
pub struct RestrictedSet {
    /// Row j: lo_j ≤ v + τ((S_p u)_j − j c3 g) ≤ hi_j.
    pub speed_lo: Vec<f64>,
    pub speed_hi: Vec<f64>,
    /// Affine functions of the own block, each required ≤ 0.
    pub speed_rows: Vec<QuadForm>,
    /// Convex quadratics in [u_pred; u_own] (or u_own when the predecessor is
    /// the leader), each required ≤ 0.
    pub safety_rows: Vec<QuadForm>,
    pub has_pred_block: bool,
}

pub fn restricted_set(pair: &SafetyPair, v_max: f64, p: usize) -> RestrictedSet {
    let m = pair.own;
    let tau = m.tau;
    let breve = breve_speeds(pair, v_max, p);
    let grave = grave_speeds(pair, p);
    let mut speed_lo = Vec::with_capacity(p);
    let mut speed_hi = Vec::with_capacity(p);
    let mut speed_rows = Vec::with_capacity(2 * p);
    // affine P_j(u) = v + τ((S_p u)_j − j c3 g)
    let affine = |j: usize| {
        let a = DVector::from_fn(p, |s, _| if s < j { tau } else { 0.0 });
        (a, m.v - tau * j as f64 * m.c3 * m.g)
    };
    for j in 1..=p {
        let lo = pair.v_min + tau * m.c2 * breve[..j].iter().map(|b| b * b).sum::<f64>();
        let hi = v_max + tau * m.c2 * grave[..j].iter().map(|b| b * b).sum::<f64>();
        let (a, a0) = affine(j);
        speed_rows.push(QuadForm::affine(-a.clone(), lo - a0));
        speed_rows.push(QuadForm::affine(a, a0 - hi));
        speed_lo.push(lo);
        speed_hi.push(hi);
    }
    let has_pred = matches!(pair.pred, Predecessor::Vehicle(_));
    let dim = if has_pred { 2 * p } else { p };
    let off = if has_pred { p } else { 0 };
    let r = odd_lower(p);
    let half = 0.5 * tau * tau;
    let mut safety_rows = Vec::with_capacity(p);
    for j in 1..=p {
        // upper bound on the predicted speed, affine in u_own
        let (a, a0) = affine(j);
        let drop = tau * m.c2 * grave[..j].iter().map(|b| b * b).sum::<f64>();
        let qa = DVector::from_fn(dim, |k, _| if k >= off { a[k - off] } else { 0.0 });
        let qa0 = a0 - drop;
        let mut f = QuadForm::affine_square(&qa, qa0 - pair.v_min, -1.0 / (2.0 * pair.a_min));
        f.add_assign(&QuadForm::affine(&qa * pair.reaction, qa0 * pair.reaction));
        f.r += pair.length - pair.gap - j as f64 * tau * pair.rel;
        for s in 0..j {
            let w = half * r[(j - 1, s)];
            // own acceleration bounded above with grave drag speeds
            f.q[off + s] += w;
            f.r -= w * (m.c2 * grave[s] * grave[s] + m.c3 * m.g);
            match pair.pred {
                Predecessor::Leader { u0 } => f.r -= w * u0,
                Predecessor::Vehicle(pm) => {
                    // −w·ã_pred,s is convex in u_pred
                    f.q[s] -= w;
                    f.r += w * pm.c3 * pm.g;
                    let t = DVector::from_fn(dim, |k, _| if k < s { pm.tau } else { 0.0 });
                    f.add_assign(&QuadForm::affine_square(&t, pm.v, w * pm.c2));
                }
            }
        }
        safety_rows.push(f);
    }
    RestrictedSet { speed_lo, speed_hi, speed_rows, safety_rows, has_pred_block: has_pred }
}
