#![allow(dead_code)]

use nalgebra::DVector;
use platoon_mpc::assembly::*;
use platoon_mpc::platoon::{random_feasible_state, PlatoonConfig, PlatoonState, TrackingState};
use platoon_mpc::presets::{platoon_preset, weight_preset, PlatoonPreset, WeightSchedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn sub_platoon(n: usize, preset: PlatoonPreset) -> PlatoonConfig {
    let mut cfg = platoon_preset(preset);
    cfg.vehicles.truncate(n);
    cfg.edges = PlatoonConfig::path_edges(n);
    cfg
}

pub fn random_weights(rng: &mut impl Rng, n: usize, p: usize) -> WeightSchedule {
    let mut row = |lo: f64, hi: f64| (0..n).map(|_| rng.random_range(lo..hi)).collect::<Vec<f64>>();
    WeightSchedule {
        p,
        alpha: (0..p).map(|_| row(0.0, 300.0)).collect(),
        beta: (0..p).map(|_| row(0.0, 200.0)).collect(),
        zeta: (0..p).map(|_| row(0.01, 250.0)).collect(),
    }
}

/// Objective evaluated by stepping the kinematics forward.
pub fn direct_objective(
    cfg: &PlatoonConfig,
    w: &WeightSchedule,
    st: &PlatoonState,
    a: &DVector<f64>,
    u: &DVector<f64>,
) -> f64 {
    let (n, p, tau) = (cfg.n(), w.p, cfg.tau);
    let mut x = st.x.clone();
    let mut v = st.v.clone();
    let mut j_val = 0.0;
    for s in 0..p {
        for i in 0..=n {
            let acc = if i == 0 { st.u0 } else { a[(i - 1) * p + s] };
            x[i] += tau * v[i] + 0.5 * tau * tau * acc;
            v[i] += tau * acc;
        }
        for i in 1..=n {
            let z = x[i - 1] - x[i] - cfg.delta;
            let zp = v[i - 1] - v[i];
            j_val += 0.5 * (w.alpha[s][i - 1] * z * z + w.beta[s][i - 1] * zp * zp);
            let prev = if i == 1 { 0.0 } else { u[(i - 2) * p + s] };
            let du = u[(i - 1) * p + s] - prev;
            j_val += 0.5 * tau * tau * w.zeta[s][i - 1] * du * du;
        }
    }
    j_val
}

/// Worst |form − direct| / (1 + |direct|) over `cases` random instances
/// cycling n ∈ {2, 4, 10} and p ∈ 1..=5.
pub fn quadratic_model_gap(seed: u64, cases: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let n = [2, 4, 10][case % 3];
        let p = 1 + case % 5;
        let cfg = sub_platoon(n, PlatoonPreset::ALL[(case / 3) % 3]);
        let w = random_weights(&mut rng, n, p);
        let st = random_feasible_state(&cfg, &mut rng);
        let tr = TrackingState::from_state(&st, cfg.delta);
        let m = assemble_quadratic_model(&cfg, &w, &tr, st.u0).unwrap();
        let a = DVector::from_fn(n * p, |_, _| rng.random_range(-3.0..2.0));
        let u = DVector::from_fn(n * p, |_, _| rng.random_range(-3.0..2.0));
        let form = m.objective(&a, &u);
        let direct = direct_objective(&cfg, &w, &st, &a, &u);
        worst = worst.max((form - direct).abs() / (1.0 + direct.abs()));
    }
    worst
}

#[derive(Clone, Copy, Debug)]
pub struct SplitReport {
    pub reconstruction: f64,
    pub min_eig: f64,
}

pub fn split_report(cfg: &PlatoonConfig, w: &WeightSchedule) -> SplitReport {
    let n = cfg.n();
    let m = assemble_quadratic_model(cfg, w, &TrackingState::zeros(n), 0.0).unwrap();
    let d = decompose_model(&m).unwrap();
    let reconstruction = (d.reconstruct_w() - &m.w).amax().max((d.reconstruct_psi() - &m.psi).amax());
    let min_eig = (0..n)
        .flat_map(|s| [&d.w_hat[s], &d.psi_hat[s], &d.v_hat[s]])
        .map(min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    SplitReport { reconstruction, min_eig }
}

pub fn check_decomposition(cfg: &PlatoonConfig, w: &WeightSchedule) {
    let r = split_report(cfg, w);
    assert!(r.reconstruction <= 1e-10, "{r:?}");
    assert!(r.min_eig >= -1e-10, "{r:?}");
    let n = cfg.n();
    let m = assemble_quadratic_model(cfg, w, &TrackingState::zeros(n), 0.0).unwrap();
    let d = decompose_model(&m).unwrap();
    for s in 0..n {
        let expect = if s == 0 || s == n - 1 { 2 } else { 3 };
        assert_eq!(d.blocks[s].len(), expect.min(n));
    }
}

/// Worst split report over `count` random schedules on the medium platoon.
pub fn random_split_reports(seed: u64, count: usize) -> SplitReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = platoon_preset(PlatoonPreset::Medium);
    let mut worst = SplitReport { reconstruction: 0.0, min_eig: f64::INFINITY };
    for k in 0..count {
        let r = split_report(&cfg, &random_weights(&mut rng, 10, 1 + k % 5));
        worst.reconstruction = worst.reconstruction.max(r.reconstruction);
        worst.min_eig = worst.min_eig.min(r.min_eig);
    }
    worst
}

pub fn central_diff(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>) -> DVector<f64> {
    let h = 1e-5;
    DVector::from_fn(x.len(), |k, _| {
        let mut a = x.clone();
        let mut b = x.clone();
        a[k] += h;
        b[k] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    })
}

pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / (1.0 + b.amax())
}

pub fn random_problem(rng: &mut ChaCha8Rng, p: usize) -> MpcProblem {
    let preset = PlatoonPreset::ALL[rng.random_range(0..3)];
    let cfg = sub_platoon(4, preset);
    let st = random_feasible_state(&cfg, rng);
    MpcProblem::new(&cfg, &weight_preset(preset, p).truncated(4), &st).unwrap()
}

/// Worst relative gap between analytic gradients (acceleration Jacobian,
/// speeds, both safety blocks, local objectives) and central differences.
pub fn gradient_gap(seed: u64, cases: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let p = 1 + case % 5;
        let prob = random_problem(&mut rng, p);
        let i = 1 + case % 4;
        let m = prob.accel_model(i);
        let u = DVector::from_fn(p, |_, _| rng.random_range(-6.0..1.4));
        let up = DVector::from_fn(p, |_, _| rng.random_range(-6.0..1.4));
        let jac = m.jacobian(&u);
        for s in 0..p {
            let fd = central_diff(|x| m.accel(x)[s], &u);
            worst = worst.max(rel_err(&jac.row(s).transpose(), &fd));
        }
        let j = 1 + case % p;
        let (_, g) = m.speed(&u, j);
        worst = worst.max(rel_err(&g, &central_diff(|x| m.speed(x, j).0, &u)));
        let pred = (i > 1).then_some(&up);
        let e = prob.safety(i, pred, &u, j);
        worst = worst.max(rel_err(&e.grad_own, &central_diff(|x| prob.safety(i, pred, x, j).value, &u)));
        if let Some(gp) = &e.grad_pred {
            worst = worst.max(rel_err(gp, &central_diff(|x| prob.safety(i, Some(x), &u, j).value, &up)));
        }
        let dim = prob.decomposed.blocks[i - 1].len() * p;
        let ul = DVector::from_fn(dim, |_, _| rng.random_range(-6.0..1.4));
        let le = prob.local_objective(i, &ul);
        let scale = 1.0 + le.grad.amax();
        let fd = central_diff(|x| prob.local_objective(i, x).value, &ul);
        worst = worst.max((le.grad - fd).amax() / scale);
    }
    worst
}

pub fn preset_weights(preset: PlatoonPreset, p: usize) -> (PlatoonConfig, WeightSchedule) {
    (platoon_preset(preset), weight_preset(preset, p))
}
