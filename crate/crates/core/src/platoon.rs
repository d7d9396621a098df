//! Vehicle dynamics, physical constraints and feasibility constructions.
//!
//! Vectors indexed over the whole platoon put the leader at index 0 and the
//! controlled vehicles at 1..=n. Control vectors only cover the followers and
//! are indexed 0..n for vehicles 1..=n.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{PlatoonError, Result};

pub const GRAVITY: f64 = 9.8;

/// Absolute slack used when checking constraints.
pub const FEAS_TOL: f64 = 1e-9;

/// Target strict margin for [`interior_control`].
pub const INTERIOR_MARGIN: f64 = 1e-6;

fn default_gravity() -> f64 {
    GRAVITY
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "r")]
    pub reaction_time: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub c2: f64,
    pub c3: f64,
}

impl VehicleParams {
    fn validate(&self, idx: usize) -> Result<()> {
        let bad = |m: &str| Err(PlatoonError::InvalidConfig(format!("vehicle {idx}: {m}")));
        if !(self.a_min < 0.0 && self.a_max > 0.0) {
            return bad("requires a_min < 0 < a_max");
        }
        if !(self.length > 0.0 && self.reaction_time > 0.0) {
            return bad("requires L > 0 and r > 0");
        }
        if !(self.c2 >= 0.0 && self.c3 >= 0.0) {
            return bad("requires c2, c3 >= 0");
        }
        Ok(())
    }
}

/// Acceleration limits of the uncontrolled leader.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderLimits {
    pub a_min: f64,
    pub a_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlatoonConfig {
    pub tau: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub delta: f64,
    #[serde(default = "default_gravity")]
    pub g: f64,
    pub leader: LeaderLimits,
    pub vehicles: Vec<VehicleParams>,
    pub edges: Vec<(usize, usize)>,
}

impl PlatoonConfig {
    pub fn n(&self) -> usize {
        self.vehicles.len()
    }

    /// Parameters of follower `i` (1-based).
    pub fn vehicle(&self, i: usize) -> &VehicleParams {
        &self.vehicles[i - 1]
    }

    /// Drag coefficient of vehicle `i`, 0 for the leader.
    pub fn c2(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.vehicle(i).c2
        }
    }

    /// Rolling-friction coefficient of vehicle `i`, 0 for the leader.
    pub fn c3(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.vehicle(i).c3
        }
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges
            .iter()
            .any(|&(a, b)| (a == i && b == j) || (a == j && b == i))
    }

    /// Sorted neighbor list of vehicle `i` in the communication graph.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Path graph edges (1,2), ..., (n-1,n).
    pub fn path_edges(n: usize) -> Vec<(usize, usize)> {
        (1..n).map(|i| (i, i + 1)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let bad = |m: String| Err(PlatoonError::InvalidConfig(m));
        if n == 0 {
            return bad("platoon needs at least one follower".into());
        }
        if !(self.tau > 0.0) {
            return bad("tau must be positive".into());
        }
        if !(0.0 <= self.v_min && self.v_min < self.v_max) {
            return bad("requires 0 <= v_min < v_max".into());
        }
        if !(self.leader.a_min < 0.0 && self.leader.a_max > 0.0) {
            return bad("leader requires a_min < 0 < a_max".into());
        }
        for &(a, b) in &self.edges {
            if a == b || a == 0 || b == 0 || a > n || b > n {
                return bad(format!("edge ({a},{b}) outside 1..={n}"));
            }
        }
        for i in 1..n {
            if !self.has_edge(i, i + 1) {
                return bad(format!("missing consecutive edge ({i},{})", i + 1));
            }
        }
        for (k, p) in self.vehicles.iter().enumerate() {
            let i = k + 1;
            p.validate(i)?;
            if p.c2 * self.v_max * self.v_max + p.c3 * self.g >= p.a_max {
                return bad(format!(
                    "vehicle {i}: c2*v_max^2 + c3*g must stay below a_max"
                ));
            }
            if p.reaction_time < 0.5 * self.tau {
                return bad(format!(
                    "vehicle {i}: reaction time {} below tau/2",
                    p.reaction_time
                ));
            }
        }
        Ok(())
    }

    /// Vehicles whose reaction time is below the sample time. These are
    /// accepted (the feasibility construction only needs r >= tau/2) but
    /// reported.
    pub fn short_reaction_vehicles(&self) -> Vec<usize> {
        (1..=self.n())
            .filter(|&i| self.vehicle(i).reaction_time < self.tau)
            .collect()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlatoonState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub u0: f64,
}

impl PlatoonState {
    /// Every vehicle at speed `v` with spacing exactly `delta`.
    pub fn cruise(config: &PlatoonConfig, v: f64) -> Self {
        let n = config.n();
        Self {
            x: (0..=n).map(|i| -(i as f64) * config.delta).collect(),
            v: vec![v; n + 1],
            u0: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.x.len() - 1
    }

    /// Spacing errors z_i = x_{i-1} - x_i - delta and relative speeds
    /// z'_i = v_{i-1} - v_i for i = 1..=n.
    pub fn tracking(&self, delta: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let z = (1..=n).map(|i| self.x[i - 1] - self.x[i] - delta).collect();
        let zp = (1..=n).map(|i| self.v[i - 1] - self.v[i]).collect();
        (z, zp)
    }

    fn check(&self, config: &PlatoonConfig) -> Result<()> {
        let n = config.n() + 1;
        if self.x.len() != n {
            return Err(PlatoonError::DimensionMismatch {
                what: "state positions",
                expected: n,
                got: self.x.len(),
            });
        }
        if self.v.len() != n {
            return Err(PlatoonError::DimensionMismatch {
                what: "state speeds",
                expected: n,
                got: self.v.len(),
            });
        }
        Ok(())
    }
}

/// Spacing errors and relative speeds of the followers.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackingState {
    pub z: Vec<f64>,
    pub zp: Vec<f64>,
}

impl TrackingState {
    pub fn from_state(state: &PlatoonState, delta: f64) -> Self {
        let (z, zp) = state.tracking(delta);
        Self { z, zp }
    }

    pub fn zeros(n: usize) -> Self {
        Self { z: vec![0.0; n], zp: vec![0.0; n] }
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// Largest absolute difference to `other`.
    pub fn max_diff(&self, other: &TrackingState) -> f64 {
        self.z
            .iter()
            .zip(&other.z)
            .chain(self.zp.iter().zip(&other.zp))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_control(config: &PlatoonConfig, u: &[f64]) -> Result<()> {
    if u.len() != config.n() {
        return Err(PlatoonError::DimensionMismatch {
            what: "control vector",
            expected: config.n(),
            got: u.len(),
        });
    }
    Ok(())
}

/// u - c2 v^2 - c3 g.
pub fn effective_accel(params: &VehicleParams, v: f64, u: f64, g: f64) -> f64 {
    u - params.c2 * v * v - params.c3 * g
}

/// Effective accelerations of the whole platoon, leader first.
pub fn platoon_accels(config: &PlatoonConfig, state: &PlatoonState, u: &[f64]) -> Vec<f64> {
    let mut a = Vec::with_capacity(u.len() + 1);
    a.push(state.u0);
    for (k, &ui) in u.iter().enumerate() {
        a.push(effective_accel(config.vehicle(k + 1), state.v[k + 1], ui, config.g));
    }
    a
}

fn advance(tau: f64, state: &PlatoonState, a: &[f64]) -> PlatoonState {
    let x = state
        .x
        .iter()
        .zip(&state.v)
        .zip(a)
        .map(|((&x, &v), &a)| x + tau * v + 0.5 * tau * tau * a)
        .collect();
    let v = state.v.iter().zip(a).map(|(&v, &a)| v + tau * a).collect();
    PlatoonState { x, v, u0: state.u0 }
}

/// One step of the nonlinear longitudinal model. The leader is advanced with
/// its own acceleration `state.u0`.
pub fn nonlinear_step(config: &PlatoonConfig, state: &PlatoonState, u: &[f64]) -> Result<PlatoonState> {
    state.check(config)?;
    check_control(config, u)?;
    Ok(advance(config.tau, state, &platoon_accels(config, state, u)))
}

/// One step of the double integrator.
pub fn linear_step(config: &PlatoonConfig, state: &PlatoonState, u: &[f64]) -> Result<PlatoonState> {
    state.check(config)?;
    check_control(config, u)?;
    let mut a = Vec::with_capacity(u.len() + 1);
    a.push(state.u0);
    a.extend_from_slice(u);
    Ok(advance(config.tau, state, &a))
}

/// Safety function p_i; nonpositive means the pair (i-1, i) is safe.
pub fn safety_gap_p(config: &PlatoonConfig, state: &PlatoonState, i: usize) -> f64 {
    let p = config.vehicle(i);
    let v = state.v[i];
    p.length + p.reaction_time * v - (v - config.v_min).powi(2) / (2.0 * p.a_min)
        + (state.x[i] - state.x[i - 1])
}

/// q_i(w) from the feasibility argument.
pub fn q_reaction(config: &PlatoonConfig, state: &PlatoonState, i: usize, w: f64) -> f64 {
    let p = config.vehicle(i);
    let v = state.v[i];
    let tau = config.tau;
    v + (0.5 * tau + p.reaction_time) * w - (v - config.v_min) * w / p.a_min
        - tau * w * w / (2.0 * p.a_min)
}

/// One-step safety values h_i(u) for i = 1..=n.
pub fn h_one_step(config: &PlatoonConfig, state: &PlatoonState, u: &[f64]) -> Result<Vec<f64>> {
    state.check(config)?;
    check_control(config, u)?;
    let a = platoon_accels(config, state, u);
    let tau = config.tau;
    Ok((1..=config.n())
        .map(|i| {
            let p = config.vehicle(i);
            let vn = state.v[i] + tau * a[i];
            p.length + p.reaction_time * vn - (vn - config.v_min).powi(2) / (2.0 * p.a_min)
                + (state.x[i] - state.x[i - 1])
                + tau * (state.v[i] - state.v[i - 1])
                + 0.5 * tau * tau * (a[i] - a[i - 1])
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    LeaderControl,
    LeaderNextSpeed,
    Speed,
    Safety,
    Control,
    NextSpeed,
    OneStepSafety,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub vehicle: usize,
    pub amount: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_violation(&self) -> f64 {
        self.violations.iter().map(|v| v.amount).fold(0.0, f64::max)
    }

    fn push(&mut self, kind: ViolationKind, vehicle: usize, amount: f64) {
        if amount > FEAS_TOL {
            self.violations.push(Violation { kind, vehicle, amount });
        }
    }
}

fn interval_excess(x: f64, lo: f64, hi: f64) -> f64 {
    (lo - x).max(x - hi).max(0.0)
}

/// Checks leader control bounds, all speed bounds, the leader's next speed and
/// p_i <= 0.
pub fn is_feasible_state(config: &PlatoonConfig, state: &PlatoonState) -> FeasibilityReport {
    let mut rep = FeasibilityReport::default();
    rep.push(
        ViolationKind::LeaderControl,
        0,
        interval_excess(state.u0, config.leader.a_min, config.leader.a_max),
    );
    for (i, &v) in state.v.iter().enumerate() {
        rep.push(ViolationKind::Speed, i, interval_excess(v, config.v_min, config.v_max));
    }
    rep.push(
        ViolationKind::LeaderNextSpeed,
        0,
        interval_excess(state.v[0] + config.tau * state.u0, config.v_min, config.v_max),
    );
    for i in 1..=config.n() {
        rep.push(ViolationKind::Safety, i, safety_gap_p(config, state, i));
    }
    rep
}

/// Violations of the one-step constraint set for control `u`: control bounds,
/// next-step speed bounds and h_i(u) <= 0.
pub fn control_violations(config: &PlatoonConfig, state: &PlatoonState, u: &[f64]) -> Result<FeasibilityReport> {
    let h = h_one_step(config, state, u)?;
    let a = platoon_accels(config, state, u);
    let mut rep = FeasibilityReport::default();
    for i in 1..=config.n() {
        let p = config.vehicle(i);
        rep.push(ViolationKind::Control, i, interval_excess(u[i - 1], p.a_min, p.a_max));
        let vn = state.v[i] + config.tau * a[i];
        rep.push(ViolationKind::NextSpeed, i, interval_excess(vn, config.v_min, config.v_max));
        rep.push(ViolationKind::OneStepSafety, i, h[i - 1]);
    }
    Ok(rep)
}

fn require_feasible(config: &PlatoonConfig, state: &PlatoonState) -> Result<()> {
    state.check(config)?;
    let rep = is_feasible_state(config, state);
    if let Some(v) = rep.violations.first() {
        return Err(PlatoonError::InfeasibleInput(format!(
            "{:?} at vehicle {} by {:e}",
            v.kind, v.vehicle, v.amount
        )));
    }
    Ok(())
}

/// Hardest admissible braking that keeps every speed at or above v_min.
pub fn feasible_control(config: &PlatoonConfig, state: &PlatoonState) -> Result<Vec<f64>> {
    require_feasible(config, state)?;
    let tau = config.tau;
    Ok((1..=config.n())
        .map(|i| {
            let p = config.vehicle(i);
            let v = state.v[i];
            let drag = p.c2 * v * v + p.c3 * config.g;
            if v + tau * p.a_min >= config.v_min {
                p.a_min + drag
            } else {
                (config.v_min - v) / tau + drag
            }
        })
        .collect())
}

/// `feasible_control` shifted uniformly by `eps`.
pub fn shifted_feasible_control(config: &PlatoonConfig, state: &PlatoonState, eps: f64) -> Result<Vec<f64>> {
    Ok(feasible_control(config, state)?
        .into_iter()
        .map(|u| u + eps)
        .collect())
}

/// Smallest slack of vehicle `i`'s one-step constraints under control `u`.
pub fn vehicle_margin(config: &PlatoonConfig, state: &PlatoonState, u: &[f64], i: usize) -> f64 {
    let p = config.vehicle(i);
    let tau = config.tau;
    let a_prev = if i == 1 {
        state.u0
    } else {
        effective_accel(config.vehicle(i - 1), state.v[i - 1], u[i - 2], config.g)
    };
    let a = effective_accel(p, state.v[i], u[i - 1], config.g);
    let vn = state.v[i] + tau * a;
    let h = p.length + p.reaction_time * vn - (vn - config.v_min).powi(2) / (2.0 * p.a_min)
        + (state.x[i] - state.x[i - 1])
        + tau * (state.v[i] - state.v[i - 1])
        + 0.5 * tau * tau * (a - a_prev);
    [
        u[i - 1] - p.a_min,
        p.a_max - u[i - 1],
        vn - config.v_min,
        config.v_max - vn,
        -h,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min)
}

/// A control in the interior of the one-step constraint set, built vehicle by
/// vehicle from [`feasible_control`] with a positive shift per vehicle.
pub fn interior_control(config: &PlatoonConfig, state: &PlatoonState) -> Result<Vec<f64>> {
    require_feasible(config, state)?;
    let tau = config.tau;
    if state.v[0] <= config.v_min || state.v[0] + tau * state.u0 <= config.v_min {
        return Err(PlatoonError::InfeasibleInput(
            "leader speed must stay strictly above v_min".into(),
        ));
    }
    let mut u = feasible_control(config, state)?;
    for i in 1..=config.n() {
        let base = u[i - 1];
        let headroom = config.vehicle(i).a_max - base;
        let mut eps = (0.5 * headroom).min(0.1);
        let mut best: Option<(f64, f64)> = None;
        loop {
            u[i - 1] = base + eps;
            let m = vehicle_margin(config, state, &u, i);
            if m >= INTERIOR_MARGIN {
                best = Some((eps, m));
                break;
            }
            if m > 0.0 && best.is_none_or(|(_, bm)| m > bm) {
                best = Some((eps, m));
            }
            eps *= 0.5;
            if eps < 1e-12 {
                break;
            }
        }
        match best {
            Some((e, _)) => u[i - 1] = base + e,
            None => return Err(PlatoonError::NoMargin { vehicle: i }),
        }
    }
    Ok(u)
}

/// Random feasible state: speeds uniform in [v_min + 0.5, v_max - 0.5],
/// spacings equal to the safety bound plus U[0.5, 20] m, and a leader input
/// rejection-sampled against the next-speed bounds.
pub fn random_feasible_state<R: Rng + ?Sized>(config: &PlatoonConfig, rng: &mut R) -> PlatoonState {
    let n = config.n();
    let v: Vec<f64> = (0..=n)
        .map(|_| rng.random_range(config.v_min + 0.5..=config.v_max - 0.5))
        .collect();
    let mut x = vec![0.0; n + 1];
    for i in 1..=n {
        let p = config.vehicle(i);
        let bound = p.length + p.reaction_time * v[i] - (v[i] - config.v_min).powi(2) / (2.0 * p.a_min);
        x[i] = x[i - 1] - bound - rng.random_range(0.5..=20.0);
    }
    let u0 = loop {
        let u0 = rng.random_range(config.leader.a_min..=config.leader.a_max);
        let vn = v[0] + config.tau * u0;
        if vn >= config.v_min && vn <= config.v_max {
            break u0;
        }
    };
    PlatoonState { x, v, u0 }
}
