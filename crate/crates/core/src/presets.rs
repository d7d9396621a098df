//! Embedded platoon parameter tables and MPC weight schedules.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{PlatoonError, Result};
use crate::platoon::{LeaderLimits, PlatoonConfig, VehicleParams, GRAVITY};

pub const PRESET_N: usize = 10;

const ALPHA_BASE: [f64; PRESET_N] = [38.85, 40.2, 41.55, 42.90, 44.25, 45.60, 46.95, 48.30, 49.65, 51.00];
const BETA_BASE: [f64; PRESET_N] = [
    130.61, 136.21, 141.82, 147.42, 153.03, 158.64, 164.24, 169.85, 175.46, 181.06,
];
const ZETA_BASE: [f64; PRESET_N] = [62.0, 74.0, 90.0, 92.0, 106.0, 194.0, 298.0, 402.0, 454.0, 480.0];

const MEDIUM_R: [f64; PRESET_N] = [1.21, 1.155, 0.99, 1.045, 1.21, 1.155, 0.99, 1.045, 1.155, 1.045];
const MEDIUM_A_MIN: [f64; PRESET_N] = [-8.14, -7.77, -6.66, -7.03, -8.14, -7.77, -6.66, -7.03, -7.77, -7.03];
const MEDIUM_C2_E4: [f64; PRESET_N] = [3.85, 3.675, 3.15, 3.325, 3.85, 3.675, 3.15, 3.325, 3.675, 3.325];
const MEDIUM_C3_E2: [f64; PRESET_N] = [1.155, 1.103, 0.945, 0.998, 1.155, 1.103, 0.945, 0.998, 1.103, 0.998];

pub const LEADER_LIMITS: LeaderLimits = LeaderLimits { a_min: -8.0, a_max: 1.8 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlatoonPreset {
    Small,
    Medium,
    Large,
}

impl PlatoonPreset {
    pub const ALL: [PlatoonPreset; 3] = [Self::Small, Self::Medium, Self::Large];

    pub fn name(self) -> &'static str {
        match self {
            Self::Small => "small",
            Self::Medium => "medium",
            Self::Large => "large",
        }
    }
}

impl fmt::Display for PlatoonPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlatoonPreset {
    type Err = PlatoonError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "small" => Ok(Self::Small),
            "medium" => Ok(Self::Medium),
            "large" => Ok(Self::Large),
            other => Err(PlatoonError::InvalidConfig(format!("unknown platoon preset `{other}`"))),
        }
    }
}

fn homogeneous(params: VehicleParams, delta: f64) -> PlatoonConfig {
    PlatoonConfig {
        tau: 1.0,
        v_min: 10.0,
        v_max: 27.78,
        delta,
        g: GRAVITY,
        leader: LEADER_LIMITS,
        vehicles: vec![params; PRESET_N],
        edges: PlatoonConfig::path_edges(PRESET_N),
    }
}

pub fn platoon_preset(preset: PlatoonPreset) -> PlatoonConfig {
    match preset {
        PlatoonPreset::Small => homogeneous(
            VehicleParams { length: 5.0, reaction_time: 1.0, a_min: -8.0, a_max: 1.4, c2: 2.5e-4, c3: 0.006 },
            50.0,
        ),
        PlatoonPreset::Large => homogeneous(
            VehicleParams { length: 10.0, reaction_time: 1.25, a_min: -6.8, a_max: 1.4, c2: 4.5e-4, c3: 0.015 },
            65.0,
        ),
        PlatoonPreset::Medium => {
            let mut cfg = homogeneous(
                VehicleParams { length: 7.0, reaction_time: 1.0, a_min: -8.0, a_max: 1.4, c2: 0.0, c3: 0.0 },
                60.0,
            );
            for (k, p) in cfg.vehicles.iter_mut().enumerate() {
                p.reaction_time = MEDIUM_R[k];
                p.a_min = MEDIUM_A_MIN[k];
                p.c2 = MEDIUM_C2_E4[k] * 1e-4;
                p.c3 = MEDIUM_C3_E2[k] * 1e-2;
            }
            cfg
        }
    }
}

/// Diagonal weights of Q_{z,s}, Q_{z',s}, Q_{w,s} for s = 1..=p, stored at
/// index s-1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSchedule {
    pub p: usize,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub zeta: Vec<Vec<f64>>,
}

impl WeightSchedule {
    pub fn n(&self) -> usize {
        self.zeta.first().map_or(0, Vec::len)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: String| Err(PlatoonError::InvalidConfig(m));
        if self.p == 0 {
            return bad("horizon must be at least 1".into());
        }
        for (name, w) in [("alpha", &self.alpha), ("beta", &self.beta), ("zeta", &self.zeta)] {
            if w.len() != self.p || w.iter().any(|row| row.len() != n) {
                return bad(format!("{name} must be {} rows of length {n}", self.p));
            }
        }
        let nonneg = self.alpha.iter().chain(&self.beta).flatten().all(|&x| x >= 0.0);
        let pos = self.zeta.iter().flatten().all(|&x| x > 0.0);
        if !(nonneg && pos) {
            return bad("weights must satisfy alpha, beta >= 0 and zeta > 0".into());
        }
        Ok(())
    }

    /// Every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let f = |w: &Vec<Vec<f64>>| w.iter().map(|r| r.iter().map(|x| x * factor).collect()).collect();
        Self { p: self.p, alpha: f(&self.alpha), beta: f(&self.beta), zeta: f(&self.zeta) }
    }

    /// Weights of the first `n` vehicles.
    pub fn truncated(&self, n: usize) -> Self {
        let f = |w: &Vec<Vec<f64>>| w.iter().map(|r| r[..n].to_vec()).collect();
        Self { p: self.p, alpha: f(&self.alpha), beta: f(&self.beta), zeta: f(&self.zeta) }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let w: Self = serde_json::from_str(s)?;
        w.validate(w.n())?;
        Ok(w)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn scale(base: &[f64; PRESET_N], k: f64, shift: f64) -> Vec<f64> {
    base.iter().map(|b| k * (b - shift)).collect()
}

/// Weight schedule of a named platoon for horizon `p` (1..=5).
pub fn weight_preset(preset: PlatoonPreset, p: usize) -> WeightSchedule {
    assert!((1..=5).contains(&p), "weight presets cover horizons 1..=5");
    let mut alpha = Vec::with_capacity(p);
    let mut beta = Vec::with_capacity(p);
    let mut zeta = Vec::with_capacity(p);
    if p == 1 {
        alpha.push(scale(&ALPHA_BASE, 6.0, 0.0));
        beta.push(scale(&BETA_BASE, 1.0, 0.0));
        zeta.push(scale(&ZETA_BASE, 0.5, 0.0));
    } else {
        let (a1, a_s) = match preset {
            PlatoonPreset::Large => (6.0, 0.0684),
            _ => (9.0, 0.1368),
        };
        alpha.push(scale(&ALPHA_BASE, a1, 1.0));
        beta.push(scale(&BETA_BASE, 1.0, 1.0));
        zeta.push(scale(&ZETA_BASE, 0.5, 1.0));
        for s in 2..=p {
            let d = ((s - 1) as f64).powi(4);
            let (ka, kz) = if s <= 3 { (a_s, 0.0013) } else { (0.0228, 0.0026) };
            alpha.push(scale(&ALPHA_BASE, ka / d, 0.0));
            beta.push(scale(&BETA_BASE, 0.044 / d, 0.0));
            zeta.push(scale(&ZETA_BASE, kz / d, 0.0));
        }
    }
    WeightSchedule { p, alpha, beta, zeta }
}

/// Names of every embedded preset with its platoon and horizon range.
pub fn preset_catalog() -> Vec<(PlatoonPreset, PlatoonConfig, Vec<WeightSchedule>)> {
    PlatoonPreset::ALL
        .iter()
        .map(|&p| (p, platoon_preset(p), (1..=5).map(|h| weight_preset(p, h)).collect()))
        .collect()
}
