//! Leader input profiles.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{PlatoonError, Result};
use crate::presets::LEADER_LIMITS;

pub const CRUISE_SPEED: f64 = 25.0;

/// Leader speed trace sampled every `tau` seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct LeaderTrace {
    pub tau: f64,
    pub speeds: Vec<f64>,
    /// Inputs derived from consecutive speeds, already clipped.
    pub inputs: Vec<f64>,
    /// Number of inputs that hit the leader limits.
    pub clipped: usize,
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    #[allow(dead_code)]
    k: usize,
    #[allow(dead_code)]
    x0: f64,
    v0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub tau: f64,
}

impl LeaderTrace {
    pub fn from_speeds(speeds: Vec<f64>, tau: f64) -> Result<Self> {
        if speeds.len() < 2 || !(tau > 0.0) {
            return Err(PlatoonError::InvalidConfig("leader trace needs two samples and tau > 0".into()));
        }
        let mut clipped = 0;
        let inputs = speeds
            .windows(2)
            .map(|w| {
                let raw = (w[1] - w[0]) / tau;
                let u = raw.clamp(LEADER_LIMITS.a_min, LEADER_LIMITS.a_max);
                if u != raw {
                    clipped += 1;
                }
                u
            })
            .collect();
        Ok(Self { tau, speeds, inputs, clipped })
    }

    /// Sidecar metadata sits next to the CSV with a `.json` extension.
    pub fn sidecar_path(csv: &Path) -> PathBuf {
        csv.with_extension("json")
    }

    /// Reads `k,x0,v0` rows and the sidecar declaring τ.
    pub fn load(csv_path: &Path) -> Result<Self> {
        let meta: TraceMeta = serde_json::from_str(&fs::read_to_string(Self::sidecar_path(csv_path))?)?;
        let mut rdr = csv::Reader::from_path(csv_path)?;
        let speeds = rdr
            .deserialize::<TraceRow>()
            .map(|r| r.map(|row| row.v0))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::from_speeds(speeds, meta.tau)
    }

    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(csv_path)?;
        w.write_record(["k", "x0", "v0"])?;
        let mut x = 0.0;
        for (k, &v) in self.speeds.iter().enumerate() {
            if k > 0 {
                x += 0.5 * self.tau * (self.speeds[k - 1] + v);
            }
            w.write_record([k.to_string(), format!("{x:.6}"), format!("{v:.6}")])?;
        }
        w.flush()?;
        fs::write(Self::sidecar_path(csv_path), serde_json::to_string_pretty(&TraceMeta { tau: self.tau })?)?;
        Ok(())
    }
}

/// Smooth oscillating leader with one sharp slowdown, used when no recorded
/// trace is at hand.
pub fn synthetic_leader_trace(steps: usize, tau: f64) -> LeaderTrace {
    use std::f64::consts::TAU;
    let speeds = (0..=steps)
        .map(|k| {
            let t = k as f64 * tau;
            let dip = match k {
                120..=121 => 3.0 * (k - 119) as f64,
                122..=161 => 6.0 * (1.0 - (k - 121) as f64 / 40.0),
                _ => 0.0,
            };
            let v = 24.0 + 2.0 * (TAU * t / 60.0).sin() + 1.0 * (TAU * t / 17.0 + 0.5).sin() - dip;
            (v * 1e6).round() / 1e6
        })
        .collect();
    LeaderTrace::from_speeds(speeds, tau).expect("valid synthetic trace")
}

#[derive(Clone, Debug, PartialEq)]
pub enum Scenario {
    /// Leader keeps a constant speed.
    Cruise,
    /// Hard braking at −2 m/s² for `decel_steps` steps from k = 51, then
    /// +1 m/s² from k = 101 until the speed is restored.
    BrakeRecover { decel_steps: usize },
    /// Alternating +1, +1, −1, −1 m/s² over k = 51..=98.
    Oscillating,
    Recorded(LeaderTrace),
}

impl Scenario {
    pub fn brake_recover() -> Self {
        Self::BrakeRecover { decel_steps: 4 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Cruise => "cruise",
            Self::BrakeRecover { .. } => "1",
            Self::Oscillating => "2",
            Self::Recorded(_) => "3",
        }
    }

    pub fn initial_speed(&self) -> f64 {
        match self {
            Self::Recorded(t) => t.speeds[0],
            _ => CRUISE_SPEED,
        }
    }

    /// Leader input at step k.
    pub fn leader_input(&self, k: usize) -> f64 {
        match self {
            Self::Cruise => 0.0,
            Self::BrakeRecover { decel_steps } => {
                let d = *decel_steps;
                if (51..51 + d).contains(&k) {
                    -2.0
                } else if (101..101 + 2 * d).contains(&k) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Oscillating => {
                if (51..=98).contains(&k) {
                    if (k - 51) % 4 < 2 {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    0.0
                }
            }
            Self::Recorded(t) => t.inputs.get(k).copied().unwrap_or(0.0),
        }
    }

    /// Maximal runs [start, end] of nonzero leader input within `steps`.
    pub fn events(&self, steps: usize) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for k in 0..steps {
            if self.leader_input(k) != 0.0 {
                match out.last_mut() {
                    Some(last) if last.1 + 1 == k => last.1 = k,
                    _ => out.push((k, k)),
                }
            }
        }
        out
    }
}
