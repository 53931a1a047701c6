//! Fixed-step simulator of the suspended cable robot.
//!
//! Each winch is a servo axis tracking its commanded cable length through a
//! rate-clamped first-order lag. The cable between axis and end-effector is a
//! unilateral spring-damper: it pulls when stretched (actual distance exceeds
//! the paid-out length) and goes fully slack otherwise — a cable can never
//! push, and a slack cable doesn't damp either. The end-effector is a point
//! mass under gravity, integrated with semi-implicit Euler.
//!
//! Two modes share the axis model:
//!
//! - `dynamic` — the spring/mass physics above; this is what the networked
//!   experiments run against,
//! - `ideal-kinematic` — the end-effector sits exactly at the closed-form FK
//!   of the axis lengths (rigid massless cables), with tensions read from the
//!   statics solve. Useful as a ground-truth reference: any deviation seen in
//!   a loop log is then attributable to the network, not the physics.
//!
//! The cable elasticity is a numerical device (it avoids a constraint
//! solver), not a studied phenomenon: stiffness defaults keep static sag well
//! under a millimetre.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{cable_lengths, fk_closed, CableLengths};
use crate::model::{attachment_points, RobotDescription, Vec2};
use crate::statics::{solve_tensions, TensionVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlantMode {
    #[serde(rename = "ideal-kinematic")]
    IdealKinematic,
    #[serde(rename = "dynamic")]
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantConfig {
    pub dt_s: f64,
    pub stiffness_n_per_mm: f64,
    pub damping_ns_per_mm: f64,
    pub axis_max_speed_mmps: f64,
    pub axis_time_constant_s: f64,
    pub mode: PlantMode,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            dt_s: 0.0005,
            stiffness_n_per_mm: 50.0,
            damping_ns_per_mm: 0.02,
            axis_max_speed_mmps: 2000.0,
            axis_time_constant_s: 0.002,
            mode: PlantMode::Dynamic,
        }
    }
}

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("invalid plant config: {0}")]
    Config(String),
    #[error("cannot initialize at {0}: {1}")]
    DegenerateStart(Vec2, String),
    #[error("bad command: {0}")]
    BadCommand(String),
    #[error("numerical blowup: |v| = {0:.3e} mm/s (bad gains or unstable dt)")]
    NumericalBlowup(f64),
    #[error("kinematics failed during ideal-mode step: {0}")]
    Kinematics(#[from] crate::kinematics::KinematicsError),
    #[error("statics failed: {0}")]
    Statics(#[from] crate::statics::StaticsError),
}

impl PlantConfig {
    /// Checks parameter ranges and the explicit-integration stability bound
    /// `dt < 2/ω`, ω = √(k/m) of the cable-mass oscillator.
    pub fn validate(&self, desc: &RobotDescription) -> Result<(), PlantError> {
        let bad = |m: String| Err(PlantError::Config(m));
        if !(self.dt_s.is_finite() && self.dt_s > 0.0) {
            return bad(format!("dt_s must be positive, got {}", self.dt_s));
        }
        if !(self.stiffness_n_per_mm.is_finite() && self.stiffness_n_per_mm > 0.0) {
            return bad("stiffness_n_per_mm must be positive".into());
        }
        if !(self.damping_ns_per_mm.is_finite() && self.damping_ns_per_mm >= 0.0) {
            return bad("damping_ns_per_mm must be >= 0".into());
        }
        if !(self.axis_max_speed_mmps.is_finite() && self.axis_max_speed_mmps > 0.0) {
            return bad("axis_max_speed_mmps must be positive".into());
        }
        if !(self.axis_time_constant_s.is_finite() && self.axis_time_constant_s > 0.0) {
            return bad("axis_time_constant_s must be positive".into());
        }
        // k [N/mm] on a mass [kg]: ω² = k·1000/m in 1/s²
        let omega = (self.stiffness_n_per_mm * 1000.0 / desc.ee_mass_kg).sqrt();
        if self.dt_s >= 2.0 / omega {
            return bad(format!(
                "dt_s = {} violates the stability bound dt < 2/ω = {:.6} s \
                 (stiffness {} N/mm on {} kg)",
                self.dt_s,
                2.0 / omega,
                self.stiffness_n_per_mm,
                desc.ee_mass_kg
            ));
        }
        if self.mode == PlantMode::IdealKinematic && desc.cable_count() != 2 {
            return bad(format!(
                "ideal-kinematic mode relies on the closed-form FK and needs \
                 exactly 2 cables, robot has {}",
                desc.cable_count()
            ));
        }
        Ok(())
    }
}

/// Full simulator state. `axis` holds the servo positions (paid-out cable
/// lengths); `tensions` are never negative.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub p: Vec2,
    pub v: Vec2,
    pub axis: CableLengths,
    pub tensions: TensionVector,
    pub t: f64,
}

/// State at rest at `start`: axes at the inverse kinematics, tensions from
/// the statics solve (clamped at zero — an infeasible start just reports
/// slack cables, it doesn't fail).
pub fn init_state(desc: &RobotDescription, start: Vec2) -> Result<PlantState, PlantError> {
    if !start.is_finite() {
        return Err(PlantError::DegenerateStart(start, "non-finite pose".into()));
    }
    let tensions = solve_tensions(desc, start)
        .map_err(|e| PlantError::DegenerateStart(start, e.to_string()))?
        .into_iter()
        .map(|t| t.max(0.0))
        .collect();
    Ok(PlantState {
        p: start,
        v: Vec2::ZERO,
        axis: cable_lengths(desc, start),
        tensions,
        t: 0.0,
    })
}

/// Advances one fixed step under the given commanded lengths.
pub fn step(
    desc: &RobotDescription,
    cfg: &PlantConfig,
    state: &PlantState,
    commanded: &[f64],
) -> Result<PlantState, PlantError> {
    let m = desc.cable_count();
    if commanded.len() != m {
        return Err(PlantError::BadCommand(format!(
            "expected {} lengths, got {}",
            m,
            commanded.len()
        )));
    }
    if commanded.iter().any(|c| !c.is_finite()) {
        return Err(PlantError::BadCommand("non-finite command".into()));
    }
    let dt = cfg.dt_s;

    // servo axes: rate-clamped first-order lag toward the command
    let mut axis = Vec::with_capacity(m);
    let mut rate = Vec::with_capacity(m);
    for (cmd, ax) in commanded.iter().zip(&state.axis) {
        let r = ((cmd - ax) / cfg.axis_time_constant_s)
            .clamp(-cfg.axis_max_speed_mmps, cfg.axis_max_speed_mmps);
        rate.push(r);
        axis.push(ax + r * dt);
    }

    match cfg.mode {
        PlantMode::IdealKinematic => {
            let p = fk_closed(desc, &axis)?;
            let v = (p - state.p).scale(1.0 / dt);
            let tensions = solve_tensions(desc, p)?
                .into_iter()
                .map(|t| t.max(0.0))
                .collect();
            Ok(PlantState {
                p,
                v,
                axis,
                tensions,
                t: state.t + dt,
            })
        }
        PlantMode::Dynamic => {
            let bs = attachment_points(desc);
            let mut force = Vec2::ZERO; // newtons
            let mut tensions = Vec::with_capacity(m);
            for i in 0..m {
                let diff = desc.anchors[i] - (state.p + bs[i]);
                let dist = diff.norm();
                if dist < 1e-9 {
                    // attachment riding on the anchor: direction undefined,
                    // treat as slack for this step
                    tensions.push(0.0);
                    continue;
                }
                let u = diff.scale(1.0 / dist);
                let stretch = dist - axis[i];
                let t_i = if stretch > 0.0 {
                    let sdot = -u.dot(state.v) - rate[i];
                    (cfg.stiffness_n_per_mm * stretch + cfg.damping_ns_per_mm * sdot)
                        .max(0.0)
                } else {
                    0.0
                };
                tensions.push(t_i);
                force = force + u.scale(t_i);
            }
            // N on kg -> mm/s²: a = F/m · 1000
            let acc = force.scale(1000.0 / desc.ee_mass_kg)
                - Vec2::new(0.0, desc.gravity_mmps2());
            let v = state.v + acc.scale(dt);
            let p = state.p + v.scale(dt);
            let speed = v.norm();
            if speed > 1e6 {
                return Err(PlantError::NumericalBlowup(speed));
            }
            Ok(PlantState {
                p,
                v,
                axis,
                tensions,
                t: state.t + dt,
            })
        }
    }
}

/// Read-only snapshot in wire order: pose, measured axis lengths, tensions,
/// plant time. This is exactly what a STATE frame carries.
pub fn measure(state: &PlantState) -> (Vec2, &[f64], &[f64], f64) {
    (state.p, &state.axis, &state.tensions, state.t)
}
