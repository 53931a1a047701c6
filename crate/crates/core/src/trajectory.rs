//! Time-parameterized test paths: line segments under trapezoidal velocity
//! profiles, and the square path used by the tracking experiments.
//!
//! Every segment starts and ends at rest. A segment too short to reach the
//! cruise speed degenerates to a triangular profile peaking at `√(a·L)`.
//! Sampling a plan at the controller cycle yields [`Setpoint`]s carrying both
//! the pose and its inverse kinematics, which is exactly what the networked
//! controller sends to the plant.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{cable_lengths, CableLengths};
use crate::model::{RobotDescription, Vec2};

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("segments {0} and {1} are not contiguous")]
    NotContiguous(usize, usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed plan JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Straight path piece; the motion law comes from the owning plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub start: Vec2,
    pub end: Vec2,
}

impl Segment {
    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }
}

/// Trapezoidal (or triangular) motion law of one segment.
#[derive(Debug, Clone, Copy)]
pub struct Profile {
    pub ramp_time: f64,
    pub cruise_time: f64,
    pub peak_speed: f64,
    pub length: f64,
}

impl Profile {
    fn new(length: f64, speed: f64, accel: f64) -> Profile {
        let ramp_dist = speed * speed / (2.0 * accel);
        if 2.0 * ramp_dist <= length {
            Profile {
                ramp_time: speed / accel,
                cruise_time: (length - 2.0 * ramp_dist) / speed,
                peak_speed: speed,
                length,
            }
        } else {
            let peak = (accel * length).sqrt();
            Profile {
                ramp_time: peak / accel,
                cruise_time: 0.0,
                peak_speed: peak,
                length,
            }
        }
    }

    pub fn duration(&self) -> f64 {
        2.0 * self.ramp_time + self.cruise_time
    }

    pub fn is_triangular(&self) -> bool {
        self.cruise_time == 0.0
    }

    /// Distance travelled after `t` seconds (clamped to the segment).
    fn distance_at(&self, t: f64, accel: f64) -> f64 {
        let t = t.clamp(0.0, self.duration());
        if t <= self.ramp_time {
            0.5 * accel * t * t
        } else if t <= self.ramp_time + self.cruise_time {
            let ramp_dist = 0.5 * accel * self.ramp_time * self.ramp_time;
            ramp_dist + self.peak_speed * (t - self.ramp_time)
        } else {
            let left = self.duration() - t;
            self.length - 0.5 * accel * left * left
        }
    }
}

/// Ordered contiguous segments under one speed/acceleration pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryPlan {
    pub speed_mmps: f64,
    pub accel_mmps2: f64,
    pub segments: Vec<Segment>,
}

/// One controller-cycle command: where the end-effector should be and the
/// cable lengths realizing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Setpoint {
    pub t: f64,
    pub pose: Vec2,
    pub lengths: CableLengths,
}

impl TrajectoryPlan {
    pub fn new(
        segments: Vec<Segment>,
        speed_mmps: f64,
        accel_mmps2: f64,
    ) -> Result<TrajectoryPlan, TrajectoryError> {
        if segments.is_empty() {
            return Err(TrajectoryError::InvalidParameter(
                "plan needs at least one segment".into(),
            ));
        }
        if !(speed_mmps.is_finite() && speed_mmps > 0.0) {
            return Err(TrajectoryError::InvalidParameter(format!(
                "speed must be positive, got {speed_mmps}"
            )));
        }
        if !(accel_mmps2.is_finite() && accel_mmps2 > 0.0) {
            return Err(TrajectoryError::InvalidParameter(format!(
                "acceleration must be positive, got {accel_mmps2}"
            )));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.start.is_finite() && s.end.is_finite()) {
                return Err(TrajectoryError::InvalidParameter(format!(
                    "segment {} has non-finite endpoints",
                    i + 1
                )));
            }
            if s.length() <= 0.0 {
                return Err(TrajectoryError::InvalidParameter(format!(
                    "segment {} has zero length",
                    i + 1
                )));
            }
        }
        for i in 1..segments.len() {
            let gap = segments[i].start - segments[i - 1].end;
            if gap.x.abs() > 1e-9 || gap.y.abs() > 1e-9 {
                return Err(TrajectoryError::NotContiguous(i - 1, i));
            }
        }
        Ok(TrajectoryPlan {
            speed_mmps,
            accel_mmps2,
            segments,
        })
    }

    pub fn profile(&self, segment: usize) -> Profile {
        Profile::new(
            self.segments[segment].length(),
            self.speed_mmps,
            self.accel_mmps2,
        )
    }

    pub fn duration(&self) -> f64 {
        (0..self.segments.len())
            .map(|i| self.profile(i).duration())
            .sum()
    }

    /// Pose at plan time `t` (clamped to `[0, duration]`).
    pub fn pose_at(&self, t: f64) -> Vec2 {
        let mut remaining = t.max(0.0);
        for (i, seg) in self.segments.iter().enumerate() {
            let prof = self.profile(i);
            let dur = prof.duration();
            if remaining <= dur || i == self.segments.len() - 1 {
                let s = prof.distance_at(remaining, self.accel_mmps2);
                let dir = (seg.end - seg.start).scale(1.0 / prof.length);
                return seg.start + dir.scale(s);
            }
            remaining -= dur;
        }
        unreachable!("plans always have at least one segment");
    }

    /// Samples the plan at `t = 0, cycle, 2·cycle, …` plus a final sample at
    /// exactly `duration` (clamped to the exact endpoint).
    pub fn sample(
        &self,
        desc: &RobotDescription,
        cycle: f64,
    ) -> Result<Vec<Setpoint>, TrajectoryError> {
        if !(cycle.is_finite() && cycle > 0.0) {
            return Err(TrajectoryError::InvalidParameter(format!(
                "cycle must be positive, got {cycle}"
            )));
        }
        let duration = self.duration();
        let mut out = Vec::with_capacity((duration / cycle) as usize + 2);
        let mut k = 0u64;
        loop {
            let t = k as f64 * cycle;
            if t >= duration - 1e-9 {
                break;
            }
            let pose = self.pose_at(t);
            out.push(Setpoint {
                t,
                pose,
                lengths: cable_lengths(desc, pose),
            });
            k += 1;
        }
        let end = self.segments[self.segments.len() - 1].end;
        out.push(Setpoint {
            t: duration,
            pose: end,
            lengths: cable_lengths(desc, end),
        });
        Ok(out)
    }
}

/// Square path traversed counter-clockwise from the bottom-left corner, with
/// a full stop at each corner.
pub fn plan_square(
    center: Vec2,
    side: f64,
    speed: f64,
    accel: f64,
) -> Result<TrajectoryPlan, TrajectoryError> {
    if !(side.is_finite() && side > 0.0) {
        return Err(TrajectoryError::InvalidParameter(format!(
            "side must be positive, got {side}"
        )));
    }
    let h = side / 2.0;
    let bl = center + Vec2::new(-h, -h);
    let br = center + Vec2::new(h, -h);
    let tr = center + Vec2::new(h, h);
    let tl = center + Vec2::new(-h, h);
    TrajectoryPlan::new(
        vec![
            Segment { start: bl, end: br },
            Segment { start: br, end: tr },
            Segment { start: tr, end: tl },
            Segment { start: tl, end: bl },
        ],
        speed,
        accel,
    )
}

pub fn load_plan(path: &Path) -> Result<TrajectoryPlan, TrajectoryError> {
    let text = std::fs::read_to_string(path)?;
    let plan: TrajectoryPlan = serde_json::from_str(&text)?;
    // re-run construction checks on externally supplied data
    TrajectoryPlan::new(plan.segments, plan.speed_mmps, plan.accel_mmps2)
}

pub fn save_plan(plan: &TrajectoryPlan, path: &Path) -> Result<(), TrajectoryError> {
    let mut text = serde_json::to_string_pretty(plan)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
