//! Robot descriptions: geometry, mass, tension limits, validation and JSON I/O.
//!
//! A [`RobotDescription`] is the single source of truth the rest of the crate
//! works from. Anchors are winch exit points on the fixed frame, given in the
//! world frame (x right, y up, mm). The end-effector is a rigid rectangle whose
//! pose is reduced to its centre point: the planar suspended configuration
//! keeps the platform level, so orientation is never a state variable.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Plain 2D vector in millimetres. Serializes as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// Planar cross product (z component of the 3D cross).
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Full description of one robot. See the crate docs for unit conventions.
///
/// The JSON form uses exactly these field names; unknown keys are rejected so
/// a typo in a config file fails loudly instead of silently using a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotDescription {
    /// Winch anchor points on the frame, world coordinates in mm.
    /// Cable i attaches at `anchors[i]`; for the 2-cable layout cable 1 is
    /// the left anchor.
    pub anchors: Vec<Vec2>,
    pub ee_width_mm: f64,
    pub ee_height_mm: f64,
    pub ee_mass_kg: f64,
    pub tension_min_n: f64,
    pub tension_max_n: f64,
    /// Wrench components the tension distribution must balance: 2 (planar
    /// forces) or 3 (forces + moment). 6 is accepted by the schema for
    /// forward compatibility but unsupported by the planar solvers.
    pub dof: u8,
    #[serde(default = "default_gravity")]
    pub gravity_mps2: f64,
}

fn default_gravity() -> f64 {
    9.81
}

impl RobotDescription {
    pub fn cable_count(&self) -> usize {
        self.anchors.len()
    }

    /// Gravity in internal units (mm/s²).
    pub fn gravity_mmps2(&self) -> f64 {
        self.gravity_mps2 * 1000.0
    }

    /// End-effector weight in newtons.
    pub fn weight_n(&self) -> f64 {
        self.ee_mass_kg * self.gravity_mps2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

/// One validation finding. `Error` findings make a description unusable;
/// `Warning`s flag layouts the closed-form tools handle poorly but the
/// numeric ones accept.
#[derive(Debug, Clone)]
pub struct Violation {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{}: {}", tag, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed robot JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid robot description: {0}")]
    Validation(String),
}

/// The robot used throughout the examples and the acceptance experiments:
/// a 1500 mm square frame with winches in the top corners, a 120 mm square
/// end-effector of 1 kg, and 0–20 N admissible cable tension.
pub fn reference_robot() -> RobotDescription {
    RobotDescription {
        anchors: vec![Vec2::new(0.0, 1500.0), Vec2::new(1500.0, 1500.0)],
        ee_width_mm: 120.0,
        ee_height_mm: 120.0,
        ee_mass_kg: 1.0,
        tension_min_n: 0.0,
        tension_max_n: 20.0,
        dof: 2,
        gravity_mps2: 9.81,
    }
}

/// Checks a description and returns all findings (possibly empty).
pub fn validate(desc: &RobotDescription) -> Vec<Violation> {
    let mut out = Vec::new();
    let err = |msg: String| Violation {
        severity: Severity::Error,
        message: msg,
    };

    if desc.anchors.is_empty() {
        out.push(err("at least one anchor is required".into()));
    }
    for (i, a) in desc.anchors.iter().enumerate() {
        if !a.is_finite() {
            out.push(err(format!("anchor {} has non-finite coordinates", i + 1)));
        }
    }
    if !(desc.ee_width_mm.is_finite() && desc.ee_width_mm > 0.0) {
        out.push(err("ee_width_mm must be positive".into()));
    }
    if !(desc.ee_height_mm.is_finite() && desc.ee_height_mm > 0.0) {
        out.push(err("ee_height_mm must be positive".into()));
    }
    if !(desc.ee_mass_kg.is_finite() && desc.ee_mass_kg > 0.0) {
        out.push(err("ee_mass_kg must be positive".into()));
    }
    if !(desc.tension_min_n.is_finite() && desc.tension_min_n >= 0.0) {
        out.push(err("tension_min_n must be >= 0".into()));
    }
    if !(desc.tension_max_n.is_finite() && desc.tension_max_n > desc.tension_min_n) {
        out.push(err("tension_max_n must exceed tension_min_n".into()));
    }
    if !matches!(desc.dof, 2 | 3 | 6) {
        out.push(err(format!("dof must be 2, 3 or 6 (got {})", desc.dof)));
    }
    if !(desc.gravity_mps2.is_finite() && desc.gravity_mps2 > 0.0) {
        out.push(err("gravity_mps2 must be positive".into()));
    }

    if desc.anchors.len() == 2 {
        let (a1, a2) = (desc.anchors[0], desc.anchors[1]);
        if a1.is_finite() && a2.is_finite() {
            if a1.y != a2.y {
                out.push(Violation {
                    severity: Severity::Warning,
                    message: "2-cable layout: anchors are at unequal heights; the closed-form \
                              forward kinematics assumes a level top beam"
                        .into(),
                });
            }
            if a1.x >= a2.x {
                out.push(Violation {
                    severity: Severity::Warning,
                    message: "2-cable layout: anchor 1 is expected left of anchor 2".into(),
                });
            }
        }
    }
    out
}

fn first_error(violations: &[Violation]) -> Option<&Violation> {
    violations.iter().find(|v| v.severity == Severity::Error)
}

/// Loads and validates a robot JSON file. Warnings are tolerated, error-grade
/// violations are not.
pub fn load_robot(path: &Path) -> Result<RobotDescription, ModelError> {
    let text = std::fs::read_to_string(path)?;
    let desc: RobotDescription = serde_json::from_str(&text)?;
    if let Some(v) = first_error(&validate(&desc)) {
        return Err(ModelError::Validation(v.message.clone()));
    }
    Ok(desc)
}

/// Writes the description as pretty-printed JSON. `load_robot` of the result
/// round-trips exactly (all values are preserved bit-for-bit by serde_json).
pub fn save_robot(desc: &RobotDescription, path: &Path) -> Result<(), ModelError> {
    if let Some(v) = first_error(&validate(desc)) {
        return Err(ModelError::Validation(v.message.clone()));
    }
    let mut text = serde_json::to_string_pretty(desc)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Cable attachment points on the end-effector, in the EE frame (origin at
/// the centre). The 2-cable layout uses the top corners — cable 1 top-left,
/// cable 2 top-right — matching the anchor order. Any other cable count
/// attaches everything at the top-centre.
pub fn attachment_points(desc: &RobotDescription) -> Vec<Vec2> {
    let hw = desc.ee_width_mm / 2.0;
    let hh = desc.ee_height_mm / 2.0;
    if desc.anchors.len() == 2 {
        vec![Vec2::new(-hw, hh), Vec2::new(hw, hh)]
    } else {
        vec![Vec2::new(0.0, hh); desc.anchors.len()]
    }
}

/// 48-bit configuration hash, used by the wire handshake so both ends can
/// verify they were launched against the same robot. FNV-1a over the canonical
/// (compact, field-ordered) JSON form, XOR-folded to 48 bits so the value
/// survives a round trip through an f64 payload exactly.
pub fn robot_hash(desc: &RobotDescription) -> u64 {
    let canon = serde_json::to_string(desc).expect("robot description serializes");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in canon.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    (h ^ (h >> 48)) & 0x0000_ffff_ffff_ffff
}
