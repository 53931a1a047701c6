//! Design and experiment toolkit for planar cable-driven parallel robots.
//!
//! A cable robot suspends an end-effector from winches through cables anchored
//! on a fixed frame. This crate covers the full loop needed to design one and
//! test its controller before any hardware exists:
//!
//! - [`model`] — robot descriptions (anchors, end-effector, tension limits) with
//!   validation and JSON (de)serialization,
//! - [`kinematics`] — inverse and forward kinematics for the planar suspended
//!   configuration,
//! - [`statics`] — cable tension distributions under gravity and feasible
//!   workspace scans,
//! - [`trajectory`] — trapezoidal velocity profiles over line segments and
//!   square test paths,
//! - [`plant`] — a physical simulation of winches, elastic cables and the
//!   suspended end-effector,
//! - [`netloop`] — a framed wire protocol plus controller, plant server and a
//!   delay-injecting gateway, runnable in lock-step simulated time
//!   (deterministic) or wall-clock real time,
//! - [`analysis`] — delay estimation by cross-correlation and tracking-error
//!   reports from loop logs.
//!
//! Units are millimetres, kilograms, newtons and seconds throughout; angles
//! never appear in the planar point-mass model. Wire timestamps are integer
//! microseconds.
//!
//! The crate is deterministic by construction: equal inputs (including RNG
//! seeds for the gateway) produce byte-identical logs and reports, which is
//! what makes simulated experiments regression-testable.

pub mod analysis;
pub mod kinematics;
pub mod model;
pub mod netloop;
pub mod numfmt;
pub mod plant;
pub mod statics;
pub mod trajectory;

pub use model::{RobotDescription, Vec2};
