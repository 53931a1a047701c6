//! Python bindings for the cdpr toolkit.
//!
//! Exposes the core surface in-process — no subprocess or CSV detour:
//!
//!     from cdpr_py import Robot, Plan, Plant, run_loop, estimate_delay
//!     r = Robot()
//!     lengths = r.ik(750.0, 750.0)
//!     log = run_loop(r, Plan.square(speed=1000.0), gateway=(120.0, 10.0, 42))
//!     print(log.delay_report())

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use cdpr_core::analysis;
use cdpr_core::kinematics::{cable_lengths, fk_closed};
use cdpr_core::model::{load_robot, reference_robot, validate, RobotDescription, Vec2};
use cdpr_core::netloop::{run_simulated_loop, LoopLog as CoreLog, SimLoopSpec};
use cdpr_core::plant::{self, PlantConfig, PlantMode, PlantState};
use cdpr_core::statics::{is_feasible, solve_tensions, workspace_scan};
use cdpr_core::trajectory::{load_plan, plan_square, save_plan, TrajectoryPlan};

/// `(t, (x, y), cable_lengths)` row from [`Plan::sample`].
type SampleRow = (f64, (f64, f64), Vec<f64>);
/// `(t, target_pose, measured_pose)` row from [`LoopLog::records`].
type RecordRow = (f64, (f64, f64), Option<(f64, f64)>);

fn verr(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_mode(mode: &str) -> PyResult<PlantMode> {
    match mode {
        "dynamic" => Ok(PlantMode::Dynamic),
        "ideal" | "ideal-kinematic" => Ok(PlantMode::IdealKinematic),
        other => Err(PyValueError::new_err(format!(
            "mode must be 'dynamic' or 'ideal-kinematic', got {other:?}"
        ))),
    }
}

/// A robot description plus its kinematics and statics queries.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Robot {
    desc: RobotDescription,
}

#[pymethods]
impl Robot {
    /// The built-in reference robot, or one loaded from a JSON description.
    #[new]
    #[pyo3(signature = (path=None))]
    fn new(path: Option<PathBuf>) -> PyResult<Self> {
        let desc = match path {
            Some(p) => load_robot(&p).map_err(verr)?,
            None => reference_robot(),
        };
        let violations = validate(&desc);
        if !violations.is_empty() {
            return Err(verr(format!("invalid robot: {}", violations[0])));
        }
        Ok(Robot { desc })
    }

    fn cable_count(&self) -> usize {
        self.desc.cable_count()
    }

    fn anchors(&self) -> Vec<(f64, f64)> {
        self.desc.anchors.iter().map(|a| (a.x, a.y)).collect()
    }

    /// Cable lengths for a pose [mm].
    fn ik(&self, x: f64, y: f64) -> Vec<f64> {
        cable_lengths(&self.desc, Vec2::new(x, y))
    }

    /// Pose for two cable lengths; raises ValueError when no intersection
    /// exists below the anchor line.
    fn fk(&self, lengths: Vec<f64>) -> PyResult<(f64, f64)> {
        let p = fk_closed(&self.desc, &lengths).map_err(verr)?;
        Ok((p.x, p.y))
    }

    /// Static cable tensions at a pose [N]; raises ValueError on degenerate
    /// geometry. Tensions outside the limits are returned, not errors — see
    /// `is_feasible`.
    fn tensions(&self, x: f64, y: f64) -> PyResult<Vec<f64>> {
        solve_tensions(&self.desc, Vec2::new(x, y)).map_err(verr)
    }

    /// Whether bounded tensions can hold the pose in static equilibrium.
    fn is_feasible(&self, x: f64, y: f64) -> bool {
        is_feasible(&self.desc, Vec2::new(x, y)).0
    }

    /// Scans `[x_min, x_max] × [y_min, y_max]` and returns
    /// `(feasible_cells, total_cells)`.
    #[pyo3(signature = (x_min=0.0, x_max=1500.0, y_min=0.0, y_max=1500.0, spacing=10.0))]
    fn workspace(
        &self,
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
        spacing: f64,
    ) -> PyResult<(usize, usize)> {
        let map = workspace_scan(&self.desc, (x_min, x_max), (y_min, y_max), spacing)
            .map_err(verr)?;
        Ok((map.feasible_count(), map.cells.len()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Robot({} cables, {} kg, tensions [{}, {}] N)",
            self.desc.cable_count(),
            self.desc.ee_mass_kg,
            self.desc.tension_min_n,
            self.desc.tension_max_n
        )
    }
}

/// A sampled-motion plan (segments with trapezoidal speed profiles).
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Plan {
    plan: TrajectoryPlan,
}

#[pymethods]
impl Plan {
    /// Square path with a full stop at each corner.
    #[staticmethod]
    #[pyo3(signature = (center_x=750.0, center_y=850.0, side=200.0, speed=100.0, accel=2000.0))]
    fn square(center_x: f64, center_y: f64, side: f64, speed: f64, accel: f64) -> PyResult<Self> {
        let plan = plan_square(Vec2::new(center_x, center_y), side, speed, accel).map_err(verr)?;
        Ok(Plan { plan })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Plan {
            plan: load_plan(&path).map_err(verr)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_plan(&self.plan, &path).map_err(verr)
    }

    fn duration(&self) -> f64 {
        self.plan.duration()
    }

    fn pose_at(&self, t: f64) -> (f64, f64) {
        let p = self.plan.pose_at(t);
        (p.x, p.y)
    }

    /// `(t, (x, y), lengths)` setpoints on the controller cycle grid.
    #[pyo3(signature = (robot, cycle_s=0.01))]
    fn sample(&self, robot: &Robot, cycle_s: f64) -> PyResult<Vec<SampleRow>> {
        let samples = self.plan.sample(&robot.desc, cycle_s).map_err(verr)?;
        Ok(samples
            .into_iter()
            .map(|s| (s.t, (s.pose.x, s.pose.y), s.lengths))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Plan({} segments, {} mm/s, {:.4} s)",
            self.plan.segments.len(),
            self.plan.speed_mmps,
            self.plan.duration()
        )
    }
}

/// The stepped winch/cable/end-effector simulation.
#[pyclass]
struct Plant {
    desc: RobotDescription,
    cfg: PlantConfig,
    state: PlantState,
}

#[pymethods]
impl Plant {
    /// A plant at rest at `(x, y)`. Unspecified config fields keep their
    /// defaults.
    #[new]
    #[pyo3(signature = (robot, x=750.0, y=750.0, mode="dynamic", dt=None, stiffness=None, damping=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        robot: &Robot,
        x: f64,
        y: f64,
        mode: &str,
        dt: Option<f64>,
        stiffness: Option<f64>,
        damping: Option<f64>,
    ) -> PyResult<Self> {
        let mut cfg = PlantConfig {
            mode: parse_mode(mode)?,
            ..PlantConfig::default()
        };
        if let Some(v) = dt {
            cfg.dt_s = v;
        }
        if let Some(v) = stiffness {
            cfg.stiffness_n_per_mm = v;
        }
        if let Some(v) = damping {
            cfg.damping_ns_per_mm = v;
        }
        cfg.validate(&robot.desc).map_err(verr)?;
        let state = plant::init_state(&robot.desc, Vec2::new(x, y)).map_err(verr)?;
        Ok(Plant {
            desc: robot.desc.clone(),
            cfg,
            state,
        })
    }

    /// Advances `n` integration steps holding the commanded cable lengths.
    #[pyo3(signature = (cmd_lengths, n=1))]
    fn step(&mut self, cmd_lengths: Vec<f64>, n: usize) -> PyResult<()> {
        for _ in 0..n {
            self.state = plant::step(&self.desc, &self.cfg, &self.state, &cmd_lengths)
                .map_err(verr)?;
        }
        Ok(())
    }

    fn pose(&self) -> (f64, f64) {
        (self.state.p.x, self.state.p.y)
    }

    fn velocity(&self) -> (f64, f64) {
        (self.state.v.x, self.state.v.y)
    }

    fn tensions(&self) -> Vec<f64> {
        self.state.tensions.clone()
    }

    fn axis_lengths(&self) -> Vec<f64> {
        self.state.axis.clone()
    }

    fn time(&self) -> f64 {
        self.state.t
    }

    fn dt(&self) -> f64 {
        self.cfg.dt_s
    }
}

/// One experiment log: per-cycle targets, commands and measurements.
#[pyclass]
struct LoopLog {
    log: CoreLog,
}

#[pymethods]
impl LoopLog {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(LoopLog {
            log: CoreLog::load(&path).map_err(verr)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.log.save(&path).map_err(verr)
    }

    fn __len__(&self) -> usize {
        self.log.records.len()
    }

    fn cycle_s(&self) -> f64 {
        self.log.cycle_us as f64 * 1e-6
    }

    fn truncated(&self) -> bool {
        self.log.truncated
    }

    /// `(t_s, (target_x, target_y), measured_pose_or_None)` per cycle.
    fn records(&self) -> Vec<RecordRow> {
        self.log
            .records
            .iter()
            .map(|r| {
                (
                    r.t_us as f64 * 1e-6,
                    (r.target.x, r.target.y),
                    r.meas_pose.map(|p| (p.x, p.y)),
                )
            })
            .collect()
    }

    /// Per-axis `(axis, delay_ms, peak_corr, negative_peak)` via
    /// cross-correlation of commanded against measured cable lengths.
    #[pyo3(signature = (label="log"))]
    fn delay_report(&self, label: &str) -> PyResult<Vec<(String, f64, f64, bool)>> {
        let rep = analysis::delay_report(&self.log, label).map_err(verr)?;
        Ok(rep
            .axes
            .into_iter()
            .map(|a| (a.axis.to_string(), a.delay_ms, a.peak_corr, a.negative_peak))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "LoopLog({} records @ {} µs{})",
            self.log.records.len(),
            self.log.cycle_us,
            if self.log.truncated { ", truncated" } else { "" }
        )
    }
}

/// Runs a full simulated-time control-loop experiment. `gateway` is
/// `(base_delay_ms, jitter_ms, seed)` or None for a direct connection.
/// Deterministic: identical arguments produce an identical log.
#[pyfunction]
#[pyo3(signature = (robot, plan, cycle_s=0.01, plant_mode="dynamic", gateway=None, log_path=None))]
fn run_loop(
    robot: &Robot,
    plan: &Plan,
    cycle_s: f64,
    plant_mode: &str,
    gateway: Option<(f64, f64, u64)>,
    log_path: Option<PathBuf>,
) -> PyResult<LoopLog> {
    let spec = SimLoopSpec {
        cycle_s,
        plant: PlantConfig {
            mode: parse_mode(plant_mode)?,
            ..PlantConfig::default()
        },
        gateway,
    };
    let log = run_simulated_loop(&robot.desc, &plan.plan, &spec, log_path.as_deref())
        .map_err(verr)?;
    Ok(LoopLog { log })
}

/// How far `measured` lags `target`, in milliseconds, for two series sampled
/// every `cycle_s` seconds.
#[pyfunction]
fn estimate_delay(target: Vec<f64>, measured: Vec<f64>, cycle_s: f64) -> PyResult<f64> {
    analysis::estimate_delay(&target, &measured, cycle_s).map_err(verr)
}

#[pymodule]
fn cdpr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Robot>()?;
    m.add_class::<Plan>()?;
    m.add_class::<Plant>()?;
    m.add_class::<LoopLog>()?;
    m.add_function(wrap_pyfunction!(run_loop, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_delay, m)?)?;
    Ok(())
}
