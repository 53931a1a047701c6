//! Static cable tension distributions and workspace feasibility.
//!
//! At a pose `p` the cables act along unit vectors `u_i` from the attachment
//! point towards the anchor. Collecting them as columns gives the structure
//! matrix `A(p)`; static equilibrium under gravity is
//!
//! ```text
//!     A(p) · T = B,      B = (0, m·g)   [+ zero moment when dof = 3]
//! ```
//!
//! For m = n cables the distribution is unique. For m = n + 1 there is a
//! one-dimensional family `T(λ) = T_p + λ·ν` along the structure-matrix
//! nullspace; we pick the λ that centres the tensions inside their admissible
//! interval (maximum margin), or the least-violating λ when no admissible
//! choice exists. A pose is feasible when every tension lies within
//! `[tension_min_n, tension_max_n]`.
//!
//! Note on dof = 3: the moment row uses the attachment offsets `c_i = b_i`.
//! Layouts where every cable shares one attachment point (the default for
//! m ≠ 2) make that row linearly dependent, so the solve correctly reports
//! degenerate geometry — a single-point suspension cannot control rotation.

use std::io;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{attachment_points, RobotDescription, Vec2};
use crate::numfmt::fmt_g6;

/// One tension per cable, newtons, in anchor order.
pub type TensionVector = Vec<f64>;

/// Relative singular-value cutoff for rank decisions.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum StaticsError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

fn wrench_size(desc: &RobotDescription) -> Result<usize, StaticsError> {
    match desc.dof {
        2 => Ok(2),
        3 => Ok(3),
        other => Err(StaticsError::Unsupported(format!(
            "planar statics supports dof 2 or 3, robot has dof {}",
            other
        ))),
    }
}

/// Structure matrix `A(p)`: one column per cable with the force direction
/// (and, for dof = 3, the moment arm `c_i × u_i` in N·mm per N).
pub fn structure_matrix(
    desc: &RobotDescription,
    pose: Vec2,
) -> Result<DMatrix<f64>, StaticsError> {
    let n = wrench_size(desc)?;
    let m = desc.cable_count();
    let bs = attachment_points(desc);
    let mut a = DMatrix::zeros(n, m);
    for i in 0..m {
        let diff = desc.anchors[i] - (pose + bs[i]);
        let len = diff.norm();
        if len < 1e-9 {
            return Err(StaticsError::DegenerateGeometry(format!(
                "cable {} has zero length at {}",
                i + 1,
                pose
            )));
        }
        let u = diff.scale(1.0 / len);
        a[(0, i)] = u.x;
        a[(1, i)] = u.y;
        if n == 3 {
            a[(2, i)] = bs[i].cross(u);
        }
    }
    Ok(a)
}

/// Wrench the tensions must produce to hold the end-effector: the upward
/// force balancing gravity (newtons), zero moment.
pub fn gravity_wrench(desc: &RobotDescription) -> Result<DVector<f64>, StaticsError> {
    let n = wrench_size(desc)?;
    let mut b = DVector::zeros(n);
    b[1] = desc.weight_n();
    Ok(b)
}

/// Nullspace vector of an n×(n+1) matrix by cofactor expansion: component i
/// is the signed determinant of the minor without column i. Exact up to
/// floating rounding, no iteration involved.
fn cofactor_nullspace(a: &DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows();
    let m = a.ncols();
    debug_assert_eq!(m, n + 1);
    let mut v = DVector::zeros(m);
    for i in 0..m {
        let minor = a.clone().remove_column(i);
        let det = minor.determinant();
        v[i] = if i % 2 == 0 { det } else { -det };
    }
    v
}

/// Margin of a tension vector to the admissible interval: positive inside,
/// negative outside (worst cable).
fn bounds_margin(t: &[f64], lo: f64, hi: f64) -> f64 {
    t.iter()
        .map(|&ti| (ti - lo).min(hi - ti))
        .fold(f64::INFINITY, f64::min)
}

/// Solves the static equilibrium for the cable tensions at a pose.
///
/// m = n: the unique solution. m = n + 1: the maximum-margin distribution
/// along the nullspace (least-violating one if no admissible λ exists).
/// Other cable counts are unsupported by this planar solver.
pub fn solve_tensions(
    desc: &RobotDescription,
    pose: Vec2,
) -> Result<TensionVector, StaticsError> {
    let n = wrench_size(desc)?;
    let m = desc.cable_count();
    if m < n || m > n + 1 {
        return Err(StaticsError::Unsupported(format!(
            "tension solve needs {} or {} cables for dof {}, robot has {}",
            n,
            n + 1,
            desc.dof,
            m
        )));
    }
    let a = structure_matrix(desc, pose)?;
    let b = gravity_wrench(desc)?;

    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    // NaN (pose on an anchor) must land here too, hence not `smax <= 0.0`
    if smax.is_nan() || smax <= 0.0 {
        return Err(StaticsError::DegenerateGeometry(format!(
            "structure matrix vanishes at {}",
            pose
        )));
    }
    let cutoff = smax * RANK_TOL;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if rank < n {
        return Err(StaticsError::DegenerateGeometry(format!(
            "structure matrix is rank {} (need {}) at {}",
            rank, n, pose
        )));
    }
    let particular = svd
        .solve(&b, cutoff)
        .map_err(|e| StaticsError::DegenerateGeometry(e.to_string()))?;

    if m == n {
        return Ok(particular.iter().copied().collect());
    }

    // One-parameter family T(λ) = particular + λ·ν. The worst-cable margin
    // is a minimum of linear functions of λ, hence concave: one ternary
    // search maximizes it, yielding the centred distribution when the pose is
    // feasible and the least-violating one when it is not.
    let nu = cofactor_nullspace(&a);
    let (lo, hi) = (desc.tension_min_n, desc.tension_max_n);
    let mut bounds: Vec<f64> = Vec::with_capacity(2 * m);
    for i in 0..m {
        let (tp, vi) = (particular[i], nu[i]);
        if vi.abs() < 1e-14 {
            continue;
        }
        bounds.push((lo - tp) / vi);
        bounds.push((hi - tp) / vi);
    }

    let tensions_at =
        |lam: f64| -> Vec<f64> { (0..m).map(|i| particular[i] + lam * nu[i]).collect() };
    let lambda = if bounds.is_empty() {
        0.0 // nullspace orthogonal to every bound: λ is irrelevant
    } else {
        // the maximizer lies within the hull of the per-cable bound crossings
        let mut a0 = bounds.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
        let mut a1 = bounds.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
        for _ in 0..200 {
            let m1 = a0 + (a1 - a0) / 3.0;
            let m2 = a1 - (a1 - a0) / 3.0;
            if bounds_margin(&tensions_at(m1), lo, hi)
                >= bounds_margin(&tensions_at(m2), lo, hi)
            {
                a1 = m2;
            } else {
                a0 = m1;
            }
        }
        0.5 * (a0 + a1)
    };

    Ok(tensions_at(lambda))
}

/// Feasibility check: the pose is feasible when a tension distribution exists
/// with every cable inside `[tension_min_n, tension_max_n]`. Degenerate or
/// unsolvable poses are infeasible (with no tensions), not errors.
///
/// The margin test allows a hair of slack (1e-9 N) so that poses sitting
/// exactly on a bound — e.g. a cable pointing straight down carries zero
/// tension in exact arithmetic — classify the same way regardless of the
/// sign of the solver's rounding noise.
pub fn is_feasible(desc: &RobotDescription, pose: Vec2) -> (bool, Option<TensionVector>) {
    match solve_tensions(desc, pose) {
        Ok(t) => {
            let ok = bounds_margin(&t, desc.tension_min_n, desc.tension_max_n) >= -1e-9;
            (ok, Some(t))
        }
        Err(_) => (false, None),
    }
}

/// One grid node of a workspace map.
#[derive(Debug, Clone)]
pub struct CellSample {
    pub pose: Vec2,
    pub feasible: bool,
    /// `None` when the pose was degenerate/unsolvable.
    pub tensions: Option<TensionVector>,
}

impl CellSample {
    pub fn t_max(&self) -> Option<f64> {
        self.tensions
            .as_ref()
            .map(|t| t.iter().fold(f64::NEG_INFINITY, |m, v| v.max(m)))
    }
}

/// Feasibility samples on a regular grid, row-major from `(x_min, y_min)`
/// (x varies fastest).
#[derive(Debug, Clone)]
pub struct WorkspaceMap {
    pub x_min: f64,
    pub y_min: f64,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    pub cable_count: usize,
    pub cells: Vec<CellSample>,
}

impl WorkspaceMap {
    pub fn cell(&self, ix: usize, iy: usize) -> &CellSample {
        &self.cells[iy * self.nx + ix]
    }

    pub fn feasible_count(&self) -> usize {
        self.cells.iter().filter(|c| c.feasible).count()
    }
}

/// Scans the rectangle `[x_range.0, x_range.1] × [y_range.0, y_range.1]`
/// with the given spacing. Inverted ranges produce an empty map.
pub fn workspace_scan(
    desc: &RobotDescription,
    x_range: (f64, f64),
    y_range: (f64, f64),
    spacing: f64,
) -> Result<WorkspaceMap, StaticsError> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(StaticsError::InvalidGrid(format!(
            "spacing must be positive, got {}",
            spacing
        )));
    }
    let count = |lo: f64, hi: f64| -> usize {
        if hi < lo {
            0
        } else {
            ((hi - lo) / spacing + 1e-9) as usize + 1
        }
    };
    let nx = count(x_range.0, x_range.1);
    let ny = count(y_range.0, y_range.1);
    let mut cells = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let pose = Vec2::new(
                x_range.0 + ix as f64 * spacing,
                y_range.0 + iy as f64 * spacing,
            );
            let (feasible, tensions) = is_feasible(desc, pose);
            cells.push(CellSample {
                pose,
                feasible,
                tensions,
            });
        }
    }
    Ok(WorkspaceMap {
        x_min: x_range.0,
        y_min: y_range.0,
        spacing,
        nx,
        ny,
        cable_count: desc.cable_count(),
        cells,
    })
}

/// Writes a map as CSV: `x_mm,y_mm,feasible,t_max_n,t1_n,...,tm_n`, one row
/// per cell in storage order, 6-significant-digit floats, `nan` tensions for
/// unsolvable cells.
pub fn write_workspace_csv(map: &WorkspaceMap, mut w: impl io::Write) -> io::Result<()> {
    write!(w, "x_mm,y_mm,feasible,t_max_n")?;
    for i in 1..=map.cable_count {
        write!(w, ",t{}_n", i)?;
    }
    writeln!(w)?;
    for cell in &map.cells {
        write!(
            w,
            "{},{},{},{}",
            fmt_g6(cell.pose.x),
            fmt_g6(cell.pose.y),
            if cell.feasible { 1 } else { 0 },
            fmt_g6(cell.t_max().unwrap_or(f64::NAN)),
        )?;
        match &cell.tensions {
            Some(t) => {
                for ti in t {
                    write!(w, ",{}", fmt_g6(*ti))?;
                }
            }
            None => {
                for _ in 0..map.cable_count {
                    write!(w, ",nan")?;
                }
            }
        }
        writeln!(w)?;
    }
    Ok(())
}
