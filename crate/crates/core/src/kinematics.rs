//! Inverse and forward kinematics of the planar suspended robot.
//!
//! The pose is the end-effector centre `p`; the platform stays level, so with
//! attachment points `b_i` (EE frame) and anchors `a_i` the vector loop for
//! cable i is simply
//!
//! ```text
//!     a_i = p + b_i + l_i * u_i,        u_i unit vector attachment -> anchor
//! ```
//!
//! Inverse kinematics reads the length straight off the loop,
//! `l_i = |a_i - (p + b_i)|`, and is defined for every pose. Forward
//! kinematics for the 2-cable layout is a two-circle intersection: shifting
//! each anchor by its attachment offset reduces both cables to circles around
//! a single point `q = p + (0, h/2)`, and the suspended configuration is the
//! lower intersection. For any other layout (or as a cross-check)
//! [`fk_numeric`] solves the least-squares problem with a damped Gauss–Newton
//! iteration from a caller-supplied guess.

use thiserror::Error;

use crate::model::{attachment_points, RobotDescription, Vec2};

/// One length per cable, mm, in anchor order.
pub type CableLengths = Vec<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum KinematicsError {
    #[error("lengths {0} and {1} are geometrically inconsistent (no intersection)")]
    NoSolution(f64, f64),
    #[error("no convergence after {iterations} iterations; residual ‖r‖∞ = {residual_inf} mm at {pose}")]
    NoConvergence {
        pose: Vec2,
        residual_inf: f64,
        iterations: usize,
    },
    #[error("{0}")]
    Unsupported(String),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
}

/// Inverse kinematics: cable lengths for an end-effector centre pose.
/// Defined everywhere (whether the pose is *feasible* is statics' concern).
pub fn cable_lengths(desc: &RobotDescription, pose: Vec2) -> CableLengths {
    let bs = attachment_points(desc);
    desc.anchors
        .iter()
        .zip(&bs)
        .map(|(a, b)| (*a - (pose + *b)).norm())
        .collect()
}

/// Closed-form forward kinematics for the 2-cable layout.
///
/// Returns the lower of the two circle intersections (the hanging solution —
/// the upper one sits above the beam and is unreachable for a suspended
/// platform). Lengths that violate the triangle inequality with the reduced
/// anchor spacing yield [`KinematicsError::NoSolution`].
pub fn fk_closed(desc: &RobotDescription, lengths: &[f64]) -> Result<Vec2, KinematicsError> {
    if desc.cable_count() != 2 {
        return Err(KinematicsError::Unsupported(format!(
            "closed-form FK needs exactly 2 cables, robot has {}",
            desc.cable_count()
        )));
    }
    if lengths.len() != 2 {
        return Err(KinematicsError::Unsupported(format!(
            "expected 2 lengths, got {}",
            lengths.len()
        )));
    }
    let (l1, l2) = (lengths[0], lengths[1]);
    if !(l1.is_finite() && l2.is_finite()) || l1 < 0.0 || l2 < 0.0 {
        return Err(KinematicsError::NoSolution(l1, l2));
    }
    let bs = attachment_points(desc);
    // Reduced anchors: both cables become circles around q = p + (0, h/2).
    let c1 = desc.anchors[0] - Vec2::new(bs[0].x, 0.0);
    let c2 = desc.anchors[1] - Vec2::new(bs[1].x, 0.0);
    let span = c2 - c1;
    let d = span.norm();
    if d < 1e-9 {
        return Err(KinematicsError::Degenerate(
            "reduced anchors coincide".into(),
        ));
    }
    // Distance from c1 to the chord foot along the anchor line.
    let along = (l1 * l1 - l2 * l2 + d * d) / (2.0 * d);
    let mut h2 = l1 * l1 - along * along;
    if h2 < 0.0 {
        // tolerate tangency lost to rounding
        if h2 > -1e-6 * l1.max(1.0) {
            h2 = 0.0;
        } else {
            return Err(KinematicsError::NoSolution(l1, l2));
        }
    }
    let h = h2.sqrt();
    let e = span.scale(1.0 / d);
    let foot = c1 + e.scale(along);
    let perp = Vec2::new(-e.y, e.x);
    let qa = foot + perp.scale(h);
    let qb = foot + perp.scale(-h);
    let q = if qa.y <= qb.y { qa } else { qb };
    Ok(q - Vec2::new(0.0, bs[0].y))
}

/// Result of the iterative forward kinematics.
#[derive(Debug, Clone, Copy)]
pub struct FkSolution {
    pub pose: Vec2,
    /// Infinity norm of the length residuals at the returned pose, mm.
    pub residual_inf: f64,
    pub iterations: usize,
}

const FK_TOL: f64 = 1e-9;
const FK_MAX_ITERS: usize = 100;
const FK_MAX_HALVINGS: usize = 20;

/// Iterative forward kinematics for any cable count: Gauss–Newton with step
/// halving on the residuals `r_i = |a_i - p - b_i| - l_i`, started from
/// `guess`.
///
/// Succeeds when ‖r‖∞ < 1e-9 mm. Inconsistent lengths have no exact
/// solution; the iteration then stalls at the least-squares pose and reports
/// [`KinematicsError::NoConvergence`] carrying that pose and its residual.
pub fn fk_numeric(
    desc: &RobotDescription,
    lengths: &[f64],
    guess: Vec2,
) -> Result<FkSolution, KinematicsError> {
    let m = desc.cable_count();
    if lengths.len() != m {
        return Err(KinematicsError::Unsupported(format!(
            "expected {} lengths, got {}",
            m,
            lengths.len()
        )));
    }
    if lengths.iter().any(|l| !l.is_finite() || *l < 0.0) || !guess.is_finite() {
        return Err(KinematicsError::Unsupported(
            "lengths and guess must be finite, lengths non-negative".into(),
        ));
    }
    let bs = attachment_points(desc);
    // effective anchor seen by the centre point for each cable
    let cs: Vec<Vec2> = desc
        .anchors
        .iter()
        .zip(&bs)
        .map(|(a, b)| *a - *b)
        .collect();

    let residuals = |p: Vec2| -> Vec<f64> {
        cs.iter()
            .zip(lengths)
            .map(|(c, l)| (*c - p).norm() - l)
            .collect()
    };
    let cost = |r: &[f64]| -> f64 { r.iter().map(|v| v * v).sum::<f64>() };
    let inf = |r: &[f64]| -> f64 { r.iter().fold(0.0, |m, v| v.abs().max(m)) };

    let mut p = guess;
    let mut r = residuals(p);
    let mut iterations = 0;
    while inf(&r) >= FK_TOL && iterations < FK_MAX_ITERS {
        iterations += 1;
        // Normal equations JᵀJ δ = -Jᵀr with J_i = -u_i (unit vectors to
        // the effective anchors).
        let (mut jtj00, mut jtj01, mut jtj11) = (0.0, 0.0, 0.0);
        let (mut g0, mut g1) = (0.0, 0.0);
        for (i, c) in cs.iter().enumerate() {
            let diff = *c - p;
            let dist = diff.norm().max(1e-12);
            let u = diff.scale(1.0 / dist);
            jtj00 += u.x * u.x;
            jtj01 += u.x * u.y;
            jtj11 += u.y * u.y;
            g0 += u.x * r[i];
            g1 += u.y * r[i];
        }
        // light Levenberg damping keeps collinear geometries solvable
        let det = jtj00 * jtj11 - jtj01 * jtj01;
        let mu = if det.abs() < 1e-12 { 1e-9 } else { 0.0 };
        let (a, b, c) = (jtj00 + mu, jtj01, jtj11 + mu);
        let det = a * c - b * b;
        if det.abs() < 1e-300 {
            break;
        }
        // δ = (JᵀJ)⁻¹ Jᵀ r   (signs: J = -U, so -Jᵀr = Uᵀr = g)
        let dx = (c * g0 - b * g1) / det;
        let dy = (a * g1 - b * g0) / det;
        let step = Vec2::new(dx, dy);

        let c0 = cost(&r);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=FK_MAX_HALVINGS {
            let cand = p + step.scale(alpha);
            let rc = residuals(cand);
            if cost(&rc) < c0 {
                p = cand;
                r = rc;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break; // stationary: least-squares point
        }
    }

    let ri = inf(&r);
    if ri < FK_TOL {
        Ok(FkSolution {
            pose: p,
            residual_inf: ri,
            iterations,
        })
    } else {
        Err(KinematicsError::NoConvergence {
            pose: p,
            residual_inf: ri,
            iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_robot;
    use approx::assert_relative_eq;

    #[test]
    fn centre_pose_lengths() {
        let r = reference_robot();
        let l = cable_lengths(&r, Vec2::new(750.0, 750.0));
        // symmetric pose: both cables span (690, 690)
        assert_relative_eq!(l[0], 975.8073580374356, max_relative = 1e-12);
        assert_relative_eq!(l[1], 975.8073580374356, max_relative = 1e-12);
        assert_relative_eq!(l[0], 690.0 * 2.0f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn off_centre_pose_lengths() {
        let r = reference_robot();
        let l = cable_lengths(&r, Vec2::new(600.0, 800.0));
        assert_relative_eq!(l[0], 837.3768566183329, max_relative = 1e-12);
        assert_relative_eq!(l[1], 1056.0303025955268, max_relative = 1e-12);
    }

    #[test]
    fn pose_at_anchor_gives_zero_length() {
        let r = reference_robot();
        let l = cable_lengths(&r, Vec2::new(60.0, 1440.0));
        assert_relative_eq!(l[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(l[1], 1380.0, max_relative = 1e-12);
    }

    #[test]
    fn fk_closed_recovers_centre_pose() {
        let r = reference_robot();
        let l = 975.8073580374356;
        let p = fk_closed(&r, &[l, l]).unwrap();
        assert_relative_eq!(p.x, 750.0, epsilon = 1e-9);
        assert_relative_eq!(p.y, 750.0, epsilon = 1e-9);
    }

    #[test]
    fn fk_closed_ik_round_trip() {
        let r = reference_robot();
        for &(x, y) in &[
            (750.0, 750.0),
            (600.0, 800.0),
            (200.0, 300.0),
            (1300.0, 1200.0),
            (750.0, 100.0),
        ] {
            let l = cable_lengths(&r, Vec2::new(x, y));
            let p = fk_closed(&r, &l).unwrap();
            assert_relative_eq!(p.x, x, epsilon = 1e-9);
            assert_relative_eq!(p.y, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn fk_closed_picks_hanging_branch() {
        let r = reference_robot();
        // the upper intersection for these lengths would be above the beam
        let l = cable_lengths(&r, Vec2::new(750.0, 1300.0));
        let p = fk_closed(&r, &l).unwrap();
        assert!(p.y < 1440.0);
        assert_relative_eq!(p.y, 1300.0, epsilon = 1e-9);
    }

    #[test]
    fn fk_closed_reports_unreachable_lengths() {
        let r = reference_robot();
        assert!(matches!(
            fk_closed(&r, &[10_000.0, 10.0]),
            Err(KinematicsError::NoSolution(_, _))
        ));
        assert!(matches!(
            fk_closed(&r, &[1.0, 1.0]), // too short to meet mid-frame
            Err(KinematicsError::NoSolution(_, _))
        ));
    }

    #[test]
    fn fk_closed_needs_two_cables() {
        let mut r = reference_robot();
        r.anchors.push(Vec2::new(750.0, 1500.0));
        assert!(matches!(
            fk_closed(&r, &[1.0, 1.0, 1.0]),
            Err(KinematicsError::Unsupported(_))
        ));
    }

    #[test]
    fn fk_numeric_agrees_with_closed_form() {
        let r = reference_robot();
        for &(x, y) in &[(750.0, 750.0), (600.0, 800.0), (1100.0, 400.0)] {
            let l = cable_lengths(&r, Vec2::new(x, y));
            let sol = fk_numeric(&r, &l, Vec2::new(700.0, 700.0)).unwrap();
            assert_relative_eq!(sol.pose.x, x, epsilon = 1e-6);
            assert_relative_eq!(sol.pose.y, y, epsilon = 1e-6);
            assert!(sol.residual_inf < 1e-9);
        }
    }

    #[test]
    fn fk_numeric_from_exact_solution_returns_immediately() {
        let r = reference_robot();
        let l = cable_lengths(&r, Vec2::new(900.0, 500.0));
        let sol = fk_numeric(&r, &l, Vec2::new(900.0, 500.0)).unwrap();
        assert!(sol.iterations <= 1);
        assert_relative_eq!(sol.pose.x, 900.0, epsilon = 1e-9);
        assert_relative_eq!(sol.pose.y, 500.0, epsilon = 1e-9);
    }

    #[test]
    fn fk_numeric_inconsistent_lengths_report_no_convergence() {
        let r = reference_robot();
        // 1 mm cables cannot reach from either anchor: the iteration stalls
        // at the point equidistant from both effective anchors, mid-span just
        // under the beam, with residuals of half the reduced span.
        match fk_numeric(&r, &[1.0, 1.0], Vec2::new(700.0, 700.0)) {
            Err(KinematicsError::NoConvergence {
                pose,
                residual_inf,
                ..
            }) => {
                assert_relative_eq!(pose.x, 750.0, epsilon = 0.5);
                assert_relative_eq!(pose.y, 1440.0, epsilon = 0.5);
                assert_relative_eq!(residual_inf, 689.0, epsilon = 0.5);
            }
            other => panic!("expected NoConvergence, got {:?}", other),
        }
    }

    #[test]
    fn fk_numeric_works_for_three_cables() {
        let mut r = reference_robot();
        r.anchors.push(Vec2::new(750.0, 0.0)); // bottom winch
        let target = Vec2::new(700.0, 700.0);
        let l = cable_lengths(&r, target);
        let sol = fk_numeric(&r, &l, Vec2::new(750.0, 750.0)).unwrap();
        assert_relative_eq!(sol.pose.x, target.x, epsilon = 1e-6);
        assert_relative_eq!(sol.pose.y, target.y, epsilon = 1e-6);
    }
}
