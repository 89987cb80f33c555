//! End-effector pose error metrics.

use serde::{Deserialize, Serialize};

use crate::screw::{Mat3, Pose};

/// Reference displacements below this are treated as no motion.
pub const DEGENERATE_REFERENCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    /// rad, in [0, π]
    pub e_theta: f64,
    /// Orientation error relative to the reference rotation from home;
    /// `None` when the reference did not rotate.
    pub eps_theta: Option<f64>,
    /// m
    pub e_p: f64,
    /// Position error relative to the reference displacement from home;
    /// `None` when the reference did not move.
    pub eps_p: Option<f64>,
}

/// `arccos((tr(R_a R_bᵀ) − 1)/2)` with the argument clamped to [−1, 1].
pub fn rotation_distance(a: &Mat3, b: &Mat3) -> f64 {
    let c = (((a * b.transpose()).trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    c.acos()
}

pub fn pose_error(estimated: &Pose, reference: &Pose, home: &Pose) -> PoseError {
    let re = reference.rotation.matrix();
    let e_theta = rotation_distance(re, estimated.rotation.matrix());
    let home_angle = rotation_distance(home.rotation.matrix(), re);
    let e_p = (estimated.position - reference.position).norm();
    let travel = (reference.position - home.position).norm();
    PoseError {
        e_theta,
        eps_theta: (home_angle >= DEGENERATE_REFERENCE).then(|| e_theta / home_angle),
        e_p,
        eps_p: (travel >= DEGENERATE_REFERENCE).then(|| e_p / travel),
    }
}
