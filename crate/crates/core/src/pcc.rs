//! Piecewise constant curvature kinematics.
//!
//! Each segment is a circular arc of length `s` and curvature `κ` bending
//! in the plane at azimuth `φ` from the x axis. The bend rotates about
//! `b = (−sin φ, cos φ, 0)`, so a positive `κ` moves the tip toward
//! `(cos φ, sin φ, 0)`.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainModel, JointVector};
use crate::screw::{Pose, Rotation, Vec3};
use crate::tendon::LengthVector;

/// Below this bend angle the arc map switches to its Taylor series.
const SMALL_BEND: f64 = 1e-6;
/// Quaternions must be this close to unit norm before normalization.
pub const QUATERNION_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcParams {
    /// 1/m
    pub kappa: f64,
    /// rad, in (−π, π]
    pub phi: f64,
    /// m
    pub length: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PccError {
    #[error("expected {expected} segments, got {got}")]
    SegmentCount { expected: usize, got: usize },
    #[error("quaternion {index} has norm {norm}, not within {QUATERNION_NORM_TOL} of 1")]
    NotUnitQuaternion { index: usize, norm: f64 },
    #[error("arc {index} has non-positive length {length}")]
    BadLength { index: usize, length: f64 },
}

fn rot_z(a: f64) -> Rotation {
    Rotation::from_axis_angle(&Vec3::z(), a)
}

/// Base-to-tip transform of a single arc.
pub fn arc_transform(arc: &ArcParams) -> Pose {
    let s = arc.length;
    let beta = arc.kappa * s;
    // (1 − cos β)/κ and sin β/κ, written in terms of s to stay finite as κ → 0.
    let (x, z) = if beta.abs() < SMALL_BEND {
        let b2 = beta * beta;
        (s * beta * (0.5 - b2 / 24.0), s * (1.0 - b2 / 6.0))
    } else {
        (s * (1.0 - beta.cos()) / beta, s * beta.sin() / beta)
    };
    let in_plane = Pose::new(Rotation::from_axis_angle(&Vec3::y(), beta), Vec3::new(x, 0.0, z));
    Pose::from_rotation(rot_z(arc.phi)) * in_plane * Pose::from_rotation(rot_z(-arc.phi))
}

/// Tip pose of every segment, base to tip.
pub fn pcc_segment_poses(arcs: &[ArcParams]) -> Vec<Pose> {
    let mut current = Pose::identity();
    arcs.iter()
        .map(|a| {
            current = current * arc_transform(a);
            current
        })
        .collect()
}

pub fn pcc_forward(arcs: &[ArcParams]) -> Pose {
    pcc_segment_poses(arcs).last().copied().unwrap_or_else(Pose::identity)
}

fn check_segments(model: &ChainModel, arcs: &[ArcParams]) -> Result<(), PccError> {
    if arcs.len() != model.n_segments() {
        return Err(PccError::SegmentCount { expected: model.n_segments(), got: arcs.len() });
    }
    Ok(())
}

/// Ideal-arc tendon lengths: every segment a tendon crosses shortens it by
/// `κ s (r · (cos φ, sin φ, 0))`.
pub fn pcc_tendon_lengths(model: &ChainModel, arcs: &[ArcParams]) -> Result<LengthVector, PccError> {
    check_segments(model, arcs)?;
    Ok(LengthVector::from_iterator(
        model.n_tendons(),
        model.tendons().iter().map(|t| {
            let shortening: f64 = arcs[..t.segment]
                .iter()
                .map(|a| a.kappa * a.length * t.offset.dot(&Vec3::new(a.phi.cos(), a.phi.sin(), 0.0)))
                .sum();
            t.rest_length - shortening
        }),
    ))
}

/// Joint angles that spread each arc's bend over its segment's joints:
/// every joint takes the share of the bend about its own axis, split evenly
/// among the segment joints sharing that axis.
pub fn discretized_joint_angles(model: &ChainModel, arcs: &[ArcParams]) -> Result<JointVector, PccError> {
    check_segments(model, arcs)?;
    let nb = model.beads_per_segment();
    let mut theta = model.zero_configuration();
    for (k, arc) in arcs.iter().enumerate() {
        let bend_axis = Vec3::new(-arc.phi.sin(), arc.phi.cos(), 0.0);
        let beta = arc.kappa * arc.length;
        let joints = k * nb..(k + 1) * nb;
        for j in joints.clone() {
            let axis = model.joints()[j].axis.twist().angular;
            let same = joints.clone().filter(|&i| model.joints()[i].axis.twist().angular == axis).count();
            theta[j] = beta * axis.dot(&bend_axis) / same as f64;
        }
    }
    Ok(theta)
}

fn quaternion(index: usize, q: [f64; 4]) -> Result<UnitQuaternion<f64>, PccError> {
    let raw = nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]);
    let norm = raw.norm();
    if !((norm - 1.0).abs() <= QUATERNION_NORM_TOL) {
        return Err(PccError::NotUnitQuaternion { index, norm });
    }
    Ok(UnitQuaternion::from_quaternion(raw))
}

/// Arc parameters from base-frame segment-tip orientations `[w, x, y, z]`.
///
/// The relative rotation of each segment is read as a bend of angle `κ s`
/// about an axis in the cross-section plane. Bends below the series
/// threshold come back canonical as `κ = 0, φ = 0`.
pub fn pcc_from_tip_quaternion(tips: &[[f64; 4]], lengths: &[f64]) -> Result<Vec<ArcParams>, PccError> {
    if tips.len() != lengths.len() {
        return Err(PccError::SegmentCount { expected: lengths.len(), got: tips.len() });
    }
    let mut prev = UnitQuaternion::identity();
    let mut arcs = Vec::with_capacity(tips.len());
    for (i, (q, &s)) in tips.iter().zip(lengths).enumerate() {
        if !(s > 0.0) {
            return Err(PccError::BadLength { index: i, length: s });
        }
        let q = quaternion(i, *q)?;
        let rel = prev.inverse() * q;
        prev = q;
        let w: Vector3<f64> = rel.scaled_axis();
        let beta = w.x.hypot(w.y);
        if beta < SMALL_BEND {
            arcs.push(ArcParams { kappa: 0.0, phi: 0.0, length: s });
            continue;
        }
        let mut phi = (-w.x).atan2(w.y);
        if phi <= -std::f64::consts::PI {
            phi = std::f64::consts::PI;
        }
        arcs.push(ArcParams { kappa: beta / s, phi, length: s });
    }
    Ok(arcs)
}

/// Arc lengths of the model's segments, `n_b h` each.
pub fn segment_lengths(model: &ChainModel) -> Vec<f64> {
    let nb = model.beads_per_segment();
    (0..model.n_segments()).map(|k| model.beads()[k * nb..(k + 1) * nb].iter().map(|b| b.height).sum()).collect()
}
