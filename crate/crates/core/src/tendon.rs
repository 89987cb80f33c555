//! Tendon force and length models.
//!
//! Each tendon runs through guide holes at offset `r` in every bead from the
//! base to the last bead of its segment, where it is anchored. Because the
//! tension is uniform along a frictionless tendon, the guide forces on every
//! intermediate bead cancel and the whole action reduces to a couple
//! `r × n̂ f` on the terminal bead.

use nalgebra::{DMatrix, DVector};

use crate::chain::{check_len, forward_kinematics, joint_transform, ChainModel, DimensionMismatch, JointVector, TendonDirection};
use crate::screw::{Vec3, Vec6, Wrench};

#[derive(Debug, Clone, PartialEq)]
pub struct TendonSpec {
    pub id: u32,
    /// 1-based segment whose last bead anchors the tendon.
    pub segment: usize,
    /// m, guide position in the bead cross-section (zero z).
    pub offset: Vec3,
    /// m, length at zero tension and zero joint angles.
    pub rest_length: f64,
    /// m/N
    pub compliance: f64,
}

impl TendonSpec {
    /// Number of joints the tendon crosses; they are joints `0..span`.
    pub fn span(&self, model: &ChainModel) -> usize {
        model.terminal_bead(self.segment) + 1
    }
}

pub type TensionVector = DVector<f64>;
pub type LengthVector = DVector<f64>;

fn check_tensions(model: &ChainModel, f: &TensionVector) -> Result<(), DimensionMismatch> {
    check_len("tension vector", model.n_tendons(), f.len())
}

/// Previous guide point expressed in the terminal bead frame.
fn previous_guide(model: &ChainModel, theta: &JointVector, spec: &TendonSpec) -> Vec3 {
    let t = model.terminal_bead(spec.segment);
    joint_transform(model, t, theta[t]).transform_point(&spec.offset)
}

/// Unit pull direction at the terminal bead, in that bead's frame.
pub fn tendon_direction(model: &ChainModel, theta: &JointVector, spec: &TendonSpec) -> Vec3 {
    match model.tendon_direction() {
        TendonDirection::BeadAxis => -Vec3::z(),
        TendonDirection::Chord => (previous_guide(model, theta, spec) - spec.offset).normalize(),
    }
}

/// `∂n̂/∂θ_t` for the terminal joint `t`; every other joint leaves `n̂` unchanged.
fn tendon_direction_derivative(model: &ChainModel, theta: &JointVector, spec: &TendonSpec) -> Vec3 {
    match model.tendon_direction() {
        TendonDirection::BeadAxis => Vec3::zeros(),
        TendonDirection::Chord => {
            let t = model.terminal_bead(spec.segment);
            let p = previous_guide(model, theta, spec);
            let omega = model.joints()[t].axis.twist().angular;
            let dp = -omega.cross(&p);
            let d = p - spec.offset;
            let norm = d.norm();
            let n = d / norm;
            (dp - n * n.dot(&dp)) / norm
        }
    }
}

/// Couple exerted on the terminal bead by one tendon, in that bead's frame.
pub fn tendon_moment(model: &ChainModel, theta: &JointVector, spec: &TendonSpec, f: f64) -> Wrench {
    Wrench::pure_moment(spec.offset.cross(&tendon_direction(model, theta, spec)) * f)
}

/// Per-slot tendon wrenches; only terminal slots are nonzero.
pub(crate) fn tendon_wrench_slots(model: &ChainModel, theta: &JointVector, f: &TensionVector) -> Vec<Vec6> {
    let mut slots = vec![Vec6::zeros(); model.n_joints()];
    for (spec, fi) in model.tendons().iter().zip(f.iter()) {
        let slot = model.terminal_bead(spec.segment);
        slots[slot] += tendon_moment(model, theta, spec, *fi).to_vector();
    }
    slots
}

/// `∂F_t/∂θ` as a list of `(joint, slot, value)`: the derivative with
/// respect to `θ_joint` of the wrench in `slot`. Empty unless the chord
/// direction model is active.
pub(crate) fn tendon_wrench_theta_derivatives(
    model: &ChainModel,
    theta: &JointVector,
    f: &TensionVector,
) -> Vec<(usize, usize, Vec6)> {
    if model.tendon_direction() == TendonDirection::BeadAxis {
        return Vec::new();
    }
    let mut out: Vec<(usize, usize, Vec6)> = Vec::new();
    for (spec, fi) in model.tendons().iter().zip(f.iter()) {
        let t = model.terminal_bead(spec.segment);
        let dm = spec.offset.cross(&tendon_direction_derivative(model, theta, spec)) * *fi;
        let v = Wrench::pure_moment(dm).to_vector();
        match out.iter_mut().find(|e| e.0 == t) {
            Some(e) => e.2 += v,
            None => out.push((t, t, v)),
        }
    }
    out
}

/// Stacked tendon wrench `F_t`, 6n entries.
pub fn stacked_tendon_wrench(model: &ChainModel, theta: &JointVector, f: &TensionVector) -> Result<DVector<f64>, DimensionMismatch> {
    model.check_theta(theta)?;
    check_tensions(model, f)?;
    Ok(crate::chain::stack(&tendon_wrench_slots(model, theta, f)))
}

/// `∂F_t/∂f`, `6n × n_l`. Column `i` is the stacked wrench of unit tension on tendon `i`.
pub fn dft_df(model: &ChainModel, theta: &JointVector) -> Result<DMatrix<f64>, DimensionMismatch> {
    model.check_theta(theta)?;
    let mut m = DMatrix::zeros(6 * model.n_joints(), model.n_tendons());
    for (i, spec) in model.tendons().iter().enumerate() {
        let slot = model.terminal_bead(spec.segment);
        m.view_mut((6 * slot, i), (6, 1)).copy_from(&tendon_moment(model, theta, spec, 1.0).to_vector());
    }
    Ok(m)
}

/// Joint-to-length coupling `P_θ`, `n_l × n`: the moment arm of each tendon
/// about each joint it crosses, negative when bending toward the tendon.
pub fn coupling_matrix(model: &ChainModel) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(model.n_tendons(), model.n_joints());
    for (i, spec) in model.tendons().iter().enumerate() {
        let arm = spec.offset.cross(&Vec3::z());
        for j in 0..spec.span(model) {
            p[(i, j)] = model.joints()[j].axis.twist().angular.dot(&arm);
        }
    }
    p
}

/// Linear length model `l_t = P_θ θ + l_0 − λ_t f`.
pub fn tendon_length(model: &ChainModel, theta: &JointVector, f: &TensionVector) -> Result<LengthVector, DimensionMismatch> {
    model.check_theta(theta)?;
    check_tensions(model, f)?;
    let l0 = DVector::from_iterator(model.n_tendons(), model.tendons().iter().map(|t| t.rest_length));
    let lambda = DVector::from_iterator(model.n_tendons(), model.tendons().iter().map(|t| t.compliance));
    Ok(coupling_matrix(model) * theta + l0 - lambda.component_mul(f))
}

/// `∂l_t/∂f`: the negated compliances on the diagonal.
pub fn dlength_df(model: &ChainModel) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(model.n_tendons(), model.tendons().iter().map(|t| -t.compliance)))
}

/// Polyline length through the guide points from the base to the anchor.
pub fn geometric_tendon_length(model: &ChainModel, theta: &JointVector, spec: &TendonSpec) -> f64 {
    let poses = forward_kinematics(model, theta).expect("joint vector sized to model");
    let mut prev = spec.offset;
    let mut total = 0.0;
    for pose in &poses[..spec.span(model)] {
        let p = pose.transform_point(&spec.offset);
        total += (p - prev).norm();
        prev = p;
    }
    total
}

/// Un-lumped tendon loads, summed per bead.
///
/// Each bead `j` the tendon passes through is pulled along the tendon's
/// direction inside it: toward its own joint centre at the bottom and away
/// from the next joint centre at the top. The anchor bead additionally takes
/// the tension at its guide point. Wrenches are in the bead frames about
/// their origins. Intended as an independent check of the lumped model.
pub fn distributed_force_oracle(model: &ChainModel, theta: &JointVector, f: &TensionVector) -> Result<Vec<Wrench>, DimensionMismatch> {
    check_tensions(model, f)?;
    let poses = forward_kinematics(model, theta)?;
    let n = model.n_joints();
    let mut force = vec![Vec3::zeros(); n];
    let mut moment = vec![Vec3::zeros(); n];
    let mut apply = |bead: usize, point: Vec3, load: Vec3| {
        force[bead] += load;
        moment[bead] += (point - poses[bead].position).cross(&load);
    };
    for (spec, fi) in model.tendons().iter().zip(f.iter()) {
        let t = model.terminal_bead(spec.segment);
        for (j, pose) in poses.iter().enumerate().take(t + 1) {
            let rot = pose.rotation.matrix();
            // Tendon direction inside bead j, pointing toward the base.
            let dir = if j == t { rot * tendon_direction(model, theta, spec) } else { -(rot * Vec3::z()) };
            apply(j, pose.position, -dir * *fi);
            if j > 0 {
                apply(j - 1, pose.position, dir * *fi);
            }
            if j == t {
                apply(j, pose.transform_point(&spec.offset), dir * *fi);
            }
        }
    }
    Ok((0..n)
        .map(|b| {
            let rt = poses[b].rotation.transpose();
            let rt = rt.matrix();
            Wrench { moment: rt * moment[b], force: rt * force[b] }
        })
        .collect())
}
