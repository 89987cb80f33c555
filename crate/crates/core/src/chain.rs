//! Manipulator description and the stacked block operators built from it.
//!
//! Frame layout: the base frame `{0}` sits at the origin with `ẑ` along the
//! chain. Bead `i` (1-based) carries body frame `{i}` at the centre of joint
//! `i`, a distance `h` above frame `{i-1}` in the home configuration, so every
//! home transform `M_{i,i-1}` is a pure translation by `-h ẑ`. Joint axes are
//! pure rotations alternating between `x̂` and `ŷ`.
//!
//! Internally joints and beads are 0-based: joint `j` connects bead `j-1`
//! (or the base when `j == 0`) to bead `j`.

use nalgebra::{DMatrix, DVector};

use crate::config::{ConfigError, ModelConfig};
use crate::screw::{ad, adjoint, exp_screw, spatial_inertia, Mat3, Mat6, Pose, ScrewAxis, Vec3, Vec6};
use crate::tendon::TendonSpec;

pub type JointVector = DVector<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct BeadSpec {
    pub height: f64,
    pub mass: f64,
    /// Rotational inertia about the centroid, body axes.
    pub inertia: Mat3,
    /// Centroid position in the bead frame.
    pub com_offset: Vec3,
}

impl BeadSpec {
    /// Cuboid of the given footprint and height.
    pub fn cuboid_inertia(mass: f64, width: f64, depth: f64, height: f64) -> Mat3 {
        let k = mass / 12.0;
        Mat3::from_diagonal(&Vec3::new(
            k * (depth * depth + height * height),
            k * (width * width + height * height),
            k * (width * width + depth * depth),
        ))
    }

    /// Spatial inertia referred to the bead frame origin.
    pub fn spatial_inertia_at_frame(&self) -> Mat6 {
        let g_com = spatial_inertia(&self.inertia, self.mass);
        let frame_in_com = adjoint(&Pose::from_translation(-self.com_offset));
        frame_in_com.transpose() * g_com * frame_in_com
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub axis: ScrewAxis,
    /// N·m/rad
    pub stiffness: f64,
    /// N·m·s/rad; carried for completeness, statics never reads it.
    pub damping: f64,
}

/// How the tendon pull direction at a segment's terminal bead is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TendonDirection {
    /// Along the terminal bead's own axis (`-ẑ` in its body frame). The
    /// lumped moment is then constant in the body frame.
    #[default]
    BeadAxis,
    /// Along the chord from the terminal guide point to the previous bead's
    /// guide point. Depends on the terminal joint angle.
    Chord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    n_segments: usize,
    beads_per_segment: usize,
    beads: Vec<BeadSpec>,
    joints: Vec<JointSpec>,
    home_transforms: Vec<Pose>,
    gravity: Vec3,
    tendons: Vec<TendonSpec>,
    tendon_direction: TendonDirection,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
#[error("dimension mismatch for {what}: expected {expected}, got {got}")]
pub struct DimensionMismatch {
    pub what: &'static str,
    pub expected: usize,
    pub got: usize,
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), DimensionMismatch> {
    if expected == got {
        Ok(())
    } else {
        Err(DimensionMismatch { what, expected, got })
    }
}

/// Builds a validated model from a resolved configuration.
///
/// The bead stack of the two-segment platform (32 beads of 29.5 mm) is
/// 0.944 m long at rest; the shorter operational length of the physical
/// platform comes from hinge compression, which this model does not capture.
pub fn build_chain(config: &ModelConfig) -> Result<ChainModel, ConfigError> {
    let g = &config.geometry;
    if g.segments == 0 {
        return Err(ConfigError::new("geometry.segments", "must be at least 1"));
    }
    if g.beads_per_segment == 0 {
        return Err(ConfigError::new("geometry.beads_per_segment", "must be at least 1"));
    }
    let n = g.segments * g.beads_per_segment;
    positive("geometry.bead_height", g.bead_height)?;
    positive("geometry.mass", g.mass)?;

    let inertia = Mat3::from_row_slice(&g.inertia.concat());
    if (inertia - inertia.transpose()).abs().max() > 1e-15 * inertia.abs().max().max(1.0) {
        return Err(ConfigError::new("geometry.inertia", "must be symmetric"));
    }
    if inertia.cholesky().is_none() {
        return Err(ConfigError::new("geometry.inertia", "must be positive definite"));
    }
    let bead = BeadSpec {
        height: g.bead_height,
        mass: g.mass,
        inertia,
        com_offset: Vec3::from(g.com_offset),
    };

    let s = &config.stiffness;
    if s.per_joint.len() != n {
        return Err(ConfigError::new(
            "stiffness.per_joint",
            format!("expected {n} values, got {}", s.per_joint.len()),
        ));
    }
    if s.damping.len() != n {
        return Err(ConfigError::new("stiffness.damping", format!("expected {n} values, got {}", s.damping.len())));
    }
    let first = config.geometry.first_joint_axis.unit();
    let second = Vec3::z().cross(&first);
    let mut joints = Vec::with_capacity(n);
    for j in 0..n {
        let k = s.per_joint[j];
        if !(k >= 0.0 && k.is_finite()) {
            return Err(ConfigError::new(format!("stiffness.per_joint[{j}]"), "must be finite and >= 0"));
        }
        let axis = if j % 2 == 0 { first } else { second };
        joints.push(JointSpec {
            axis: ScrewAxis::revolute(axis).expect("unit axis"),
            stiffness: k,
            damping: s.damping[j],
        });
    }

    let home = Pose::from_translation(Vec3::new(0.0, 0.0, -g.bead_height));
    let mut model = ChainModel {
        n_segments: g.segments,
        beads_per_segment: g.beads_per_segment,
        beads: vec![bead; n],
        joints,
        home_transforms: vec![home; n],
        gravity: Vec3::from(config.gravity),
        tendons: Vec::new(),
        tendon_direction: config.tendon_direction.into(),
    };

    let mut tendons = Vec::with_capacity(config.tendons.len());
    for (i, t) in config.tendons.iter().enumerate() {
        let path = |f: &str| format!("tendons[{i}].{f}");
        if t.segment == 0 || t.segment > g.segments {
            return Err(ConfigError::new(path("segment"), format!("must be in 1..={}", g.segments)));
        }
        if t.offset[2] != 0.0 {
            return Err(ConfigError::new(path("offset"), "z component must be 0 (guides lie in the bead cross-section)"));
        }
        if !(t.compliance >= 0.0) {
            return Err(ConfigError::new(path("compliance"), "must be >= 0"));
        }
        if tendons.iter().any(|o: &TendonSpec| o.id == t.id) {
            return Err(ConfigError::new(path("id"), "duplicate tendon id"));
        }
        let mut spec = TendonSpec {
            id: t.id,
            segment: t.segment,
            offset: Vec3::from(t.offset),
            rest_length: 0.0,
            compliance: t.compliance,
        };
        spec.rest_length = match t.rest_length {
            Some(l) => {
                positive(&path("rest_length"), l)?;
                l
            }
            None => crate::tendon::geometric_tendon_length(&model, &model.zero_configuration(), &spec),
        };
        tendons.push(spec);
    }
    model.tendons = tendons;
    Ok(model)
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(path, "must be finite and > 0"))
    }
}

impl ChainModel {
    /// Number of joints (equal to the number of beads).
    pub fn n_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    pub fn beads_per_segment(&self) -> usize {
        self.beads_per_segment
    }

    pub fn n_tendons(&self) -> usize {
        self.tendons.len()
    }

    pub fn beads(&self) -> &[BeadSpec] {
        &self.beads
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn home_transforms(&self) -> &[Pose] {
        &self.home_transforms
    }

    pub fn gravity(&self) -> Vec3 {
        self.gravity
    }

    pub fn tendons(&self) -> &[TendonSpec] {
        &self.tendons
    }

    pub fn tendon_direction(&self) -> TendonDirection {
        self.tendon_direction
    }

    pub fn zero_configuration(&self) -> JointVector {
        JointVector::zeros(self.n_joints())
    }

    /// 0-based index of the last bead of a 1-based segment.
    pub fn terminal_bead(&self, segment: usize) -> usize {
        segment * self.beads_per_segment - 1
    }

    pub fn stiffness_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.n_joints(), self.joints.iter().map(|j| j.stiffness))
    }

    /// Copy of the model with a different gravity vector.
    pub fn with_gravity(&self, gravity: Vec3) -> ChainModel {
        ChainModel { gravity, ..self.clone() }
    }

    /// Copy of the model with a different per-joint stiffness profile.
    pub fn with_stiffness(&self, stiffness: &[f64]) -> Result<ChainModel, DimensionMismatch> {
        check_len("stiffness", self.n_joints(), stiffness.len())?;
        let mut m = self.clone();
        for (j, k) in m.joints.iter_mut().zip(stiffness) {
            j.stiffness = *k;
        }
        Ok(m)
    }

    pub fn with_tendon_direction(&self, tendon_direction: TendonDirection) -> ChainModel {
        ChainModel { tendon_direction, ..self.clone() }
    }

    /// Base acceleration twist that stands in for gravity: zero angular
    /// part, linear part `-g`.
    pub fn base_acceleration(&self) -> Vec6 {
        let mut v = Vec6::zeros();
        v.fixed_rows_mut::<3>(3).copy_from(&(-self.gravity));
        v
    }

    pub(crate) fn check_theta(&self, theta: &JointVector) -> Result<(), DimensionMismatch> {
        check_len("joint vector", self.n_joints(), theta.len())
    }
}

/// `T_{i,i-1}(θ_i) = exp(-A_i θ_i) M_{i,i-1}`: pose of the previous frame in frame `i`.
pub fn joint_transform(model: &ChainModel, joint: usize, angle: f64) -> Pose {
    exp_screw(&model.joints[joint].axis.negated(), angle) * model.home_transforms[joint]
}

pub fn joint_transforms(model: &ChainModel, theta: &JointVector) -> Result<Vec<Pose>, DimensionMismatch> {
    model.check_theta(theta)?;
    Ok((0..model.n_joints()).map(|j| joint_transform(model, j, theta[j])).collect())
}

/// Base-frame pose of every bead frame, base to tip. The last entry is the
/// end-effector pose.
pub fn forward_kinematics(model: &ChainModel, theta: &JointVector) -> Result<Vec<Pose>, DimensionMismatch> {
    let transforms = joint_transforms(model, theta)?;
    let mut poses = Vec::with_capacity(transforms.len());
    let mut current = Pose::identity();
    for t in &transforms {
        current = current * t.inverse();
        poses.push(current);
    }
    Ok(poses)
}

/// Per-joint blocks from which every stacked operator is assembled.
///
/// The stacked matrices are never needed densely on the hot path:
/// `L v` and `Lᵀ w` are block forward and backward substitutions over the
/// sub-diagonal adjoints.
#[derive(Debug, Clone)]
pub struct ChainBlocks {
    /// `Ad_{T_{i,i-1}}`; entry 0 maps base twists into frame 1.
    pub adjoints: Vec<Mat6>,
    /// `∂Ad_{T_{i,i-1}}/∂θ_i = -ad(A_i) Ad_{T_{i,i-1}}`.
    pub adjoint_derivatives: Vec<Mat6>,
    pub screw_axes: Vec<Vec6>,
    pub inertias: Vec<Mat6>,
    pub base_acceleration: Vec6,
}

impl ChainBlocks {
    pub fn new(model: &ChainModel, theta: &JointVector) -> Result<Self, DimensionMismatch> {
        let transforms = joint_transforms(model, theta)?;
        let mut adjoints = Vec::with_capacity(transforms.len());
        let mut adjoint_derivatives = Vec::with_capacity(transforms.len());
        let mut screw_axes = Vec::with_capacity(transforms.len());
        for (j, t) in transforms.iter().enumerate() {
            let axis = model.joints[j].axis;
            let a = adjoint(t);
            adjoint_derivatives.push(-ad(axis.twist()) * a);
            adjoints.push(a);
            screw_axes.push(axis.to_vector());
        }
        let inertias = model.beads.iter().map(BeadSpec::spatial_inertia_at_frame).collect();
        Ok(ChainBlocks {
            adjoints,
            adjoint_derivatives,
            screw_axes,
            inertias,
            base_acceleration: model.base_acceleration(),
        })
    }

    pub fn len(&self) -> usize {
        self.adjoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjoints.is_empty()
    }

    /// `x = L v` restricted to slots `start..`, assuming `v` vanishes before `start`.
    pub fn forward_from(&self, v: &mut [Vec6], start: usize) {
        for i in start.max(1)..v.len() {
            let prev = v[i - 1];
            v[i] += self.adjoints[i] * prev;
        }
    }

    /// `x = Lᵀ w`, in place.
    pub fn backward(&self, w: &mut [Vec6]) {
        for i in (0..w.len().saturating_sub(1)).rev() {
            let next = w[i + 1];
            w[i] += self.adjoints[i + 1].transpose() * next;
        }
    }

    /// `Vdot_b` propagated through the chain: `L Vdot_b`.
    pub fn propagated_base_acceleration(&self) -> Vec<Vec6> {
        let mut y = vec![Vec6::zeros(); self.len()];
        if !y.is_empty() {
            y[0] = self.adjoints[0] * self.base_acceleration;
            self.forward_from(&mut y, 1);
        }
        y
    }

    /// `Aᵀ z` per joint.
    pub fn project(&self, z: &[Vec6]) -> DVector<f64> {
        DVector::from_iterator(z.len(), z.iter().zip(&self.screw_axes).map(|(zi, a)| a.dot(zi)))
    }
}

/// A single nonzero 6×6 block of a stacked matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEntry {
    pub row: usize,
    pub col: usize,
    pub value: Mat6,
}

/// Dense stacked operators for one configuration.
#[derive(Debug, Clone)]
pub struct StackedOperators {
    pub blocks: ChainBlocks,
    /// Block-diagonal joint screws, `6n × n`.
    pub a: DMatrix<f64>,
    /// Block-diagonal spatial inertias, `6n × 6n`.
    pub g: DMatrix<f64>,
    /// Sub-diagonal adjoint blocks, `6n × 6n`.
    pub w: DMatrix<f64>,
    /// `(I - W)^-1`, by block forward substitution.
    pub l: DMatrix<f64>,
    /// `∂W/∂θ_j`: at most one nonzero block at `(j, j-1)`; `None` for the first joint.
    pub dw: Vec<Option<BlockEntry>>,
    /// Base acceleration stack, `Ad_{T_10} Vdot_0` in the first slot.
    pub vdot_b: DVector<f64>,
}

impl StackedOperators {
    pub fn n(&self) -> usize {
        self.blocks.len()
    }

    /// Dense `6n × 6n` form of `∂W/∂θ_j`.
    pub fn dw_dense(&self, j: usize) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(6 * n, 6 * n);
        if let Some(b) = &self.dw[j] {
            m.view_mut((6 * b.row, 6 * b.col), (6, 6)).copy_from(&b.value);
        }
        m
    }
}

pub fn assemble_operators(model: &ChainModel, theta: &JointVector) -> Result<StackedOperators, DimensionMismatch> {
    let blocks = ChainBlocks::new(model, theta)?;
    let n = blocks.len();
    let mut a = DMatrix::zeros(6 * n, n);
    let mut g = DMatrix::zeros(6 * n, 6 * n);
    let mut w = DMatrix::zeros(6 * n, 6 * n);
    let mut dw = Vec::with_capacity(n);
    for i in 0..n {
        a.view_mut((6 * i, i), (6, 1)).copy_from(&blocks.screw_axes[i]);
        g.view_mut((6 * i, 6 * i), (6, 6)).copy_from(&blocks.inertias[i]);
        if i > 0 {
            w.view_mut((6 * i, 6 * (i - 1)), (6, 6)).copy_from(&blocks.adjoints[i]);
            dw.push(Some(BlockEntry { row: i, col: i - 1, value: blocks.adjoint_derivatives[i] }));
        } else {
            dw.push(None);
        }
    }

    // L is block lower-triangular with identity diagonal and
    // L_{i,k} = Ad_i L_{i-1,k} below it.
    let mut l = DMatrix::zeros(6 * n, 6 * n);
    for i in 0..n {
        l.view_mut((6 * i, 6 * i), (6, 6)).copy_from(&Mat6::identity());
        for k in 0..i {
            let prev: Mat6 = l.fixed_view::<6, 6>(6 * (i - 1), 6 * k).into_owned();
            l.fixed_view_mut::<6, 6>(6 * i, 6 * k).copy_from(&(blocks.adjoints[i] * prev));
        }
    }

    let mut vdot_b = DVector::zeros(6 * n);
    if n > 0 {
        vdot_b.rows_mut(0, 6).copy_from(&(blocks.adjoints[0] * blocks.base_acceleration));
    }
    Ok(StackedOperators { blocks, a, g, w, l, dw, vdot_b })
}

/// Flattens per-slot 6-vectors into one stacked vector.
pub fn stack(slots: &[Vec6]) -> DVector<f64> {
    DVector::from_iterator(6 * slots.len(), slots.iter().flat_map(|s| s.iter().copied()))
}

/// Splits a stacked vector into 6-vector slots.
pub fn unstack(v: &DVector<f64>) -> Vec<Vec6> {
    assert_eq!(v.len() % 6, 0, "stacked vector length must be a multiple of 6");
    (0..v.len() / 6).map(|i| v.fixed_rows::<6>(6 * i).into_owned()).collect()
}

/// Centre-of-mass position of each bead in the base frame.
pub fn com_positions(model: &ChainModel, theta: &JointVector) -> Result<Vec<Vec3>, DimensionMismatch> {
    let poses = forward_kinematics(model, theta)?;
    Ok(poses.iter().zip(&model.beads).map(|(p, b)| p.transform_point(&b.com_offset)).collect())
}
