//! Rigid-body primitives on SO(3)/SE(3).
//!
//! Six-vectors are always ordered angular-first: twists as `(ω, v)` and
//! wrenches as `(m, f)`. Every 6×6 block matrix in the crate follows that
//! ordering, so `adjoint` is `[R 0; [p]R R]` and `ad` is `[[ω] 0; [v] [ω]]`.

use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Matrix6, Rotation3, UnitQuaternion, Vector3, Vector6};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Vec6 = Vector6<f64>;
pub type Mat6 = Matrix6<f64>;

/// Below this rotation angle the Rodrigues coefficients switch to their
/// Taylor expansions.
const SMALL_ANGLE: f64 = 1e-8;

/// Orthonormality tolerance for [`Rotation::try_from_matrix`].
pub const ROTATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScrewError {
    #[error("rotation angle is within 1e-6 of pi (trace = {trace}); perturb the pose before taking its logarithm")]
    AngleNearPi { trace: f64 },
    #[error("matrix is not a proper rotation (orthonormality error {orthonormality:e}, det {det})")]
    NotARotation { orthonormality: f64, det: f64 },
    #[error("screw axis is not normalized")]
    NotNormalized,
}

/// Skew-symmetric cross-product matrix: `hat(v) * w == v.cross(&w)`.
#[rustfmt::skip]
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(
         0.0, -v.z,  v.y,
         v.z,  0.0, -v.x,
        -v.y,  v.x,  0.0,
    )
}

/// Inverse of [`hat`]; reads the lower-triangle entries.
pub fn vee(m: &Mat3) -> Vec3 {
    Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// A proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    pub fn try_from_matrix(m: Mat3) -> Result<Self, ScrewError> {
        let orthonormality = (m.transpose() * m - Mat3::identity()).abs().max();
        let det = m.determinant();
        if orthonormality > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL || !m.iter().all(|x| x.is_finite()) {
            return Err(ScrewError::NotARotation { orthonormality, det });
        }
        Ok(Rotation(m))
    }

    /// Wraps a matrix produced by a closed-form rotation formula.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    /// Rotation by `angle` about the unit vector `axis`.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let k = hat(axis);
        let half = 0.5 * angle;
        Rotation(Mat3::identity() + angle.sin() * k + 2.0 * half.sin() * half.sin() * (k * k))
    }

    /// Rotation from a unit quaternion.
    pub fn from_quaternion(q: &UnitQuaternion<f64>) -> Self {
        Rotation(*q.to_rotation_matrix().matrix())
    }

    pub fn to_quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.0))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    /// Rotation angle in `[0, π]`, computed with `atan2` for accuracy near 0 and π.
    pub fn angle(&self) -> f64 {
        let s = 0.5 * vee(&(self.0 - self.0.transpose())).norm();
        let c = 0.5 * (self.0.trace() - 1.0);
        s.atan2(c)
    }

    /// Largest deviation of `RᵀR` from identity.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Mat3::identity()).abs().max()
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Homogeneous transform `[R p; 0 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub position: Vec3,
}

impl Pose {
    pub fn new(rotation: Rotation, position: Vec3) -> Self {
        Pose { rotation, position }
    }

    pub fn identity() -> Self {
        Pose::new(Rotation::identity(), Vec3::zeros())
    }

    pub fn from_translation(position: Vec3) -> Self {
        Pose::new(Rotation::identity(), position)
    }

    pub fn from_rotation(rotation: Rotation) -> Self {
        Pose::new(rotation, Vec3::zeros())
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose::new(rt, -(rt * self.position))
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * *p + self.position
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        m
    }

    /// Largest absolute difference over the 12 non-trivial entries.
    pub fn max_abs_diff(&self, other: &Pose) -> f64 {
        let dr = (self.rotation.matrix() - other.rotation.matrix()).abs().max();
        let dp = (self.position - other.position).abs().max();
        dr.max(dp)
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        Pose::new(self.rotation * rhs.rotation, self.rotation * rhs.position + self.position)
    }
}

/// Rigid-body velocity, angular part first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    pub angular: Vec3,
    pub linear: Vec3,
}

impl Twist {
    pub fn new(angular: Vec3, linear: Vec3) -> Self {
        Twist { angular, linear }
    }

    pub fn zero() -> Self {
        Twist::new(Vec3::zeros(), Vec3::zeros())
    }

    pub fn from_vector(v: &Vec6) -> Self {
        Twist::new(v.fixed_rows::<3>(0).into_owned(), v.fixed_rows::<3>(3).into_owned())
    }

    pub fn to_vector(&self) -> Vec6 {
        let mut v = Vec6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.angular);
        v.fixed_rows_mut::<3>(3).copy_from(&self.linear);
        v
    }

    pub fn scale(&self, s: f64) -> Twist {
        Twist::new(self.angular * s, self.linear * s)
    }
}

/// Load on a rigid body, moment first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub moment: Vec3,
    pub force: Vec3,
}

impl Wrench {
    pub fn new(moment: Vec3, force: Vec3) -> Self {
        Wrench { moment, force }
    }

    pub fn zero() -> Self {
        Wrench::new(Vec3::zeros(), Vec3::zeros())
    }

    pub fn pure_moment(moment: Vec3) -> Self {
        Wrench::new(moment, Vec3::zeros())
    }

    pub fn from_vector(v: &Vec6) -> Self {
        Wrench::new(v.fixed_rows::<3>(0).into_owned(), v.fixed_rows::<3>(3).into_owned())
    }

    pub fn to_vector(&self) -> Vec6 {
        let mut v = Vec6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.moment);
        v.fixed_rows_mut::<3>(3).copy_from(&self.force);
        v
    }
}

/// Unit screw axis: either a unit angular part, or zero angular part with
/// a unit linear part (prismatic motion).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScrewAxis(Twist);

impl ScrewAxis {
    pub fn new(twist: Twist) -> Result<Self, ScrewError> {
        let wn = twist.angular.norm();
        let ok = if wn > 0.0 {
            (wn - 1.0).abs() <= ROTATION_TOL
        } else {
            (twist.linear.norm() - 1.0).abs() <= ROTATION_TOL
        };
        if ok {
            Ok(ScrewAxis(twist))
        } else {
            Err(ScrewError::NotNormalized)
        }
    }

    /// Pure rotation about a unit axis through the frame origin.
    pub fn revolute(axis: Vec3) -> Result<Self, ScrewError> {
        ScrewAxis::new(Twist::new(axis, Vec3::zeros()))
    }

    pub fn twist(&self) -> &Twist {
        &self.0
    }

    pub fn to_vector(&self) -> Vec6 {
        self.0.to_vector()
    }

    pub fn negated(&self) -> ScrewAxis {
        ScrewAxis(self.0.scale(-1.0))
    }

    pub fn is_pure_rotation(&self) -> bool {
        self.0.linear == Vec3::zeros() && self.0.angular != Vec3::zeros()
    }
}

/// Rodrigues coefficients `(sin θ, 1 − cos θ, θ − sin θ)`.
fn rodrigues_coefficients(theta: f64) -> (f64, f64, f64) {
    if theta.abs() < SMALL_ANGLE {
        let t2 = theta * theta;
        (theta * (1.0 - t2 / 6.0), 0.5 * t2, theta * t2 / 6.0)
    } else {
        let half = 0.5 * theta;
        (theta.sin(), 2.0 * half.sin() * half.sin(), theta - theta.sin())
    }
}

/// `exp([S] θ)` in closed form.
pub fn exp_screw(screw: &ScrewAxis, theta: f64) -> Pose {
    let w = screw.twist().angular;
    let v = screw.twist().linear;
    if w == Vec3::zeros() {
        return Pose::from_translation(v * theta);
    }
    let k = hat(&w);
    let k2 = k * k;
    let (a, b, c) = rodrigues_coefficients(theta);
    let r = Mat3::identity() + a * k + b * k2;
    let g = Mat3::identity() * theta + b * k + c * k2;
    Pose::new(Rotation::from_matrix_unchecked(r), g * v)
}

/// Inverse of [`exp_screw`] on the principal branch.
///
/// The identity maps to `θ = 0` with the canonical axis `ẑ`.
pub fn log_pose(pose: &Pose) -> Result<(ScrewAxis, f64), ScrewError> {
    let r = pose.rotation.matrix();
    let trace = r.trace();
    if trace <= -1.0 + 1e-6 {
        return Err(ScrewError::AngleNearPi { trace });
    }
    let axis_sin = 0.5 * vee(&(r - r.transpose()));
    let s = axis_sin.norm();
    let c = 0.5 * (trace - 1.0);
    let theta = s.atan2(c);

    if theta < 1e-12 {
        let p = pose.position;
        let d = p.norm();
        if d == 0.0 {
            return Ok((ScrewAxis(Twist::new(Vec3::z(), Vec3::zeros())), 0.0));
        }
        return Ok((ScrewAxis(Twist::new(Vec3::zeros(), p / d)), d));
    }

    let w = axis_sin / s;
    let k = hat(&w);
    let half = 0.5 * theta;
    // G(θ)^-1 / θ applied to p
    let coeff = 1.0 / theta - 0.5 / half.tan();
    let g_inv = Mat3::identity() / theta - 0.5 * k + coeff * (k * k);
    let v = g_inv * pose.position;
    Ok((ScrewAxis(Twist::new(w, v)), theta))
}

/// Adjoint map of a pose acting on `(ω, v)` twists: `[R 0; [p]R R]`.
pub fn adjoint(pose: &Pose) -> Mat6 {
    let r = pose.rotation.matrix();
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&(hat(&pose.position) * r));
    m
}

/// Lie bracket matrix of a twist: `ad(V) W = [V, W]`.
pub fn ad(v: &Twist) -> Mat6 {
    let wh = hat(&v.angular);
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&wh);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&wh);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&hat(&v.linear));
    m
}

/// Spatial inertia `[I 0; 0 mI]` about the centre of mass.
pub fn spatial_inertia(inertia: &Mat3, mass: f64) -> Mat6 {
    let mut g = Mat6::zeros();
    g.fixed_view_mut::<3, 3>(0, 0).copy_from(inertia);
    g.fixed_view_mut::<3, 3>(3, 3).copy_from(&(Mat3::identity() * mass));
    g
}
