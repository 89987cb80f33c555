//! Joint torque balance and its derivatives.
//!
//! The static residual is
//! `τ(θ, f) = g(θ) + Aᵀ Lᵀ (F_e − F_t(θ, f)) + K θ` with
//! `g(θ) = Aᵀ Lᵀ G L Vdot_b`. Everything below is evaluated with block
//! substitutions over the chain, so one residual costs O(n) and the full
//! joint Jacobian O(n²).

use nalgebra::{DMatrix, DVector};

use crate::chain::{assemble_operators, ChainBlocks, ChainModel, DimensionMismatch, JointVector};
use crate::screw::{ad, Vec6, Wrench};
use crate::tendon::{dft_df, tendon_wrench_slots, tendon_wrench_theta_derivatives, TensionVector};

pub type TorqueVector = DVector<f64>;

/// Torque residual with its additive parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub tau: TorqueVector,
    /// Euclidean norm of `tau`.
    pub norm: f64,
    pub gravity: TorqueVector,
    pub tendon: TorqueVector,
    pub elastic: TorqueVector,
    pub external: TorqueVector,
}

impl ResidualReport {
    pub fn max_abs(&self) -> f64 {
        self.tau.amax()
    }
}

fn check_f(model: &ChainModel, f: &TensionVector) -> Result<(), DimensionMismatch> {
    crate::chain::check_len("tension vector", model.n_tendons(), f.len())
}

/// `Lᵀ w` followed by `Aᵀ`.
fn transmit(blocks: &ChainBlocks, mut w: Vec<Vec6>) -> DVector<f64> {
    blocks.backward(&mut w);
    blocks.project(&w)
}

fn external_slots(n: usize, f_ext: &Wrench) -> Vec<Vec6> {
    let mut s = vec![Vec6::zeros(); n];
    if let Some(last) = s.last_mut() {
        *last = f_ext.to_vector();
    }
    s
}

pub fn gravity_torque(model: &ChainModel, theta: &JointVector) -> Result<TorqueVector, DimensionMismatch> {
    let blocks = ChainBlocks::new(model, theta)?;
    Ok(gravity_from_blocks(&blocks))
}

fn gravity_from_blocks(blocks: &ChainBlocks) -> TorqueVector {
    let y = blocks.propagated_base_acceleration();
    let w = y.iter().zip(&blocks.inertias).map(|(yi, g)| g * yi).collect();
    transmit(blocks, w)
}

/// Residual with the tendon wrench supplied per slot rather than from `f`.
pub fn torque_residual_with_wrench(
    model: &ChainModel,
    theta: &JointVector,
    tendon_slots: &[Vec6],
    f_ext: &Wrench,
) -> Result<ResidualReport, DimensionMismatch> {
    let blocks = ChainBlocks::new(model, theta)?;
    crate::chain::check_len("tendon wrench slots", model.n_joints(), tendon_slots.len())?;
    let n = model.n_joints();
    let gravity = gravity_from_blocks(&blocks);
    let tendon = -transmit(&blocks, tendon_slots.to_vec());
    let external = transmit(&blocks, external_slots(n, f_ext));
    let elastic = model.stiffness_vector().component_mul(theta);
    let tau = &gravity + &tendon + &external + &elastic;
    Ok(ResidualReport { norm: tau.norm(), tau, gravity, tendon, elastic, external })
}

/// Static torque residual `τ(θ, f)` with an end-effector wrench given in
/// the last bead's frame.
pub fn torque_residual(
    model: &ChainModel,
    theta: &JointVector,
    f: &TensionVector,
    f_ext: &Wrench,
) -> Result<ResidualReport, DimensionMismatch> {
    model.check_theta(theta)?;
    check_f(model, f)?;
    torque_residual_with_wrench(model, theta, &tendon_wrench_slots(model, theta, f), f_ext)
}

/// `∂τ/∂θ`.
///
/// With `exact_tendon` the configuration dependence of the tendon wrench is
/// included; otherwise it is held fixed, which only matters for the chord
/// direction model.
pub fn dtau_dtheta(
    model: &ChainModel,
    theta: &JointVector,
    f: &TensionVector,
    f_ext: &Wrench,
    exact_tendon: bool,
) -> Result<DMatrix<f64>, DimensionMismatch> {
    model.check_theta(theta)?;
    check_f(model, f)?;
    let blocks = ChainBlocks::new(model, theta)?;
    let n = blocks.len();
    let y = blocks.propagated_base_acceleration();
    let ft = tendon_wrench_slots(model, theta, f);
    let fe = external_slots(n, f_ext);
    let mut z: Vec<Vec6> = (0..n).map(|i| blocks.inertias[i] * y[i] + fe[i] - ft[i]).collect();
    blocks.backward(&mut z);
    let dft = if exact_tendon { tendon_wrench_theta_derivatives(model, theta, f) } else { Vec::new() };

    let mut jac = DMatrix::zeros(n, n);
    let mut dy = vec![Vec6::zeros(); n];
    let mut u = vec![Vec6::zeros(); n];
    for j in 0..n {
        // ∂y = L (∂W y + ∂Vdot_b), nonzero from slot j on.
        dy.iter_mut().for_each(|v| *v = Vec6::zeros());
        let upstream = if j == 0 { blocks.base_acceleration } else { y[j - 1] };
        dy[j] = blocks.adjoint_derivatives[j] * upstream;
        blocks.forward_from(&mut dy, j + 1);

        u.iter_mut().for_each(|v| *v = Vec6::zeros());
        for k in j..n {
            u[k] = blocks.inertias[k] * dy[k];
        }
        // ∂Lᵀ w = Lᵀ ∂Wᵀ z.
        if j > 0 {
            u[j - 1] += blocks.adjoint_derivatives[j].transpose() * z[j];
        }
        for (joint, slot, v) in &dft {
            if *joint == j {
                u[*slot] -= v;
            }
        }
        blocks.backward(&mut u);
        let col = blocks.project(&u);
        jac.set_column(j, &col);
        jac[(j, j)] += model.joints()[j].stiffness;
    }
    Ok(jac)
}

/// `∂τ/∂f = −Aᵀ Lᵀ ∂F_t/∂f`, `n × n_l`.
pub fn dtau_df(model: &ChainModel, theta: &JointVector) -> Result<DMatrix<f64>, DimensionMismatch> {
    let blocks = ChainBlocks::new(model, theta)?;
    let d = dft_df(model, theta)?;
    let mut out = DMatrix::zeros(model.n_joints(), model.n_tendons());
    for i in 0..model.n_tendons() {
        let w = crate::chain::unstack(&d.column(i).into_owned());
        out.set_column(i, &(-transmit(&blocks, w)));
    }
    Ok(out)
}

/// Joint-space mass matrix `Aᵀ Lᵀ G L A`.
pub fn mass_matrix(model: &ChainModel, theta: &JointVector) -> Result<DMatrix<f64>, DimensionMismatch> {
    let ops = assemble_operators(model, theta)?;
    let la = &ops.l * &ops.a;
    Ok(la.transpose() * &ops.g * &la)
}

/// Coriolis and centripetal torques
/// `−Aᵀ Lᵀ (G L [ad_{Aθ̇}] W + [ad_V]ᵀ G) L A θ̇` with `V = L A θ̇`.
pub fn coriolis(model: &ChainModel, theta: &JointVector, theta_dot: &JointVector) -> Result<TorqueVector, DimensionMismatch> {
    crate::chain::check_len("joint velocity", model.n_joints(), theta_dot.len())?;
    let ops = assemble_operators(model, theta)?;
    let n = ops.n();
    let a_dot = &ops.a * theta_dot;
    let v = &ops.l * &a_dot;
    let mut ad_a = DMatrix::zeros(6 * n, 6 * n);
    let mut ad_v = DMatrix::zeros(6 * n, 6 * n);
    for i in 0..n {
        let ai = crate::screw::Twist::from_vector(&a_dot.fixed_rows::<6>(6 * i).into_owned());
        let vi = crate::screw::Twist::from_vector(&v.fixed_rows::<6>(6 * i).into_owned());
        ad_a.view_mut((6 * i, 6 * i), (6, 6)).copy_from(&ad(&ai));
        ad_v.view_mut((6 * i, 6 * i), (6, 6)).copy_from(&ad(&vi));
    }
    let inner = &ops.g * &ops.l * ad_a * &ops.w + ad_v.transpose() * &ops.g;
    Ok(-(ops.a.transpose() * ops.l.transpose() * inner * v))
}
