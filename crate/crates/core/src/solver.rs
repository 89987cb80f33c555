//! Newton–Raphson forward statics.
//!
//! FST solves `τ(θ; f) = 0` for the joint angles given tendon tensions.
//! FSL solves `τ(θ, f) = 0` together with `l_t(θ, f) = l_D` for angles and
//! tensions given tendon lengths. Tensions are reparameterized through a
//! smooth positive kernel `f = ½(√(4c + u²) + u)` so the iterates never
//! produce a pushing cable.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainModel, DimensionMismatch, JointVector};
use crate::screw::Wrench;
use crate::statics::{dtau_df, dtau_dtheta, torque_residual};
use crate::tendon::{coupling_matrix, dlength_df, tendon_length, LengthVector, TensionVector};

/// Largest joint excursion the hinges allow, rad.
pub const JOINT_LIMIT: f64 = FRAC_PI_2;
const MAX_HALVINGS: usize = 40;
const STALL_WINDOW: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub alpha: f64,
    /// N·m, on the max-norm of the torque residual.
    pub tol_torque: f64,
    /// m, on the max-norm of the length residual.
    pub tol_length: f64,
    pub max_iters: usize,
    /// N²
    pub kernel_c: f64,
    pub pinv_rcond: f64,
    /// Include `∂F_t/∂θ` in the joint Jacobian.
    pub exact_tendon_jacobian: bool,
    /// Use `u²/(u² + c)` in place of the kernel's derivative.
    pub paper_kernel_jacobian: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            alpha: 0.5,
            tol_torque: 1e-9,
            tol_length: 1e-9,
            max_iters: 500,
            kernel_c: 1e-4,
            pinv_rcond: 1e-10,
            exact_tendon_jacobian: false,
            paper_kernel_jacobian: false,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |what: &str| Err(SolveError::InvalidParams(what.to_string()));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must be in (0, 1]");
        }
        if !(self.tol_torque > 0.0 && self.tol_length > 0.0) {
            return bad("tolerances must be > 0");
        }
        if !(self.kernel_c > 0.0) {
            return bad("kernel_c must be > 0");
        }
        if !(self.pinv_rcond > 0.0 && self.pinv_rcond < 1.0) {
            return bad("pinv_rcond must be in (0, 1)");
        }
        Ok(())
    }

    fn kernel_jacobian_kind(&self) -> KernelJacobian {
        if self.paper_kernel_jacobian {
            KernelJacobian::Paper
        } else {
            KernelJacobian::Exact
        }
    }
}

/// Max-norms of both residual blocks after an iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample {
    pub torque: f64,
    /// Absent for FST.
    pub length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub theta: JointVector,
    pub f: TensionVector,
    /// Kernel variables, FSL only.
    pub u: Option<DVector<f64>>,
    pub iterations: usize,
    /// One entry for the start point and one per step.
    pub residual_history: Vec<ResidualSample>,
    pub converged: bool,
}

impl SolveResult {
    pub fn final_residual(&self) -> ResidualSample {
        *self.residual_history.last().expect("history holds the start point")
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no convergence after {} iterations (torque residual {:.3e})", best.iterations, best.final_residual().torque)]
    NonConvergence { best: Box<SolveResult> },
    #[error("jacobian rank {rank} below required {required} at iteration {iteration}")]
    SingularJacobian { rank: usize, required: usize, iteration: usize },
    #[error("target lengths unreachable: length residual stalled at {length_residual:.3e} m")]
    InfeasibleLengths { best: Box<SolveResult>, length_residual: f64 },
    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}

impl SolveError {
    /// Best iterate reached before failing, when there is one.
    pub fn best(&self) -> Option<&SolveResult> {
        match self {
            SolveError::NonConvergence { best } | SolveError::InfeasibleLengths { best, .. } => Some(best),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelJacobian {
    Exact,
    Paper,
}

/// `f = ½(√(4c + u²) + u)`, evaluated without cancellation for negative `u`.
pub fn kernel_apply(u: &DVector<f64>, c: f64) -> TensionVector {
    u.map(|u| {
        let s = (4.0 * c + u * u).sqrt();
        if u >= 0.0 {
            0.5 * (s + u)
        } else {
            2.0 * c / (s - u)
        }
    })
}

/// Diagonal of `∂f/∂u`.
pub fn kernel_jacobian(u: &DVector<f64>, c: f64, kind: KernelJacobian) -> DVector<f64> {
    match kind {
        KernelJacobian::Exact => u.map(|u| 0.5 * (u / (4.0 * c + u * u).sqrt() + 1.0)),
        KernelJacobian::Paper => u.map(|u| u * u / (u * u + c)),
    }
}

/// Inverse kernel `u = f − c/f`, for `f > 0`.
pub fn kernel_inverse(f: &TensionVector, c: f64) -> DVector<f64> {
    f.map(|f| f - c / f)
}

/// SVD pseudo-inverse with a relative cutoff; also returns the numerical rank.
pub fn pseudo_inverse(m: &DMatrix<f64>, rcond: f64) -> (DMatrix<f64>, usize) {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = rcond * smax;
    let mut rank = 0;
    let inv_s = svd.singular_values.map(|s| {
        if s > cutoff && s > 0.0 {
            rank += 1;
            1.0 / s
        } else {
            0.0
        }
    });
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let pinv = v_t.transpose() * DMatrix::from_diagonal(&inv_s) * u.transpose();
    (pinv, rank)
}

/// Scales `step` so `x + step` stays inside the joint limits on the first `n` entries.
fn clamp_to_trust_region(x: &DVector<f64>, step: &mut DVector<f64>, n: usize) {
    let mut scale: f64 = 1.0;
    for i in 0..n {
        let target = x[i] + step[i];
        if target.abs() > JOINT_LIMIT && step[i] != 0.0 {
            let room = JOINT_LIMIT * target.signum() - x[i];
            scale = scale.min((room / step[i]).max(0.0));
        }
    }
    if scale < 1.0 {
        *step *= scale;
    }
}

fn check_theta0(model: &ChainModel, theta0: &JointVector) -> Result<(), SolveError> {
    model.check_theta(theta0)?;
    if theta0.iter().any(|t| !t.is_finite() || t.abs() > JOINT_LIMIT) {
        return Err(SolveError::InvalidInput(format!("initial joint angles must be finite and within ±{JOINT_LIMIT} rad")));
    }
    Ok(())
}

/// Forward statics with tension input.
pub fn solve_fst(
    model: &ChainModel,
    f: &TensionVector,
    params: &SolverParams,
    theta0: &JointVector,
    f_ext: &Wrench,
) -> Result<SolveResult, SolveError> {
    params.validate()?;
    check_theta0(model, theta0)?;
    crate::chain::check_len("tension vector", model.n_tendons(), f.len())?;
    if f.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(SolveError::InvalidInput("tensions must be finite and >= 0".into()));
    }
    let n = model.n_joints();
    let eval = |theta: &JointVector| -> Result<DVector<f64>, SolveError> { Ok(torque_residual(model, theta, f, f_ext)?.tau) };

    let mut theta = theta0.clone();
    let mut tau = eval(&theta)?;
    let mut history = vec![ResidualSample { torque: tau.amax(), length: None }];
    let mut iterations = 0;
    loop {
        if tau.amax() <= params.tol_torque {
            return Ok(SolveResult { theta, f: f.clone(), u: None, iterations, residual_history: history, converged: true });
        }
        if iterations >= params.max_iters {
            let best = SolveResult { theta, f: f.clone(), u: None, iterations, residual_history: history, converged: false };
            return Err(SolveError::NonConvergence { best: Box::new(best) });
        }
        let jac = dtau_dtheta(model, &theta, f, f_ext, params.exact_tendon_jacobian)?;
        let (pinv, rank) = pseudo_inverse(&jac, params.pinv_rcond);
        if rank < n {
            return Err(SolveError::SingularJacobian { rank, required: n, iteration: iterations });
        }
        let mut step = -(pinv * &tau) * params.alpha;
        clamp_to_trust_region(&theta, &mut step, n);
        let current = tau.amax();
        let mut trial = &theta + &step;
        let mut trial_tau = eval(&trial)?;
        for _ in 0..MAX_HALVINGS {
            if trial_tau.amax() <= current {
                break;
            }
            step *= 0.5;
            trial = &theta + &step;
            trial_tau = eval(&trial)?;
        }
        theta = trial;
        tau = trial_tau;
        iterations += 1;
        history.push(ResidualSample { torque: tau.amax(), length: None });
    }
}

struct FslState {
    x: DVector<f64>,
    f: TensionVector,
    tau: DVector<f64>,
    dl: DVector<f64>,
}

impl FslState {
    fn merit(&self, p: &SolverParams) -> f64 {
        (self.tau.amax() / p.tol_torque).max(self.dl.amax() / p.tol_length)
    }

    fn sample(&self) -> ResidualSample {
        ResidualSample { torque: self.tau.amax(), length: Some(self.dl.amax()) }
    }
}

/// Forward statics with length input. `u0` defaults to 1 N on every tendon.
pub fn solve_fsl(
    model: &ChainModel,
    l_d: &LengthVector,
    params: &SolverParams,
    theta0: &JointVector,
    u0: Option<&DVector<f64>>,
    f_ext: &Wrench,
) -> Result<SolveResult, SolveError> {
    params.validate()?;
    check_theta0(model, theta0)?;
    let n = model.n_joints();
    let nl = model.n_tendons();
    crate::chain::check_len("length vector", nl, l_d.len())?;
    if l_d.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(SolveError::InvalidInput("target lengths must be finite and > 0".into()));
    }
    let c = params.kernel_c;
    let u0 = match u0 {
        Some(u) => {
            crate::chain::check_len("kernel variables", nl, u.len())?;
            u.clone()
        }
        None => kernel_inverse(&DVector::from_element(nl, 1.0), c),
    };

    let evaluate = |x: DVector<f64>| -> Result<FslState, SolveError> {
        let theta = x.rows(0, n).into_owned();
        let f = kernel_apply(&x.rows(n, nl).into_owned(), c);
        let tau = torque_residual(model, &theta, &f, f_ext)?.tau;
        let dl = tendon_length(model, &theta, &f)? - l_d;
        Ok(FslState { x, f, tau, dl })
    };
    let finish = |s: &FslState, iterations: usize, history: Vec<ResidualSample>, converged: bool| SolveResult {
        theta: s.x.rows(0, n).into_owned(),
        f: s.f.clone(),
        u: Some(s.x.rows(n, nl).into_owned()),
        iterations,
        residual_history: history,
        converged,
    };

    let mut x = DVector::zeros(n + nl);
    x.rows_mut(0, n).copy_from(theta0);
    x.rows_mut(n, nl).copy_from(&u0);
    let mut state = evaluate(x)?;
    let mut history = vec![state.sample()];
    let mut iterations = 0;
    let p_theta = coupling_matrix(model);
    let dl_df = dlength_df(model);
    let mut best_merit = state.merit(params);
    let mut since_improvement = 0;
    loop {
        let merit = state.merit(params);
        if merit <= 1.0 {
            return Ok(finish(&state, iterations, history, true));
        }
        if merit < best_merit * (1.0 - 1e-6) {
            best_merit = merit;
            since_improvement = 0;
        } else if iterations > 0 {
            since_improvement += 1;
        }
        let stalled = since_improvement >= STALL_WINDOW;
        if stalled || iterations >= params.max_iters {
            let length_residual = state.dl.amax();
            let best = Box::new(finish(&state, iterations, history, false));
            if length_residual > params.tol_length && state.tau.amax() <= params.tol_torque.max(length_residual) {
                return Err(SolveError::InfeasibleLengths { best, length_residual });
            }
            return Err(SolveError::NonConvergence { best });
        }

        let theta = state.x.rows(0, n).into_owned();
        let u = state.x.rows(n, nl).into_owned();
        let df_du = kernel_jacobian(&u, c, params.kernel_jacobian_kind());
        let mut jac = DMatrix::zeros(n + nl, n + nl);
        jac.view_mut((0, 0), (n, n)).copy_from(&dtau_dtheta(model, &theta, &state.f, f_ext, params.exact_tendon_jacobian)?);
        jac.view_mut((0, n), (n, nl)).copy_from(&(dtau_df(model, &theta)? * DMatrix::from_diagonal(&df_du)));
        jac.view_mut((n, 0), (nl, n)).copy_from(&p_theta);
        jac.view_mut((n, n), (nl, nl)).copy_from(&(&dl_df * DMatrix::from_diagonal(&df_du)));
        let (pinv, rank) = pseudo_inverse(&jac, params.pinv_rcond);
        // Antagonist pairs leave co-contraction unobservable, so up to n_l
        // directions may be lost without the problem being ill-posed.
        if rank < n {
            return Err(SolveError::SingularJacobian { rank, required: n, iteration: iterations });
        }
        let mut y = DVector::zeros(n + nl);
        y.rows_mut(0, n).copy_from(&state.tau);
        y.rows_mut(n, nl).copy_from(&state.dl);
        let mut step = -(pinv * y) * params.alpha;
        clamp_to_trust_region(&state.x, &mut step, n);
        let mut trial = evaluate(&state.x + &step)?;
        for _ in 0..MAX_HALVINGS {
            if trial.merit(params) <= merit {
                break;
            }
            step *= 0.5;
            trial = evaluate(&state.x + &step)?;
        }
        state = trial;
        iterations += 1;
        history.push(state.sample());
    }
}
