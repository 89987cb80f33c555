//! Analytic derivatives against central finite differences.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{joint_transform, ChainModel, JointVector};
use crate::screw::{adjoint, ad, Wrench};
use crate::solver::{kernel_apply, kernel_jacobian, KernelJacobian};
use crate::statics::{dtau_df, dtau_dtheta, torque_residual, torque_residual_with_wrench};
use crate::tendon::tendon_wrench_slots;

/// A checked row fails above this relative error.
pub const GRADIENT_TOLERANCE: f64 = 1e-5;
const STEP: f64 = 1e-6;
const TENSION_STEP: f64 = 1e-3;
/// Random joint angles are drawn from ±this, rad.
const THETA_RANGE: f64 = 0.3;
/// Random tensions are drawn from [0, this), N.
const TENSION_RANGE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradcheckOptions {
    pub kernel_c: f64,
    /// Also compare the alternative kernel Jacobian, which is not the
    /// kernel's derivative and is reported without failing the check.
    pub paper_kernel_jacobian: bool,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions { kernel_c: 1e-4, paper_kernel_jacobian: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientRow {
    pub quantity: String,
    /// `max |analytic − fd| / (1 + max |fd|)` over all samples.
    pub max_rel_error: f64,
    /// Rows that are not checked are informational only.
    pub checked: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub samples: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub rows: Vec<GradientRow>,
}

impl GradientReport {
    pub fn passes(&self) -> bool {
        self.rows.iter().filter(|r| r.checked).all(|r| r.max_rel_error <= self.tolerance)
    }

    pub fn row(&self, quantity: &str) -> Option<&GradientRow> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }
}

impl fmt::Display for GradientReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples {} seed {} tolerance {:e}", self.samples, self.seed, self.tolerance)?;
        for r in &self.rows {
            let status = match (r.checked, r.max_rel_error <= self.tolerance) {
                (false, _) => "info",
                (true, true) => "ok",
                (true, false) => "FAIL",
            };
            write!(f, "{:<22} {:>12.3e}  {status}", r.quantity, r.max_rel_error)?;
            if let Some(n) = &r.note {
                write!(f, "  ({n})")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn rel_error(analytic: &DMatrix<f64>, fd: &DMatrix<f64>) -> f64 {
    (analytic - fd).amax() / (1.0 + fd.amax())
}

fn central<F>(x: &DVector<f64>, h: f64, rows: usize, mut eval: F) -> DMatrix<f64>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let mut out = DMatrix::zeros(rows, x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        xp[j] = x[j] + h;
        let plus = eval(&xp);
        xp[j] = x[j] - h;
        let minus = eval(&xp);
        xp[j] = x[j];
        out.set_column(j, &((plus - minus) / (2.0 * h)));
    }
    out
}

struct Sample {
    theta: JointVector,
    f: DVector<f64>,
    u: DVector<f64>,
}

fn draw(model: &ChainModel, rng: &mut ChaCha8Rng, anchored: bool) -> Sample {
    let n = model.n_joints();
    let nl = model.n_tendons();
    if anchored {
        return Sample { theta: JointVector::zeros(n), f: DVector::zeros(nl), u: DVector::zeros(nl) };
    }
    Sample {
        theta: JointVector::from_fn(n, |_, _| rng.random_range(-THETA_RANGE..THETA_RANGE)),
        f: DVector::from_fn(nl, |_, _| rng.random_range(0.0..TENSION_RANGE)),
        u: DVector::from_fn(nl, |_, _| rng.random_range(-3.0..3.0)),
    }
}

/// Compares every analytic derivative against central differences on
/// `n_samples` configurations. The first sample is the unloaded straight
/// chain; the rest are drawn from a ChaCha stream seeded with `seed`.
pub fn check_gradients(model: &ChainModel, n_samples: usize, seed: u64, options: &GradcheckOptions) -> GradientReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.n_joints();
    let nl = model.n_tendons();
    let no_load = Wrench::zero();
    let c = options.kernel_c;
    let mut full = 0.0f64;
    let mut frozen = 0.0f64;
    let mut d_f = 0.0f64;
    let mut d_w = 0.0f64;
    let mut k_exact = 0.0f64;
    let mut k_paper = 0.0f64;

    for s in 0..n_samples.max(1) {
        let Sample { theta, f, u } = draw(model, &mut rng, s == 0);
        let tau = |th: &DVector<f64>| torque_residual(model, th, &f, &no_load).expect("sized").tau;

        let analytic = dtau_dtheta(model, &theta, &f, &no_load, true).expect("sized");
        full = full.max(rel_error(&analytic, &central(&theta, STEP, n, tau)));

        let slots = tendon_wrench_slots(model, &theta, &f);
        let fixed = |th: &DVector<f64>| torque_residual_with_wrench(model, th, &slots, &no_load).expect("sized").tau;
        let analytic = dtau_dtheta(model, &theta, &f, &no_load, false).expect("sized");
        frozen = frozen.max(rel_error(&analytic, &central(&theta, STEP, n, fixed)));

        if nl > 0 {
            let by_f = |ff: &DVector<f64>| torque_residual(model, &theta, ff, &no_load).expect("sized").tau;
            let analytic = dtau_df(model, &theta).expect("sized");
            d_f = d_f.max(rel_error(&analytic, &central(&f, TENSION_STEP, n, by_f)));

            let exact = DMatrix::from_diagonal(&kernel_jacobian(&u, c, KernelJacobian::Exact));
            let fd = central(&u, STEP, nl, |uu| kernel_apply(uu, c));
            k_exact = k_exact.max(rel_error(&exact, &fd));
            let paper = DMatrix::from_diagonal(&kernel_jacobian(&u, c, KernelJacobian::Paper));
            k_paper = k_paper.max(rel_error(&paper, &fd));
        }

        for j in 0..n {
            let axis = model.joints()[j].axis;
            let analytic = -ad(axis.twist()) * adjoint(&joint_transform(model, j, theta[j]));
            let plus = adjoint(&joint_transform(model, j, theta[j] + STEP));
            let minus = adjoint(&joint_transform(model, j, theta[j] - STEP));
            let fd = (plus - minus) / (2.0 * STEP);
            let err = (analytic - fd).amax() / (1.0 + fd.amax());
            d_w = d_w.max(err);
        }
    }

    let row = |q: &str, e: f64| GradientRow { quantity: q.to_string(), max_rel_error: e, checked: true, note: None };
    let mut rows = vec![
        row("dtau_dtheta_full", full),
        row("dtau_dtheta_frozen", frozen),
        row("dtau_df", d_f),
        row("dW_dtheta", d_w),
        row("kernel_exact", k_exact),
    ];
    if options.paper_kernel_jacobian {
        rows.push(GradientRow {
            quantity: "kernel_paper".to_string(),
            max_rel_error: k_paper,
            checked: false,
            note: Some("u²/(u²+c) is not the kernel's derivative; expected mismatch, 0.5 at u = 0".to_string()),
        });
    }
    GradientReport { samples: n_samples.max(1), seed, tolerance: GRADIENT_TOLERANCE, rows }
}
