//! Scenario files, solver orchestration and result emission.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{forward_kinematics, ChainModel, JointVector};
use crate::config::{check_version, parse_toml, read_file, require, ConfigError, LoadError};
use crate::metrics::{pose_error, PoseError};
use crate::pcc::{arc_transform, discretized_joint_angles, pcc_tendon_lengths, segment_lengths, ArcParams, PccError};
use crate::screw::{Pose, Rotation, Vec3, Wrench};
use crate::solver::{kernel_inverse, solve_fsl, solve_fst, ResidualSample, SolveError, SolveResult, SolverParams};
use crate::statics::torque_residual;
use crate::tendon::{geometric_tendon_length, tendon_length};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fst,
    Fsl,
    Pcc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// A measured or otherwise trusted end-effector pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferencePose {
    /// m, base frame
    pub position: [f64; 3],
    /// `[w, x, y, z]`
    pub quaternion: [f64; 4],
}

impl ReferencePose {
    pub fn to_pose(&self) -> Result<Pose, ConfigError> {
        let q = nalgebra::Quaternion::new(self.quaternion[0], self.quaternion[1], self.quaternion[2], self.quaternion[3]);
        if (q.norm() - 1.0).abs() > crate::pcc::QUATERNION_NORM_TOL {
            return Err(ConfigError::new("reference.quaternion", "must have unit norm"));
        }
        let r = Rotation::from_quaternion(&nalgebra::UnitQuaternion::from_quaternion(q));
        Ok(Pose::new(r, Vec3::from(self.position)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExternalWrench {
    /// N·m, end-effector frame
    #[serde(default)]
    pub moment: [f64; 3],
    /// N, end-effector frame
    #[serde(default)]
    pub force: [f64; 3],
}

impl ExternalWrench {
    pub fn to_wrench(&self) -> Wrench {
        Wrench::new(Vec3::from(self.moment), Vec3::from(self.force))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcInput {
    pub kappa: f64,
    pub phi: f64,
    /// m; the segment's bead stack length when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub alpha: Option<f64>,
    pub tol_torque: Option<f64>,
    pub tol_length: Option<f64>,
    pub max_iters: Option<usize>,
    pub kernel_c: Option<f64>,
    pub pinv_rcond: Option<f64>,
    pub exact_tendon_jacobian: Option<bool>,
    pub paper_kernel_jacobian: Option<bool>,
}

impl SolverOverrides {
    pub fn apply(&self, p: &mut SolverParams) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { p.$f = v; } )* };
        }
        set!(alpha, tol_torque, tol_length, max_iters, kernel_c, pinv_rcond, exact_tendon_jacobian, paper_kernel_jacobian);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputOptions {
    pub format: Option<OutputFormat>,
    /// Include per-bead poses (default true).
    pub poses: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub format_version: Option<u32>,
    pub mode: Option<Mode>,
    /// N, FST input
    pub tensions: Option<Vec<f64>>,
    /// m, FSL input
    pub lengths: Option<Vec<f64>>,
    /// rad, solver start point (default straight)
    pub initial_theta: Option<Vec<f64>>,
    /// N, FSL start tensions (default 1 N each)
    pub initial_tensions: Option<Vec<f64>>,
    pub arcs: Option<Vec<ArcInput>>,
    pub external_wrench: Option<ExternalWrench>,
    pub reference: Option<ReferencePose>,
    #[serde(default)]
    pub solver: SolverOverrides,
    #[serde(default)]
    pub output: OutputOptions,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Scenario, LoadError> {
        let s: Scenario = parse_toml(text)?;
        check_version(s.format_version)?;
        require(s.mode, "mode")?;
        Ok(s)
    }

    pub fn fst(tensions: Vec<f64>) -> Scenario {
        Scenario { mode: Some(Mode::Fst), tensions: Some(tensions), ..Scenario::empty() }
    }

    pub fn fsl(lengths: Vec<f64>) -> Scenario {
        Scenario { mode: Some(Mode::Fsl), lengths: Some(lengths), ..Scenario::empty() }
    }

    pub fn pcc(arcs: Vec<ArcInput>) -> Scenario {
        Scenario { mode: Some(Mode::Pcc), arcs: Some(arcs), ..Scenario::empty() }
    }

    fn empty() -> Scenario {
        Scenario {
            format_version: Some(crate::config::FORMAT_VERSION),
            mode: None,
            tensions: None,
            lengths: None,
            initial_theta: None,
            initial_tensions: None,
            arcs: None,
            external_wrench: None,
            reference: None,
            solver: SolverOverrides::default(),
            output: OutputOptions::default(),
        }
    }

    pub fn wrench(&self) -> Wrench {
        self.external_wrench.unwrap_or_default().to_wrench()
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, LoadError> {
    Scenario::from_toml_str(&read_file(path.as_ref())?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeadPose {
    /// 1-based bead index
    pub index: usize,
    pub position: [f64; 3],
    /// `[w, x, y, z]`, `w ≥ 0`
    pub quaternion: [f64; 4],
}

impl BeadPose {
    fn new(index: usize, pose: &Pose) -> BeadPose {
        let q = pose.rotation.to_quaternion();
        let s = if q.w < 0.0 { -1.0 } else { 1.0 };
        BeadPose {
            index,
            position: [pose.position.x, pose.position.y, pose.position.z],
            quaternion: [s * q.w, s * q.i, s * q.j, s * q.k],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub mode: Mode,
    pub converged: bool,
    pub iterations: usize,
    /// rad
    pub theta: Vec<f64>,
    /// N
    pub f: Vec<f64>,
    /// m, linear length model at `(θ, f)`; ideal-arc lengths for PCC.
    pub lengths: Vec<f64>,
    /// m, polyline lengths on the joint angles that discretize the arcs (PCC only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discretized_lengths: Option<Vec<f64>>,
    /// N·m, max-norm of the torque residual at `(θ, f)`; zero for PCC.
    pub torque_residual: f64,
    pub external_wrench: ExternalWrench,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arcs: Option<Vec<ArcParams>>,
    pub tip: BeadPose,
    pub poses: Vec<BeadPose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose_error: Option<PoseError>,
    pub residual_history: Vec<ResidualSample>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario: {0}")]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Solve {
        context: String,
        #[source]
        source: SolveError,
    },
    #[error("pcc: {0}")]
    Pcc(#[from] PccError),
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn bead_poses(model: &ChainModel, theta: &JointVector) -> Vec<Pose> {
    forward_kinematics(model, theta).expect("joint vector sized to model")
}

fn reference_error(tip: &Pose, reference: Option<&ReferencePose>) -> Result<Option<PoseError>, ConfigError> {
    match reference {
        Some(r) => Ok(Some(pose_error(tip, &r.to_pose()?, &Pose::identity()))),
        None => Ok(None),
    }
}

impl ResultBundle {
    /// Bundle for an FST or FSL solution, converged or not.
    pub fn from_solution(
        model: &ChainModel,
        mode: Mode,
        result: &SolveResult,
        external_wrench: ExternalWrench,
        reference: Option<&ReferencePose>,
        include_poses: bool,
    ) -> Result<ResultBundle, ConfigError> {
        let poses = bead_poses(model, &result.theta);
        let tip = *poses.last().expect("at least one bead");
        let lengths = tendon_length(model, &result.theta, &result.f).expect("sized to model");
        let tau = torque_residual(model, &result.theta, &result.f, &external_wrench.to_wrench()).expect("sized to model");
        Ok(ResultBundle {
            mode,
            converged: result.converged,
            iterations: result.iterations,
            theta: vec_of(&result.theta),
            f: vec_of(&result.f),
            lengths: vec_of(&lengths),
            discretized_lengths: None,
            torque_residual: tau.max_abs(),
            external_wrench,
            arcs: None,
            tip: BeadPose::new(model.n_joints(), &tip),
            poses: if include_poses { poses.iter().enumerate().map(|(i, p)| BeadPose::new(i + 1, p)).collect() } else { Vec::new() },
            pose_error: reference_error(&tip, reference)?,
            residual_history: result.residual_history.clone(),
        })
    }

    /// Checks that the stored lengths and torque residual follow from the
    /// bundle's own angles and tensions.
    pub fn verify(&self, model: &ChainModel) -> Result<(), String> {
        if self.mode == Mode::Pcc {
            let arcs = self.arcs.as_ref().ok_or("pcc bundle without arcs")?;
            let l = pcc_tendon_lengths(model, arcs).map_err(|e| e.to_string())?;
            return compare("lengths", &self.lengths, l.as_slice());
        }
        let theta = DVector::from_column_slice(&self.theta);
        let f = DVector::from_column_slice(&self.f);
        let l = tendon_length(model, &theta, &f).map_err(|e| e.to_string())?;
        compare("lengths", &self.lengths, l.as_slice())?;
        let tau = torque_residual(model, &theta, &f, &self.external_wrench.to_wrench()).map_err(|e| e.to_string())?;
        compare("torque_residual", &[self.torque_residual], &[tau.max_abs()])
    }
}

fn compare(what: &str, stored: &[f64], recomputed: &[f64]) -> Result<(), String> {
    if stored.len() != recomputed.len() {
        return Err(format!("{what}: {} stored values, {} recomputed", stored.len(), recomputed.len()));
    }
    for (i, (a, b)) in stored.iter().zip(recomputed).enumerate() {
        if (a - b).abs() > 1e-12 * (1.0 + b.abs()) {
            return Err(format!("{what}[{i}]: stored {a:e}, recomputed {b:e}"));
        }
    }
    Ok(())
}

fn to_vector(what: &str, v: &[f64], expected: usize) -> Result<DVector<f64>, ConfigError> {
    if v.len() != expected {
        return Err(ConfigError::new(what, format!("expected {expected} values, got {}", v.len())));
    }
    Ok(DVector::from_column_slice(v))
}

fn initial_theta(model: &ChainModel, scenario: &Scenario) -> Result<JointVector, ConfigError> {
    match &scenario.initial_theta {
        Some(t) => to_vector("initial_theta", t, model.n_joints()),
        None => Ok(model.zero_configuration()),
    }
}

/// Per-bead poses of a PCC shape: frame `i` sits a distance `i h` along the backbone.
fn pcc_bead_poses(model: &ChainModel, arcs: &[ArcParams]) -> Vec<Pose> {
    let nb = model.beads_per_segment();
    let mut base = Pose::identity();
    let mut out = Vec::with_capacity(model.n_joints());
    for (k, arc) in arcs.iter().enumerate() {
        let mut along = 0.0;
        for bead in &model.beads()[k * nb..(k + 1) * nb] {
            along += bead.height;
            let partial = ArcParams { length: along * arc.length / segment_lengths(model)[k], ..*arc };
            out.push(base * arc_transform(&partial));
        }
        base = base * arc_transform(arc);
    }
    out
}

pub fn run_scenario(model: &ChainModel, scenario: &Scenario, params: &SolverParams) -> Result<ResultBundle, ScenarioError> {
    let mode = require(scenario.mode, "mode")?;
    let include_poses = scenario.output.poses.unwrap_or(true);
    let wrench = scenario.external_wrench.unwrap_or_default();
    let solve_ctx = |mode: &str, source| ScenarioError::Solve { context: format!("{mode} solve"), source };
    match mode {
        Mode::Fst => {
            let f = to_vector("tensions", require(scenario.tensions.as_deref(), "tensions")?, model.n_tendons())?;
            let theta0 = initial_theta(model, scenario)?;
            let r = solve_fst(model, &f, params, &theta0, &wrench.to_wrench()).map_err(|e| solve_ctx("fst", e))?;
            Ok(ResultBundle::from_solution(model, mode, &r, wrench, scenario.reference.as_ref(), include_poses)?)
        }
        Mode::Fsl => {
            let l = to_vector("lengths", require(scenario.lengths.as_deref(), "lengths")?, model.n_tendons())?;
            let theta0 = initial_theta(model, scenario)?;
            let u0 = match &scenario.initial_tensions {
                Some(f0) => {
                    let f0 = to_vector("initial_tensions", f0, model.n_tendons())?;
                    if f0.iter().any(|v| !(*v > 0.0)) {
                        return Err(ConfigError::new("initial_tensions", "must be > 0").into());
                    }
                    Some(kernel_inverse(&f0, params.kernel_c))
                }
                None => None,
            };
            let r = solve_fsl(model, &l, params, &theta0, u0.as_ref(), &wrench.to_wrench()).map_err(|e| solve_ctx("fsl", e))?;
            Ok(ResultBundle::from_solution(model, mode, &r, wrench, scenario.reference.as_ref(), include_poses)?)
        }
        Mode::Pcc => {
            let inputs = require(scenario.arcs.as_deref(), "arcs")?;
            let lengths = segment_lengths(model);
            if inputs.len() != lengths.len() {
                return Err(ConfigError::new("arcs", format!("expected {} arcs, got {}", lengths.len(), inputs.len())).into());
            }
            let arcs: Vec<ArcParams> = inputs
                .iter()
                .zip(&lengths)
                .map(|(a, s)| ArcParams { kappa: a.kappa, phi: a.phi, length: a.length.unwrap_or(*s) })
                .collect();
            let theta = discretized_joint_angles(model, &arcs)?;
            let poses = pcc_bead_poses(model, &arcs);
            let tip = *poses.last().expect("at least one bead");
            let ideal = pcc_tendon_lengths(model, &arcs)?;
            let discretized = model.tendons().iter().map(|t| geometric_tendon_length(model, &theta, t)).collect();
            Ok(ResultBundle {
                mode,
                converged: true,
                iterations: 0,
                theta: vec_of(&theta),
                f: Vec::new(),
                lengths: vec_of(&ideal),
                discretized_lengths: Some(discretized),
                torque_residual: 0.0,
                external_wrench: wrench,
                arcs: Some(arcs),
                tip: BeadPose::new(model.n_joints(), &tip),
                poses: if include_poses { poses.iter().enumerate().map(|(i, p)| BeadPose::new(i + 1, p)).collect() } else { Vec::new() },
                pose_error: reference_error(&tip, scenario.reference.as_ref())?,
                residual_history: Vec::new(),
            })
        }
    }
}

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("bundle failed self-consistency: {0}")]
    Inconsistent(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub fn to_json(bundle: &ResultBundle) -> String {
    serde_json::to_string_pretty(bundle).expect("bundle serializes")
}

pub fn from_json(text: &str) -> Result<ResultBundle, serde_json::Error> {
    serde_json::from_str(text)
}

/// CSV: one row per bead, then a key/value summary block.
pub fn write_csv<W: Write>(bundle: &ResultBundle, out: W) -> Result<(), EmitError> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let num = |v: f64| format!("{v:.16e}");
    w.write_record(["index", "x", "y", "z", "qw", "qx", "qy", "qz"])?;
    for p in &bundle.poses {
        let mut row = vec![p.index.to_string()];
        row.extend(p.position.iter().chain(&p.quaternion).map(|v| num(*v)));
        w.write_record(&row)?;
    }
    w.write_record([""])?;
    w.write_record(["key", "value"])?;
    w.write_record(["mode", &format!("{:?}", bundle.mode).to_lowercase()])?;
    w.write_record(["converged", &bundle.converged.to_string()])?;
    w.write_record(["iterations", &bundle.iterations.to_string()])?;
    w.write_record(["torque_residual", &num(bundle.torque_residual)])?;
    for (name, values) in [("theta", &bundle.theta), ("f", &bundle.f), ("length", &bundle.lengths)] {
        for (i, v) in values.iter().enumerate() {
            w.write_record([format!("{name}[{i}]"), num(*v)])?;
        }
    }
    if let Some(d) = &bundle.discretized_lengths {
        for (i, v) in d.iter().enumerate() {
            w.write_record([format!("discretized_length[{i}]"), num(*v)])?;
        }
    }
    if let Some(e) = &bundle.pose_error {
        w.write_record(["e_theta", &num(e.e_theta)])?;
        w.write_record(["e_p", &num(e.e_p)])?;
        w.write_record(["eps_theta", &e.eps_theta.map(num).unwrap_or_else(|| "undefined".into())])?;
        w.write_record(["eps_p", &e.eps_p.map(num).unwrap_or_else(|| "undefined".into())])?;
    }
    w.flush()?;
    Ok(())
}

/// Verifies the bundle against the model and writes it.
pub fn emit_results<W: Write>(model: &ChainModel, bundle: &ResultBundle, format: OutputFormat, mut out: W) -> Result<(), EmitError> {
    bundle.verify(model).map_err(EmitError::Inconsistent)?;
    match format {
        OutputFormat::Json => {
            out.write_all(to_json(bundle).as_bytes())?;
            out.write_all(b"\n")?;
            Ok(())
        }
        OutputFormat::Csv => write_csv(bundle, out),
    }
}

pub fn emit_results_to_path(model: &ChainModel, bundle: &ResultBundle, format: OutputFormat, path: &Path) -> Result<(), EmitError> {
    let mut buf = Vec::new();
    emit_results(model, bundle, format, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Outcome of solving FST for known tensions, then recovering angles and
/// tensions from the resulting lengths with FSL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTripReport {
    pub theta_error: f64,
    /// Max relative tension error.
    pub f_error: f64,
    pub fst_iterations: usize,
    pub fsl_iterations: usize,
    pub fsl_converged: bool,
    pub f_true: Vec<f64>,
    pub f_recovered: Vec<f64>,
}

impl RoundTripReport {
    pub fn passes(&self, theta_tol: f64, f_tol: f64) -> bool {
        self.fsl_converged && self.theta_error <= theta_tol && self.f_error <= f_tol
    }
}

pub fn round_trip(model: &ChainModel, f: &DVector<f64>, params: &SolverParams, f_ext: &Wrench) -> Result<RoundTripReport, SolveError> {
    let zero = model.zero_configuration();
    let fst = solve_fst(model, f, params, &zero, f_ext)?;
    let l_d = tendon_length(model, &fst.theta, &fst.f)?;
    let (fsl, converged) = match solve_fsl(model, &l_d, params, &zero, None, f_ext) {
        Ok(r) => (r, true),
        Err(e) => match e.best() {
            Some(b) => (b.clone(), false),
            None => return Err(e),
        },
    };
    let f_error = fsl.f.iter().zip(f.iter()).map(|(a, b)| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
    Ok(RoundTripReport {
        theta_error: (&fsl.theta - &fst.theta).amax(),
        f_error,
        fst_iterations: fst.iterations,
        fsl_iterations: fsl.iterations,
        fsl_converged: converged,
        f_true: vec_of(f),
        f_recovered: vec_of(&fsl.f),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::build_chain;
    use crate::config::ModelConfig;

    #[test]
    fn scenario_requires_mode() {
        let e = Scenario::from_toml_str("format_version = 1\ntensions = [1.0]\n").unwrap_err();
        assert!(matches!(e, LoadError::Config(ref c) if c.path == "mode"));
    }

    #[test]
    fn scenario_parses_solver_overrides() {
        let s = Scenario::from_toml_str("format_version = 1\nmode = \"fst\"\ntensions = [1.0]\n[solver]\nalpha = 1.0\n").unwrap();
        let mut p = SolverParams::default();
        s.solver.apply(&mut p);
        assert_eq!(p.alpha, 1.0);
        assert_eq!(p.tol_torque, 1e-9);
    }

    #[test]
    fn straight_pcc_bundle() {
        let m = build_chain(&ModelConfig::uniform(2, 4, 0.03, 0.01, 0.5).with_tendon(1, 2, [0.02, 0.0])).unwrap();
        let arcs = vec![ArcInput { kappa: 0.0, phi: 0.0, length: None }; 2];
        let b = run_scenario(&m, &Scenario::pcc(arcs), &SolverParams::default()).unwrap();
        assert!((b.tip.position[2] - 0.24).abs() < 1e-15);
        assert_eq!(b.lengths, vec![m.tendons()[0].rest_length]);
        b.verify(&m).unwrap();
    }

    #[test]
    fn tampered_bundle_fails_emission() {
        let m = build_chain(&ModelConfig::uniform(1, 3, 0.03, 0.01, 0.5).with_tendon(1, 1, [0.02, 0.0])).unwrap();
        let mut b = run_scenario(&m, &Scenario::fst(vec![0.5]), &SolverParams::default()).unwrap();
        b.lengths[0] += 1e-6;
        let err = emit_results(&m, &b, OutputFormat::Json, Vec::new()).unwrap_err();
        assert!(matches!(err, EmitError::Inconsistent(_)));
    }
}
