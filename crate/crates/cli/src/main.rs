//! `tendon-statics` command-line front end.
//!
//! Exit codes: 0 success, 1 failed check (`check-gradients`, `round-trip`),
//! 2 non-convergence, 3 configuration error, 4 I/O error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tendon_statics::gradcheck::{check_gradients, GradcheckOptions};
use tendon_statics::pcc::{pcc_from_tip_quaternion, segment_lengths};
use tendon_statics::scenario::{emit_results, round_trip, ArcInput, EmitError, Mode, ResultBundle, ScenarioError};
use tendon_statics::{load_model, load_scenario, run_scenario, LoadError, LoadedModel, ModelConfig, OutputFormat, Scenario, SolveError, SolverParams};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_NON_CONVERGENCE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_IO: u8 = 4;

/// Round-trip tolerances: joint angles (rad, max-norm) and relative tension error.
const ROUND_TRIP_THETA_TOL: f64 = 1e-6;
const ROUND_TRIP_F_TOL: f64 = 1e-5;

#[derive(Parser)]
#[command(name = "tendon-statics", version, about = "Forward statics of tendon-driven hyper-redundant manipulators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for joint angles given tendon tensions.
    SolveFst {
        #[command(flatten)]
        common: Common,
        /// Tendon tensions in N, comma separated, in model tendon order.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        tensions: Option<Vec<f64>>,
    },
    /// Solve for joint angles and tensions given tendon lengths.
    SolveFsl {
        #[command(flatten)]
        common: Common,
        /// Tendon lengths in m, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        lengths: Option<Vec<f64>>,
        /// Starting tensions in N, comma separated (default 1 N each).
        #[arg(long, value_delimiter = ',')]
        initial_tensions: Option<Vec<f64>>,
    },
    /// Piecewise constant curvature shape from arc parameters or segment tip orientations.
    Pcc {
        #[command(flatten)]
        common: Common,
        /// One arc per segment as `kappa,phi` (1/m, rad); repeat per segment.
        #[arg(long = "arc", allow_negative_numbers = true)]
        arcs: Vec<String>,
        /// Base-frame segment tip orientation as `w,x,y,z`; repeat per segment.
        #[arg(long = "tip-quaternion", allow_negative_numbers = true, conflicts_with = "arcs")]
        tip_quaternions: Vec<String>,
    },
    /// Compare analytic derivatives against central finite differences.
    CheckGradients {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Solve FST for known tensions, then recover angles and tensions with FSL.
    RoundTrip {
        #[command(flatten)]
        common: Common,
        /// Tensions in N; when absent, `--count` vectors are drawn from [0.5, 5] N.
        #[arg(long, value_delimiter = ',')]
        tensions: Option<Vec<f64>>,
        #[arg(long, default_value_t = 20)]
        count: usize,
    },
    /// Print the normalized model with every default resolved.
    DumpModel {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Model file; the bundled two-segment platform when absent.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Scenario file; command-line inputs and flags override it.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tol_torque: Option<f64>,
    #[arg(long)]
    tol_length: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    kernel_c: Option<f64>,
    #[arg(long)]
    exact_tendon_jacobian: bool,
    #[arg(long)]
    paper_kernel_jacobian: bool,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave per-bead poses out of the result.
    #[arg(long)]
    no_poses: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Failure {
        Failure { code: EXIT_CONFIG, message: message.into() }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Failure {
        let code = if matches!(e, LoadError::Io { .. }) { EXIT_IO } else { EXIT_CONFIG };
        Failure { code, message: e.to_string() }
    }
}

impl From<EmitError> for Failure {
    fn from(e: EmitError) -> Failure {
        let code = if matches!(e, EmitError::Inconsistent(_)) { EXIT_CONFIG } else { EXIT_IO };
        Failure { code, message: e.to_string() }
    }
}

fn io_failure(path: Option<&Path>, e: std::io::Error) -> Failure {
    let target = path.map(|p| p.display().to_string()).unwrap_or_else(|| "stdout".into());
    Failure { code: EXIT_IO, message: format!("i/o error on {target}: {e}") }
}

fn load(model: Option<&Path>) -> Result<LoadedModel, Failure> {
    match model {
        Some(p) => Ok(load_model(p)?),
        None => Ok(LoadedModel::from_config(ModelConfig::paper_platform()).map_err(|e| Failure::config(e.to_string()))?),
    }
}

impl Common {
    fn params(&self, scenario: Option<&Scenario>) -> Result<SolverParams, Failure> {
        let mut p = SolverParams::default();
        if let Some(s) = scenario {
            s.solver.apply(&mut p);
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { p.$f = v; } )* };
        }
        set!(alpha, tol_torque, tol_length, max_iters, kernel_c);
        p.exact_tendon_jacobian |= self.exact_tendon_jacobian;
        p.paper_kernel_jacobian |= self.paper_kernel_jacobian;
        p.validate().map_err(|e| Failure::config(e.to_string()))?;
        Ok(p)
    }

    fn scenario(&self, mode: Mode) -> Result<Option<Scenario>, Failure> {
        let Some(path) = &self.scenario else { return Ok(None) };
        let s = load_scenario(path)?;
        if s.mode != Some(mode) {
            return Err(Failure::config(format!("scenario mode {:?} does not match the subcommand", s.mode.expect("checked on load"))));
        }
        Ok(Some(s))
    }

    fn output_format(&self, scenario: &Scenario) -> OutputFormat {
        match self.format {
            Some(Format::Json) => OutputFormat::Json,
            Some(Format::Csv) => OutputFormat::Csv,
            None => scenario.output.format.unwrap_or_default(),
        }
    }

    fn write(&self, bytes: &[u8]) -> Result<(), Failure> {
        match &self.out {
            Some(p) => std::fs::write(p, bytes).map_err(|e| io_failure(Some(p), e)),
            None => std::io::stdout().write_all(bytes).map_err(|e| io_failure(None, e)),
        }
    }
}

fn parse_list(what: &str, text: &str, len: usize) -> Result<Vec<f64>, Failure> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|v| v.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if v.len() == len => Ok(v),
        _ => Err(Failure::config(format!("{what}: expected {len} comma-separated numbers, got `{text}`"))),
    }
}

/// Runs a scenario and emits its bundle. A solve that stops short still
/// emits its best iterate and exits with the non-convergence code.
fn solve_and_emit(common: &Common, loaded: &LoadedModel, mut scenario: Scenario) -> Result<(), Failure> {
    if common.no_poses {
        scenario.output.poses = Some(false);
    }
    let params = common.params(Some(&scenario))?;
    let model = &loaded.model;
    let format = common.output_format(&scenario);
    let (bundle, failure) = match run_scenario(model, &scenario, &params) {
        Ok(b) => (b, None),
        Err(ScenarioError::Solve { context, source }) => match source.best() {
            Some(best) => {
                let mode = scenario.mode.expect("validated");
                let b = ResultBundle::from_solution(
                    model,
                    mode,
                    best,
                    scenario.external_wrench.unwrap_or_default(),
                    scenario.reference.as_ref(),
                    scenario.output.poses.unwrap_or(true),
                )
                .map_err(|e| Failure::config(e.to_string()))?;
                (b, Some(Failure { code: EXIT_NON_CONVERGENCE, message: format!("{context}: {source}") }))
            }
            None => {
                let code = match source {
                    SolveError::InvalidInput(_) | SolveError::InvalidParams(_) | SolveError::Dimension(_) => EXIT_CONFIG,
                    _ => EXIT_NON_CONVERGENCE,
                };
                return Err(Failure { code, message: format!("{context}: {source}") });
            }
        },
        Err(e) => return Err(Failure::config(e.to_string())),
    };
    let mut buf = Vec::new();
    emit_results(model, &bundle, format, &mut buf)?;
    common.write(&buf)?;
    failure.map_or(Ok(()), Err)
}

fn input_scenario(common: &Common, mode: Mode, build: impl FnOnce() -> Option<Scenario>) -> Result<Scenario, Failure> {
    let from_file = common.scenario(mode)?;
    match (from_file, build()) {
        (None, None) => Err(Failure::config("no input: pass a scenario file or the input values on the command line")),
        (Some(s), None) => Ok(s),
        (None, Some(cli)) => Ok(cli),
        (Some(mut s), Some(cli)) => {
            s.tensions = cli.tensions.or(s.tensions);
            s.lengths = cli.lengths.or(s.lengths);
            s.initial_tensions = cli.initial_tensions.or(s.initial_tensions);
            s.arcs = cli.arcs.or(s.arcs);
            Ok(s)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::SolveFst { common, tensions } => {
            let loaded = load(common.model.as_deref())?;
            let s = input_scenario(&common, Mode::Fst, || tensions.map(Scenario::fst))?;
            solve_and_emit(&common, &loaded, s)
        }
        Command::SolveFsl { common, lengths, initial_tensions } => {
            let loaded = load(common.model.as_deref())?;
            let s = input_scenario(&common, Mode::Fsl, || match (lengths, initial_tensions) {
                (None, None) => None,
                (l, f0) => Some(Scenario { lengths: l, initial_tensions: f0, ..Scenario::fsl(Vec::new()) }),
            })?;
            if s.lengths.as_ref().is_none_or(|l| l.is_empty()) {
                return Err(Failure::config("solve-fsl needs lengths"));
            }
            solve_and_emit(&common, &loaded, s)
        }
        Command::Pcc { common, arcs, tip_quaternions } => {
            let loaded = load(common.model.as_deref())?;
            let model = &loaded.model;
            let cli_arcs = if !tip_quaternions.is_empty() {
                let tips = tip_quaternions
                    .iter()
                    .map(|q| parse_list("tip-quaternion", q, 4).map(|v| [v[0], v[1], v[2], v[3]]))
                    .collect::<Result<Vec<_>, _>>()?;
                let recovered = pcc_from_tip_quaternion(&tips, &segment_lengths(model)).map_err(|e| Failure::config(e.to_string()))?;
                Some(recovered.iter().map(|a| ArcInput { kappa: a.kappa, phi: a.phi, length: Some(a.length) }).collect())
            } else if !arcs.is_empty() {
                Some(
                    arcs.iter()
                        .map(|a| parse_list("arc", a, 2).map(|v| ArcInput { kappa: v[0], phi: v[1], length: None }))
                        .collect::<Result<Vec<_>, _>>()?,
                )
            } else {
                None
            };
            let s = input_scenario(&common, Mode::Pcc, || cli_arcs.map(Scenario::pcc))?;
            solve_and_emit(&common, &loaded, s)
        }
        Command::CheckGradients { common, samples } => {
            if samples == 0 {
                return Err(Failure::config("--samples must be at least 1"));
            }
            let loaded = load(common.model.as_deref())?;
            let params = common.params(None)?;
            let options = GradcheckOptions { kernel_c: params.kernel_c, paper_kernel_jacobian: params.paper_kernel_jacobian };
            let report = check_gradients(&loaded.model, samples, common.seed, &options);
            let text = match common.format {
                Some(Format::Json) => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
                _ => report.to_string(),
            };
            common.write(text.as_bytes())?;
            if report.passes() {
                Ok(())
            } else {
                Err(Failure { code: EXIT_CHECK_FAILED, message: "gradient check failed".into() })
            }
        }
        Command::RoundTrip { common, tensions, count } => {
            let loaded = load(common.model.as_deref())?;
            let model = &loaded.model;
            let params = common.params(None)?;
            let nl = model.n_tendons();
            let draws: Vec<DVector<f64>> = match tensions {
                Some(f) if f.len() == nl => vec![DVector::from_vec(f)],
                Some(f) => return Err(Failure::config(format!("tensions: expected {nl} values, got {}", f.len()))),
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
                    (0..count).map(|_| DVector::from_fn(nl, |_, _| rng.random_range(0.5..=5.0))).collect()
                }
            };
            let mut reports = Vec::with_capacity(draws.len());
            for f in &draws {
                match round_trip(model, f, &params, &tendon_statics::Wrench::zero()) {
                    Ok(r) => reports.push(r),
                    Err(e @ (SolveError::InvalidInput(_) | SolveError::InvalidParams(_))) => return Err(Failure::config(e.to_string())),
                    Err(e) => return Err(Failure { code: EXIT_NON_CONVERGENCE, message: format!("fst solve: {e}") }),
                }
            }
            let passed = reports.iter().filter(|r| r.passes(ROUND_TRIP_THETA_TOL, ROUND_TRIP_F_TOL)).count();
            let text = match common.format {
                Some(Format::Json) => serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n",
                _ => {
                    let mut t = String::new();
                    for (i, r) in reports.iter().enumerate() {
                        t += &format!(
                            "{i:>3}  theta err {:.2e} rad  f rel err {:.2e}  fst {} it  fsl {} it{}\n",
                            r.theta_error,
                            r.f_error,
                            r.fst_iterations,
                            r.fsl_iterations,
                            if r.fsl_converged { "" } else { "  (fsl did not converge)" }
                        );
                    }
                    t + &format!("{passed}/{} within theta {ROUND_TRIP_THETA_TOL:e} rad, f {ROUND_TRIP_F_TOL:e} relative\n", reports.len())
                }
            };
            common.write(text.as_bytes())?;
            if passed == reports.len() {
                Ok(())
            } else {
                Err(Failure { code: EXIT_CHECK_FAILED, message: format!("{} of {} round trips outside tolerance", reports.len() - passed, reports.len()) })
            }
        }
        Command::DumpModel { model, out } => {
            let loaded = load(model.as_deref())?;
            let text = loaded.dump();
            match &out {
                Some(p) => std::fs::write(p, text).map_err(|e| io_failure(Some(p), e)),
                None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| io_failure(None, e)),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("tendon-statics: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
