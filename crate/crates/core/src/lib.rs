//! Forward statics for tendon-driven hyper-redundant manipulators built
//! from rigid beads joined by orthogonal elastic hinges.
//!
//! Given tendon tensions ([`solver::solve_fst`]) or tendon lengths
//! ([`solver::solve_fsl`]), the solvers find the joint angles at which
//! gravity, tendon couples, external loads and hinge elasticity balance.
//! A piecewise constant curvature baseline and pose error metrics are
//! included for comparison.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod config;
pub mod gradcheck;
pub mod metrics;
pub mod pcc;
pub mod scenario;
pub mod screw;
pub mod solver;
pub mod statics;
pub mod tendon;

pub use chain::{build_chain, forward_kinematics, ChainModel, DimensionMismatch, JointVector, TendonDirection};
pub use config::{load_model, ConfigError, LoadError, LoadedModel, ModelConfig, ParseError};
pub use metrics::{pose_error, PoseError};
pub use scenario::{emit_results, load_scenario, run_scenario, OutputFormat, ResultBundle, Scenario};
pub use screw::{Pose, Rotation, Twist, Vec3, Wrench};
pub use solver::{solve_fsl, solve_fst, SolveError, SolveResult, SolverParams};
pub use statics::{dtau_df, dtau_dtheta, torque_residual, ResidualReport};
