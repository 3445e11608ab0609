//! Graph-kernel bandits for sparse source placement.
//!
//! A network process spreads source excitations through an unknown
//! polynomial-of-Laplacian kernel; a learner observes part of the resulting
//! signal and picks, round after round, which `T0` nodes to excite.

pub mod armsel;
pub mod error;
pub mod graph;
pub mod learner;
pub mod process;
pub mod rng;

pub use armsel::{
    binomial, exact_select, exact_select_at_most, grab_arm_light, grab_arm_light_from, select, ucb_select, ArmSelectConfig,
    Selection, Selector, UcbObjective, UcbOptions, DEFAULT_ENUMERATION_BUDGET,
};
pub use error::{Error, Result};
pub use graph::{generate_ba, generate_rbf, rbf_coordinates, DictionaryBasis, Graph, Spectrum};
pub use learner::{
    confidence_radius, det_bound, log_det_bound, regret_bound, HyperParams, LearnerState, RadiusMode,
};
pub use process::{
    aggregated_feature, apply_diffusion, apply_poly_kernel, diffusion_poly_coefficients, feature_matrix,
    random_mask, unit_features, ActionSignal, Environment, KernelCoefficients, Mask, Network, Observation,
    TrueKernel,
};
pub mod experiment;
pub mod io;

pub use experiment::{
    cumulative_regret, error_study, oracle_best_arm, regret_experiment, run_aal, run_grab_ucb, solver_bench,
    summarize_regret, ExperimentConfig, GrabUcbRun, Instance, OracleArm, OracleMethod, RoundRecord, RunRecord,
};
