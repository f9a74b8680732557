//! Feynman graphs of the quartic model and their regularized amplitudes.

pub mod amplitude;
pub mod graph;

pub use amplitude::{
    alpha_integrand, amplitude, assemble_integrand, check_covariance,
    check_effective_action_invariance, check_orthogonal_invariance, effective_action_term,
    vertex_constraint, vertex_factor, vertex_phase, AmplitudeResult, CovarianceReport,
    InvarianceReport, MAX_LINES,
};
pub use graph::{Corner, FeynmanGraph};
