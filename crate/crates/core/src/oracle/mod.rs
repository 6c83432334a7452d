//! Independent reference computations used to validate the solver and the
//! gradient paths: exhaustive assignment, finite differences, gate and energy
//! evaluators. Nothing here calls into the solver.

mod brute;
mod fd;
mod geometry;

pub use brute::{brute_force_mda, objective, Assignment, BruteForceResult, Constraints, MAX_FEASIBLE, MAX_LISTED};
pub use fd::{finite_diff_grad, first_mismatch, FdConfig};
pub use geometry::{brute_force_hypotheses, energy_on_c};
