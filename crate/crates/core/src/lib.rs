//! A finite-element laboratory for Signorini problems on thick plane
//! junctions and their homogenized limits.
//!
//! The library discretizes the unilateral boundary-value problem on a
//! junction domain (a body with `N` periodically attached thin rods,
//! Signorini conditions on the rod sides) as a bound-constrained quadratic
//! program, solves it with interchangeable variational-inequality solvers,
//! assembles and solves the anisotropic limit problem the junction
//! approaches as the rods proliferate, and measures every quantity the
//! convergence analysis of that limit passage speaks about: energies, weak
//! gaps against test-function batteries, interface traces, a periodic
//! integral identity and uniform Friedrich constants.
//!
//! See the `book/` guide for a narrative walk-through, and the `junction-lab`
//! binary for the batch CLI.

pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod config;
pub mod element;
pub mod expr;
pub mod geometry;
pub mod io;
pub mod limit_problem;
pub mod linalg;
pub mod problem_data;
pub mod sparse;
pub mod vi_solver;

pub use expr::{parse_expression, Expr};
pub use geometry::{
    build_junction_mesh, build_limit_mesh, BoundaryTag, JunctionConfig, Mesh, Region,
};
pub use problem_data::{GMode, ProblemData};
pub use vi_solver::{
    check_definitions_equivalence, kkt_residual, solve_bruteforce, solve_pdas, solve_psor,
    DiscreteVI, SolveResult, SolverOptions, ViLabel,
};
