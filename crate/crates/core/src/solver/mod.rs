//! Constrained maximization over the probability simplex: the polytope
//! projection, the inner projected-gradient solver, and the CCCP design
//! procedures built on them.

pub mod cccp;
pub mod inner;
pub mod qp;

pub use cccp::{
    linearized_ber_constraint, solve, solve_all_starts, solve_from_start, solve_known_csi, solve_qos,
    solve_symmetric, solve_unknown_csi, starting_point, AffineFunction, CccpSettings, DesignProblem, EveChannel,
    FeasibilityReport, SolveError, SolveResult, Variant,
};
pub use inner::{inner_solve, FnObjective, InnerResult, InnerSettings, Objective};
pub use qp::Polytope;
