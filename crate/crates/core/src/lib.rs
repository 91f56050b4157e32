//! Probabilistic constellation shaping of M-PAM for visible-light wiretap
//! channels.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64` aliases below are the double-precision instantiations used by the
//! command-line harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod channel;
pub mod constellation;
pub mod error;
pub mod error_rate;
pub mod montecarlo;
pub mod quadrature;
pub mod scalar;
pub mod solver;
pub mod special;

pub use channel::{
    LambertianLed, LinkBudget, LinkGeometry, NoiseParams, ReceiverPd,
};
pub use constellation::{
    build_constellation, ConstraintMode, ConstraintSet, Distribution, PamConstellation,
    SymmetryMatrix,
};
pub use error::{Error, Result};
pub use solver::{CccpSettings, DesignProblem, EveChannel, SolveError, SolveResult, Variant};
pub use scalar::Scalar;

pub type LambertianLedF64 = LambertianLed<f64>;
pub type ReceiverPdF64 = ReceiverPd<f64>;
pub type LinkGeometryF64 = LinkGeometry<f64>;
pub type NoiseParamsF64 = NoiseParams<f64>;
pub type LinkBudgetF64 = LinkBudget<f64>;
pub type PamConstellationF64 = PamConstellation<f64>;
pub type DistributionF64 = Distribution<f64>;
pub type ConstraintSetF64 = ConstraintSet<f64>;
pub type DesignProblemF64 = DesignProblem<f64>;
pub type SolveResultF64 = SolveResult<f64>;
pub type CccpSettingsF64 = CccpSettings<f64>;
