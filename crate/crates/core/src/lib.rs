//! Numerical toolkit for variable-order fractional problems with variable
//! exponents: Luxemburg norms and modulars of the zero-trace space, the
//! fractional p(.)-Laplacian in weak form, Kirchhoff-type energies, and a
//! direct descent solver with Ekeland-style certificates.
//!
//! Everything is discretized with continuous multilinear nodal fields on
//! uniform grids over a truncation box, in one or two dimensions. The
//! nonlocal double integrals use a fixed cell-pair quadrature whose
//! singular pairs are handled in difference coordinates with geometric
//! grading, so modulars, pairings and assembled gradients are mutually
//! consistent to round-off.

pub mod detsum;
pub mod domain;
pub mod energy;
pub mod error;
pub mod exponents;
pub mod field;
pub mod io;
pub mod minimize;
pub mod operator;
pub mod properties;
pub mod quad;
pub mod report;
pub mod spaces;

pub use domain::{DomainSpec, Point, RegionShape};
pub use energy::{
    CoercivityConstants, EnergyProblem, KirchhoffFn, KirchhoffSpec, PotentialSpec,
    PreparedProblem, SourceSpec,
};
pub use error::{
    DomainError, EnergyError, ExponentError, FieldError, NormError, OperatorError, SolveError,
};
pub use exponents::{
    conjugate_exponent, validate_exponents, ExponentBounds, ExponentField, ExponentPreset,
    PairFn, PointMap, ValidationReport,
};
pub use field::DiscreteField;
pub use minimize::{
    coercivity_ray_scan, ekeland_certificate, minimize, IterRecord, MinimizerConfig,
    MinimizerResult, RayScanRow, Termination,
};
pub use quad::QuadConfig;
pub use spaces::{FunctionSpace, HolderPairing, ModularReport, Regime};
