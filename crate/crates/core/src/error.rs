//! Error types shared across the crate.

use thiserror::Error;

use crate::domain::Point;

/// Errors raised while constructing or validating domains and grids.
#[derive(Debug, Error)]
pub enum DomainError {
    #[error("domain dimension must be 1 or 2, got {0}")]
    BadDimension(usize),
    #[error("inner region is empty or inverted along axis {axis}")]
    EmptyRegion { axis: usize },
    #[error("truncation box must strictly contain the inner region (axis {axis})")]
    BoxTooSmall { axis: usize },
    #[error("grid spacing must be positive, got {0}")]
    BadSpacing(f64),
    #[error(
        "region boundary does not align with the grid on axis {axis}: offset {offset} vs spacing {h}"
    )]
    Misaligned { axis: usize, offset: f64, h: f64 },
    #[error("cell count must be positive on axis {axis}")]
    NoCells { axis: usize },
    #[error("region mask selects no cells")]
    EmptyMask,
}

/// Errors from exponent fields and derived quantities.
#[derive(Debug, Error)]
pub enum ExponentError {
    #[error("non-finite exponent value {value} at pair ({x:?}, {y:?})")]
    NonFinite { x: Point, y: Point, value: f64 },
    #[error("exponent must exceed 1 at {x:?}, got {value}")]
    NotGreaterThanOne { x: Point, value: f64 },
    #[error("supercritical configuration at {x:?}: N - s(x,x)p(x,x) = {denominator} <= 0")]
    Supercritical { x: Point, denominator: f64 },
}

/// Errors from discrete field construction.
#[derive(Debug, Error)]
pub enum FieldError {
    #[error("non-finite nodal value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },
    #[error("nodal vector has length {got}, grid has {expected} nodes")]
    WrongLength { got: usize, expected: usize },
    #[error("value {value} at node {node} outside the inner region must be zero")]
    NonzeroOutside { node: usize, value: f64 },
    #[error("free-coefficient vector has length {got}, expected {expected}")]
    WrongFreeLength { got: usize, expected: usize },
}

/// Errors from norm and modular computations.
#[derive(Debug, Error)]
pub enum NormError {
    #[error("root finder failed to bracket the unit-modular scale (modular at lambda={lambda} is {modular})")]
    BracketFailure { lambda: f64, modular: f64 },
    #[error("exponents are not conjugate: |1/p + 1/q - 1| = {defect} at {x:?}")]
    NotConjugate { x: Point, defect: f64 },
    #[error("subcriticality violated at {x:?}: q = {q} >= critical exponent {critical}")]
    Supercritical { x: Point, q: f64, critical: f64 },
    #[error("ratio undefined: the field has zero Gagliardo norm")]
    ZeroField,
    #[error(transparent)]
    Exponent(#[from] ExponentError),
}

/// Errors from operator evaluation.
#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("principal-value radius {radius} is below the grid resolution {h}")]
    RadiusTooSmall { radius: f64, h: f64 },
    #[error("evaluation point {x:?} is not a grid node inside the inner region")]
    NotAnInteriorNode { x: Point },
}

/// Errors from the energy functional and its ingredients.
#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("Kirchhoff antiderivative diverges near zero (sampled integral grows without bound)")]
    DivergentAntiderivative,
    #[error("antiderivative argument must be nonnegative, got {0}")]
    NegativeArgument(f64),
    #[error("gradient requested at zero Gagliardo energy while the Kirchhoff coefficient is singular at the origin; perturb the field away from zero")]
    GradientAtOrigin,
    #[error("Kirchhoff lower-bound exponent gamma={gamma} must exceed 1/p^- = {inv_p_minus}")]
    GammaTooSmall { gamma: f64, inv_p_minus: f64 },
    #[error(transparent)]
    Norm(#[from] NormError),
}

/// Errors from the descent solver.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error("line search failed to decrease the energy after {backtracks} backtracks at iteration {iteration} (energy {energy}, gradient sup-norm {grad_norm}, step {step})")]
    Stall {
        iteration: usize,
        backtracks: usize,
        energy: f64,
        grad_norm: f64,
        step: f64,
    },
    #[error(transparent)]
    Energy(#[from] EnergyError),
}
