use thiserror::Error;

/// Errors raised by the homogenization toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("hole must lie strictly inside the unit cell")]
    HoleTouchesCellBoundary,
    #[error("the Robin part of the pore surface is empty")]
    EmptyRobinPart,
    #[error("the Neumann part of the pore surface is empty")]
    EmptyNeumannPart,
    #[error("hole corners are not aligned with a grid of {0} subdivisions")]
    HoleNotGridAligned(usize),
    #[error("epsilon = {0} is not of the form 1/k for a positive integer k")]
    EpsilonNotUnitFraction(f64),
    #[error("unknown facet label `{0}`")]
    UnknownLabel(String),
    #[error("mesh has no periodic pairing (not a cell mesh)")]
    NotACellMesh,
    #[error("right-hand side is not orthogonal to the kernel (relative defect {0:e})")]
    IncompatibleRhs(f64),
    #[error("conjugate gradient did not converge: relative residual {residual:e} after {iterations} iterations")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("non-finite coefficient value at y = ({0}, {1})")]
    NonFiniteCoefficient(f64, f64),
    #[error("coefficient is not uniformly elliptic: {0}")]
    NonElliptic(String),
    #[error("point ({0}, {1}) lies outside the source mesh")]
    NodeOutsideSource(f64, f64),
    #[error("point ({0}, {1}) lies inside a hole")]
    PointInsideHole(f64, f64),
    #[error("mollifier kernel unresolved: h = {h} > delta/2 = {half_delta}")]
    KernelUnresolved { h: f64, half_delta: f64 },
    #[error("initial data is negative ({0})")]
    NegativeInitialData(f64),
    #[error("solution blew up: |value| = {0:e} exceeds 1e8")]
    BlowUp(f64),
    #[error("fields live on different meshes ({0} vs {1} nodes)")]
    MeshMismatch(usize, usize),
    #[error("at least 3 (epsilon, value) pairs are needed, got {0}")]
    TooFewPoints(usize),
    #[error("rate fit requires positive values, got {0:e}")]
    NonPositiveValue(f64),
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
}

impl Error {
    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. } | Error::BlowUp(_) | Error::NonFiniteCoefficient(..)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
