use thiserror::Error;

/// Errors raised by the geometry engine.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("ray from the sphere point does not re-enter the ball (u·z = {dot:e})")]
    NoSecondHit { dot: f64 },
    #[error("direction vector has near-zero length ({norm:e})")]
    DegenerateDirection { norm: f64 },
    #[error("point set is not full-dimensional in dimension {dim}")]
    Degenerate { dim: usize },
    #[error("dimension {0} is outside the supported range 2..=8")]
    UnsupportedDimension(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("point lies on the plane of facet {facet} (signed distance {distance:e})")]
    OnBoundaryPlane { facet: usize, distance: f64 },
    #[error("point is inside the polytope")]
    Inside,
    #[error("light source lies on the plane of facet {facet}; resample inside an open region")]
    RegionBoundary { facet: usize },
    #[error("points are collinear")]
    Collinear,
    #[error("apex coincides with a segment endpoint")]
    DegenerateVertex,
    #[error("ball projection is not a spherical cap from this light source")]
    NotACap,
    #[error("apex lies strictly inside the segment")]
    InteriorPoint,
    #[error("cones have different apexes")]
    ApexMismatch,
    #[error("spherical polytopes live on spheres of different radii ({0} vs {1})")]
    RadiusMismatch(f64, f64),
    #[error("permutation search exceeded its budget of {0} nodes")]
    SearchBudgetExceeded(usize),
    #[error("quadratic cone fit failed: {0}")]
    FitFailed(String),
    #[error("hyperspherical angle {index} = {value} is out of range")]
    AngleOutOfRange { index: usize, value: f64 },
    #[error("point lies within tolerance of plane {plane}")]
    OnPlane { plane: usize },
    #[error("no single vertex permutation is stable across the region")]
    UnstableRegion,
    #[error("segment fit collapsed to a single point")]
    DegenerateSegment,
    #[error("segment recovery did not converge")]
    NoConvergence,
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
