use std::path::PathBuf;

/// Errors raised across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point is outside the retraction tube of {manifold} (distance {distance:.3e}, tube radius {tube_radius:.3e})")]
    OutsideTube {
        manifold: String,
        distance: f64,
        tube_radius: f64,
    },
    #[error("tangent vectors span a degenerate plane")]
    DegeneratePlane,
    #[error("point lies on the cut locus of the base point")]
    CutLocus,
    #[error("iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("data leave the admissible ball: max distance {max_distance:.6} >= radius {radius:.6}")]
    RadiusViolation { max_distance: f64, radius: f64 },
    #[error("masked domain is not convex: {0}")]
    DomainNotConvex(String),
    #[error("mollification radius {epsilon} must lie in (0, {limit}) (a third of the inradius)")]
    EpsilonTooLarge { epsilon: f64, limit: f64 },
    #[error("invalid convex body: {0}")]
    InvalidBody(String),
    #[error("inner domain mask is empty")]
    EmptyMask,
    #[error("no extinction detected before t = {t_end}")]
    NoExtinction { t_end: f64 },
    #[error("energy increased from {before:.12e} to {after:.12e} at t = {t:.6e}; time step too large")]
    Instability { t: f64, before: f64, after: f64 },
    #[error("unknown verification suite `{0}`")]
    UnknownSuite(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("invalid manifold identifier `{0}`")]
    UnknownManifold(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
