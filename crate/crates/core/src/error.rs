use thiserror::Error;

/// Errors raised by geometry, assembly, spectral and study routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("graph `{graph}` leaves the band ({lo}, {hi}) at x = {x}: value {value}")]
    BandViolation {
        graph: String,
        x: f64,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("singular Jacobian on element {element}: det = {det:e}")]
    SingularJacobian { element: usize, det: f64 },
    #[error("mesh rejected: minimum angle {min_angle_deg:.2} deg on element {element} is below 20 deg")]
    MeshQuality { element: usize, min_angle_deg: f64 },
    #[error("degenerate element {element}: area {area:e}")]
    DegenerateElement { element: usize, area: f64 },
    #[error("Dirichlet piece {piece} is not resolved by the mesh ({edges} boundary edges)")]
    UnresolvedDirichlet { piece: String, edges: usize },
    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("shift {xi} lies within {distance:e} of the spectrum")]
    ShiftTooClose { xi: String, distance: f64 },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("ellipticity violated at x = ({x0}, {x1}) in direction ({d0}, {d1}): quotient {quotient} outside [{lo}, {hi}]")]
    Ellipticity {
        x0: f64,
        x1: f64,
        d0: f64,
        d1: f64,
        quotient: f64,
        lo: f64,
        hi: f64,
    },
    #[error("maps of different kinds cannot be compared: {0}")]
    MixedKinds(String),
    #[error("cluster {cluster:?} is not isolated: relative gap {gap:e}")]
    ClusterNotIsolated { cluster: Vec<usize>, gap: f64 },
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
    #[error("selection bound violated at k = {k}: {distance:e} > {bound:e}")]
    SelectionBound { k: usize, distance: f64, bound: f64 },
    #[error("too few usable points for a fit: {usable}")]
    TooFewPoints { usable: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
