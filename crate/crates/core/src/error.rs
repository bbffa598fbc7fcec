use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidSpec(String),
    #[error("density is not absolutely continuous ({0}); score and Fisher information are undefined")]
    NonSmoothDensity(String),
    #[error("law has no density: {0}")]
    NoDensity(String),
    #[error("score undefined at x = {x}: density {density:e} is at or below the floor")]
    ScoreUndefined { x: f64, density: f64 },
    #[error("quadrature diverged: {0}")]
    QuadratureDivergent(String),
    #[error("support is not a connected interval: {0}")]
    DisconnectedSupport(String),
    #[error("grid too small: {lost_mass:e} of the mass falls outside [{lo}, {hi}]")]
    GridTooSmall { lo: f64, hi: f64, lost_mass: f64 },
    #[error("FFT ringing: clipped negative mass {clipped:e} exceeds the threshold")]
    RingingError { clipped: f64 },
    #[error("degenerate sum: {0}")]
    DegenerateSum(String),
    #[error("grids cannot be reconciled: {0}")]
    GridMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
