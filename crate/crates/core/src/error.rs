use thiserror::Error;

use crate::geometry::Side;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse grouping used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate projection: point lies on the principal plane (|w| = {w:e})")]
    DegenerateProjection { w: f64 },

    #[error("undistortion did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("time {t} s outside stage log span [{start}, {end}] s")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("track has fewer than two frames")]
    EmptyTrack,

    #[error("per-target correlation maxima disagree: {lags_s:?} s")]
    InconsistentTargets { lags_s: Vec<f64> },

    #[error("stage signal has fewer than two maxima; no period to restrict to")]
    NoPeriodFound,

    #[error("home segment too short: {frames} still frames, need at least {required}")]
    NoHomeSegment { frames: usize, required: usize },

    #[error("infeasible profile: v_max^2/a_max = {turn_rad} rad exceeds the full stroke {stroke_rad} rad")]
    InfeasibleProfile { turn_rad: f64, stroke_rad: f64 },

    #[error("target {target} left the {camera} sensor at frame {frame}")]
    TargetOutOfView {
        frame: usize,
        target: u32,
        camera: Side,
    },

    #[error("degenerate triangulation geometry: optical rays are parallel")]
    DegenerateGeometry,

    #[error("triangulated point lies behind the {camera} camera")]
    BehindCamera { camera: Side },

    #[error("divergent depth: |s - psi*Omega| = {denominator:e} px")]
    DivergentDepth { denominator: f64 },

    #[error("no measured distance for target pair ({a}, {b})")]
    MissingTruth { a: u32, b: u32 },

    #[error("target {target} has {frames} frames; at least {required} are needed")]
    TooFewFrames {
        target: u32,
        frames: usize,
        required: usize,
    },

    #[error("linear fit too poor: R^2 = {r_squared:.4} < {threshold}")]
    BadFit { r_squared: f64, threshold: f64 },

    #[error("sweep minimum at the range boundary (Omega = {omega_px} px)")]
    NoInteriorMinimum { omega_px: f64 },

    #[error("per-target sweep minima disagree: {minima_px:?} px")]
    InconsistentMinima { minima_px: Vec<f64> },

    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("snapshots do not share the same target set")]
    MismatchedTargets,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("frame {frame}{}: {source}", .target.map(|t| format!(", target {t}")).unwrap_or_default())]
    AtFrame {
        frame: usize,
        target: Option<u32>,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn at_frame(self, frame: usize, target: Option<u32>) -> Self {
        Error::AtFrame {
            frame,
            target,
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::InvalidInput(_) => ErrorKind::Config,
            Error::Io { .. } => ErrorKind::Io,
            Error::AtFrame { source, .. } => source.kind(),
            _ => ErrorKind::Numerical,
        }
    }

    /// The innermost error, with frame context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtFrame { source, .. } => source.root(),
            other => other,
        }
    }
}
