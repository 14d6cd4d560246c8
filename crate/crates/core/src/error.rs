use thiserror::Error;

use crate::integrate::Trajectory;

/// Where a requested energy level sits relative to the periodic window of a
/// planar well.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowSide {
    /// At or below the center value.
    Center,
    /// At or above the separatrix (homoclinic/heteroclinic) value.
    Separatrix,
}

/// Why an integration stopped early.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    StepUnderflow,
    BlowUp,
    NonFinite,
    MaxSteps,
}

/// An aborted integration. Carries the last good state and everything that
/// was integrated before the failure.
#[derive(Debug, Clone)]
pub struct IntegrationFailure {
    pub kind: FailureKind,
    pub t: f64,
    pub state: Vec<f64>,
    pub partial: Trajectory,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown family id `{0}`")]
    UnknownFamily(String),

    #[error("family {family}: missing parameter `{name}`")]
    MissingParameter { family: &'static str, name: String },

    #[error("family {family}: unexpected parameter `{name}`")]
    UnexpectedParameter { family: &'static str, name: String },

    #[error("parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{op} is not supported for family {family}")]
    UnsupportedFamily { op: &'static str, family: &'static str },

    #[error("state is outside the scaled chart (theta = {theta} <= 0)")]
    OutOfChart { theta: f64 },

    #[error("integration failed ({:?}) at t = {}", .0.kind, .0.t)]
    Integration(Box<IntegrationFailure>),

    #[error("level h = {h} is outside the periodic window ({side:?} side; window = ({lo}, {hi}))")]
    OutsidePeriodicWindow { h: f64, lo: f64, hi: f64, side: WindowSide },

    #[error("theta = {theta} is outside the admissible range ({lo}, {hi})")]
    ThetaOutOfRange { theta: f64, lo: f64, hi: f64 },

    #[error("no transverse eigenvalue with the requested stability at y = {y}")]
    NoEigenvalue { y: f64 },

    #[error("leading eigenvalue at y = {y} is not simple")]
    NonSimpleEigenvalue { y: f64 },

    #[error("no seed converged to the equilibrium manifold (best residual {best_residual:e})")]
    NoConvergence { best_residual: f64 },

    #[error("manifold traces did not reach the section: {0}")]
    SectionMissed(String),

    #[error("antipodal oddness violated at vertex {vertex}: witness u = {witness:?}, defect {defect:e}")]
    OddnessViolation { vertex: i64, witness: Vec<f64>, defect: f64 },

    #[error("base orbit period {period} differs from 2*pi by more than {tol:e}")]
    PeriodMismatch { period: f64, tol: f64 },

    #[error("unsupported format `{0}`")]
    UnsupportedFormat(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
