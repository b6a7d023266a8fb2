//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by geometry, obstacle queries, the planner/controller and
/// the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vector norm {norm:.3e} too small to define a direction")]
    DegenerateVector { norm: f64 },

    #[error("geodesic undefined for antipodal endpoints (angle {angle:.12} rad)")]
    GeodesicUndefined { angle: f64 },

    #[error("state lies inside an unsafe set (obstacle {obstacle})")]
    InfeasibleState { obstacle: usize },

    #[error("separation is zero: state on the unsafe boundary")]
    BoundaryContact,

    #[error("degenerate projection: point coincides with its closest boundary point")]
    DegenerateProjection,

    #[error("two obstacle tubes active at once ({first} and {second}); scenario separation violated")]
    ConfigurationInvalid { first: usize, second: usize },

    #[error("separation {distance:.3e} too close to the boundary for the analytic Jacobian")]
    NearBoundaryJacobian { distance: f64 },

    #[error("numerical blow-up at step {step} (t = {time:.6}): non-finite state")]
    NumericalBlowup { step: usize, time: f64 },

    #[error("not an equilibrium: residual {residual:.3e} exceeds {tolerance:.1e}")]
    NotAnEquilibrium { residual: f64, tolerance: f64 },

    #[error("blend function violates endpoint condition: {0}")]
    InvalidBlend(String),

    #[error("scenario validation failed:\n{}", format_issues(.0))]
    InvalidScenario(Vec<String>),

    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),

    #[error("cannot parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
}

fn format_issues(issues: &[String]) -> String {
    issues
        .iter()
        .map(|s| format!("  - {s}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T> = std::result::Result<T, Error>;
