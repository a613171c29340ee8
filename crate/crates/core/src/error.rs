use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("negative action {0}")]
    NegativeAction(f64),

    #[error("action {action} outside field domain [{lo}, {hi}]")]
    OutsideDomain { action: f64, lo: f64, hi: f64 },

    #[error("field varies along the boundary circle by {deviation:e} at t = {time}; disk is not invariant")]
    BoundaryInhomogeneous { deviation: f64, time: f64 },

    #[error("normalized field does not vanish to first order on the boundary (|H| = {value:e}, |grad H| = {gradient:e})")]
    BoundaryNotFlat { value: f64, gradient: f64 },

    #[error("implicit stage solve did not converge at t = {time} after {iterations} iterations")]
    SolverDivergence { time: f64, iterations: usize },

    #[error("trajectory left the invariant disk: action {action} > {limit} at t = {time}")]
    Escape { action: f64, limit: f64, time: f64 },

    #[error("boundary trajectory drifted off the boundary circle by {drift:e}")]
    BoundaryNotInvariant { drift: f64 },

    #[error("angle advanced by {increment} in one step; refine the step")]
    AngleStepTooLarge { increment: f64 },

    #[error("Poincare maps differ by {distance:e} (tolerance {tolerance:e})")]
    MapMismatch { distance: f64, tolerance: f64 },

    #[error("curves come within {distance:e} of each other")]
    CurvesTooClose { distance: f64 },

    #[error("projection stayed degenerate after {attempts} attempts")]
    DegenerateProjection { attempts: usize },

    #[error("closure endpoint outside the disk (action {action} > {limit})")]
    EndpointOutsideDisk { action: f64, limit: f64 },

    #[error("could not write output: {0}")]
    Output(String),
}
