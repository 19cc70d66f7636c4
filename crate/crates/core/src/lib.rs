//! Shock-fronted travelling waves of a reaction–nonlinear-diffusion equation
//! with viscous relaxation: wave construction by shooting, essential spectrum,
//! the reduced slow eigenvalue problem with its jump map, and a Riccati–Evans
//! function whose winding numbers count eigenvalues.

pub mod contour;
pub mod espec;
pub mod full_lin;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod slow_evans;
pub mod wave;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("{0}")]
    Domain(String),
    #[error("no transversal connection in bracket [{lo}, {hi}]")]
    NoConnection { lo: f64, hi: f64 },
    #[error("saddle hierarchy violated: {0}")]
    Hierarchy(String),
    #[error("non-hyperbolic frozen point")]
    NonHyperbolic,
    #[error("section hit at infinity; perturb lambda or move the section")]
    SectionAtInfinity,
    #[error("contour too close to zero/pole")]
    ContourRefinement,
    #[error("shooting did not converge: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
