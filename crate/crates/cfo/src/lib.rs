//! Locally conservative flux recovery for convection-diffusion problems.
//!
//! The crate solves second-order convection-diffusion equations with a
//! continuous piecewise-linear Galerkin discretization that is augmented by
//! an edge-based flux unknown. The flux is selected by minimizing a weighted
//! least-squares distance to the classical flux subject to exact elementwise
//! mass balance, which leads to a symmetric indefinite saddle-point system.
//! On top of the core solver the crate provides error/convergence reporting
//! against manufactured solutions, and an operator-split two-phase porous
//! media transport driver that consumes the conservative fluxes.

pub mod analysis;
pub mod assembly;
pub mod config;
pub mod io;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod sparse;
pub mod twophase;

use thiserror::Error;

/// Planar point or vector.
pub type Point = [f64; 2];

/// Crate-wide error type. Variants are grouped by the pipeline stage that
/// raises them; [`CfoError::class`] returns the stage name used in CLI
/// diagnostics.
#[derive(Debug, Error)]
pub enum CfoError {
    #[error("mesh: {0}")]
    Mesh(String),
    #[error("quadrature: unsupported {kind} rule ({requested})")]
    UnsupportedRule { kind: &'static str, requested: usize },
    #[error("linear algebra: {0}")]
    Sparse(String),
    #[error("linear algebra: pivot {index} is {value:.3e}, below the breakdown threshold {threshold:.3e}")]
    TinyPivot {
        index: usize,
        value: f64,
        threshold: f64,
    },
    #[error("linear algebra: residual {residual:.3e} exceeds the acceptance bound {bound:.3e}")]
    IllConditioned { residual: f64, bound: f64 },
    #[error("assembly: {0}")]
    Assembly(String),
    #[error("analysis: {0}")]
    Analysis(String),
    #[error("transport: time step {dt:.3e} violates the CFL bound on element {element}; largest stable step is {suggested_dt:.3e}")]
    CflViolation {
        element: usize,
        dt: f64,
        suggested_dt: f64,
    },
    #[error("transport: saturation {value:.6e} on element {element} left the admissible interval")]
    SaturationBounds { element: usize, value: f64 },
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CfoError {
    /// Failure class reported by the command-line driver (one of `mesh`,
    /// `quadrature`, `solve`, `assembly`, `analysis`, `transport`, `config`,
    /// `io`).
    pub fn class(&self) -> &'static str {
        match self {
            CfoError::Mesh(_) => "mesh",
            CfoError::UnsupportedRule { .. } => "quadrature",
            CfoError::Sparse(_) | CfoError::TinyPivot { .. } | CfoError::IllConditioned { .. } => {
                "solve"
            }
            CfoError::Assembly(_) => "assembly",
            CfoError::Analysis(_) => "analysis",
            CfoError::CflViolation { .. } | CfoError::SaturationBounds { .. } => "transport",
            CfoError::Config(_) => "config",
            CfoError::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, CfoError>;

pub(crate) mod vec2 {
    //! Small planar vector helpers shared across modules.

    use crate::Point;

    #[inline]
    pub fn dot(a: Point, b: Point) -> f64 {
        a[0] * b[0] + a[1] * b[1]
    }

    #[inline]
    pub fn sub(a: Point, b: Point) -> Point {
        [a[0] - b[0], a[1] - b[1]]
    }

    #[inline]
    pub fn add(a: Point, b: Point) -> Point {
        [a[0] + b[0], a[1] + b[1]]
    }

    #[inline]
    pub fn scale(s: f64, a: Point) -> Point {
        [s * a[0], s * a[1]]
    }

    #[inline]
    pub fn norm(a: Point) -> f64 {
        dot(a, a).sqrt()
    }

    /// Cross product z-component of planar vectors.
    #[inline]
    pub fn cross(a: Point, b: Point) -> f64 {
        a[0] * b[1] - a[1] * b[0]
    }
}
