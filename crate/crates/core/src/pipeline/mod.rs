//! End-to-end drivers: homogenized tensor fields, the homogenized and
//! ε-obstacle problems, convergence studies and multiscale-convergence checks.

mod coeff;
mod epsilon;
mod homogenized;
mod mscheck;
mod obstacle;
mod study;

use thiserror::Error;

pub use coeff::{CoefficientSpec, Hints, COEFF_SYMMETRY_TOL};
pub use epsilon::{resolution_check, solve_epsilon_vi, Formulation, GuardMode, ResolutionCheck};
pub use homogenized::{
    build_homogenized_field, solve_homogenized_vi, HomogenizedField, ObstacleSolution,
};
pub use mscheck::{multiscale_check, MsCheckRow, MsCheckSpec};
pub use obstacle::ObstacleSpec;
pub use study::{convergence_study, h1_bound, StudyReport, StudyRow, StudySpec};

use crate::cell::CellError;
use crate::expr::ExprError;
use crate::fem::FemError;
use crate::meanvalue::MeanError;
use crate::mesh::MeshError;
use crate::vi::ViError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Vi(#[from] ViError),
    #[error(transparent)]
    Mean(#[from] MeanError),
    #[error(transparent)]
    Cell(#[from] CellError),
    #[error(
        "resolution guard: eps={eps} gives {elements_per_period:.2} elements per period {period:.3e} (need {required})"
    )]
    Resolution {
        eps: f64,
        period: f64,
        elements_per_period: f64,
        required: f64,
    },
    #[error("study aborted at eps={eps}: {source}")]
    Study {
        eps: f64,
        source: Box<PipelineError>,
        partial: Box<StudyReport>,
    },
}

impl PipelineError {
    /// Whether the error comes from the inputs rather than a numerical failure.
    pub fn is_input_error(&self) -> bool {
        match self {
            PipelineError::Invalid(_)
            | PipelineError::Expr(_)
            | PipelineError::Mesh(_)
            | PipelineError::Resolution { .. } => true,
            PipelineError::Mean(MeanError::InvalidSpec(_) | MeanError::WrongScale(_)) => true,
            PipelineError::Cell(CellError::Budget { .. } | CellError::SeparableMismatch { .. }) => true,
            PipelineError::Study { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}
