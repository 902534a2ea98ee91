use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::homogenized::{load_vector, solve_obstacle_system};
use super::{CoefficientSpec, ObstacleSolution, ObstacleSpec, PipelineError};
use crate::expr::{Expr, Scale};
use crate::fem::{assemble_stiffness, sample_coefficients};
use crate::mesh::Mesh;
use crate::vi::ViMethod;

/// Minimum number of fine elements across the fastest oscillation period.
pub const MIN_ELEMENTS_PER_PERIOD: f64 = 8.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum GuardMode {
    #[default]
    Fail,
    Warn,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// `u ≥ ψ_ε` solved directly.
    Direct,
    /// `û = u − ψ_ε ≥ 0` solved, then `ψ_ε` added back.
    #[default]
    Shifted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResolutionCheck {
    pub period: f64,
    pub elements_per_period: f64,
    pub required: f64,
}

impl ResolutionCheck {
    pub fn passes(&self) -> bool {
        self.elements_per_period >= self.required * (1.0 - 1e-9)
    }
}

/// Elements per fastest period present in the coefficient (`ε²` if it uses
/// `z`, `ε` if it uses `y` or the obstacle oscillates); `None` if nothing oscillates.
pub fn resolution_check(coeff: &CoefficientSpec, obstacle: &ObstacleSpec, eps: f64, mesh: &Mesh) -> Option<ResolutionCheck> {
    let period = if coeff.uses(Scale::Z) {
        eps * eps
    } else if coeff.uses(Scale::Y) || obstacle.oscillates() {
        eps
    } else {
        return None;
    };
    let h = mesh.spacing().into_iter().fold(0.0, f64::max);
    Some(ResolutionCheck {
        period,
        elements_per_period: period / h,
        required: MIN_ELEMENTS_PER_PERIOD,
    })
}

/// The ε-problem with coefficient `A(x, x/ε, x/ε²)` sampled at element centroids.
#[allow(clippy::too_many_arguments)]
pub fn solve_epsilon_vi(
    coeff: &CoefficientSpec,
    eps: f64,
    f: &Expr,
    obstacle: &ObstacleSpec,
    fine_mesh: &Mesh,
    method: &ViMethod,
    formulation: Formulation,
    guard: GuardMode,
) -> Result<ObstacleSolution, PipelineError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(PipelineError::Invalid(format!("eps must be positive, got {eps}")));
    }
    let mut warnings = Vec::new();
    if let Some(check) = resolution_check(coeff, obstacle, eps, fine_mesh) {
        if !check.passes() {
            let err = PipelineError::Resolution {
                eps,
                period: check.period,
                elements_per_period: check.elements_per_period,
                required: check.required,
            };
            match guard {
                GuardMode::Fail => return Err(err),
                GuardMode::Warn => warnings.push(err.to_string()),
            }
        }
    }
    let coeffs = sample_coefficients(fine_mesh, |x| {
        let y: Vec<f64> = x.iter().map(|v| v / eps).collect();
        let z: Vec<f64> = x.iter().map(|v| v / (eps * eps)).collect();
        coeff.eval(x, &y, &z)
    })?;
    let k = assemble_stiffness(fine_mesh, &coeffs)?;
    let b = load_vector(fine_mesh, f)?;
    let psi = obstacle.nodal(fine_mesh, Some(eps));
    let mut sol = solve_obstacle_system(fine_mesh, &k, &b, &psi, method, formulation == Formulation::Shifted)?;
    sol.warnings = warnings;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::pipeline::{solve_homogenized_vi, HomogenizedField};
    use crate::tensor::SmallMat;

    #[test]
    fn formulations_agree() {
        let c = CoefficientSpec::scalar(1, "(2+sin(2*pi*y1))*(2+sin(2*pi*z1))", 1.0, 9.0).unwrap();
        let o = ObstacleSpec::new(1, "-0.05", "sin(2*pi*y1)/10", 1.0).unwrap();
        let f = parse("-4", 1).unwrap();
        let mesh = Mesh::unit(1, 1024).unwrap();
        let m = ViMethod::default();
        let d = solve_epsilon_vi(&c, 0.25, &f, &o, &mesh, &m, Formulation::Direct, GuardMode::Fail).unwrap();
        let s = solve_epsilon_vi(&c, 0.25, &f, &o, &mesh, &m, Formulation::Shifted, GuardMode::Fail).unwrap();
        assert!(d.active.iter().any(|a| *a));
        let gap = d.u.iter().zip(&s.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-9, "{gap}");
    }

    #[test]
    fn constant_coefficient_matches_homogenized() {
        let c = CoefficientSpec::scalar(1, "3", 3.0, 3.0).unwrap();
        let o = ObstacleSpec::new(1, "-0.05", "0", 1.0).unwrap();
        let f = parse("-4", 1).unwrap();
        let mesh = Mesh::unit(1, 64).unwrap();
        let m = ViMethod::default();
        let h = solve_homogenized_vi(&HomogenizedField::constant(SmallMat::diag(&[3.0])), &f, &o, &mesh, &m).unwrap();
        for eps in [0.5, 0.1, 0.01] {
            let e = solve_epsilon_vi(&c, eps, &f, &o, &mesh, &m, Formulation::Shifted, GuardMode::Fail).unwrap();
            let gap = e.u.iter().zip(&h.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(gap < 1e-12);
        }
    }

    #[test]
    fn guard() {
        let c = CoefficientSpec::scalar(1, "2+sin(2*pi*z1)", 1.0, 3.0).unwrap();
        let o = ObstacleSpec::inactive(1);
        let f = parse("1", 1).unwrap();
        let mesh = Mesh::unit(1, 64).unwrap();
        let m = ViMethod::default();
        let r = solve_epsilon_vi(&c, 0.25, &f, &o, &mesh, &m, Formulation::Direct, GuardMode::Fail);
        assert!(matches!(r, Err(PipelineError::Resolution { .. })));
        let w = solve_epsilon_vi(&c, 0.25, &f, &o, &mesh, &m, Formulation::Direct, GuardMode::Warn).unwrap();
        assert_eq!(w.warnings.len(), 1);
        let ok = Mesh::unit(1, 128).unwrap();
        assert!(resolution_check(&c, &o, 0.25, &ok).unwrap().passes());
    }
}
