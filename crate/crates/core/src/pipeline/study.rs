use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::epsilon::{resolution_check, solve_epsilon_vi, Formulation, GuardMode};
use super::homogenized::{build_homogenized_field, load_vector, solve_homogenized_vi, HomogenizedField};
use super::{CoefficientSpec, ObstacleSolution, ObstacleSpec, PipelineError};
use crate::cell::{CellOptions, CellResolutions};
use crate::expr::{Expr, Scale};
use crate::fem::{
    assemble_mass, cg_solve, h1_seminorm, l2_error, l2_norm, CgOptions, Preconditioner, Target,
};
use crate::mesh::Mesh;
use crate::vi::{KktReport, ViMethod};

/// Parameters of a `u_ε → u₀` convergence study.
#[derive(Clone, Debug)]
pub struct StudySpec {
    /// Strictly decreasing.
    pub eps: Vec<f64>,
    /// Fine elements per fastest period.
    pub points_per_period: usize,
    pub min_subdivisions: usize,
    /// Explicit fine subdivisions per ε (overrides the rule).
    pub fine_subdivisions: Option<Vec<usize>>,
    pub macro_subdivisions: usize,
    pub guard: GuardMode,
    pub formulation: Formulation,
    /// Compare direct and shifted formulations at the coarsest ε.
    pub check_formulations: bool,
    /// Record wall times (otherwise the `seconds` column is zero).
    pub timing: bool,
    pub cell: CellResolutions,
}

impl Default for StudySpec {
    fn default() -> Self {
        StudySpec {
            eps: vec![0.25, 0.125, 0.0625],
            points_per_period: 16,
            min_subdivisions: 64,
            fine_subdivisions: None,
            macro_subdivisions: 256,
            guard: GuardMode::Fail,
            formulation: Formulation::Shifted,
            check_formulations: true,
            timing: false,
            cell: CellResolutions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyRow {
    pub eps: f64,
    pub h: f64,
    pub subdivisions: usize,
    pub l2_error: f64,
    pub h1_seminorm: f64,
    pub h1_bound: f64,
    pub active_volume_eps: f64,
    pub active_volume_hom: f64,
    pub iters: usize,
    pub seconds: f64,
    pub kkt: KktReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    pub homogenized: HomogenizedField,
    pub u0_kkt: Option<KktReport>,
    pub u0_min_gap: Option<f64>,
    /// `‖u_ε − u₀‖` strictly decreasing in ε.
    pub strictly_decreasing: bool,
    /// Errors below this level count as roundoff: `1e-10·‖u₀‖_{L²}`.
    pub error_floor: f64,
    /// Every step decreases or lands below `error_floor`.
    pub decreasing_to_floor: bool,
    /// Last over first error.
    pub final_ratio: f64,
    /// Every `|u_ε|_{H¹}` below its bound.
    pub bounded: bool,
    /// Max nodal gap between the two formulations at the coarsest ε.
    pub formulation_gap: Option<f64>,
    pub warnings: Vec<String>,
}

impl StudyReport {
    fn new(homogenized: HomogenizedField) -> Self {
        StudyReport {
            rows: Vec::new(),
            homogenized,
            u0_kkt: None,
            u0_min_gap: None,
            strictly_decreasing: false,
            error_floor: 0.0,
            decreasing_to_floor: false,
            final_ratio: f64::NAN,
            bounded: false,
            formulation_gap: None,
            warnings: Vec::new(),
        }
    }

    fn summarize(&mut self) {
        let errs: Vec<f64> = self.rows.iter().map(|r| r.l2_error).collect();
        self.strictly_decreasing = errs.windows(2).all(|w| w[1] < w[0]);
        let floor = self.error_floor;
        self.decreasing_to_floor = !errs.is_empty() && errs.windows(2).all(|w| w[1] < w[0] || w[1] <= floor);
        self.final_ratio = match (errs.first(), errs.last()) {
            (Some(a), Some(b)) if *a > 0.0 => b / a,
            _ => f64::NAN,
        };
        self.bounded = self.rows.iter().all(|r| r.h1_seminorm <= r.h1_bound);
    }
}

/// The explicit bound `√(2K/α)` on `|u_h|_{H¹}` for the discrete obstacle
/// problem on `mesh`, with `K = C₁‖f‖ + C₂²‖f‖²/α + C²/α`,
/// `C₁ = ‖ψ⁺‖`, `C = β|ψ⁺|_{H¹}`, `C₂` the Poincaré constant of the box and
/// `‖f‖` the dual norm of the load vector against P1 functions.
pub fn h1_bound(mesh: &Mesh, load: &[f64], psi: &[f64], alpha: f64, beta: f64) -> Result<f64, PipelineError> {
    let free: Vec<usize> = (0..mesh.n_vertices()).filter(|&v| !mesh.is_boundary(v)).collect();
    let m = assemble_mass(mesh).submatrix(&free);
    let b: Vec<f64> = free.iter().map(|&v| load[v]).collect();
    let opts = CgOptions {
        tol: 1e-12,
        maxit: 10_000,
        preconditioner: Preconditioner::Jacobi,
        ..CgOptions::default()
    };
    let w = cg_solve(&m, &b, &opts)?.x;
    let f_norm = b.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>().max(0.0).sqrt();
    let psi_plus: Vec<f64> = psi.iter().map(|v| v.max(0.0)).collect();
    let c1 = l2_norm(mesh, &psi_plus);
    let c = beta * h1_seminorm(mesh, &psi_plus);
    let inv_sq: f64 = (0..mesh.dim()).map(|i| (mesh.hi()[i] - mesh.lo()[i]).powi(-2)).sum();
    let c2 = 1.0 / (std::f64::consts::PI * inv_sq.sqrt());
    let k = c1 * f_norm + c2 * c2 * f_norm * f_norm / alpha + c * c / alpha;
    Ok((2.0 * k / alpha).sqrt())
}

fn fine_subdivisions(spec: &StudySpec, coeff: &CoefficientSpec, obstacle: &ObstacleSpec, idx: usize, lo: &[f64], hi: &[f64]) -> Vec<usize> {
    if let Some(n) = &spec.fine_subdivisions {
        return vec![n[idx]; lo.len()];
    }
    let eps = spec.eps[idx];
    let period = if coeff.uses(Scale::Z) {
        eps * eps
    } else if coeff.uses(Scale::Y) || obstacle.oscillates() {
        eps
    } else {
        1.0
    };
    (0..lo.len())
        .map(|i| {
            let n = (spec.points_per_period as f64 * (hi[i] - lo[i]) / period - 1e-9).ceil() as usize;
            n.max(spec.min_subdivisions)
        })
        .collect()
}

/// Solves `u₀` once and `u_ε` for every ε, and measures `‖u_ε − u₀‖_{L²}`.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    coeff: &CoefficientSpec,
    f: &Expr,
    obstacle: &ObstacleSpec,
    lo: &[f64],
    hi: &[f64],
    method: &ViMethod,
    spec: &StudySpec,
    cell_opts: &CellOptions,
) -> Result<StudyReport, PipelineError> {
    if spec.eps.is_empty() || !spec.eps.windows(2).all(|w| w[1] < w[0]) || spec.eps.iter().any(|e| !(*e > 0.0)) {
        return Err(PipelineError::Invalid("eps list must be positive and strictly decreasing".into()));
    }
    if let Some(n) = &spec.fine_subdivisions {
        if n.len() != spec.eps.len() {
            return Err(PipelineError::Invalid("fine_subdivisions needs one entry per eps".into()));
        }
    }
    coeff.validate(lo, hi)?;
    obstacle.validate(lo, hi)?;
    let dim = coeff.dim();
    let meshes: Vec<Mesh> = (0..spec.eps.len())
        .map(|i| Mesh::build(lo, hi, &fine_subdivisions(spec, coeff, obstacle, i, lo, hi)))
        .collect::<Result<_, _>>()?;
    // reject under-resolved meshes before any expensive work
    let mut warnings = Vec::new();
    for (eps, mesh) in spec.eps.iter().zip(&meshes) {
        if let Some(check) = resolution_check(coeff, obstacle, *eps, mesh) {
            if !check.passes() {
                let err = PipelineError::Resolution {
                    eps: *eps,
                    period: check.period,
                    elements_per_period: check.elements_per_period,
                    required: check.required,
                };
                match spec.guard {
                    GuardMode::Fail => return Err(err),
                    GuardMode::Warn => warnings.push(err.to_string()),
                }
            }
        }
    }

    let macro_mesh = Mesh::build(lo, hi, &vec![spec.macro_subdivisions; dim])?;
    let (field, _) = build_homogenized_field(coeff, &macro_mesh, &spec.cell, cell_opts)?;
    let mut report = StudyReport::new(field);
    report.warnings = warnings;
    let u0 = solve_homogenized_vi(&report.homogenized, f, obstacle, &macro_mesh, method)?;
    let psi0 = obstacle.nodal(&macro_mesh, None);
    report.u0_kkt = Some(u0.kkt);
    report.u0_min_gap = Some(u0.u.iter().zip(&psi0).map(|(u, p)| u - p).fold(f64::INFINITY, f64::min));
    let active_volume_hom = u0.active_volume(&macro_mesh);
    report.error_floor = 1e-10 * l2_norm(&macro_mesh, &u0.u).max(1e-4);

    let results: Vec<Result<StudyRow, PipelineError>> = spec
        .eps
        .par_iter()
        .zip(meshes.par_iter())
        .map(|(&eps, mesh)| {
            let start = Instant::now();
            let sol: ObstacleSolution =
                solve_epsilon_vi(coeff, eps, f, obstacle, mesh, method, spec.formulation, GuardMode::Warn)?;
            let seconds = if spec.timing { start.elapsed().as_secs_f64() } else { 0.0 };
            let u0_fine: Vec<f64> = (0..mesh.n_vertices())
                .map(|v| macro_mesh.interpolate(&u0.u, mesh.vertex(v)))
                .collect();
            let load = load_vector(mesh, f)?;
            let psi = obstacle.nodal(mesh, Some(eps));
            Ok(StudyRow {
                eps,
                h: mesh.spacing().into_iter().fold(0.0, f64::max),
                subdivisions: mesh.subdivisions()[0],
                l2_error: l2_error(mesh, &sol.u, Target::Nodal(&u0_fine)),
                h1_seminorm: h1_seminorm(mesh, &sol.u),
                h1_bound: h1_bound(mesh, &load, &psi, coeff.alpha, coeff.beta)?,
                active_volume_eps: sol.active_volume(mesh),
                active_volume_hom,
                iters: sol.iterations,
                seconds,
                kkt: sol.kkt,
            })
        })
        .collect();
    for (eps, r) in spec.eps.iter().zip(results) {
        match r {
            Ok(row) => report.rows.push(row),
            Err(e) => {
                report.summarize();
                return Err(PipelineError::Study {
                    eps: *eps,
                    source: Box::new(e),
                    partial: Box::new(report),
                });
            }
        }
    }
    if spec.check_formulations {
        let (eps, mesh) = (spec.eps[0], &meshes[0]);
        let run = |form| solve_epsilon_vi(coeff, eps, f, obstacle, mesh, method, form, GuardMode::Warn);
        let (d, s) = rayon::join(|| run(Formulation::Direct), || run(Formulation::Shifted));
        let (d, s) = (d?, s?);
        report.formulation_gap = Some(d.u.iter().zip(&s.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    report.summarize();
    Ok(report)
}
