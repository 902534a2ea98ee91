use rayon::prelude::*;
use serde::Serialize;

use super::{ObstacleSpec, PipelineError};
use crate::cell::{homogenized_tensor, CellOptions, CellResolutions, HomogenizedReport, HomogenizedTensor};
use crate::expr::{Expr, Scale};
use crate::fem::{apply_dirichlet, assemble_load, assemble_stiffness, lumped_mass, CsrMatrix};
use crate::mesh::Mesh;
use crate::pipeline::CoefficientSpec;
use crate::tensor::SmallMat;
use crate::vi::{kkt_report, solve, KktReport, ObstacleConstraint, ViMethod, ViSolution};

/// `A*` at the macro quadrature points (element centroids).
#[derive(Clone, Debug, Serialize)]
pub struct HomogenizedField {
    /// One tensor when `A*` does not depend on `x`, else one per macro element.
    pub tensors: Vec<HomogenizedTensor>,
    pub shared: bool,
    pub micro_solves: usize,
    pub max_energy_gap: f64,
}

impl HomogenizedField {
    pub fn constant(matrix: SmallMat) -> Self {
        HomogenizedField {
            tensors: vec![HomogenizedTensor {
                matrix,
                anchor: vec![],
                kind: crate::cell::TensorKind::Macro,
                approximation: None,
            }],
            shared: true,
            micro_solves: 0,
            max_energy_gap: 0.0,
        }
    }

    pub fn at_element(&self, e: usize) -> &HomogenizedTensor {
        if self.shared {
            &self.tensors[0]
        } else {
            &self.tensors[e]
        }
    }

    /// Symmetrized per-element coefficients for assembly.
    pub fn coefficients(&self, n_elements: usize) -> Vec<SmallMat> {
        (0..n_elements).map(|e| self.at_element(e).matrix.symmetrized()).collect()
    }
}

/// Computes `A*` on the macro mesh; a single tensor when the coefficient is `x`-independent.
pub fn build_homogenized_field(
    coeff: &CoefficientSpec,
    macro_mesh: &Mesh,
    res: &CellResolutions,
    opts: &CellOptions,
) -> Result<(HomogenizedField, Option<HomogenizedReport>), PipelineError> {
    let dim = coeff.dim();
    if coeff.hints().x_independent {
        let x = vec![0.0; dim];
        let r = homogenized_tensor(coeff, &x, res, opts)?;
        let field = HomogenizedField {
            tensors: vec![r.tensor.clone()],
            shared: true,
            micro_solves: r.micro_solves,
            max_energy_gap: r.micro_energy_gap.max(r.meso_energy_gap),
        };
        return Ok((field, Some(r)));
    }
    let reports: Result<Vec<HomogenizedReport>, _> = (0..macro_mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let c = macro_mesh.centroid(e);
            homogenized_tensor(coeff, &c[..dim], res, opts)
        })
        .collect();
    let reports = reports?;
    let field = HomogenizedField {
        tensors: reports.iter().map(|r| r.tensor.clone()).collect(),
        shared: false,
        micro_solves: reports.iter().map(|r| r.micro_solves).sum(),
        max_energy_gap: reports
            .iter()
            .map(|r| r.micro_energy_gap.max(r.meso_energy_gap))
            .fold(0.0, f64::max),
    };
    Ok((field, None))
}

/// Discrete obstacle solution on a macro or fine mesh.
#[derive(Clone, Debug)]
pub struct ObstacleSolution {
    /// Nodal values on every mesh vertex (zero on the boundary).
    pub u: Vec<f64>,
    pub active: Vec<bool>,
    /// KKT triple of the original (unshifted) interior system.
    pub kkt: KktReport,
    pub iterations: usize,
    pub vi: ViSolution,
    pub warnings: Vec<String>,
}

impl ObstacleSolution {
    /// Lumped measure of the contact set.
    pub fn active_volume(&self, mesh: &Mesh) -> f64 {
        lumped_mass(mesh)
            .iter()
            .zip(&self.active)
            .filter(|(_, a)| **a)
            .map(|(m, _)| m)
            .sum()
    }
}

pub(crate) fn load_vector(mesh: &Mesh, f: &Expr) -> Result<Vec<f64>, PipelineError> {
    if f.uses(Scale::Y) || f.uses(Scale::Z) {
        return Err(PipelineError::Invalid("load f may depend on x only".into()));
    }
    let b = assemble_load(mesh, |x| f.eval(x, &[], &[]));
    if b.iter().any(|v| !v.is_finite()) {
        return Err(PipelineError::Invalid(format!("load {f} is not finite on the mesh")));
    }
    Ok(b)
}

/// Solves `u ≥ ψ` against stiffness `k`, with zero Dirichlet data.
/// With `shift`, the interior problem is rewritten for `û = u − ψ ≥ 0`.
pub(crate) fn solve_obstacle_system(
    mesh: &Mesh,
    k: &CsrMatrix,
    b: &[f64],
    psi_nodal: &[f64],
    method: &ViMethod,
    shift: bool,
) -> Result<ObstacleSolution, PipelineError> {
    let reduced = apply_dirichlet(k, b, &mesh.boundary_vertices(), 0.0)?;
    let psi_free = reduced.restrict(psi_nodal);
    let kk = &reduced.matrix;
    let (u_free, vi) = if shift {
        // û = u − s with s = ψ on constrained dofs and 0 elsewhere
        let s: Vec<f64> = psi_free.iter().map(|p| if p.is_finite() { *p } else { 0.0 }).collect();
        let ks = kk.matvec(&s);
        let rhs: Vec<f64> = reduced.rhs.iter().zip(&ks).map(|(f, k)| f - k).collect();
        let lower: Vec<f64> = psi_free.iter().map(|p| if p.is_finite() { 0.0 } else { f64::NEG_INFINITY }).collect();
        let sol = solve(kk, &rhs, &ObstacleConstraint::new(lower)?, method)?;
        let u: Vec<f64> = sol.u.iter().zip(&s).map(|(h, p)| h + p).collect();
        (u, sol)
    } else {
        let obstacle = ObstacleConstraint::new(psi_free.clone())?;
        let sol = solve(kk, &reduced.rhs, &obstacle, method)?;
        (sol.u.clone(), sol)
    };
    let obstacle = ObstacleConstraint::new(psi_free)?;
    let kkt = kkt_report(kk, &reduced.rhs, &obstacle, &u_free);
    let mut active = vec![false; mesh.n_vertices()];
    for &i in &vi.active {
        active[reduced.free[i]] = true;
    }
    Ok(ObstacleSolution {
        u: reduced.expand(&u_free),
        active,
        kkt,
        iterations: vi.iterations,
        vi,
        warnings: Vec::new(),
    })
}

/// Homogenized obstacle problem `u₀ ≥ ψ₀` with coefficient `A*`.
pub fn solve_homogenized_vi(
    field: &HomogenizedField,
    f: &Expr,
    obstacle: &ObstacleSpec,
    macro_mesh: &Mesh,
    method: &ViMethod,
) -> Result<ObstacleSolution, PipelineError> {
    let coeffs = field.coefficients(macro_mesh.n_elements());
    let k = assemble_stiffness(macro_mesh, &coeffs)?;
    let b = load_vector(macro_mesh, f)?;
    let psi = obstacle.nodal(macro_mesh, None);
    solve_obstacle_system(macro_mesh, &k, &b, &psi, method, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn inactive_obstacle_is_poisson() {
        let mesh = Mesh::unit(1, 16).unwrap();
        let f = parse("1", 1).unwrap();
        let u = solve_homogenized_vi(
            &HomogenizedField::constant(SmallMat::identity(1)),
            &f,
            &ObstacleSpec::inactive(1),
            &mesh,
            &ViMethod::default(),
        )
        .unwrap();
        for v in 0..mesh.n_vertices() {
            let x = mesh.vertex(v)[0];
            assert!((u.u[v] - x * (1.0 - x) / 2.0).abs() < 1e-12);
        }
        assert!(u.active.iter().all(|a| !a));
    }

    #[test]
    fn zero_load_gives_zero() {
        let mesh = Mesh::unit(2, 8).unwrap();
        let u = solve_homogenized_vi(
            &HomogenizedField::constant(SmallMat::identity(2)),
            &parse("0", 2).unwrap(),
            &ObstacleSpec::new(2, "-0.3", "0", 1.0).unwrap(),
            &mesh,
            &ViMethod::default(),
        )
        .unwrap();
        assert!(u.u.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn clamped_solution_matches_fine_reference() {
        let f = parse("-8", 1).unwrap();
        let obstacle = ObstacleSpec::new(1, "-0.5", "0", 1.0).unwrap();
        let id = HomogenizedField::constant(SmallMat::identity(1));
        let coarse = Mesh::unit(1, 64).unwrap();
        let fine = Mesh::unit(1, 4096).unwrap();
        let uc = solve_homogenized_vi(&id, &f, &obstacle, &coarse, &ViMethod::default()).unwrap();
        let uf = solve_homogenized_vi(&id, &f, &obstacle, &fine, &ViMethod::default()).unwrap();
        // u'' = 8 off contact, u(0) = 0, u(a) = -0.5, u'(a) = 0  =>  a² = 1/8
        let a = (1.0f64 / 8.0).sqrt();
        let exact = |x: f64| {
            let d = x.min(1.0 - x);
            if d >= a {
                -0.5
            } else {
                4.0 * d * d - 8.0 * a * d
            }
        };
        assert!((exact(a) + 0.5).abs() < 1e-12);
        for v in 0..coarse.n_vertices() {
            let x = coarse.vertex(v)[0];
            assert!((uc.u[v] - fine.interpolate(&uf.u, &[x])).abs() < 2e-3);
            assert!((uf.u[v * 64] - exact(fine.vertex(v * 64)[0])).abs() < 1e-5);
        }
        assert!(uc.active[32]);
        assert!(!uc.active[4]);
    }
}
