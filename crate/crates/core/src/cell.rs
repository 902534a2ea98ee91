//! Corrector cell problems and homogenized tensors.
//!
//! The micro problem finds periodic `χʲ` with
//! `∫_Z A∇χʲ·∇ω = −∫_Z (A e_j)·∇ω` for all periodic `ω`, giving
//! `Ã = M_z[A(I + ∇χ)]` with `(∇χ)_{ij} = ∂χʲ/∂z_i`. The meso problem is the
//! same problem on the `y` cell with `Ã` in place of `A`, giving
//! `A* = M_y[Ã(I + ∇θ)]`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::Scale;
use crate::fem::{assemble_periodic_stiffness, cg_solve, CgOptions, FemError, Preconditioner};
use crate::meanvalue::{mean_of_fn, AlgebraSpec, MeanError};
use crate::mesh::{MeshError, PeriodicMesh};
use crate::pipeline::CoefficientSpec;
use crate::tensor::SmallMat;

/// Relative symmetry tolerance for computed tensors.
pub const TENSOR_SYMMETRY_TOL: f64 = 1e-9;
/// Relative slack `δ/β` on the eigenvalue band of computed tensors.
pub const BAND_SLACK: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CellError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Mean(#[from] MeanError),
    #[error("{kind:?} tensor is not symmetric (relative asymmetry {asymmetry:.3e})")]
    Asymmetric { kind: TensorKind, asymmetry: f64 },
    #[error("{kind:?} tensor eigenvalues {eigenvalues:?} leave the band [{lo}, {hi}]")]
    Ellipticity {
        kind: TensorKind,
        eigenvalues: Vec<f64>,
        lo: f64,
        hi: f64,
    },
    #[error("{needed} micro solves exceed the budget of {budget}")]
    Budget { needed: usize, budget: usize },
    #[error("separable hint contradicted: reused corrector differs from a direct solve by {gap:.3e}")]
    SeparableMismatch { gap: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    /// `Ã(x, y)`.
    Meso,
    /// `A*(x)`.
    Macro,
}

/// Super-cell approximation data for non-periodic algebras.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Approximation {
    pub supercell: usize,
    /// Max entry change between the `L` and `L/2` super-cells.
    pub refinement_delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomogenizedTensor {
    pub matrix: SmallMat,
    pub anchor: Vec<f64>,
    pub kind: TensorKind,
    pub approximation: Option<Approximation>,
}

impl HomogenizedTensor {
    pub fn check_symmetry(&self) -> Result<(), CellError> {
        let asymmetry = self.matrix.asymmetry();
        if asymmetry > TENSOR_SYMMETRY_TOL {
            return Err(CellError::Asymmetric {
                kind: self.kind,
                asymmetry,
            });
        }
        Ok(())
    }

    /// Symmetry plus eigenvalues in `[α − δ, β + δ]`, `δ = 1e-6·β`.
    pub fn check_invariants(&self, alpha: f64, beta: f64) -> Result<(), CellError> {
        self.check_symmetry()?;
        let delta = BAND_SLACK * beta;
        let eigenvalues = self.matrix.sym_eigenvalues();
        if eigenvalues.iter().any(|&l| l < alpha - delta || l > beta + delta) {
            return Err(CellError::Ellipticity {
                kind: self.kind,
                eigenvalues,
                lo: alpha - delta,
                hi: beta + delta,
            });
        }
        Ok(())
    }
}

/// Corrector columns on the periodic dofs of a cell, with element gradients.
#[derive(Clone, Debug, Serialize)]
pub struct Corrector {
    pub subdivisions: usize,
    pub period: f64,
    /// `columns[j][dof]`, each with zero nodal mean.
    pub columns: Vec<Vec<f64>>,
    /// Per element, `grads[e].get(i, j) = ∂χʲ/∂z_i`.
    pub grads: Vec<SmallMat>,
    pub anchor: Vec<f64>,
}

impl Corrector {
    fn zero(cell: &PeriodicMesh, anchor: Vec<f64>) -> Self {
        let dim = cell.dim();
        Corrector {
            subdivisions: cell.subdivisions(),
            period: cell.period(),
            columns: vec![vec![0.0; cell.n_dofs()]; dim],
            grads: vec![SmallMat::zeros(dim); cell.mesh().n_elements()],
            anchor,
        }
    }

    /// Cell average of the gradient table; zero for periodic correctors.
    pub fn mean_gradient(&self, cell: &PeriodicMesh) -> SmallMat {
        let mesh = cell.mesh();
        let mut m = SmallMat::zeros(cell.dim());
        for (e, g) in self.grads.iter().enumerate() {
            m = m + g.scale(mesh.volume(e));
        }
        m.scale(1.0 / cell.cell_volume())
    }

    pub fn is_zero(&self) -> bool {
        self.columns.iter().flatten().all(|v| *v == 0.0)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CellOptions {
    pub cg: CgOptions,
}

impl Default for CellOptions {
    fn default() -> Self {
        CellOptions {
            cg: CgOptions {
                tol: 1e-12,
                maxit: 200_000,
                preconditioner: Preconditioner::Jacobi,
                project_constants: true,
                recenter_every: 50,
            },
        }
    }
}

/// Result of one periodic cell solve.
#[derive(Clone, Debug)]
pub struct CellSolution {
    pub corrector: Corrector,
    /// `M[A(I + ∇χ)]`.
    pub averaged: SmallMat,
    /// `M[(I + ∇χ)ᵀ A (I + ∇χ)]`.
    pub energy: SmallMat,
    pub cg_iterations: usize,
}

/// Solves the N corrector problems for element-wise coefficients on `cell`.
pub fn solve_cell(
    cell: &PeriodicMesh,
    coeffs: &[SmallMat],
    anchor: Vec<f64>,
    opts: &CellOptions,
) -> Result<CellSolution, CellError> {
    let mesh = cell.mesh();
    let dim = cell.dim();
    if coeffs.len() != mesh.n_elements() {
        return Err(FemError::Shape {
            expected: mesh.n_elements(),
            got: coeffs.len(),
        }
        .into());
    }
    if coeffs.iter().all(|a| *a == coeffs[0]) {
        crate::fem::check_coefficients(mesh, coeffs)?;
        return Ok(CellSolution {
            corrector: Corrector::zero(cell, anchor),
            averaged: coeffs[0],
            energy: coeffs[0],
            cg_iterations: 0,
        });
    }
    let k = assemble_periodic_stiffness(cell, coeffs)?;
    let mut columns = Vec::with_capacity(dim);
    let mut iterations = 0;
    for j in 0..dim {
        let mut b = vec![0.0; cell.n_dofs()];
        for e in 0..mesh.n_elements() {
            let col: Vec<f64> = (0..dim).map(|i| coeffs[e].get(i, j)).collect();
            let vol = mesh.volume(e);
            for (&v, g) in mesh.element(e).iter().zip(mesh.basis_gradients(e)) {
                let dotp: f64 = (0..dim).map(|i| col[i] * g[i]).sum();
                b[cell.dof(v)] -= vol * dotp;
            }
        }
        let out = cg_solve(&k, &b, &opts.cg)?;
        iterations += out.iterations;
        columns.push(out.x);
    }
    let vertex_columns: Vec<Vec<f64>> = columns.iter().map(|c| cell.to_vertices(c)).collect();
    let grads: Vec<SmallMat> = (0..mesh.n_elements())
        .map(|e| {
            let g: Vec<[f64; 2]> = vertex_columns.iter().map(|c| mesh.gradient(e, c)).collect();
            SmallMat::from_fn(dim, |i, j| g[j][i])
        })
        .collect();
    let id = SmallMat::identity(dim);
    let mut averaged = SmallMat::zeros(dim);
    let mut energy = SmallMat::zeros(dim);
    for (e, (a, g)) in coeffs.iter().zip(&grads).enumerate() {
        let vol = mesh.volume(e);
        let ig = id + *g;
        let aig = *a * ig;
        averaged = averaged + aig.scale(vol);
        energy = energy + (ig.transpose() * aig).scale(vol);
    }
    let inv = 1.0 / cell.cell_volume();
    Ok(CellSolution {
        corrector: Corrector {
            subdivisions: cell.subdivisions(),
            period: cell.period(),
            columns,
            grads,
            anchor,
        },
        averaged: averaged.scale(inv),
        energy: energy.scale(inv),
        cg_iterations: iterations,
    })
}

fn concat(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().chain(y).copied().collect()
}

fn centroids(cell: &PeriodicMesh) -> Vec<Vec<f64>> {
    let mesh = cell.mesh();
    (0..mesh.n_elements())
        .map(|e| mesh.centroid(e)[..mesh.dim()].to_vec())
        .collect()
}

/// Micro problem at frozen `(x, y)`: corrector `χ` and `Ã(x, y)`.
pub fn solve_micro(
    coeff: &CoefficientSpec,
    x: &[f64],
    y: &[f64],
    cell: &PeriodicMesh,
    opts: &CellOptions,
) -> Result<(CellSolution, HomogenizedTensor), CellError> {
    let samples: Vec<SmallMat> = centroids(cell).par_iter().map(|z| coeff.eval(x, y, z)).collect();
    let sol = solve_cell(cell, &samples, concat(x, y), opts)?;
    let tensor = HomogenizedTensor {
        matrix: sol.averaged,
        anchor: concat(x, y),
        kind: TensorKind::Meso,
        approximation: None,
    };
    tensor.check_symmetry()?;
    Ok((sol, tensor))
}

/// Meso problem for a sampler `y ↦ Ã(x, y)`: corrector `θ` and `A*(x)`.
pub fn solve_meso(
    atilde: &[SmallMat],
    x: &[f64],
    cell: &PeriodicMesh,
    opts: &CellOptions,
) -> Result<(CellSolution, HomogenizedTensor), CellError> {
    let sym: Vec<SmallMat> = atilde.iter().map(SmallMat::symmetrized).collect();
    let sol = solve_cell(cell, &sym, x.to_vec(), opts)?;
    let tensor = HomogenizedTensor {
        matrix: sol.averaged,
        anchor: x.to_vec(),
        kind: TensorKind::Macro,
        approximation: None,
    };
    tensor.check_symmetry()?;
    Ok((sol, tensor))
}

/// Evaluates `Ã` at the centroids of `cell` with a sampler closure.
pub fn sample_meso<F>(cell: &PeriodicMesh, sampler: F) -> Result<Vec<SmallMat>, CellError>
where
    F: Fn(&[f64]) -> Result<SmallMat, CellError> + Sync,
{
    centroids(cell).par_iter().map(|y| sampler(y)).collect()
}

/// Cell resolutions and the micro-solve budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellResolutions {
    pub n_micro: usize,
    pub n_meso: usize,
    pub budget: usize,
}

impl Default for CellResolutions {
    fn default() -> Self {
        CellResolutions {
            n_micro: 64,
            n_meso: 64,
            budget: 20_000,
        }
    }
}

/// How the meso samples were produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MicroStrategy {
    /// Coefficient independent of `z`: `χ = 0`.
    ZIndependent,
    /// One micro solve shared by every `y`.
    YIndependent,
    /// One corrector reused for every `y`, checked by a second direct solve.
    Separable,
    /// One micro solve per meso quadrature point.
    PerPoint,
    /// `z`-algebra converging at infinity: `Ã` is the limit value.
    Limit,
}

/// Everything computed for `A*(x)`.
#[derive(Clone, Debug)]
pub struct HomogenizedReport {
    pub tensor: HomogenizedTensor,
    /// `Ã` at the meso cell centroids.
    pub meso_samples: Vec<SmallMat>,
    /// Micro corrector at the first meso point (when one was computed).
    pub micro: Option<CellSolution>,
    pub meso: CellSolution,
    pub strategy: MicroStrategy,
    pub micro_solves: usize,
    /// Max over computed micro solves of `|Ã − M[(I+∇χ)ᵀA(I+∇χ)]|`.
    pub micro_energy_gap: f64,
    pub meso_energy_gap: f64,
    pub meso_cell: PeriodicMesh,
    pub micro_cell: PeriodicMesh,
}

fn cell_for(algebra: &AlgebraSpec, n: usize, dim: usize, halved: bool) -> Result<PeriodicMesh, CellError> {
    Ok(match algebra {
        AlgebraSpec::Quasiperiodic { supercell, .. } => {
            let l = if halved { (supercell / 2).max(1) } else { *supercell };
            PeriodicMesh::with_period(n * l, dim, l as f64)?
        }
        _ => PeriodicMesh::build(n, dim)?,
    })
}

fn supercell_of(algebra: &AlgebraSpec) -> Option<usize> {
    match algebra {
        AlgebraSpec::Quasiperiodic { supercell, .. } => Some(*supercell),
        _ => None,
    }
}

/// Limit at infinity of a matrix-valued function, entry by entry.
fn matrix_limit<F>(dim: usize, algebra: &AlgebraSpec, f: F) -> Result<SmallMat, CellError>
where
    F: Fn(&[f64]) -> SmallMat + Sync,
{
    let mut m = SmallMat::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            let entry = |p: &[f64]| f(p).get(i, j);
            m.set(i, j, mean_of_fn(&entry, dim, algebra)?);
        }
    }
    Ok(m)
}

/// `A*(x)` by micro solves at the meso quadrature points followed by the meso solve.
pub fn homogenized_tensor(
    coeff: &CoefficientSpec,
    x: &[f64],
    res: &CellResolutions,
    opts: &CellOptions,
) -> Result<HomogenizedReport, CellError> {
    let mut report = homogenized_on(coeff, x, res, opts, false, false)?;
    let sy = supercell_of(&coeff.algebra_y);
    let sz = supercell_of(&coeff.algebra_z).filter(|_| !coeff.hints().z_independent);
    if sy.is_some() || sz.is_some() {
        let half = homogenized_on(coeff, x, res, opts, sy.is_some(), sz.is_some())?;
        report.tensor.approximation = Some(Approximation {
            supercell: sy.or(sz).unwrap_or(1),
            refinement_delta: report.tensor.matrix.max_abs_diff(&half.tensor.matrix),
        });
    }
    report.tensor.check_invariants(coeff.alpha, coeff.beta)?;
    Ok(report)
}

fn homogenized_on(
    coeff: &CoefficientSpec,
    x: &[f64],
    res: &CellResolutions,
    opts: &CellOptions,
    half_y: bool,
    half_z: bool,
) -> Result<HomogenizedReport, CellError> {
    let dim = coeff.dim();
    let hints = coeff.hints();
    let meso_cell = cell_for(&coeff.algebra_y, res.n_meso, dim, half_y)?;
    let micro_cell = cell_for(&coeff.algebra_z, res.n_micro, dim, half_z)?;
    let ys = centroids(&meso_cell);
    let zero = vec![0.0; dim];

    let mut micro = None;
    let mut micro_solves = 0;
    let mut micro_energy_gap: f64 = 0.0;
    let (strategy, meso_samples) = if hints.z_independent || !coeff.uses(Scale::Z) {
        let s = ys.par_iter().map(|y| coeff.eval(x, y, &zero)).collect();
        (MicroStrategy::ZIndependent, s)
    } else if matches!(coeff.algebra_z, AlgebraSpec::ConvergesAtInfinity { .. }) {
        let s: Result<Vec<SmallMat>, CellError> = ys
            .par_iter()
            .map(|y| matrix_limit(dim, &coeff.algebra_z, |z| coeff.eval(x, y, z)))
            .collect();
        (MicroStrategy::Limit, s?)
    } else if hints.y_independent {
        let (sol, t) = solve_micro(coeff, x, &zero, &micro_cell, opts)?;
        micro_solves = 1;
        micro_energy_gap = sol.averaged.max_abs_diff(&sol.energy);
        micro = Some(sol);
        (MicroStrategy::YIndependent, vec![t.matrix; ys.len()])
    } else if hints.separable {
        let (sol, _) = solve_micro(coeff, x, &ys[0], &micro_cell, opts)?;
        let zs = centroids(&micro_cell);
        let mesh = micro_cell.mesh();
        let id = SmallMat::identity(dim);
        let reuse = |y: &[f64]| {
            let mut m = SmallMat::zeros(dim);
            for (e, z) in zs.iter().enumerate() {
                m = m + (coeff.eval(x, y, z) * (id + sol.corrector.grads[e])).scale(mesh.volume(e));
            }
            m.scale(1.0 / micro_cell.cell_volume())
        };
        let check_y = &ys[ys.len() / 2];
        let (direct, _) = solve_micro(coeff, x, check_y, &micro_cell, opts)?;
        let gap = reuse(check_y).max_abs_diff(&direct.averaged);
        if gap > 1e-8 * coeff.beta {
            return Err(CellError::SeparableMismatch { gap });
        }
        micro_solves = 2;
        micro_energy_gap = sol
            .averaged
            .max_abs_diff(&sol.energy)
            .max(direct.averaged.max_abs_diff(&direct.energy));
        let s = ys.par_iter().map(|y| reuse(y)).collect();
        micro = Some(sol);
        (MicroStrategy::Separable, s)
    } else {
        if ys.len() > res.budget {
            return Err(CellError::Budget {
                needed: ys.len(),
                budget: res.budget,
            });
        }
        let sols: Result<Vec<CellSolution>, CellError> = ys
            .par_iter()
            .map(|y| solve_micro(coeff, x, y, &micro_cell, opts).map(|(s, _)| s))
            .collect();
        let sols = sols?;
        micro_solves = sols.len();
        for s in &sols {
            micro_energy_gap = micro_energy_gap.max(s.averaged.max_abs_diff(&s.energy));
        }
        let samples = sols.iter().map(|s| s.averaged).collect();
        micro = sols.into_iter().next();
        (MicroStrategy::PerPoint, samples)
    };

    let (meso, tensor) = if matches!(coeff.algebra_y, AlgebraSpec::ConvergesAtInfinity { .. }) {
        // Ã along the probe ray, recomputed at each radius
        let limit = matrix_limit(dim, &coeff.algebra_y, |y| {
            meso_point(coeff, x, y, &micro_cell, strategy, opts).unwrap_or(SmallMat::scaled_identity(dim, f64::NAN))
        })?;
        let const_samples = vec![limit; meso_cell.mesh().n_elements()];
        solve_meso(&const_samples, x, &meso_cell, opts)?
    } else {
        solve_meso(&meso_samples, x, &meso_cell, opts)?
    };
    let meso_energy_gap = meso.averaged.max_abs_diff(&meso.energy);
    Ok(HomogenizedReport {
        tensor,
        meso_samples,
        micro,
        meso,
        strategy,
        micro_solves,
        micro_energy_gap,
        meso_energy_gap,
        meso_cell,
        micro_cell,
    })
}

fn meso_point(
    coeff: &CoefficientSpec,
    x: &[f64],
    y: &[f64],
    micro_cell: &PeriodicMesh,
    strategy: MicroStrategy,
    opts: &CellOptions,
) -> Result<SmallMat, CellError> {
    let dim = coeff.dim();
    match strategy {
        MicroStrategy::ZIndependent => Ok(coeff.eval(x, y, &vec![0.0; dim])),
        MicroStrategy::Limit => matrix_limit(dim, &coeff.algebra_z, |z| coeff.eval(x, y, z)),
        _ => solve_micro(coeff, x, y, micro_cell, opts).map(|(_, t)| t.matrix),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> CellOptions {
        CellOptions::default()
    }

    #[test]
    fn constant_coefficient_has_zero_corrector() {
        let cell = PeriodicMesh::build(8, 2).unwrap();
        let a = SmallMat::from_rows(&[vec![3.0, 0.5], vec![0.5, 2.0]]);
        let sol = solve_cell(&cell, &vec![a; cell.mesh().n_elements()], vec![], &opts()).unwrap();
        assert!(sol.corrector.is_zero());
        assert_eq!(sol.averaged, a);
    }

    #[test]
    fn one_dimensional_harmonic_mean() {
        let n = 64;
        let cell = PeriodicMesh::build(n, 1).unwrap();
        let a: Vec<f64> = (0..n)
            .map(|e| 2.0 + (2.0 * std::f64::consts::PI * (e as f64 + 0.5) / n as f64).sin())
            .collect();
        let coeffs: Vec<SmallMat> = a.iter().map(|v| SmallMat::diag(&[*v])).collect();
        let sol = solve_cell(&cell, &coeffs, vec![], &opts()).unwrap();
        // P1 with element-constant coefficients reproduces the discrete harmonic mean
        let harmonic = n as f64 / a.iter().map(|v| 1.0 / v).sum::<f64>();
        assert!((sol.averaged.get(0, 0) - harmonic).abs() < 1e-11);
        assert!((sol.energy.get(0, 0) - harmonic).abs() < 1e-11);
        assert!(sol.corrector.mean_gradient(&cell).get(0, 0).abs() < 1e-12);
        let mean: f64 = sol.corrector.columns[0].iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-14);
    }

    #[test]
    fn laminate_micro() {
        let c = CoefficientSpec::scalar(2, "2+sin(2*pi*z1)", 1.0, 3.0).unwrap();
        let cell = PeriodicMesh::build(32, 2).unwrap();
        let (sol, t) = solve_micro(&c, &[0.0, 0.0], &[0.0, 0.0], &cell, &opts()).unwrap();
        assert!((t.matrix.get(0, 0) - 3f64.sqrt()).abs() < 5e-3);
        assert!((t.matrix.get(1, 1) - 2.0).abs() < 1e-12);
        assert!(t.matrix.get(0, 1).abs() < 1e-10);
        assert!(sol.averaged.max_abs_diff(&sol.energy) < 1e-9);
    }

    #[test]
    fn strategies_agree_on_separable_1d() {
        let c = CoefficientSpec::scalar(1, "(2+sin(2*pi*y1))*(2+sin(2*pi*z1))", 1.0, 9.0).unwrap();
        let res = CellResolutions {
            n_micro: 32,
            n_meso: 32,
            budget: 100,
        };
        let general = homogenized_tensor(&c, &[0.0], &res, &opts()).unwrap();
        assert_eq!(general.strategy, MicroStrategy::PerPoint);
        assert_eq!(general.micro_solves, 32);
        let hinted = c
            .with_hints(crate::pipeline::Hints {
                separable: true,
                ..Default::default()
            })
            .unwrap();
        let fast = homogenized_tensor(&hinted, &[0.0], &res, &opts()).unwrap();
        assert_eq!(fast.strategy, MicroStrategy::Separable);
        assert!(fast.tensor.matrix.max_abs_diff(&general.tensor.matrix) < 1e-10);
        assert!((fast.tensor.matrix.get(0, 0) - 3.0).abs() < 2e-2);
    }

    #[test]
    fn separable_hint_is_checked() {
        let c = CoefficientSpec::scalar(1, "2+sin(2*pi*y1)*sin(2*pi*z1)", 1.0, 3.0)
            .unwrap()
            .with_hints(crate::pipeline::Hints {
                separable: true,
                ..Default::default()
            })
            .unwrap();
        let res = CellResolutions {
            n_micro: 16,
            n_meso: 16,
            budget: 100,
        };
        assert!(matches!(
            homogenized_tensor(&c, &[0.0], &res, &opts()),
            Err(CellError::SeparableMismatch { .. })
        ));
    }

    #[test]
    fn budget_is_enforced() {
        let c = CoefficientSpec::scalar(1, "2+sin(2*pi*y1)*sin(2*pi*z1)", 1.0, 3.0).unwrap();
        let res = CellResolutions {
            n_micro: 8,
            n_meso: 16,
            budget: 10,
        };
        assert!(matches!(
            homogenized_tensor(&c, &[0.0], &res, &opts()),
            Err(CellError::Budget { needed: 16, budget: 10 })
        ));
    }

    #[test]
    fn converging_at_infinity_uses_limit() {
        let c = CoefficientSpec::scalar(1, "2 + 1/(1+z1*z1)", 2.0, 3.0)
            .unwrap()
            .with_algebras(
                AlgebraSpec::periodic(),
                AlgebraSpec::ConvergesAtInfinity {
                    radii: vec![1e3, 1e5, 1e7],
                    tol: 1e-6,
                },
            );
        let res = CellResolutions {
            n_micro: 8,
            n_meso: 8,
            budget: 100,
        };
        let r = homogenized_tensor(&c, &[0.0], &res, &opts()).unwrap();
        assert_eq!(r.strategy, MicroStrategy::Limit);
        assert!((r.tensor.matrix.get(0, 0) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn quasiperiodic_is_labelled_approximate() {
        let two_pi = 2.0 * std::f64::consts::PI;
        let c = CoefficientSpec::scalar(1, "3 + sin(2*pi*z1) + sin(2*sqrt(2)*pi*z1)", 1.0, 5.0)
            .unwrap()
            .with_algebras(
                AlgebraSpec::periodic(),
                AlgebraSpec::Quasiperiodic {
                    frequencies: vec![two_pi, two_pi * 2f64.sqrt()],
                    radii: vec![32.0, 128.0, 512.0],
                    tol: 1e-3,
                    supercell: 8,
                },
            );
        let res = CellResolutions {
            n_micro: 32,
            n_meso: 4,
            budget: 100,
        };
        let r = homogenized_tensor(&c, &[0.0], &res, &opts()).unwrap();
        let approx = r.tensor.approximation.clone().unwrap();
        assert_eq!(approx.supercell, 8);
        assert!(approx.refinement_delta < 0.1);
        // 1D: the super-cell tensor is the harmonic mean over [0, L)
        let oracle = {
            let m = 200_000;
            let s: f64 = (0..m)
                .map(|k| {
                    let z = 8.0 * (k as f64 + 0.5) / m as f64;
                    1.0 / (3.0 + (two_pi * z).sin() + (two_pi * 2f64.sqrt() * z).sin())
                })
                .sum();
            m as f64 / s
        };
        assert!((r.tensor.matrix.get(0, 0) - oracle).abs() < 1e-3);
    }
}
