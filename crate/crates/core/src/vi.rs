//! Discrete obstacle problems: minimize `½uᵀKu − fᵀu` subject to `u ≥ ψ`.
//!
//! Two independent solvers are provided, projected SOR and a primal-dual
//! active set method, so that each can cross-check the other. Both report the
//! KKT triple (feasibility, dual residual, complementarity).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{cg_solve_from, CgOptions, CsrMatrix, FemError, Preconditioner};

/// Relative gap below which a constrained node counts as in contact.
pub const ACTIVE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone)]
pub enum ViError {
    #[error("relaxation factor {0} outside (0, 2)")]
    InvalidOmega(f64),
    #[error("PDAS parameter c must be positive, got {0}")]
    InvalidPdasParameter(f64),
    #[error("obstacle entry {index} is {value}; entries must be finite or -inf")]
    InvalidObstacle { index: usize, value: f64 },
    #[error("size mismatch: matrix has {matrix} rows, got vector of length {vector}")]
    Shape { matrix: usize, vector: usize },
    #[error("matrix diagonal entry {0} is not strictly positive")]
    NonPositiveDiagonal(usize),
    #[error("{method} did not converge in {iterations} iterations (dual {dual:.3e}, complementarity {complementarity:.3e})", dual = best.kkt.dual_relative(), complementarity = best.kkt.complementarity_relative())]
    NotConverged {
        method: &'static str,
        iterations: usize,
        best: Box<ViSolution>,
    },
    #[error("active set cycling after {iterations} iterations; last two active sets have {} and {} entries", last.len(), previous.len())]
    Cycling {
        iterations: usize,
        last: Vec<usize>,
        previous: Vec<usize>,
    },
    #[error(transparent)]
    Linear(#[from] FemError),
}

/// Nodal lower bounds; `-inf` marks an unconstrained dof.
#[derive(Clone, Debug, PartialEq)]
pub struct ObstacleConstraint(Vec<f64>);

impl ObstacleConstraint {
    pub fn new(values: Vec<f64>) -> Result<Self, ViError> {
        for (index, &value) in values.iter().enumerate() {
            if value.is_nan() || value == f64::INFINITY {
                return Err(ViError::InvalidObstacle { index, value });
            }
        }
        Ok(ObstacleConstraint(values))
    }

    pub fn unconstrained(n: usize) -> Self {
        ObstacleConstraint(vec![f64::NEG_INFINITY; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_constrained(&self, i: usize) -> bool {
        self.0[i] > f64::NEG_INFINITY
    }
}

/// KKT residuals of a candidate solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `min(u − ψ)` over constrained dofs (`+inf` if none).
    pub feasibility: f64,
    /// `min(Ku − f)`; unconstrained dofs contribute `−|Ku − f|`.
    pub dual: f64,
    /// `(u − ψ)ᵀ(Ku − f)` over constrained dofs.
    pub complementarity: f64,
    /// `‖f‖₂ + ‖K‖_∞‖u‖₂`.
    pub scale: f64,
}

impl KktReport {
    fn rel(&self, v: f64) -> f64 {
        if self.scale > 0.0 {
            v / self.scale
        } else {
            v
        }
    }

    pub fn dual_relative(&self) -> f64 {
        self.rel(self.dual)
    }

    pub fn complementarity_relative(&self) -> f64 {
        self.rel(self.complementarity.abs())
    }

    pub fn satisfies(&self, tol: &ViTolerances) -> bool {
        self.feasibility >= -tol.feasibility
            && self.dual_relative() >= -tol.dual
            && self.complementarity_relative() <= tol.complementarity
    }
}

/// Evaluates the KKT triple of `u` for the obstacle problem `(K, f, ψ)`.
pub fn kkt_report(k: &CsrMatrix, f: &[f64], psi: &ObstacleConstraint, u: &[f64]) -> KktReport {
    let r = k.matvec(u);
    let mut feasibility = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut complementarity = 0.0;
    for i in 0..u.len() {
        let ri = r[i] - f[i];
        if psi.is_constrained(i) {
            let gap = u[i] - psi.0[i];
            feasibility = feasibility.min(gap);
            dual = dual.min(ri);
            complementarity += gap * ri;
        } else {
            dual = dual.min(-ri.abs());
        }
    }
    if u.is_empty() {
        dual = 0.0;
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    KktReport {
        feasibility,
        dual,
        complementarity,
        scale: norm(f) + k.norm_inf() * norm(u),
    }
}

/// Energy `½uᵀKu − fᵀu`.
pub fn energy(k: &CsrMatrix, f: &[f64], u: &[f64]) -> f64 {
    let ku = k.matvec(u);
    u.iter().zip(&ku).zip(f).map(|((ui, kui), fi)| 0.5 * ui * kui - fi * ui).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViTolerances {
    pub feasibility: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl Default for ViTolerances {
    fn default() -> Self {
        ViTolerances {
            feasibility: 0.0,
            dual: 1e-10,
            complementarity: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViSolution {
    pub u: Vec<f64>,
    pub active: Vec<usize>,
    pub iterations: usize,
    pub kkt: KktReport,
    /// Energy after each sweep (PSOR) or each active-set solve (PDAS).
    pub energy_trace: Vec<f64>,
}

fn active_indices(psi: &ObstacleConstraint, u: &[f64]) -> Vec<usize> {
    (0..u.len())
        .filter(|&i| psi.is_constrained(i) && u[i] - psi.0[i] <= ACTIVE_TOL * (1.0 + psi.0[i].abs()))
        .collect()
}

fn check_inputs(k: &CsrMatrix, f: &[f64], psi: &ObstacleConstraint) -> Result<Vec<f64>, ViError> {
    let n = k.n();
    for len in [f.len(), psi.len()] {
        if len != n {
            return Err(ViError::Shape { matrix: n, vector: len });
        }
    }
    let d = k.diagonal();
    if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
        return Err(ViError::NonPositiveDiagonal(i));
    }
    Ok(d)
}

#[derive(Clone, Copy, Debug)]
pub struct PsorOptions {
    pub omega: f64,
    pub tolerances: ViTolerances,
    pub maxit: usize,
    /// Sweeps between KKT evaluations.
    pub check_every: usize,
}

impl Default for PsorOptions {
    fn default() -> Self {
        PsorOptions {
            omega: 1.5,
            tolerances: ViTolerances::default(),
            maxit: 200_000,
            check_every: 10,
        }
    }
}

/// Projected successive over-relaxation.
pub fn solve_psor(
    k: &CsrMatrix,
    f: &[f64],
    psi: &ObstacleConstraint,
    opts: &PsorOptions,
) -> Result<ViSolution, ViError> {
    if !(opts.omega > 0.0 && opts.omega < 2.0) {
        return Err(ViError::InvalidOmega(opts.omega));
    }
    let diag = check_inputs(k, f, psi)?;
    let n = k.n();
    let mut u: Vec<f64> = psi.0.iter().map(|&p| p.max(0.0)).collect();
    let mut j = energy(k, f, &u);
    let mut trace = Vec::new();
    let check_every = opts.check_every.max(1);
    let mut sweeps = 0;
    loop {
        if sweeps % check_every == 0 {
            let kkt = kkt_report(k, f, psi, &u);
            if kkt.satisfies(&opts.tolerances) {
                return Ok(ViSolution {
                    active: active_indices(psi, &u),
                    u,
                    iterations: sweeps,
                    kkt,
                    energy_trace: trace,
                });
            }
            if sweeps >= opts.maxit {
                let best = ViSolution {
                    active: active_indices(psi, &u),
                    u,
                    iterations: sweeps,
                    kkt,
                    energy_trace: trace,
                };
                return Err(ViError::NotConverged {
                    method: "PSOR",
                    iterations: sweeps,
                    best: Box::new(best),
                });
            }
        }
        for i in 0..n {
            let (cols, vals) = k.row_slices(i);
            let s: f64 = cols.iter().zip(vals).map(|(&c, &v)| v * u[c]).sum();
            let r = s - f[i];
            let candidate = (u[i] - opts.omega * r / diag[i]).max(psi.0[i]);
            let delta = candidate - u[i];
            j += delta * r + 0.5 * diag[i] * delta * delta;
            u[i] = candidate;
        }
        trace.push(j);
        sweeps += 1;
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PdasOptions {
    pub c: f64,
    pub maxit: usize,
    pub cg: CgOptions,
}

impl Default for PdasOptions {
    fn default() -> Self {
        PdasOptions {
            c: 1.0,
            maxit: 20_000,
            cg: CgOptions {
                tol: 1e-13,
                maxit: 100_000,
                preconditioner: Preconditioner::Ic0,
                ..CgOptions::default()
            },
        }
    }
}

/// Primal-dual active set method.
///
/// The active set is `{i : λ_i + c(ψ_i − u_i) > 0}` where `λ = Ku − f` on the
/// previous active set and zero elsewhere; iteration stops when it repeats.
pub fn solve_pdas(
    k: &CsrMatrix,
    f: &[f64],
    psi: &ObstacleConstraint,
    opts: &PdasOptions,
) -> Result<ViSolution, ViError> {
    if !(opts.c > 0.0) {
        return Err(ViError::InvalidPdasParameter(opts.c));
    }
    check_inputs(k, f, psi)?;
    let n = k.n();
    // unconstrained minimizer as the starting point, with λ = 0
    let mut u = cg_solve_from(k, f, None, &opts.cg)?.x;
    let mut lambda = vec![0.0; n];
    let mut previous: Option<Vec<bool>> = None;
    let mut trace = Vec::new();
    let mut solves = 0;
    loop {
        let active: Vec<bool> = (0..n)
            .map(|i| psi.is_constrained(i) && lambda[i] + opts.c * (psi.0[i] - u[i]) > 0.0)
            .collect();
        if previous.as_ref() == Some(&active) {
            break;
        }
        if solves >= opts.maxit {
            let to_list = |a: &[bool]| (0..n).filter(|&i| a[i]).collect::<Vec<_>>();
            return Err(ViError::Cycling {
                iterations: solves,
                last: to_list(&active),
                previous: to_list(previous.as_deref().unwrap_or(&active)),
            });
        }
        let inactive: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
        for i in 0..n {
            if active[i] {
                u[i] = psi.0[i];
            }
        }
        if !inactive.is_empty() {
            let kii = k.submatrix(&inactive);
            let rhs: Vec<f64> = inactive
                .iter()
                .map(|&i| {
                    let coupling: f64 = k.row(i).filter(|(j, _)| active[*j]).map(|(j, v)| v * psi.0[j]).sum();
                    f[i] - coupling
                })
                .collect();
            let guess: Vec<f64> = inactive.iter().map(|&i| u[i]).collect();
            let sol = cg_solve_from(&kii, &rhs, Some(&guess), &opts.cg)?;
            for (p, &i) in inactive.iter().enumerate() {
                u[i] = sol.x[p];
            }
        }
        let ku = k.matvec(&u);
        for i in 0..n {
            lambda[i] = if active[i] { ku[i] - f[i] } else { 0.0 };
        }
        trace.push(energy(k, f, &u));
        solves += 1;
        previous = Some(active);
    }
    let kkt = kkt_report(k, f, psi, &u);
    let active = previous
        .map(|a| (0..n).filter(|&i| a[i]).collect())
        .unwrap_or_default();
    Ok(ViSolution {
        u,
        active,
        iterations: solves,
        kkt,
        energy_trace: trace,
    })
}

/// Solver selection with its options.
#[derive(Clone, Copy, Debug)]
pub enum ViMethod {
    Psor(PsorOptions),
    Pdas(PdasOptions),
}

impl Default for ViMethod {
    fn default() -> Self {
        ViMethod::Pdas(PdasOptions::default())
    }
}

pub fn solve(k: &CsrMatrix, f: &[f64], psi: &ObstacleConstraint, method: &ViMethod) -> Result<ViSolution, ViError> {
    match method {
        ViMethod::Psor(o) => solve_psor(k, f, psi, o),
        ViMethod::Pdas(o) => solve_pdas(k, f, psi, o),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{cg_solve, CgOptions};

    fn two_by_two() -> (CsrMatrix, Vec<f64>, ObstacleConstraint) {
        let k = CsrMatrix::from_dense(&[vec![2.0, -1.0], vec![-1.0, 2.0]]);
        (k, vec![0.0, 0.0], ObstacleConstraint::new(vec![1.0, -10.0]).unwrap())
    }

    #[test]
    fn psor_two_by_two_fixture() {
        let (k, f, psi) = two_by_two();
        let s = solve_psor(&k, &f, &psi, &PsorOptions::default()).unwrap();
        assert!((s.u[0] - 1.0).abs() < 1e-10 && (s.u[1] - 0.5).abs() < 1e-10);
        assert_eq!(s.active, vec![0]);
    }

    #[test]
    fn pdas_two_by_two_fixture() {
        let (k, f, psi) = two_by_two();
        let s = solve_pdas(&k, &f, &psi, &PdasOptions::default()).unwrap();
        assert!((s.u[0] - 1.0).abs() < 1e-10 && (s.u[1] - 0.5).abs() < 1e-10);
        assert_eq!(s.active, vec![0]);
    }

    #[test]
    fn unconstrained_matches_linear_solve() {
        let k = CsrMatrix::from_dense(&[
            vec![4.0, -1.0, 0.0],
            vec![-1.0, 4.0, -1.0],
            vec![0.0, -1.0, 4.0],
        ]);
        let f = vec![1.0, -2.0, 0.5];
        let psi = ObstacleConstraint::unconstrained(3);
        let lin = cg_solve(&k, &f, &CgOptions::default()).unwrap().x;
        for s in [
            solve_psor(&k, &f, &psi, &PsorOptions::default()).unwrap(),
            solve_pdas(&k, &f, &psi, &PdasOptions::default()).unwrap(),
        ] {
            for i in 0..3 {
                assert!((s.u[i] - lin[i]).abs() < 1e-9);
            }
            assert!(s.active.is_empty());
        }
    }

    #[test]
    fn zero_load_below_zero_obstacle() {
        let (k, _, _) = two_by_two();
        let psi = ObstacleConstraint::new(vec![-1.0, 0.0]).unwrap();
        let p = solve_psor(&k, &[0.0, 0.0], &psi, &PsorOptions::default()).unwrap();
        assert_eq!(p.u, vec![0.0, 0.0]);
        assert_eq!(p.kkt.complementarity, 0.0);
        let z = ObstacleConstraint::new(vec![0.0, 0.0]).unwrap();
        let d = solve_pdas(&k, &[0.0, 0.0], &z, &PdasOptions::default()).unwrap();
        assert_eq!(d.u, vec![0.0, 0.0]);
        assert_eq!(d.iterations, 1);
    }

    #[test]
    fn kkt_flags_violations() {
        let (k, f, psi) = two_by_two();
        let exact = [1.0, 0.5];
        let ok = kkt_report(&k, &f, &psi, &exact);
        assert!(ok.satisfies(&ViTolerances::default()));
        assert_eq!(ok.feasibility, 0.0);
        // pushing u[1] up makes its dual residual positive but breaks complementarity;
        // pulling u[0] below the obstacle breaks feasibility
        let up = kkt_report(&k, &f, &psi, &[1.0, 0.6]);
        assert!(up.complementarity_relative() > 1e-3);
        let down = kkt_report(&k, &f, &psi, &[0.9, 0.5]);
        assert!(down.feasibility < 0.0);
        let low = kkt_report(&k, &f, &psi, &[1.0, 0.4]);
        assert!(low.dual < 0.0);
        // feasible, non-optimal: (2, 0) has complementarity (2-1)*4 + 10*(-2)... evaluate directly
        let u = [2.0, 0.0];
        let r = k.matvec(&u);
        let expected = (u[0] - 1.0) * r[0] + (u[1] + 10.0) * r[1];
        let rep = kkt_report(&k, &f, &psi, &u);
        assert!((rep.complementarity - expected).abs() < 1e-15);
    }

    #[test]
    fn psor_energy_is_monotone() {
        let n = 30;
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            rows[i][i] = 2.0;
            if i > 0 {
                rows[i][i - 1] = -1.0;
                rows[i - 1][i] = -1.0;
            }
        }
        let k = CsrMatrix::from_dense(&rows);
        let f = vec![-0.05; n];
        let psi = ObstacleConstraint::new((0..n).map(|i| -0.5 - 0.01 * i as f64).collect()).unwrap();
        let s = solve_psor(&k, &f, &psi, &PsorOptions::default()).unwrap();
        assert!(s.energy_trace.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert!(!s.active.is_empty());
    }

    #[test]
    fn rejects_bad_inputs() {
        let (k, f, psi) = two_by_two();
        let bad = PsorOptions {
            omega: 2.0,
            ..Default::default()
        };
        assert!(matches!(solve_psor(&k, &f, &psi, &bad), Err(ViError::InvalidOmega(_))));
        assert!(ObstacleConstraint::new(vec![f64::NAN]).is_err());
        assert!(ObstacleConstraint::new(vec![f64::INFINITY]).is_err());
        assert!(matches!(
            solve_pdas(&k, &[0.0], &psi, &PdasOptions::default()),
            Err(ViError::Shape { .. })
        ));
    }

    #[test]
    fn psor_reports_best_iterate_on_maxit() {
        let n = 50;
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            rows[i][i] = 2.0;
            if i > 0 {
                rows[i][i - 1] = -1.0;
                rows[i - 1][i] = -1.0;
            }
        }
        let k = CsrMatrix::from_dense(&rows);
        let opts = PsorOptions {
            maxit: 5,
            check_every: 1,
            ..Default::default()
        };
        let err = solve_psor(&k, &vec![1.0; n], &ObstacleConstraint::unconstrained(n), &opts).unwrap_err();
        match err {
            ViError::NotConverged { best, iterations, .. } => {
                assert_eq!(iterations, 5);
                assert_eq!(best.u.len(), n);
            }
            other => panic!("{other:?}"),
        }
    }
}
