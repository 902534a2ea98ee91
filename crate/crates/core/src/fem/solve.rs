use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{CsrMatrix, FemError};

/// Linear system with Dirichlet dofs eliminated.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Full index of each reduced unknown, ascending.
    pub free: Vec<usize>,
    pub n_full: usize,
    pub boundary_value: f64,
}

impl ReducedSystem {
    /// Back-injects a reduced vector into the full index space.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = vec![self.boundary_value; self.n_full];
        for (k, &i) in self.free.iter().enumerate() {
            full[i] = reduced[k];
        }
        full
    }

    /// Restricts a full vector to the free dofs.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| full[i]).collect()
    }
}

/// Eliminates the `boundary` dofs of `k u = b`, imposing `u = value` there.
pub fn apply_dirichlet(k: &CsrMatrix, b: &[f64], boundary: &[usize], value: f64) -> Result<ReducedSystem, FemError> {
    let n = k.n();
    let mut fixed = vec![false; n];
    for &i in boundary {
        fixed[i] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    if free.is_empty() {
        return Err(FemError::EmptyInterior);
    }
    let matrix = k.submatrix(&free);
    let rhs = free
        .iter()
        .map(|&i| {
            let coupling: f64 = if value == 0.0 {
                0.0
            } else {
                k.row(i).filter(|(j, _)| fixed[*j]).map(|(_, v)| v * value).sum()
            };
            b[i] - coupling
        })
        .collect();
    Ok(ReducedSystem {
        matrix,
        rhs,
        free,
        n_full: n,
        boundary_value: value,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    #[default]
    None,
    Jacobi,
    /// Zero-fill incomplete Cholesky.
    Ic0,
}

#[derive(Clone, Copy, Debug)]
pub struct CgOptions {
    pub tol: f64,
    pub maxit: usize,
    pub preconditioner: Preconditioner,
    /// Treat the system as singular with constants in the kernel: the
    /// right-hand side is projected onto mean-zero vectors and iterates are
    /// re-centered periodically.
    pub project_constants: bool,
    pub recenter_every: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            tol: 1e-12,
            maxit: 20_000,
            preconditioner: Preconditioner::None,
            project_constants: false,
            recenter_every: 50,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn center(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Incomplete Cholesky factor `L` with the sparsity of the lower triangle of `K`.
#[derive(Clone, Debug)]
pub struct IncompleteCholesky {
    // strictly lower part of each row, columns ascending
    lower: Vec<(Vec<usize>, Vec<f64>)>,
    diag: Vec<f64>,
}

impl IncompleteCholesky {
    /// Factors `K + shift·diag(K)`, increasing the shift on pivot breakdown.
    pub fn new(k: &CsrMatrix) -> Result<Self, FemError> {
        let mut shift = 0.0;
        for _ in 0..12 {
            if let Some(f) = Self::try_factor(k, shift) {
                return Ok(f);
            }
            shift = if shift == 0.0 { 1e-4 } else { shift * 4.0 };
        }
        Err(FemError::PreconditionerBreakdown)
    }

    fn try_factor(k: &CsrMatrix, shift: f64) -> Option<Self> {
        let n = k.n();
        let mut lower: Vec<(Vec<usize>, Vec<f64>)> = Vec::with_capacity(n);
        let mut diag = vec![0.0; n];
        for i in 0..n {
            let mut cols = Vec::new();
            let mut vals: Vec<f64> = Vec::new();
            let mut aii = 0.0;
            for (j, v) in k.row(i) {
                if j < i {
                    cols.push(j);
                    vals.push(v);
                } else if j == i {
                    aii = v * (1.0 + shift);
                }
            }
            for p in 0..cols.len() {
                let kcol = cols[p];
                let (kc, kv) = &lower[kcol];
                // Σ_{j<k} L_ij L_kj over the shared pattern
                let mut s = 0.0;
                let (mut a, mut b) = (0, 0);
                while a < p && b < kc.len() {
                    match cols[a].cmp(&kc[b]) {
                        std::cmp::Ordering::Less => a += 1,
                        std::cmp::Ordering::Greater => b += 1,
                        std::cmp::Ordering::Equal => {
                            s += vals[a] * kv[b];
                            a += 1;
                            b += 1;
                        }
                    }
                }
                vals[p] = (vals[p] - s) / diag[kcol];
            }
            let pivot = aii - vals.iter().map(|v| v * v).sum::<f64>();
            if !(pivot > 0.0) || !pivot.is_finite() {
                return None;
            }
            diag[i] = pivot.sqrt();
            lower.push((cols, vals));
        }
        Some(IncompleteCholesky { lower, diag })
    }

    /// Solves `L Lᵀ z = r`.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.diag.len();
        let mut y = r.to_vec();
        for i in 0..n {
            let (cols, vals) = &self.lower[i];
            let s: f64 = cols.iter().zip(vals).map(|(&j, &v)| v * y[j]).sum();
            y[i] = (y[i] - s) / self.diag[i];
        }
        for i in (0..n).rev() {
            let zi = y[i] / self.diag[i];
            z[i] = zi;
            let (cols, vals) = &self.lower[i];
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] -= v * zi;
            }
        }
    }
}

enum Precond {
    Identity,
    Jacobi(Vec<f64>),
    Ic(IncompleteCholesky),
}

impl Precond {
    fn build(k: &CsrMatrix, kind: Preconditioner) -> Result<Precond, FemError> {
        Ok(match kind {
            Preconditioner::None => Precond::Identity,
            Preconditioner::Jacobi => {
                let d = k.diagonal();
                if d.iter().any(|&v| !(v > 0.0)) {
                    return Err(FemError::NonPositiveDiagonal);
                }
                Precond::Jacobi(d.iter().map(|v| 1.0 / v).collect())
            }
            Preconditioner::Ic0 => Precond::Ic(IncompleteCholesky::new(k)?),
        })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::Identity => z.copy_from_slice(r),
            Precond::Jacobi(inv) => {
                for i in 0..r.len() {
                    z[i] = inv[i] * r[i];
                }
            }
            Precond::Ic(ic) => ic.apply(r, z),
        }
    }
}

/// Conjugate gradients for SPD (or positive semidefinite, with
/// `project_constants`) systems, starting from zero.
pub fn cg_solve(k: &CsrMatrix, b: &[f64], opts: &CgOptions) -> Result<CgOutcome, FemError> {
    cg_solve_from(k, b, None, opts)
}

/// Conjugate gradients from an optional initial guess. Stops when
/// `‖b − Kx‖ ≤ tol·‖b‖`.
pub fn cg_solve_from(k: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, opts: &CgOptions) -> Result<CgOutcome, FemError> {
    let n = k.n();
    if b.len() != n {
        return Err(FemError::Shape {
            expected: n,
            got: b.len(),
        });
    }
    let mut rhs = b.to_vec();
    if opts.project_constants {
        center(&mut rhs);
    }
    let bnorm = norm(&rhs);
    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let pc = Precond::build(k, opts.preconditioner)?;
    let mut r = rhs.clone();
    if x0.is_some() {
        let kx = k.matvec(&x);
        r.iter_mut().zip(&kx).for_each(|(ri, v)| *ri -= v);
    }
    let mut z = vec![0.0; n];
    pc.apply(&r, &mut z);
    if opts.project_constants {
        center(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut kp = vec![0.0; n];
    let mut rel = norm(&r) / bnorm;
    let mut it = 0;
    while rel > opts.tol {
        if it >= opts.maxit {
            return Err(FemError::CgNotConverged {
                iterations: it,
                relative_residual: rel,
            });
        }
        k.matvec_into(&p, &mut kp);
        let pkp = dot(&p, &kp);
        if !(pkp > 0.0) {
            // exact solution reached (p = 0) or loss of definiteness
            break;
        }
        let alpha = rz / pkp;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * kp[i];
        }
        it += 1;
        if opts.project_constants && opts.recenter_every > 0 && it % opts.recenter_every == 0 {
            center(&mut x);
            center(&mut r);
        }
        rel = norm(&r) / bnorm;
        pc.apply(&r, &mut z);
        if opts.project_constants {
            center(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if opts.project_constants {
        center(&mut x);
    }
    let kx = k.matvec(&x);
    let true_res = rhs.iter().zip(&kx).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / bnorm;
    Ok(CgOutcome {
        x,
        iterations: it,
        relative_residual: true_res,
    })
}
