use rayon::prelude::*;
use serde::Serialize;

use super::PipelineError;
use crate::expr::{BinaryOp, Expr, Scale};
use crate::fem::gauss_legendre_unit;
use crate::meanvalue::{iterated_mean, AlgebraSpec};

const GAUSS_POINTS: usize = 4;
const LIMIT_CELLS: usize = 64;

/// `u_ε(x) = w(x)·φ(x/ε, x/ε²)` tested against `v(x, x/ε, x/ε²)`.
#[derive(Clone, Debug)]
pub struct MsCheckSpec {
    pub w: Expr,
    pub phi: Expr,
    pub v: Expr,
    pub eps: Vec<f64>,
    /// Quadrature cells per fastest period.
    pub points_per_period: usize,
    /// Maximum number of quadrature points for one `I_ε`.
    pub budget: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MsCheckRow {
    pub eps: f64,
    pub integral: f64,
    pub limit: f64,
    pub gap: f64,
}

/// Composite Gauss rule on `[lo, hi]` with `cells` cells.
fn rule_1d(lo: f64, hi: f64, cells: usize) -> Vec<(f64, f64)> {
    let (gx, gw) = gauss_legendre_unit(GAUSS_POINTS);
    let h = (hi - lo) / cells as f64;
    (0..cells)
        .flat_map(|c| gx.iter().zip(&gw).map(move |(x, w)| (lo + h * (c as f64 + x), h * w)).collect::<Vec<_>>())
        .collect()
}

/// Tensor-product integral with a fixed summation order.
fn integrate(f: &(dyn Fn(&[f64]) -> f64 + Sync), lo: &[f64], hi: &[f64], cells: &[usize]) -> f64 {
    let rx = rule_1d(lo[0], hi[0], cells[0]);
    if lo.len() == 1 {
        let parts: Vec<f64> = rx
            .par_chunks(4096)
            .map(|chunk| chunk.iter().map(|(x, w)| w * f(&[*x])).sum())
            .collect();
        return parts.iter().sum();
    }
    let ry = rule_1d(lo[1], hi[1], cells[1]);
    let rows: Vec<f64> = ry
        .par_iter()
        .map(|(y, wy)| wy * rx.iter().map(|(x, wx)| wx * f(&[*x, *y])).sum::<f64>())
        .collect();
    rows.iter().sum()
}

/// Computes `I_ε = ∫ u_ε v(x, x/ε, x/ε²)` by fine quadrature and the limit
/// `∫ w(x) M[φ v](x) dx`, reporting `|I_ε − limit|`.
pub fn multiscale_check(
    lo: &[f64],
    hi: &[f64],
    spec: &MsCheckSpec,
    algebra_y: &AlgebraSpec,
    algebra_z: &AlgebraSpec,
) -> Result<Vec<MsCheckRow>, PipelineError> {
    let dim = lo.len();
    if spec.w.uses(Scale::Y) || spec.w.uses(Scale::Z) {
        return Err(PipelineError::Invalid("w may depend on x only".into()));
    }
    if spec.phi.uses(Scale::X) {
        return Err(PipelineError::Invalid("phi may depend on y and z only".into()));
    }
    if !algebra_y.is_periodic() || !algebra_z.is_periodic() {
        return Err(PipelineError::Invalid("multiscale check requires periodic algebras".into()));
    }
    if spec.eps.iter().any(|e| !(*e > 0.0)) {
        return Err(PipelineError::Invalid("eps values must be positive".into()));
    }
    let product = Expr::binary(BinaryOp::Mul, spec.phi.clone(), spec.v.clone());
    let uses_z = product.uses(Scale::Z);
    let uses_y = product.uses(Scale::Y);
    if (spec.points_per_period as f64) < super::epsilon::MIN_ELEMENTS_PER_PERIOD {
        return Err(PipelineError::Resolution {
            eps: spec.eps.first().copied().unwrap_or(f64::NAN),
            period: f64::NAN,
            elements_per_period: spec.points_per_period as f64,
            required: super::epsilon::MIN_ELEMENTS_PER_PERIOD,
        });
    }

    let limit_cells = vec![LIMIT_CELLS; dim];
    let limit = if product.uses(Scale::X) {
        let err = std::sync::Mutex::new(None);
        let g = |x: &[f64]| match iterated_mean(&product, x, dim, algebra_y, algebra_z) {
            Ok(m) => spec.w.eval(x, &[], &[]) * m,
            Err(e) => {
                *err.lock().unwrap() = Some(e);
                f64::NAN
            }
        };
        let v = integrate(&g, lo, hi, &limit_cells);
        if let Some(e) = err.into_inner().unwrap() {
            return Err(e.into());
        }
        v
    } else {
        let m = iterated_mean(&product, &[], dim, algebra_y, algebra_z)?;
        let w = |x: &[f64]| spec.w.eval(x, &[], &[]);
        m * integrate(&w, lo, hi, &limit_cells)
    };

    let mut rows = Vec::with_capacity(spec.eps.len());
    for &eps in &spec.eps {
        let period = if uses_z {
            eps * eps
        } else if uses_y {
            eps
        } else {
            1.0
        };
        let cells: Vec<usize> = (0..dim)
            .map(|i| ((spec.points_per_period as f64 * (hi[i] - lo[i]) / period).ceil() as usize).max(LIMIT_CELLS))
            .collect();
        let points: f64 = cells.iter().map(|c| (c * GAUSS_POINTS) as f64).product();
        if points > spec.budget {
            return Err(PipelineError::Invalid(format!(
                "eps={eps} needs {points:.3e} quadrature points, above the budget {:.3e}",
                spec.budget
            )));
        }
        let f = |x: &[f64]| {
            let y: Vec<f64> = x.iter().map(|v| v / eps).collect();
            let z: Vec<f64> = x.iter().map(|v| v / (eps * eps)).collect();
            spec.w.eval(x, &[], &[]) * spec.phi.eval(x, &y, &z) * spec.v.eval(x, &y, &z)
        };
        let integral = integrate(&f, lo, hi, &cells);
        if !integral.is_finite() {
            return Err(PipelineError::Invalid(format!("integrand is not finite at eps={eps}")));
        }
        rows.push(MsCheckRow {
            eps,
            integral,
            limit,
            gap: (integral - limit).abs(),
        });
    }
    Ok(rows)
}
