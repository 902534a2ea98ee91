//! Mean values on algebras with mean value: periodic functions (cell
//! averages), almost periodic trigonometric polynomials (expanding-box
//! averages, with exact constant-term extraction when the expression is a
//! finite trigonometric polynomial) and functions converging at infinity.

use std::collections::HashMap;
use std::sync::Mutex;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{BinaryOp, Expr, Func, Scale};
use crate::fem::gauss_legendre_unit;
use crate::mesh::PeriodicMesh;

const GAUSS_POINTS: usize = 4;
/// Maximum number of box-average evaluations before giving up.
const BOX_BUDGET: f64 = 2e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeanError {
    #[error("mean value did not converge over radii {radii:?}: partial averages {trace:?}")]
    NotConverged { radii: Vec<f64>, trace: Vec<f64> },
    #[error("field depends on {0:?}, which is not the averaged scale")]
    WrongScale(Scale),
    #[error("invalid algebra specification: {0}")]
    InvalidSpec(String),
    #[error("non-finite field value at {0:?}")]
    NonFinite(Vec<f64>),
    #[error("box average needs about {0:.2e} evaluations, above the budget")]
    Budget(f64),
}

fn default_resolution() -> usize {
    64
}

fn default_radii() -> Vec<f64> {
    vec![32.0, 128.0, 512.0]
}

fn default_tol() -> f64 {
    1e-3
}

fn default_supercell() -> usize {
    8
}

/// Algebra attached to one scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgebraSpec {
    /// Continuous `(0,1)^N`-periodic functions.
    Periodic {
        /// Composite Gauss cells per axis for cell averages.
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
    /// Almost periodic functions generated by the listed angular frequencies.
    Quasiperiodic {
        frequencies: Vec<f64>,
        #[serde(default = "default_radii")]
        radii: Vec<f64>,
        #[serde(default = "default_tol")]
        tol: f64,
        /// Super-cell length (in base periods) used for corrector approximations.
        #[serde(default = "default_supercell")]
        supercell: usize,
    },
    /// Functions with a limit at infinity.
    ConvergesAtInfinity {
        #[serde(default = "default_radii")]
        radii: Vec<f64>,
        #[serde(default = "default_tol")]
        tol: f64,
    },
}

impl Default for AlgebraSpec {
    fn default() -> Self {
        AlgebraSpec::Periodic {
            resolution: default_resolution(),
        }
    }
}

impl AlgebraSpec {
    pub fn periodic() -> Self {
        Self::default()
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, AlgebraSpec::Periodic { .. })
    }

    pub fn validate(&self) -> Result<(), MeanError> {
        let check_radii = |radii: &[f64], tol: f64| {
            if radii.len() < 2 {
                return Err(MeanError::InvalidSpec("radius schedule needs at least two radii".into()));
            }
            if !radii.windows(2).all(|w| w[0] < w[1]) || radii[0] <= 0.0 {
                return Err(MeanError::InvalidSpec("radius schedule must be positive and strictly increasing".into()));
            }
            if !(tol > 0.0) {
                return Err(MeanError::InvalidSpec("tolerance must be positive".into()));
            }
            Ok(())
        };
        match self {
            AlgebraSpec::Periodic { resolution } => {
                if *resolution == 0 {
                    return Err(MeanError::InvalidSpec("resolution must be positive".into()));
                }
                Ok(())
            }
            AlgebraSpec::Quasiperiodic {
                frequencies,
                radii,
                tol,
                supercell,
            } => {
                if frequencies.is_empty() {
                    return Err(MeanError::InvalidSpec("frequency list must be nonempty".into()));
                }
                if frequencies.iter().any(|f| !f.is_finite()) {
                    return Err(MeanError::InvalidSpec("frequencies must be finite".into()));
                }
                if *supercell == 0 {
                    return Err(MeanError::InvalidSpec("supercell must be positive".into()));
                }
                check_radii(radii, *tol)
            }
            AlgebraSpec::ConvergesAtInfinity { radii, tol } => check_radii(radii, *tol),
        }
    }
}

/// How a mean value was obtained.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanMethod {
    CellQuadrature,
    TrigPolynomialConstantTerm,
    BoxAverage { radii: Vec<f64>, trace: Vec<f64> },
    LimitAtInfinity { radii: Vec<f64>, trace: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub value: f64,
    pub method: MeanMethod,
}

/// Mean value of `field`, which must depend only on the variables of `scale`.
pub fn mean_value(field: &Expr, scale: Scale, dim: usize, algebra: &AlgebraSpec) -> Result<f64, MeanError> {
    mean_value_detailed(field, scale, dim, algebra).map(|m| m.value)
}

pub fn mean_value_detailed(
    field: &Expr,
    scale: Scale,
    dim: usize,
    algebra: &AlgebraSpec,
) -> Result<MeanEstimate, MeanError> {
    for other in [Scale::X, Scale::Y, Scale::Z] {
        if other != scale && field.uses(other) {
            return Err(MeanError::WrongScale(other));
        }
    }
    algebra.validate()?;
    if let (AlgebraSpec::Quasiperiodic { .. }, Some(poly)) = (algebra, TrigPolynomial::from_expr(field, scale, dim)) {
        return Ok(MeanEstimate {
            value: poly.constant_term(),
            method: MeanMethod::TrigPolynomialConstantTerm,
        });
    }
    let eval = |p: &[f64]| match scale {
        Scale::X => field.eval(p, &[], &[]),
        Scale::Y => field.eval(&[], p, &[]),
        Scale::Z => field.eval(&[], &[], p),
    };
    mean_of_fn_detailed(&eval, dim, algebra)
}

/// Mean value of a callable on `R^dim` under `algebra` (no symbolic shortcuts).
pub fn mean_of_fn(f: &(dyn Fn(&[f64]) -> f64 + Sync), dim: usize, algebra: &AlgebraSpec) -> Result<f64, MeanError> {
    mean_of_fn_detailed(f, dim, algebra).map(|m| m.value)
}

fn mean_of_fn_detailed(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    dim: usize,
    algebra: &AlgebraSpec,
) -> Result<MeanEstimate, MeanError> {
    algebra.validate()?;
    match algebra {
        AlgebraSpec::Periodic { resolution } => Ok(MeanEstimate {
            value: box_average(f, dim, 0.0, 1.0, *resolution)?,
            method: MeanMethod::CellQuadrature,
        }),
        AlgebraSpec::Quasiperiodic {
            frequencies,
            radii,
            tol,
            ..
        } => {
            let max_freq = frequencies.iter().fold(0.0f64, |m, w| m.max(w.abs()));
            // cells per unit length: at least 4 per shortest period
            let per_unit = (4.0 * max_freq / (2.0 * std::f64::consts::PI)).ceil().max(1.0);
            let mut trace = Vec::with_capacity(radii.len());
            for &r in radii {
                let cells = (2.0 * r * per_unit).ceil();
                let evals = (cells * GAUSS_POINTS as f64).powi(dim as i32);
                if evals > BOX_BUDGET {
                    return Err(MeanError::Budget(evals));
                }
                trace.push(box_average(f, dim, -r, r, cells as usize)?);
            }
            gate(radii, &trace, *tol)?;
            Ok(MeanEstimate {
                value: *trace.last().unwrap(),
                method: MeanMethod::BoxAverage {
                    radii: radii.clone(),
                    trace,
                },
            })
        }
        AlgebraSpec::ConvergesAtInfinity { radii, tol } => {
            let s = 1.0 / (dim as f64).sqrt();
            let mut trace = Vec::with_capacity(radii.len());
            for &r in radii {
                let p = vec![r * s; dim];
                let v = f(&p);
                if !v.is_finite() {
                    return Err(MeanError::NonFinite(p));
                }
                trace.push(v);
            }
            gate(radii, &trace, *tol)?;
            Ok(MeanEstimate {
                value: *trace.last().unwrap(),
                method: MeanMethod::LimitAtInfinity {
                    radii: radii.clone(),
                    trace,
                },
            })
        }
    }
}

/// Cauchy gate on the last two entries of a trace.
fn gate(radii: &[f64], trace: &[f64], tol: f64) -> Result<(), MeanError> {
    let n = trace.len();
    let last = trace[n - 1];
    if (last - trace[n - 2]).abs() > tol * last.abs().max(1.0) {
        return Err(MeanError::NotConverged {
            radii: radii.to_vec(),
            trace: trace.to_vec(),
        });
    }
    Ok(())
}

/// Average over `[lo, hi]^dim` by composite Gauss–Legendre with `cells` cells per axis.
pub fn box_average(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    dim: usize,
    lo: f64,
    hi: f64,
    cells: usize,
) -> Result<f64, MeanError> {
    let (gx, gw) = gauss_legendre_unit(GAUSS_POINTS);
    let h = (hi - lo) / cells as f64;
    let mut nodes = Vec::with_capacity(cells * GAUSS_POINTS);
    let mut weights = Vec::with_capacity(cells * GAUSS_POINTS);
    for c in 0..cells {
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(lo + h * (c as f64 + x));
            weights.push(w / cells as f64);
        }
    }
    let mut total = 0.0;
    match dim {
        1 => {
            for (x, w) in nodes.iter().zip(&weights) {
                total += w * f(&[*x]);
            }
        }
        _ => {
            for (y, wy) in nodes.iter().zip(&weights) {
                let mut row = 0.0;
                for (x, wx) in nodes.iter().zip(&weights) {
                    row += wx * f(&[*x, *y]);
                }
                total += wy * row;
            }
        }
    }
    if !total.is_finite() {
        return Err(MeanError::NonFinite(vec![lo, hi]));
    }
    Ok(total)
}

/// Partial mean over one scale, as a cached sampler in the remaining scale.
///
/// Built from a field in `(y, z)` (with `x` frozen); `at(p)` binds the kept
/// scale to `p` and averages over the other one.
pub struct PartialMean {
    field: Expr,
    averaged: Scale,
    kept: Scale,
    dim: usize,
    algebra: AlgebraSpec,
    cache: Mutex<HashMap<Vec<u64>, f64>>,
}

impl PartialMean {
    fn new(field: &Expr, x: &[f64], averaged: Scale, kept: Scale, dim: usize, algebra: &AlgebraSpec) -> Result<Self, MeanError> {
        algebra.validate()?;
        Ok(PartialMean {
            field: field.substitute(Scale::X, x),
            averaged,
            kept,
            dim,
            algebra: algebra.clone(),
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// The mean over the averaged scale with the kept scale bound to `point`.
    pub fn at(&self, point: &[f64]) -> Result<f64, MeanError> {
        let key: Vec<u64> = point.iter().map(|v| v.to_bits()).collect();
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let frozen = self.field.substitute(self.kept, point);
        let v = match frozen.constant_value() {
            Some(c) => c,
            None => mean_value(&frozen, self.averaged, self.dim, &self.algebra)?,
        };
        self.cache.lock().unwrap().insert(key, v);
        Ok(v)
    }

    pub fn cached_points(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

/// `M_z` of a field in `(y, z)` at frozen `x`, as a sampler in `y`.
pub fn partial_mean_z(field: &Expr, x: &[f64], dim: usize, algebra_z: &AlgebraSpec) -> Result<PartialMean, MeanError> {
    PartialMean::new(field, x, Scale::Z, Scale::Y, dim, algebra_z)
}

/// `M_y` of a field in `(y, z)` at frozen `x`, as a sampler in `z`.
pub fn partial_mean_y(field: &Expr, x: &[f64], dim: usize, algebra_y: &AlgebraSpec) -> Result<PartialMean, MeanError> {
    PartialMean::new(field, x, Scale::Y, Scale::Z, dim, algebra_y)
}

/// Iterated mean `M_y[M_z[u]]` of a field in `(y, z)`.
pub fn iterated_mean(
    field: &Expr,
    x: &[f64],
    dim: usize,
    algebra_y: &AlgebraSpec,
    algebra_z: &AlgebraSpec,
) -> Result<f64, MeanError> {
    let inner = partial_mean_z(field, x, dim, algebra_z)?;
    let err: Mutex<Option<MeanError>> = Mutex::new(None);
    let f = |y: &[f64]| match inner.at(y) {
        Ok(v) => v,
        Err(e) => {
            *err.lock().unwrap() = Some(e);
            f64::NAN
        }
    };
    let m = mean_of_fn(&f, dim, algebra_y);
    if let Some(e) = err.into_inner().unwrap() {
        return Err(e);
    }
    m
}

/// Values supplied to [`discrete_cell_average`].
pub enum CellValues<'a> {
    /// One value per periodic dof (P1 interpolant).
    Nodal(&'a [f64]),
    /// One value per element (element-wise constant, e.g. quadrature-point data).
    Element(&'a [f64]),
}

/// Cell average of discrete data on a periodic mesh.
pub fn discrete_cell_average(cell: &PeriodicMesh, values: CellValues<'_>) -> f64 {
    let mesh = cell.mesh();
    let mut s = 0.0;
    match values {
        CellValues::Nodal(v) => {
            let k = (mesh.dim() + 1) as f64;
            for e in 0..mesh.n_elements() {
                let avg: f64 = mesh.element(e).iter().map(|&vert| v[cell.dof(vert)]).sum::<f64>() / k;
                s += mesh.volume(e) * avg;
            }
        }
        CellValues::Element(v) => {
            for e in 0..mesh.n_elements() {
                s += mesh.volume(e) * v[e];
            }
        }
    }
    s / cell.cell_volume()
}

/// Finite trigonometric polynomial `Σ c_k exp(i k·y)` with real frequency vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPolynomial {
    dim: usize,
    terms: Vec<(Vec<f64>, (f64, f64))>,
}

const MAX_TERMS: usize = 4096;
const FREQ_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
struct Affine {
    coeffs: Vec<f64>,
    constant: f64,
}

fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

impl TrigPolynomial {
    fn constant(dim: usize, c: f64) -> Self {
        TrigPolynomial {
            dim,
            terms: vec![(vec![0.0; dim], (c, 0.0))],
        }
    }

    fn push(&mut self, freq: Vec<f64>, c: (f64, f64)) {
        for (k, coeff) in self.terms.iter_mut() {
            if k.iter().zip(&freq).all(|(a, b)| (a - b).abs() <= FREQ_TOL * (1.0 + a.abs())) {
                coeff.0 += c.0;
                coeff.1 += c.1;
                return;
            }
        }
        self.terms.push((freq, c));
    }

    fn add(mut self, other: TrigPolynomial, sign: f64) -> Option<Self> {
        for (k, c) in other.terms {
            self.push(k, (sign * c.0, sign * c.1));
        }
        (self.terms.len() <= MAX_TERMS).then_some(self)
    }

    fn mul(&self, other: &TrigPolynomial) -> Option<Self> {
        if self.terms.len() * other.terms.len() > MAX_TERMS * 4 {
            return None;
        }
        let mut out = TrigPolynomial {
            dim: self.dim,
            terms: Vec::new(),
        };
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let k = ka.iter().zip(kb).map(|(a, b)| a + b).collect();
                out.push(k, cmul(*ca, *cb));
            }
        }
        (out.terms.len() <= MAX_TERMS).then_some(out)
    }

    fn scale(mut self, c: f64) -> Self {
        for (_, coeff) in self.terms.iter_mut() {
            coeff.0 *= c;
            coeff.1 *= c;
        }
        self
    }

    fn as_constant(&self) -> Option<f64> {
        if self.terms.iter().all(|(k, c)| k.iter().all(|v| v.abs() <= FREQ_TOL) || (c.0 == 0.0 && c.1 == 0.0)) {
            Some(self.constant_term())
        } else {
            None
        }
    }

    /// Recognizes `field` as a finite trigonometric polynomial in the variables of `scale`.
    pub fn from_expr(field: &Expr, scale: Scale, dim: usize) -> Option<TrigPolynomial> {
        Self::build(field, scale, dim)
    }

    fn build(e: &Expr, scale: Scale, dim: usize) -> Option<TrigPolynomial> {
        match e {
            Expr::Num(v) => Some(Self::constant(dim, *v)),
            Expr::Pi => Some(Self::constant(dim, std::f64::consts::PI)),
            Expr::Var(..) => None,
            Expr::Neg(a) => Some(Self::build(a, scale, dim)?.scale(-1.0)),
            Expr::Binary(op, a, b) => {
                let pa = Self::build(a, scale, dim)?;
                match op {
                    BinaryOp::Add => pa.add(Self::build(b, scale, dim)?, 1.0),
                    BinaryOp::Sub => pa.add(Self::build(b, scale, dim)?, -1.0),
                    BinaryOp::Mul => pa.mul(&Self::build(b, scale, dim)?),
                    BinaryOp::Div => {
                        let d = Self::build(b, scale, dim)?.as_constant()?;
                        (d != 0.0).then(|| pa.scale(1.0 / d))
                    }
                    BinaryOp::Pow => {
                        let p = Self::build(b, scale, dim)?.as_constant()?;
                        if p.fract() != 0.0 || !(0.0..=16.0).contains(&p) {
                            return None;
                        }
                        let mut acc = Self::constant(dim, 1.0);
                        for _ in 0..p as usize {
                            acc = acc.mul(&pa)?;
                        }
                        Some(acc)
                    }
                }
            }
            Expr::Call(f @ (Func::Sin | Func::Cos), args) => {
                let a = affine(&args[0], scale, dim)?;
                let plus = (a.constant.cos(), a.constant.sin());
                let minus = (a.constant.cos(), -a.constant.sin());
                let neg: Vec<f64> = a.coeffs.iter().map(|v| -v).collect();
                let mut p = TrigPolynomial { dim, terms: Vec::new() };
                if *f == Func::Cos {
                    p.push(a.coeffs, (0.5 * plus.0, 0.5 * plus.1));
                    p.push(neg, (0.5 * minus.0, 0.5 * minus.1));
                } else {
                    // sin t = (e^{it} - e^{-it}) / 2i
                    p.push(a.coeffs, (0.5 * plus.1, -0.5 * plus.0));
                    p.push(neg, (-0.5 * minus.1, 0.5 * minus.0));
                }
                Some(p)
            }
            Expr::Call(..) => {
                // other functions only if the argument is constant
                let v = e.constant_value()?;
                v.is_finite().then(|| Self::constant(dim, v))
            }
        }
    }

    /// Real part of the zero-frequency coefficient.
    pub fn constant_term(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(k, _)| k.iter().all(|v| v.abs() <= FREQ_TOL))
            .map(|(_, c)| c.0)
            .sum()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }
}

fn affine(e: &Expr, scale: Scale, dim: usize) -> Option<Affine> {
    let constant = |c: f64| Affine {
        coeffs: vec![0.0; dim],
        constant: c,
    };
    match e {
        Expr::Num(v) => Some(constant(*v)),
        Expr::Pi => Some(constant(std::f64::consts::PI)),
        Expr::Var(s, i) if *s == scale && *i < dim => {
            let mut a = constant(0.0);
            a.coeffs[*i] = 1.0;
            Some(a)
        }
        Expr::Var(..) => None,
        Expr::Neg(a) => {
            let a = affine(a, scale, dim)?;
            Some(Affine {
                coeffs: a.coeffs.iter().map(|v| -v).collect(),
                constant: -a.constant,
            })
        }
        Expr::Binary(op, a, b) => {
            let a = affine(a, scale, dim)?;
            let b = affine(b, scale, dim)?;
            let is_const = |x: &Affine| x.coeffs.iter().all(|v| *v == 0.0);
            let combine = |a: &Affine, b: &Affine, s: f64| Affine {
                coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + s * y).collect(),
                constant: a.constant + s * b.constant,
            };
            let scaled = |a: &Affine, c: f64| Affine {
                coeffs: a.coeffs.iter().map(|v| v * c).collect(),
                constant: a.constant * c,
            };
            match op {
                BinaryOp::Add => Some(combine(&a, &b, 1.0)),
                BinaryOp::Sub => Some(combine(&a, &b, -1.0)),
                BinaryOp::Mul if is_const(&a) => Some(scaled(&b, a.constant)),
                BinaryOp::Mul if is_const(&b) => Some(scaled(&a, b.constant)),
                BinaryOp::Div if is_const(&b) && b.constant != 0.0 => Some(scaled(&a, 1.0 / b.constant)),
                BinaryOp::Pow if is_const(&a) && is_const(&b) => Some(constant(a.constant.powf(b.constant))),
                _ => None,
            }
        }
        Expr::Call(..) => {
            let v = e.constant_value()?;
            Some(constant(v))
        }
    }
}
