use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::expr::{parse, Expr, Scale};
use crate::meanvalue::AlgebraSpec;
use crate::tensor::SmallMat;

const VALIDATION_SAMPLES: usize = 1000;
const VALIDATION_SEED: u64 = 0x5eed;
/// Relative tolerance for a_ij = a_ji at sampled points.
pub const COEFF_SYMMETRY_TOL: f64 = 1e-10;

/// Structural hints that let the cell solver skip or share corrector solves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct Hints {
    pub x_independent: bool,
    pub y_independent: bool,
    pub z_independent: bool,
    /// `A(x,y,z) = s(x,y)·B(x,z)`: the micro corrector does not depend on `y`.
    pub separable: bool,
}

/// The matrix field `A(x, y, z)` with its ellipticity band and per-scale algebras.
#[derive(Clone, Debug)]
pub struct CoefficientSpec {
    dim: usize,
    entries: Vec<Expr>,
    pub alpha: f64,
    pub beta: f64,
    pub algebra_y: AlgebraSpec,
    pub algebra_z: AlgebraSpec,
    hints: Hints,
}

impl CoefficientSpec {
    /// Builds the spec from row-major entry expressions.
    pub fn new(dim: usize, entries: &[Vec<String>], alpha: f64, beta: f64) -> Result<Self, PipelineError> {
        if !(1..=2).contains(&dim) {
            return Err(PipelineError::Invalid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if entries.len() != dim || entries.iter().any(|r| r.len() != dim) {
            return Err(PipelineError::Invalid(format!("coefficient must have {dim}x{dim} entries")));
        }
        let mut parsed = Vec::with_capacity(dim * dim);
        for row in entries {
            for text in row {
                parsed.push(parse(text, dim)?);
            }
        }
        if !(alpha > 0.0 && beta >= alpha && beta.is_finite()) {
            return Err(PipelineError::Invalid(format!(
                "ellipticity bounds need 0 < alpha <= beta, got alpha={alpha}, beta={beta}"
            )));
        }
        let mut spec = CoefficientSpec {
            dim,
            entries: parsed,
            alpha,
            beta,
            algebra_y: AlgebraSpec::periodic(),
            algebra_z: AlgebraSpec::periodic(),
            hints: Hints::default(),
        };
        spec.hints = spec.detected_hints();
        Ok(spec)
    }

    /// `a(x,y,z)·I`.
    pub fn scalar(dim: usize, a: &str, alpha: f64, beta: f64) -> Result<Self, PipelineError> {
        let entries: Vec<Vec<String>> = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { a.to_string() } else { "0".to_string() }).collect())
            .collect();
        Self::new(dim, &entries, alpha, beta)
    }

    pub fn with_algebras(mut self, y: AlgebraSpec, z: AlgebraSpec) -> Self {
        self.algebra_y = y;
        self.algebra_z = z;
        self
    }

    /// Adds declared hints; independence hints are checked against the expressions.
    pub fn with_hints(mut self, declared: Hints) -> Result<Self, PipelineError> {
        let detected = self.detected_hints();
        for (name, claimed, actual) in [
            ("x_independent", declared.x_independent, detected.x_independent),
            ("y_independent", declared.y_independent, detected.y_independent),
            ("z_independent", declared.z_independent, detected.z_independent),
        ] {
            if claimed && !actual {
                return Err(PipelineError::Invalid(format!(
                    "hint {name} contradicts the coefficient expressions"
                )));
            }
        }
        self.hints = Hints {
            x_independent: detected.x_independent,
            y_independent: detected.y_independent,
            z_independent: detected.z_independent,
            separable: declared.separable || detected.separable,
        };
        Ok(self)
    }

    fn detected_hints(&self) -> Hints {
        let free_of = |s: Scale| !self.entries.iter().any(|e| e.uses(s));
        Hints {
            x_independent: free_of(Scale::X),
            y_independent: free_of(Scale::Y),
            z_independent: free_of(Scale::Z),
            separable: false,
        }
    }

    pub fn hints(&self) -> Hints {
        self.hints
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.dim + j]
    }

    pub fn uses(&self, scale: Scale) -> bool {
        self.entries.iter().any(|e| e.uses(scale))
    }

    pub fn eval(&self, x: &[f64], y: &[f64], z: &[f64]) -> SmallMat {
        SmallMat::from_fn(self.dim, |i, j| self.entry(i, j).eval(x, y, z))
    }

    /// Coefficient multiplied by a constant (ellipticity band scaled too).
    pub fn scaled(&self, c: f64) -> Result<Self, PipelineError> {
        if !(c > 0.0) {
            return Err(PipelineError::Invalid("scale factor must be positive".into()));
        }
        let mut out = self.clone();
        out.entries = self
            .entries
            .iter()
            .map(|e| Expr::binary(crate::expr::BinaryOp::Mul, Expr::num(c), e.clone()))
            .collect();
        out.alpha *= c;
        out.beta *= c;
        Ok(out)
    }

    /// Samples `A` at seeded random points (x in the box, y and z in a unit
    /// cell or a radius-`R₁` box for non-periodic algebras) and checks
    /// finiteness, symmetry and the eigenvalue band `[α, β]`.
    pub fn validate(&self, lo: &[f64], hi: &[f64]) -> Result<(), PipelineError> {
        self.algebra_y.validate()?;
        self.algebra_z.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
        let range = |alg: &AlgebraSpec| match alg {
            AlgebraSpec::Periodic { .. } => (0.0, 1.0),
            AlgebraSpec::Quasiperiodic { radii, .. } | AlgebraSpec::ConvergesAtInfinity { radii, .. } => {
                (-radii[0], radii[0])
            }
        };
        let (ylo, yhi) = range(&self.algebra_y);
        let (zlo, zhi) = range(&self.algebra_z);
        let slack = 1e-12 * self.beta;
        for _ in 0..VALIDATION_SAMPLES {
            let x: Vec<f64> = (0..self.dim).map(|i| rng.gen_range(lo[i]..=hi[i])).collect();
            let y: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(ylo..yhi)).collect();
            let z: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(zlo..zhi)).collect();
            self.check_point(&x, &y, &z, slack)?;
        }
        Ok(())
    }

    fn check_point(&self, x: &[f64], y: &[f64], z: &[f64], slack: f64) -> Result<(), PipelineError> {
        for e in &self.entries {
            e.eval_finite(x, y, z)?;
        }
        let a = self.eval(x, y, z);
        let at = format!("x={x:?}, y={y:?}, z={z:?}");
        if a.asymmetry() > COEFF_SYMMETRY_TOL {
            return Err(PipelineError::Invalid(format!(
                "coefficient is not symmetric (a_ij = a_ji fails) at {at}"
            )));
        }
        let eig = a.sym_eigenvalues();
        let (lo, hi) = (eig[0], eig[eig.len() - 1]);
        if lo < self.alpha - slack || hi > self.beta + slack {
            return Err(PipelineError::Invalid(format!(
                "coefficient eigenvalues [{lo}, {hi}] leave the band [{}, {}] at {at}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_independence() {
        let c = CoefficientSpec::scalar(1, "(2+sin(2*pi*y1))*(2+sin(2*pi*z1))", 1.0, 9.0).unwrap();
        let h = c.hints();
        assert!(h.x_independent && !h.y_independent && !h.z_independent);
        assert!(c.validate(&[0.0], &[1.0]).is_ok());
    }

    #[test]
    fn rejects_contradicting_hint() {
        let c = CoefficientSpec::scalar(1, "2+sin(2*pi*y1)", 1.0, 3.0).unwrap();
        let bad = Hints {
            y_independent: true,
            ..Hints::default()
        };
        assert!(c.with_hints(bad).is_err());
    }

    #[test]
    fn rejects_asymmetric_and_out_of_band() {
        let entries = vec![
            vec!["2".to_string(), "0.5".to_string()],
            vec!["0".to_string(), "2".to_string()],
        ];
        let c = CoefficientSpec::new(2, &entries, 1.0, 3.0).unwrap();
        assert!(c.validate(&[0.0, 0.0], &[1.0, 1.0]).is_err());
        let c = CoefficientSpec::scalar(1, "2+sin(2*pi*z1)", 1.5, 3.0).unwrap();
        let err = c.validate(&[0.0], &[1.0]).unwrap_err().to_string();
        assert!(err.contains("band"), "{err}");
        let c = CoefficientSpec::scalar(1, "1/(z1-z1)", 1.0, 3.0).unwrap();
        assert!(c.validate(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn scaling() {
        let c = CoefficientSpec::scalar(2, "1+x1", 1.0, 2.0).unwrap().scaled(3.0).unwrap();
        assert_eq!(c.eval(&[0.5, 0.0], &[], &[]), SmallMat::scaled_identity(2, 4.5));
        assert_eq!((c.alpha, c.beta), (3.0, 6.0));
    }
}
