use super::PipelineError;
use crate::expr::{parse, Expr, Scale};
use crate::mesh::Mesh;

const BOUNDARY_SAMPLES: usize = 257;

/// Obstacle family `ψ_ε(x) = ψ₀(x) + ε^p·g(x, x/ε)`.
#[derive(Clone, Debug)]
pub struct ObstacleSpec {
    psi0: Expr,
    g: Expr,
    /// Exponent `p` on ε in front of `g`.
    pub g_order: f64,
    unbounded: bool,
}

impl ObstacleSpec {
    pub fn new(dim: usize, psi0: &str, g: &str, g_order: f64) -> Result<Self, PipelineError> {
        let psi0 = parse(psi0, dim)?;
        let g = parse(g, dim)?;
        if psi0.uses(Scale::Y) || psi0.uses(Scale::Z) {
            return Err(PipelineError::Invalid("psi0 may depend on x only".into()));
        }
        if g.uses(Scale::Z) {
            return Err(PipelineError::Invalid("g may depend on x and y only".into()));
        }
        if !(g_order >= 1.0) {
            return Err(PipelineError::Invalid("g_order must be at least 1".into()));
        }
        Ok(ObstacleSpec {
            psi0,
            g,
            g_order,
            unbounded: false,
        })
    }

    /// No obstacle: `ψ = −∞`.
    pub fn inactive(dim: usize) -> Self {
        let mut o = Self::new(dim, "0", "0", 1.0).expect("constant obstacle");
        o.unbounded = true;
        o
    }

    pub fn is_inactive(&self) -> bool {
        self.unbounded
    }

    pub fn psi0(&self, x: &[f64]) -> f64 {
        if self.unbounded {
            return f64::NEG_INFINITY;
        }
        self.psi0.eval(x, &[], &[])
    }

    pub fn psi_eps(&self, x: &[f64], eps: f64) -> f64 {
        if self.unbounded {
            return f64::NEG_INFINITY;
        }
        let y: Vec<f64> = x.iter().map(|v| v / eps).collect();
        self.psi0(x) + eps.powf(self.g_order) * self.g.eval(x, &y, &[])
    }

    pub fn oscillates(&self) -> bool {
        self.g.uses(Scale::Y)
    }

    /// Checks `ψ₀ ≤ 0` on sampled boundary points and finiteness of `ψ₀`, `g`.
    pub fn validate(&self, lo: &[f64], hi: &[f64]) -> Result<(), PipelineError> {
        let check = |x: &[f64]| -> Result<(), PipelineError> {
            let v = self.psi0.eval_finite(x, &[], &[])?;
            if v > 0.0 {
                return Err(PipelineError::Invalid(format!(
                    "psi0 = {v} > 0 at boundary point {x:?}; the admissible set would be empty"
                )));
            }
            Ok(())
        };
        match lo.len() {
            1 => {
                check(&[lo[0]])?;
                check(&[hi[0]])?;
            }
            _ => {
                for k in 0..BOUNDARY_SAMPLES {
                    let t = k as f64 / (BOUNDARY_SAMPLES - 1) as f64;
                    let sx = lo[0] + t * (hi[0] - lo[0]);
                    let sy = lo[1] + t * (hi[1] - lo[1]);
                    for p in [[sx, lo[1]], [sx, hi[1]], [lo[0], sy], [hi[0], sy]] {
                        check(&p)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Nodal values of `ψ_ε` (or `ψ₀` when `eps` is `None`) on a mesh.
    pub fn nodal(&self, mesh: &Mesh, eps: Option<f64>) -> Vec<f64> {
        (0..mesh.n_vertices())
            .map(|v| {
                let x = mesh.vertex(v);
                match eps {
                    Some(e) => self.psi_eps(x, e),
                    None => self.psi0(x),
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{h1_seminorm, l2_norm};

    #[test]
    fn family_and_validation() {
        let o = ObstacleSpec::new(1, "-0.05", "sin(2*pi*y1)/10", 1.0).unwrap();
        assert!((o.psi_eps(&[0.125], 0.5) - (-0.05 + 0.05 * (std::f64::consts::PI / 2.0).sin())).abs() < 1e-15);
        assert!(o.validate(&[0.0], &[1.0]).is_ok());
        let bad = ObstacleSpec::new(2, "0.1 - x1", "0", 1.0).unwrap();
        assert!(bad.validate(&[0.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(ObstacleSpec::new(1, "y1", "0", 1.0).is_err());
    }

    #[test]
    fn second_order_family_converges_in_h1() {
        let o = ObstacleSpec::new(1, "-0.1", "sin(2*pi*y1)", 2.0).unwrap();
        let mut prev = f64::INFINITY;
        for k in 2..6 {
            let eps = 0.5f64.powi(k);
            let mesh = Mesh::unit(1, (64.0 / eps) as usize).unwrap();
            let d: Vec<f64> = o
                .nodal(&mesh, Some(eps))
                .iter()
                .zip(o.nodal(&mesh, None))
                .map(|(a, b)| a - b)
                .collect();
            let gap = (h1_seminorm(&mesh, &d).powi(2) + l2_norm(&mesh, &d).powi(2)).sqrt();
            assert!(gap < prev * 0.55, "gap {gap} prev {prev}");
            prev = gap;
        }
    }
}
