/// Quadrature on a reference simplex, in barycentric coordinates.
///
/// Weights are positive and sum to the reference-element volume
/// (1 for the interval, 1/2 for the triangle).
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// One-point centroid rule.
    pub fn midpoint(dim: usize) -> Self {
        let k = dim + 1;
        QuadratureRule {
            points: vec![vec![1.0 / k as f64; k]],
            weights: vec![reference_volume(dim)],
        }
    }

    /// Vertex rule (nodal lumping).
    pub fn vertex(dim: usize) -> Self {
        let k = dim + 1;
        let points = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        QuadratureRule {
            points,
            weights: vec![reference_volume(dim) / k as f64; k],
        }
    }

    /// Degree-5 rule on the interval (3-point Gauss), degree-4 rule on the triangle (6 points).
    pub fn high_order(dim: usize) -> Self {
        if dim == 1 {
            let a = (0.6f64).sqrt() / 2.0;
            QuadratureRule {
                points: vec![vec![0.5 + a, 0.5 - a], vec![0.5, 0.5], vec![0.5 - a, 0.5 + a]],
                weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
            }
        } else {
            let (a, b) = (0.445_948_490_915_965, 0.108_103_018_168_070);
            let (c, d) = (0.091_576_213_509_771, 0.816_847_572_980_459);
            let (wa, wc) = (0.223_381_589_678_011 / 2.0, 0.109_951_743_655_322 / 2.0);
            QuadratureRule {
                points: vec![
                    vec![a, a, b],
                    vec![a, b, a],
                    vec![b, a, a],
                    vec![c, c, d],
                    vec![c, d, c],
                    vec![d, c, c],
                ],
                weights: vec![wa, wa, wa, wc, wc, wc],
            }
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

pub fn reference_volume(dim: usize) -> f64 {
    if dim == 1 {
        1.0
    } else {
        0.5
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]` with `m` points (Newton on P_m).
pub fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_reference_volume() {
        for dim in [1, 2] {
            for rule in [
                QuadratureRule::midpoint(dim),
                QuadratureRule::vertex(dim),
                QuadratureRule::high_order(dim),
            ] {
                assert!(rule.weights.iter().all(|&w| w > 0.0));
                let s: f64 = rule.weights.iter().sum();
                assert!((s - reference_volume(dim)).abs() < 1e-14);
                assert!(rule
                    .points
                    .iter()
                    .all(|p| (p.iter().sum::<f64>() - 1.0).abs() < 1e-14));
            }
        }
    }

    #[test]
    fn triangle_rule_integrates_quartics() {
        // ∫_T λ1^4 = 4! * 2! / 6! = 1/15 * ... on reference triangle: 2*area*4!/(6!) = 1/30
        let r = QuadratureRule::high_order(2);
        let s: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * p[0].powi(4)).sum();
        assert!((s - 1.0 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_exactness() {
        for m in [1, 2, 5, 12] {
            let (x, w) = gauss_legendre_unit(m);
            let s: f64 = w.iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
            let deg = 2 * m - 1;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "m={m}");
        }
    }
}
