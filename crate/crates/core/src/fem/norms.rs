use super::QuadratureRule;
use crate::mesh::Mesh;

/// Comparison target for [`l2_error`].
pub enum Target<'a> {
    Nodal(&'a [f64]),
    Field(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
}

/// `‖u_h‖_{L²}` of a P1 function, integrated exactly.
pub fn l2_norm(mesh: &Mesh, u: &[f64]) -> f64 {
    let k = (mesh.dim() + 1) as f64;
    let mut s = 0.0;
    for e in 0..mesh.n_elements() {
        let el = mesh.element(e);
        let sum: f64 = el.iter().map(|&v| u[v]).sum();
        let sq: f64 = el.iter().map(|&v| u[v] * u[v]).sum();
        s += mesh.volume(e) * (sq + sum * sum) / (k * (k + 1.0));
    }
    s.sqrt()
}

/// `‖u_h − v‖_{L²}`: exact for nodal targets, degree-4/5 quadrature for fields.
pub fn l2_error(mesh: &Mesh, u: &[f64], v: Target<'_>) -> f64 {
    match v {
        Target::Nodal(w) => {
            let d: Vec<f64> = u.iter().zip(w).map(|(a, b)| a - b).collect();
            l2_norm(mesh, &d)
        }
        Target::Field(f) => {
            let rule = QuadratureRule::high_order(mesh.dim());
            let scale = if mesh.dim() == 1 { 1.0 } else { 2.0 };
            let mut s = 0.0;
            for e in 0..mesh.n_elements() {
                let el = mesh.element(e);
                for (bary, w) in rule.points.iter().zip(&rule.weights) {
                    let uh: f64 = el.iter().zip(bary).map(|(&v, b)| b * u[v]).sum();
                    let p = mesh.map_point(e, bary);
                    let d = uh - f(&p[..mesh.dim()]);
                    s += scale * w * mesh.volume(e) * d * d;
                }
            }
            s.sqrt()
        }
    }
}

/// `|u_h|_{H¹} = ‖∇u_h‖_{L²}`.
pub fn h1_seminorm(mesh: &Mesh, u: &[f64]) -> f64 {
    let mut s = 0.0;
    for e in 0..mesh.n_elements() {
        let g = mesh.gradient(e, u);
        s += mesh.volume(e) * (g[0] * g[0] + g[1] * g[1]);
    }
    s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_error_against_itself() {
        let m = Mesh::unit(2, 4).unwrap();
        let u: Vec<f64> = (0..m.n_vertices()).map(|v| (v as f64).sin()).collect();
        assert_eq!(l2_error(&m, &u, Target::Nodal(&u)), 0.0);
    }

    #[test]
    fn linear_function_seminorm() {
        let m = Mesh::unit(1, 7).unwrap();
        let u: Vec<f64> = (0..m.n_vertices()).map(|v| m.vertex(v)[0]).collect();
        assert!((h1_seminorm(&m, &u) - 1.0).abs() < 1e-14);
        // ‖x‖² = 1/3 exactly for a P1 function reproducing x
        assert!((l2_norm(&m, &u) - (1.0f64 / 3.0).sqrt()).abs() < 1e-14);
        let f = |x: &[f64]| x[0];
        assert!(l2_error(&m, &u, Target::Field(&f)) < 1e-14);
    }

    #[test]
    fn sine_interpolant_norm() {
        let m = Mesh::unit(1, 64).unwrap();
        let u: Vec<f64> = (0..m.n_vertices())
            .map(|v| (std::f64::consts::PI * m.vertex(v)[0]).sin())
            .collect();
        assert!((l2_norm(&m, &u) - 0.5f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn two_dimensional_linear_norms() {
        let m = Mesh::build(&[0.0, 0.0], &[2.0, 1.0], &[5, 3]).unwrap();
        let u: Vec<f64> = (0..m.n_vertices()).map(|v| 3.0 * m.vertex(v)[1]).collect();
        assert!((h1_seminorm(&m, &u) - 3.0 * 2f64.sqrt()).abs() < 1e-13);
        let f = |x: &[f64]| 3.0 * x[1];
        assert!(l2_error(&m, &u, Target::Field(&f)) < 1e-13);
    }
}
