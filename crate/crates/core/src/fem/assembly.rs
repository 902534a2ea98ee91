use rayon::prelude::*;

use super::{CsrMatrix, FemError};
use crate::mesh::{Mesh, PeriodicMesh};
use crate::tensor::SmallMat;

/// Relative tolerance for the a_ij = a_ji check on sampled coefficients.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Samples a matrix coefficient at element centroids (midpoint rule) and
/// checks symmetry and finiteness of each sample.
pub fn sample_coefficients<F>(mesh: &Mesh, coeff: F) -> Result<Vec<SmallMat>, FemError>
where
    F: Fn(&[f64]) -> SmallMat + Sync,
{
    let samples: Vec<SmallMat> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let c = mesh.centroid(e);
            coeff(&c[..mesh.dim()])
        })
        .collect();
    check_coefficients(mesh, &samples)?;
    Ok(samples)
}

pub fn check_coefficients(mesh: &Mesh, samples: &[SmallMat]) -> Result<(), FemError> {
    if samples.len() != mesh.n_elements() {
        return Err(FemError::Shape {
            expected: mesh.n_elements(),
            got: samples.len(),
        });
    }
    for (e, a) in samples.iter().enumerate() {
        if a.dim() != mesh.dim() {
            return Err(FemError::Shape {
                expected: mesh.dim(),
                got: a.dim(),
            });
        }
        if !a.rows().iter().flatten().all(|v| v.is_finite()) {
            return Err(FemError::NonFiniteCoefficient { element: e });
        }
        let asym = a.asymmetry();
        if asym > SYMMETRY_TOL {
            return Err(FemError::Asymmetric {
                element: e,
                asymmetry: asym,
            });
        }
    }
    Ok(())
}

fn local_stiffness(mesh: &Mesh, e: usize, a: &SmallMat) -> [[f64; 3]; 3] {
    let g = mesh.basis_gradients(e);
    let vol = mesh.volume(e);
    let mut k = [[0.0; 3]; 3];
    for (p, gp) in g.iter().enumerate() {
        for (q, gq) in g.iter().enumerate() {
            let agq = a.apply(gq);
            k[p][q] = vol * (0..mesh.dim()).map(|i| gp[i] * agq[i]).sum::<f64>();
        }
    }
    k
}

fn assemble_with_dofs(mesh: &Mesh, dofs: Option<&[usize]>, n_dofs: usize, coeffs: &[SmallMat]) -> CsrMatrix {
    let locals: Vec<[[f64; 3]; 3]> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| local_stiffness(mesh, e, &coeffs[e]))
        .collect();
    let k = mesh.dim() + 1;
    let mut triplets = Vec::with_capacity(mesh.n_elements() * k * k);
    for (e, local) in locals.iter().enumerate() {
        let el = mesh.element(e);
        for p in 0..k {
            for q in 0..k {
                let (r, c) = match dofs {
                    Some(map) => (map[el[p]], map[el[q]]),
                    None => (el[p], el[q]),
                };
                triplets.push((r, c, local[p][q]));
            }
        }
    }
    CsrMatrix::from_triplets(n_dofs, triplets)
}

/// Stiffness matrix of `∫ A ∇u·∇v` on all mesh vertices (no boundary conditions).
pub fn assemble_stiffness(mesh: &Mesh, coeffs: &[SmallMat]) -> Result<CsrMatrix, FemError> {
    check_coefficients(mesh, coeffs)?;
    Ok(assemble_with_dofs(mesh, None, mesh.n_vertices(), coeffs))
}

/// Stiffness matrix on the periodic dofs of a cell mesh.
pub fn assemble_periodic_stiffness(cell: &PeriodicMesh, coeffs: &[SmallMat]) -> Result<CsrMatrix, FemError> {
    check_coefficients(cell.mesh(), coeffs)?;
    Ok(assemble_with_dofs(
        cell.mesh(),
        Some(cell.dof_map()),
        cell.n_dofs(),
        coeffs,
    ))
}

/// Consistent P1 mass matrix.
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    let k = mesh.dim() + 1;
    let mut triplets = Vec::with_capacity(mesh.n_elements() * k * k);
    let denom = ((k) * (k + 1)) as f64;
    for e in 0..mesh.n_elements() {
        let vol = mesh.volume(e);
        let el = mesh.element(e);
        for p in 0..k {
            for q in 0..k {
                let factor = if p == q { 2.0 } else { 1.0 };
                triplets.push((el[p], el[q], vol * factor / denom));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.n_vertices(), triplets)
}

/// Load vector `∫ f φ_i` with the vertex quadrature rule: each element
/// contributes `|e| / (N+1) · f(v)` to each of its vertices `v`.
pub fn assemble_load<F>(mesh: &Mesh, f: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let values: Vec<f64> = (0..mesh.n_vertices())
        .into_par_iter()
        .map(|v| f(mesh.vertex(v)))
        .collect();
    assemble_load_nodal(mesh, &values)
}

/// Vertex-rule load for a field already sampled at the vertices.
pub fn assemble_load_nodal(mesh: &Mesh, values: &[f64]) -> Vec<f64> {
    let k = (mesh.dim() + 1) as f64;
    let mut b = vec![0.0; mesh.n_vertices()];
    for e in 0..mesh.n_elements() {
        let w = mesh.volume(e) / k;
        for &v in mesh.element(e) {
            b[v] += w * values[v];
        }
    }
    b
}

/// Lumped mass: the vertex-rule weight of each vertex.
pub fn lumped_mass(mesh: &Mesh) -> Vec<f64> {
    assemble_load_nodal(mesh, &vec![1.0; mesh.n_vertices()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_stiffness_pattern() {
        let m = Mesh::unit(1, 2).unwrap();
        let k = assemble_stiffness(&m, &[SmallMat::identity(1); 2]).unwrap();
        let h = 0.5;
        assert_eq!(k.get(0, 0), 1.0 / h);
        assert_eq!(k.get(1, 1), 2.0 / h);
        assert_eq!(k.get(0, 1), -1.0 / h);
        let k1 = k.matvec(&[1.0; 3]);
        assert!(k1.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn reference_triangle_entries() {
        // one grid square split into two triangles: hand-assembled P1 Laplacian
        let m = Mesh::unit(2, 1).unwrap();
        let k = assemble_stiffness(&m, &[SmallMat::identity(2); 2]).unwrap();
        // vertices 0=(0,0) 1=(1,0) 2=(0,1) 3=(1,1); diagonal 0-3
        let expected = [
            [1.0, -0.5, -0.5, 0.0],
            [-0.5, 1.0, 0.0, -0.5],
            [-0.5, 0.0, 1.0, -0.5],
            [0.0, -0.5, -0.5, 1.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((k.get(i, j) - expected[i][j]).abs() < 1e-15, "({i},{j})");
            }
        }
    }

    #[test]
    fn stiffness_is_linear_in_coefficient() {
        let m = Mesh::unit(2, 3).unwrap();
        let k1 = assemble_stiffness(&m, &vec![SmallMat::identity(2); m.n_elements()]).unwrap();
        let k3 = assemble_stiffness(&m, &vec![SmallMat::scaled_identity(2, 3.0); m.n_elements()]).unwrap();
        let d = k3.axpby(1.0, &k1, -3.0);
        assert!(d.norm_inf() < 1e-14 * k3.norm_inf());
    }

    #[test]
    fn rejects_asymmetric_coefficient() {
        let m = Mesh::unit(2, 1).unwrap();
        let bad = SmallMat::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]);
        assert!(matches!(
            assemble_stiffness(&m, &[bad; 2]),
            Err(FemError::Asymmetric { .. })
        ));
    }

    #[test]
    fn unit_load_is_partition_of_unity() {
        let m = Mesh::unit(1, 4).unwrap();
        let b = assemble_load(&m, |_| 1.0);
        assert_eq!(b, vec![0.125, 0.25, 0.25, 0.25, 0.125]);
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(assemble_load(&m, |_| 0.0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mass_matrix_integrates_constants() {
        let m = Mesh::build(&[0.0, 0.0], &[2.0, 3.0], &[3, 4]).unwrap();
        let mm = assemble_mass(&m);
        let one = vec![1.0; m.n_vertices()];
        let total: f64 = mm.matvec(&one).iter().sum();
        assert!((total - 6.0).abs() < 1e-12);
    }
}
