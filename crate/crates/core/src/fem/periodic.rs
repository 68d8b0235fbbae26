//! Folding of node-based systems onto the periodic degrees of freedom of a cell mesh.

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::geometry::{Mesh, PeriodicMap};

fn map(mesh: &Mesh) -> Result<&PeriodicMap> {
    mesh.periodic().ok_or(Error::NotACellMesh)
}

/// Pᵀ A P where P expands periodic dofs to nodes.
pub fn fold_matrix(a: &CsrMatrix, mesh: &Mesh) -> Result<CsrMatrix> {
    let pm = map(mesh)?;
    let dof = pm.dof_of_node();
    let triplets = a.triplets().map(|(r, c, v)| (dof[r], dof[c], v)).collect();
    Ok(CsrMatrix::from_triplets(pm.n_dofs(), triplets, a.is_symmetric_flagged()))
}

/// Pᵀ b: slave entries are added onto their masters.
pub fn fold_vector(b: &[f64], mesh: &Mesh) -> Result<Vec<f64>> {
    let pm = map(mesh)?;
    let mut out = vec![0.0; pm.n_dofs()];
    for (node, &d) in pm.dof_of_node().iter().enumerate() {
        out[d] += b[node];
    }
    Ok(out)
}

/// P x: every node takes the value of its periodic dof.
pub fn expand(x: &[f64], mesh: &Mesh) -> Result<Vec<f64>> {
    let pm = map(mesh)?;
    Ok(pm.dof_of_node().iter().map(|&d| x[d]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::{assemble_stiffness, Scale};
    use crate::fem::cg::{solve_cg, CgOptions};
    use crate::geometry::CellGeometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constants_survive_round_trip() {
        let m = Mesh::cell(&CellGeometry::default(), 8).unwrap();
        let n = m.periodic().unwrap().n_dofs();
        let x = expand(&vec![2.5; n], &m).unwrap();
        assert!(x.iter().all(|&v| v == 2.5));
        assert_eq!(x.len(), m.n_nodes());
    }

    #[test]
    fn not_a_cell_mesh() {
        let m = Mesh::unit_square(4);
        assert_eq!(fold_vector(&vec![0.0; m.n_nodes()], &m), Err(Error::NotACellMesh));
    }

    #[test]
    fn periodic_laplacian_kernel_is_constants() {
        let m = Mesh::cell(&CellGeometry::without_hole(), 8).unwrap();
        let k = assemble_stiffness(&m, &|_| [[1.0, 0.0], [0.0, 1.0]], Scale::Cell).unwrap();
        let kf = fold_matrix(&k, &m).unwrap();
        let n = kf.dim();
        assert_eq!(n, 64);
        let ones = vec![1.0; n];
        assert!(kf.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
        // Any mean-zero rhs is solvable, so the kernel has dimension one.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = b.iter().sum::<f64>() / n as f64;
        b.iter_mut().for_each(|v| *v -= mean);
        let x = solve_cg(&kf, &b, None, &CgOptions::zero_mean())
            .unwrap()
            .into_converged()
            .unwrap();
        let r = kf.mul_vec(&x);
        let err: f64 = r.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err <= 1e-9 * bn);
    }
}
