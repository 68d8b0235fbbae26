use super::q1::{self, GAUSS_POINTS, GAUSS_WEIGHT};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::geometry::{Mesh, SurfacePart};

/// 2×2 coefficient tensor, row-major.
pub type Tensor2 = [[f64; 2]; 2];

/// How physical coordinates map to the cell variable y at which periodic
/// coefficients are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    /// y = x/ε on a domain mesh.
    Micro(f64),
    /// y = x on a cell mesh (or for constant macroscopic coefficients).
    Cell,
}

impl Scale {
    pub fn for_mesh(mesh: &Mesh) -> Self {
        match mesh.kind() {
            crate::geometry::MeshKind::Cell => Scale::Cell,
            crate::geometry::MeshKind::Domain { epsilon } => Scale::Micro(epsilon),
        }
    }

    #[inline]
    pub fn to_cell(self, x: [f64; 2]) -> [f64; 2] {
        match self {
            Scale::Micro(eps) => [x[0] / eps, x[1] / eps],
            Scale::Cell => x,
        }
    }
}

/// Physical position of local point `p` of element `e`.
#[inline]
pub fn element_point(mesh: &Mesh, e: usize, p: [f64; 2]) -> [f64; 2] {
    let o = mesh.elements()[e].origin;
    [o[0] + p[0] * mesh.h(), o[1] + p[1] * mesh.h()]
}

/// Consistent Q1 mass matrix (exact under 2×2 Gauss).
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    let mut m = CsrMatrix::node_pattern(mesh);
    let w = GAUSS_WEIGHT * mesh.h() * mesh.h();
    let mut local = [[0.0; 4]; 4];
    for p in GAUSS_POINTS {
        let n = q1::shape(p);
        for a in 0..4 {
            for b in 0..4 {
                local[a][b] += w * n[a] * n[b];
            }
        }
    }
    for e in mesh.elements() {
        for a in 0..4 {
            for b in 0..4 {
                m.add_at(e.nodes[a], e.nodes[b], local[a][b]);
            }
        }
    }
    m
}

/// Row sums of the consistent mass matrix (lumped nodal weights).
pub fn lumped_mass(mesh: &Mesh) -> Vec<f64> {
    let mut w = vec![0.0; mesh.n_nodes()];
    let quarter = 0.25 * mesh.h() * mesh.h();
    for e in mesh.elements() {
        for &n in &e.nodes {
            w[n] += quarter;
        }
    }
    w
}

/// Stiffness matrix of ∫ T(y) ∇u · ∇v with T evaluated at the Gauss points.
pub fn assemble_stiffness(
    mesh: &Mesh,
    tensor: &dyn Fn([f64; 2]) -> Tensor2,
    scale: Scale,
) -> Result<CsrMatrix> {
    let mut k = CsrMatrix::node_pattern(mesh);
    let h = mesh.h();
    let w = GAUSS_WEIGHT * h * h;
    let grads: Vec<[[f64; 2]; 4]> = GAUSS_POINTS.iter().map(|&p| q1::shape_grad(p, h)).collect();
    let mut symmetric = true;
    for (ei, e) in mesh.elements().iter().enumerate() {
        let mut local = [[0.0; 4]; 4];
        for (qi, &p) in GAUSS_POINTS.iter().enumerate() {
            let y = scale.to_cell(element_point(mesh, ei, p));
            let t = tensor(y);
            if t.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteCoefficient(y[0], y[1]));
            }
            symmetric &= t[0][1] == t[1][0];
            let g = &grads[qi];
            for b in 0..4 {
                let tg = [
                    t[0][0] * g[b][0] + t[0][1] * g[b][1],
                    t[1][0] * g[b][0] + t[1][1] * g[b][1],
                ];
                for a in 0..4 {
                    local[a][b] += w * (g[a][0] * tg[0] + g[a][1] * tg[1]);
                }
            }
        }
        for a in 0..4 {
            for b in 0..4 {
                k.add_at(e.nodes[a], e.nodes[b], local[a][b]);
            }
        }
    }
    k.set_symmetric(symmetric);
    Ok(k)
}

/// Trapezoidal (lumped) surface mass ∫_part w(y) u v on the selected facets.
pub fn assemble_boundary_mass(
    mesh: &Mesh,
    part: SurfacePart,
    weight: &dyn Fn([f64; 2]) -> f64,
    scale: Scale,
) -> Result<CsrMatrix> {
    let d = boundary_weights(mesh, part, weight, scale)?;
    Ok(CsrMatrix::diagonal_matrix(&d))
}

/// Per-node trapezoidal weights Σ_facets |f|/2 · w(y_node) over `part`.
pub fn boundary_weights(
    mesh: &Mesh,
    part: SurfacePart,
    weight: &dyn Fn([f64; 2]) -> f64,
    scale: Scale,
) -> Result<Vec<f64>> {
    let mut d = vec![0.0; mesh.n_nodes()];
    for f in mesh.facets_in(part) {
        for &n in &f.nodes {
            let y = scale.to_cell(mesh.nodes()[n]);
            let w = weight(y);
            if !w.is_finite() {
                return Err(Error::NonFiniteCoefficient(y[0], y[1]));
            }
            d[n] += 0.5 * f.length * w;
        }
    }
    Ok(d)
}

/// Load vector ∫ f φ_a where `f(element, gauss_index, x)` is supplied at the
/// Gauss points.
pub fn assemble_load(mesh: &Mesh, mut f: impl FnMut(usize, usize, [f64; 2]) -> f64) -> Vec<f64> {
    let mut b = vec![0.0; mesh.n_nodes()];
    let w = GAUSS_WEIGHT * mesh.h() * mesh.h();
    let shapes: Vec<[f64; 4]> = GAUSS_POINTS.iter().map(|&p| q1::shape(p)).collect();
    for (ei, e) in mesh.elements().iter().enumerate() {
        for (qi, &p) in GAUSS_POINTS.iter().enumerate() {
            let v = f(ei, qi, element_point(mesh, ei, p));
            if v == 0.0 {
                continue;
            }
            for a in 0..4 {
                b[e.nodes[a]] += w * v * shapes[qi][a];
            }
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CellGeometry, PerforatedDomain};
    use approx::assert_abs_diff_eq;

    fn identity(_: [f64; 2]) -> Tensor2 {
        [[1.0, 0.0], [0.0, 1.0]]
    }

    fn default_mesh(eps: f64, n: usize) -> Mesh {
        let d = PerforatedDomain::new(eps, CellGeometry::default()).unwrap();
        Mesh::perforated(&d, n).unwrap()
    }

    #[test]
    fn mass_partition_of_unity() {
        let ones = |m: &Mesh| vec![1.0; m.n_nodes()];
        let sq = Mesh::unit_square(5);
        assert_abs_diff_eq!(assemble_mass(&sq).bilinear(&ones(&sq), &ones(&sq)), 1.0, epsilon = 1e-13);
        let m = default_mesh(0.25, 4);
        assert_abs_diff_eq!(assemble_mass(&m).bilinear(&ones(&m), &ones(&m)), 0.75, epsilon = 1e-13);
        let single = Mesh::unit_square(1);
        assert_abs_diff_eq!(
            assemble_mass(&single).bilinear(&ones(&single), &ones(&single)),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn stiffness_kernel_and_linearity() {
        let m = Mesh::unit_square(2);
        let k = assemble_stiffness(&m, &identity, Scale::Cell).unwrap();
        let r = k.mul_vec(&vec![1.0; m.n_nodes()]);
        assert!(r.iter().all(|v| v.abs() < 1e-14));
        let k2 = assemble_stiffness(&m, &|_| [[2.0, 0.0], [0.0, 2.0]], Scale::Cell).unwrap();
        assert!(k2.add_scaled(&k, -2.0).max_abs() < 1e-14);
    }

    #[test]
    fn stiffness_energy_of_linear_function() {
        // ∫ |∇x₁|² over Ω^ε equals |Ω^ε| for the exact Q1 interpolant.
        let m = default_mesh(0.5, 4);
        let k = assemble_stiffness(&m, &identity, Scale::for_mesh(&m)).unwrap();
        let x: Vec<f64> = m.nodes().iter().map(|p| p[0]).collect();
        assert_abs_diff_eq!(k.bilinear(&x, &x), m.area(), epsilon = 1e-12);
    }

    #[test]
    fn stiffness_matches_hand_assembly() {
        // Reference element stiffness of the Laplacian for a square Q1 element.
        let hand = [
            [4.0, -1.0, -2.0, -1.0],
            [-1.0, 4.0, -1.0, -2.0],
            [-2.0, -1.0, 4.0, -1.0],
            [-1.0, -2.0, -1.0, 4.0],
        ];
        // 2×2-element mesh: assemble by hand from the reference matrix.
        let m = Mesh::unit_square(2);
        let mut dense = vec![vec![0.0; m.n_nodes()]; m.n_nodes()];
        for e in m.elements() {
            for a in 0..4 {
                for b in 0..4 {
                    dense[e.nodes[a]][e.nodes[b]] += hand[a][b] / 6.0;
                }
            }
        }
        let k = assemble_stiffness(&m, &identity, Scale::Cell).unwrap().to_dense();
        for (r1, r2) in k.iter().zip(&dense) {
            for (a, b) in r1.iter().zip(r2) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-14);
            }
        }
        let x: Vec<f64> = m.nodes().iter().map(|p| p[0]).collect();
        let e: f64 = (0..x.len())
            .map(|i| (0..x.len()).map(|j| x[i] * dense[i][j] * x[j]).sum::<f64>())
            .sum();
        assert_abs_diff_eq!(e, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn boundary_mass_measures() {
        let m = default_mesh(0.5, 8);
        let s = assemble_boundary_mass(&m, SurfacePart::GammaR, &|_| 1.0, Scale::for_mesh(&m)).unwrap();
        let ones = vec![1.0; m.n_nodes()];
        assert_abs_diff_eq!(s.bilinear(&ones, &ones), 2.0, epsilon = 1e-13);
        let z = assemble_boundary_mass(&m, SurfacePart::GammaR, &|_| 0.0, Scale::for_mesh(&m)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        let s2 = assemble_boundary_mass(&m, SurfacePart::GammaR, &|_| 2.0, Scale::for_mesh(&m)).unwrap();
        assert!(s2.add_scaled(&s, -2.0).max_abs() < 1e-15);
    }

    #[test]
    fn non_finite_coefficients_rejected() {
        let m = Mesh::unit_square(2);
        let err = assemble_stiffness(&m, &|_| [[f64::NAN, 0.0], [0.0, 1.0]], Scale::Cell).unwrap_err();
        assert!(matches!(err, Error::NonFiniteCoefficient(..)));
    }
}
