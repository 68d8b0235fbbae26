use super::q1::{self, GAUSS_POINTS, GAUSS_WEIGHT};
use crate::error::{Error, Result};
use crate::geometry::{Mesh, SurfacePart};

/// Nodal Q1 field on a mesh.
#[derive(Debug, Clone)]
pub struct FeFunction<'m> {
    mesh: &'m Mesh,
    values: Vec<f64>,
    time: Option<f64>,
}

impl<'m> FeFunction<'m> {
    pub fn new(mesh: &'m Mesh, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), mesh.n_nodes(), "one value per node required");
        Self {
            mesh,
            values,
            time: None,
        }
    }

    pub fn from_fn(mesh: &'m Mesh, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self::new(mesh, mesh.nodes().iter().map(|&p| f(p)).collect())
    }

    pub fn constant(mesh: &'m Mesh, c: f64) -> Self {
        Self::new(mesh, vec![c; mesh.n_nodes()])
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> Option<f64> {
        self.time
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(self.mesh, &self.values)
    }

    pub fn h1_seminorm(&self) -> f64 {
        h1_seminorm(self.mesh, &self.values)
    }

    pub fn boundary_l2(&self, part: SurfacePart) -> f64 {
        boundary_l2(self.mesh, &self.values, part)
    }

    /// Value at an arbitrary point of the mesh domain.
    pub fn eval(&self, p: [f64; 2]) -> Option<f64> {
        let (e, xi) = self.mesh.locate(p)?;
        Some(q1::interpolate(element_values(self.mesh, &self.values, e), xi))
    }

    /// Bilinear evaluation at every node of `target`.
    pub fn interpolate(&self, target: &'m Mesh) -> Result<FeFunction<'m>> {
        Ok(FeFunction::new(target, interpolate(self.mesh, &self.values, target)?))
    }
}

/// Values of a field at the pore-surface nodes of a mesh, in the order of
/// [`Mesh::surface_nodes`].
#[derive(Debug, Clone)]
pub struct SurfaceFunction<'m> {
    mesh: &'m Mesh,
    values: Vec<f64>,
}

impl<'m> SurfaceFunction<'m> {
    pub fn new(mesh: &'m Mesh, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), mesh.surface_nodes().len(), "one value per surface node required");
        Self { mesh, values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trapezoidal L² norm over the facets of `part`.
    pub fn l2_norm(&self, part: SurfacePart) -> f64 {
        let mut full = vec![0.0; self.mesh.n_nodes()];
        for (k, &n) in self.mesh.surface_nodes().iter().enumerate() {
            full[n] = self.values[k];
        }
        boundary_l2(self.mesh, &full, part)
    }
}

/// Nodal values of element `e` in local (counter-clockwise) order.
#[inline]
pub fn element_values(mesh: &Mesh, v: &[f64], e: usize) -> [f64; 4] {
    let n = mesh.elements()[e].nodes;
    [v[n[0]], v[n[1]], v[n[2]], v[n[3]]]
}

/// ‖v‖²_{L²} by 2×2 Gauss quadrature.
pub fn l2_norm_sq(mesh: &Mesh, v: &[f64]) -> f64 {
    let w = GAUSS_WEIGHT * mesh.h() * mesh.h();
    let mut s = 0.0;
    for e in 0..mesh.elements().len() {
        let ev = element_values(mesh, v, e);
        for p in GAUSS_POINTS {
            s += w * q1::interpolate(ev, p).powi(2);
        }
    }
    s
}

pub fn l2_norm(mesh: &Mesh, v: &[f64]) -> f64 {
    l2_norm_sq(mesh, v).sqrt()
}

/// ‖∇v‖²_{L²} by 2×2 Gauss quadrature.
pub fn h1_seminorm_sq(mesh: &Mesh, v: &[f64]) -> f64 {
    let h = mesh.h();
    let w = GAUSS_WEIGHT * h * h;
    let mut s = 0.0;
    for e in 0..mesh.elements().len() {
        let ev = element_values(mesh, v, e);
        for p in GAUSS_POINTS {
            let g = q1::gradient(ev, p, h);
            s += w * (g[0] * g[0] + g[1] * g[1]);
        }
    }
    s
}

pub fn h1_seminorm(mesh: &Mesh, v: &[f64]) -> f64 {
    h1_seminorm_sq(mesh, v).sqrt()
}

/// ‖v‖²_{L²(part)} with trapezoidal facet quadrature.
pub fn boundary_l2_sq(mesh: &Mesh, v: &[f64], part: SurfacePart) -> f64 {
    mesh.facets_in(part)
        .map(|f| 0.5 * f.length * (v[f.nodes[0]].powi(2) + v[f.nodes[1]].powi(2)))
        .sum()
}

pub fn boundary_l2(mesh: &Mesh, v: &[f64], part: SurfacePart) -> f64 {
    boundary_l2_sq(mesh, v, part).sqrt()
}

/// ∫ v over the mesh domain.
pub fn integral(mesh: &Mesh, v: &[f64]) -> f64 {
    let quarter = 0.25 * mesh.h() * mesh.h();
    mesh.elements()
        .iter()
        .map(|e| quarter * e.nodes.iter().map(|&n| v[n]).sum::<f64>())
        .sum()
}

/// Evaluates the Q1 field `v` on `source` at every node of `target`.
pub fn interpolate(source: &Mesh, v: &[f64], target: &Mesh) -> Result<Vec<f64>> {
    interpolate_points(source, v, target.nodes())
}

pub fn interpolate_points(source: &Mesh, v: &[f64], points: &[[f64; 2]]) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|&p| {
            let (e, xi) = source.locate(p).ok_or(Error::NodeOutsideSource(p[0], p[1]))?;
            Ok(q1::interpolate(element_values(source, v, e), xi))
        })
        .collect()
}

/// Elementwise gradient at each Gauss point: `out[e][q]`.
pub fn gauss_gradients(mesh: &Mesh, v: &[f64]) -> Vec<[[f64; 2]; 4]> {
    let h = mesh.h();
    (0..mesh.elements().len())
        .map(|e| {
            let ev = element_values(mesh, v, e);
            GAUSS_POINTS.map(|p| q1::gradient(ev, p, h))
        })
        .collect()
}

/// Recovered nodal gradient: the average of the element gradients at the node
/// over all active elements sharing it.
pub fn patch_gradient(mesh: &Mesh, v: &[f64]) -> Vec<[f64; 2]> {
    const CORNERS: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let h = mesh.h();
    let mut g = vec![[0.0; 2]; mesh.n_nodes()];
    let mut count = vec![0u32; mesh.n_nodes()];
    for (ei, e) in mesh.elements().iter().enumerate() {
        let ev = element_values(mesh, v, ei);
        for (a, &n) in e.nodes.iter().enumerate() {
            let ga = q1::gradient(ev, CORNERS[a], h);
            g[n][0] += ga[0];
            g[n][1] += ga[1];
            count[n] += 1;
        }
    }
    for (gn, &c) in g.iter_mut().zip(&count) {
        if c > 0 {
            gn[0] /= c as f64;
            gn[1] /= c as f64;
        }
    }
    g
}
