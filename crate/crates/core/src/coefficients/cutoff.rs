use crate::fem::q1::{GAUSS_POINTS, GAUSS_WEIGHT};
use crate::fem::{assembly::element_point, function::l2_norm};
use crate::geometry::Mesh;

fn boundary_distance(x: [f64; 2]) -> f64 {
    x[0].min(1.0 - x[0]).min(x[1]).min(1.0 - x[1]).max(0.0)
}

/// m^ε(x) = min(1, dist(x, ∂Ω)/ε).
pub fn cutoff_value(x: [f64; 2], eps: f64) -> f64 {
    (boundary_distance(x) / eps).min(1.0)
}

/// Gradient of m^ε, defined almost everywhere (ties pick the first axis).
pub fn cutoff_gradient(x: [f64; 2], eps: f64) -> [f64; 2] {
    let d = boundary_distance(x);
    if d >= eps {
        return [0.0, 0.0];
    }
    let cands = [
        (x[0], [1.0, 0.0]),
        (1.0 - x[0], [-1.0, 0.0]),
        (x[1], [0.0, 1.0]),
        (1.0 - x[1], [0.0, -1.0]),
    ];
    let (_, dir) = cands
        .iter()
        .copied()
        .fold((f64::INFINITY, [0.0, 0.0]), |best, c| if c.0 < best.0 { c } else { best });
    [dir[0] / eps, dir[1] / eps]
}

/// Nodal interpolant of m^ε.
pub fn cutoff_function(mesh: &Mesh, eps: f64) -> Vec<f64> {
    mesh.nodes().iter().map(|&p| cutoff_value(p, eps)).collect()
}

/// Norms of the boundary layer 1 − m^ε on a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffNorms {
    /// ‖1 − m^ε‖_{L²(Ω^ε)} of the nodal interpolant.
    pub one_minus_l2: f64,
    /// ε‖∇m^ε‖_{L²(Ω^ε)} from the exact gradient at the Gauss points.
    pub eps_grad_l2: f64,
    /// ε·max|∇m^ε|, exact.
    pub eps_grad_max: f64,
}

impl CutoffNorms {
    pub fn measure(mesh: &Mesh, eps: f64) -> Self {
        let one_minus: Vec<f64> = cutoff_function(mesh, eps).iter().map(|m| 1.0 - m).collect();
        let w = GAUSS_WEIGHT * mesh.h() * mesh.h();
        let mut g2 = 0.0;
        let mut gmax = 0.0f64;
        for e in 0..mesh.elements().len() {
            for p in GAUSS_POINTS {
                let g = cutoff_gradient(element_point(mesh, e, p), eps);
                let n2 = g[0] * g[0] + g[1] * g[1];
                g2 += w * n2;
                gmax = gmax.max(n2.sqrt());
            }
        }
        Self {
            one_minus_l2: l2_norm(mesh, &one_minus),
            eps_grad_l2: eps * g2.sqrt(),
            eps_grad_max: eps * gmax,
        }
    }
}
