use perfhom_core::fem::function::element_values;
use perfhom_core::fem::q1::{self, GAUSS_POINTS, GAUSS_WEIGHT};
use perfhom_core::fem::{assemble_load, assemble_mass, assemble_stiffness, solve_cg, CgOptions, Scale};
use perfhom_core::geometry::{CellGeometry, Mesh, PerforatedDomain};
use std::f64::consts::PI;

fn exact(p: [f64; 2]) -> f64 {
    (PI * p[0]).cos() * (PI * p[1]).cos()
}

/// −Δu + u = (2π² + 1)u with natural boundary conditions; returns ‖u − u_h‖_{L²}
/// with the exact u evaluated at the Gauss points.
fn reaction_error(mesh: &Mesh) -> f64 {
    let a = assemble_stiffness(mesh, &|_| [[1.0, 0.0], [0.0, 1.0]], Scale::for_mesh(mesh)).unwrap();
    let m = assemble_mass(mesh);
    let sys = a.add_scaled(&m, 1.0);
    let b = assemble_load(mesh, |_, _, x| (2.0 * PI * PI + 1.0) * exact(x));
    let uh = solve_cg(&sys, &b, None, &CgOptions::default()).unwrap().into_converged().unwrap();
    let w = GAUSS_WEIGHT * mesh.h() * mesh.h();
    let mut err = 0.0;
    for (ei, e) in mesh.elements().iter().enumerate() {
        let ev = element_values(mesh, &uh, ei);
        for p in GAUSS_POINTS {
            let x = [e.origin[0] + p[0] * mesh.h(), e.origin[1] + p[1] * mesh.h()];
            err += w * (q1::interpolate(ev, p) - exact(x)).powi(2);
        }
    }
    err.sqrt()
}

fn slope(hs: &[f64], es: &[f64]) -> f64 {
    let n = hs.len() as f64;
    let x: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let y: Vec<f64> = es.iter().map(|e| e.ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn reaction_diffusion_converges_at_second_order() {
    let cells = [8, 16, 32];
    let errs: Vec<f64> = cells.iter().map(|&c| reaction_error(&Mesh::unit_square(c))).collect();
    let hs: Vec<f64> = cells.iter().map(|&c| 1.0 / c as f64).collect();
    let s = slope(&hs, &errs);
    assert!((1.8..=2.2).contains(&s), "slope {s}, errors {errs:?}");
}

#[test]
fn perforated_mesh_reproduces_constants() {
    let mesh = Mesh::perforated(&PerforatedDomain::new(0.25, CellGeometry::default()).unwrap(), 8).unwrap();
    let a = assemble_stiffness(&mesh, &|_| [[1.0, 0.0], [0.0, 1.0]], Scale::for_mesh(&mesh)).unwrap();
    let m = assemble_mass(&mesh);
    let sys = a.add_scaled(&m, 1.0);
    let b = assemble_load(&mesh, |_, _, _| 2.5);
    let uh = solve_cg(&sys, &b, None, &CgOptions::default()).unwrap().into_converged().unwrap();
    assert!(uh.iter().all(|v| (v - 2.5).abs() < 1e-8));
}
