//! Periodic cell problems on Y₁ and the effective coefficients built from them.

use serde::{Deserialize, Serialize};

use crate::coefficients::{PhysicalParams, ScalarFieldSpec, TensorFieldSpec};
use crate::error::{Error, Result};
use crate::fem::function::{element_values, gauss_gradients, h1_seminorm, integral, l2_norm};
use crate::fem::q1::{self, GAUSS_POINTS, GAUSS_WEIGHT};
use crate::fem::{assembly::element_point, Tensor2};
use crate::fem::{assemble_stiffness, expand, fold_matrix, fold_vector, solve_cg, CgOptions, Scale};
use crate::geometry::{CellGeometry, Mesh, MeshKind, SurfacePart};

/// Periodic, zero-mean correctors χʲ (j = 1, 2) solving
/// ∫_{Y₁} A(∇χʲ + e_j)·∇φ dy = 0 for all periodic φ.
#[derive(Debug, Clone)]
pub struct CellSolution {
    mesh: Mesh,
    correctors: [Vec<f64>; 2],
}

impl CellSolution {
    /// Identically zero correctors (the exact solution for a constant tensor without hole).
    pub fn trivial(mesh: Mesh) -> Self {
        let n = mesh.n_nodes();
        Self {
            mesh,
            correctors: [vec![0.0; n], vec![0.0; n]],
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Nodal values of the corrector for direction `j` (0-based).
    pub fn corrector(&self, j: usize) -> &[f64] {
        &self.correctors[j]
    }

    pub fn h1_norm(&self, j: usize) -> f64 {
        let c = &self.correctors[j];
        (l2_norm(&self.mesh, c).powi(2) + h1_seminorm(&self.mesh, c).powi(2)).sqrt()
    }

    /// Mean of the corrector over Y₁.
    pub fn mean(&self, j: usize) -> f64 {
        integral(&self.mesh, &self.correctors[j]) / self.mesh.area()
    }
}

/// Solves both cell problems for the tensor field `tensor` on a periodic cell mesh.
pub fn solve_cell_problem(mesh: &Mesh, tensor: &TensorFieldSpec) -> Result<CellSolution> {
    if mesh.kind() != MeshKind::Cell {
        return Err(Error::NotACellMesh);
    }
    tensor.validate_elliptic("cell tensor")?;
    let eval = |y: [f64; 2]| tensor.eval(y);
    let k = fold_matrix(&assemble_stiffness(mesh, &eval, Scale::Cell)?, mesh)?;
    let h = mesh.h();
    let w = GAUSS_WEIGHT * h * h;
    let mut correctors: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (j, out) in correctors.iter_mut().enumerate() {
        let mut b = vec![0.0; mesh.n_nodes()];
        for (ei, e) in mesh.elements().iter().enumerate() {
            for p in GAUSS_POINTS {
                let t = tensor.eval(element_point(mesh, ei, p));
                let col = [t[0][j], t[1][j]];
                let g = q1::shape_grad(p, h);
                for a in 0..4 {
                    b[e.nodes[a]] -= w * (col[0] * g[a][0] + col[1] * g[a][1]);
                }
            }
        }
        let mut bf = fold_vector(&b, mesh)?;
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if bf.iter().all(|v| v.abs() <= 1e-13 * scale) {
            // Contributions cancel across periodic faces: the corrector vanishes.
            bf.iter_mut().for_each(|v| *v = 0.0);
        }
        let x = solve_cg(&k, &bf, None, &CgOptions::zero_mean())?.into_converged()?;
        let mut v = expand(&x, mesh)?;
        let mean = integral(mesh, &v) / mesh.area();
        v.iter_mut().for_each(|c| *c -= mean);
        *out = v;
    }
    Ok(CellSolution {
        mesh: mesh.clone(),
        correctors,
    })
}

/// Values and y-gradients of both correctors at x/ε (wrapped into Y).
pub fn eval_corrector(cs: &CellSolution, x: [f64; 2], eps: f64) -> Result<([f64; 2], [[f64; 2]; 2])> {
    let wrap = |t: f64| {
        let w = t - t.floor();
        if w >= 1.0 {
            0.0
        } else {
            w
        }
    };
    let y = [wrap(x[0] / eps), wrap(x[1] / eps)];
    let (e, xi) = cs.mesh.locate(y).ok_or(Error::PointInsideHole(x[0], x[1]))?;
    let mut vals = [0.0; 2];
    let mut grads = [[0.0; 2]; 2];
    for j in 0..2 {
        let ev = element_values(&cs.mesh, &cs.correctors[j], e);
        vals[j] = q1::interpolate(ev, xi);
        grads[j] = q1::gradient(ev, xi, cs.mesh.h());
    }
    Ok((vals, grads))
}

/// Which gradient index enters the Dufour correction integral of 𝕋ⁱ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum IndexConvention {
    /// 𝕋ⁱ_jk = avg τ_jk + avg (τ∇θ̄ʲ)_k, the form the two-scale limit of τ∇^δu·∇θ produces.
    #[default]
    Symmetric,
    /// 𝕋ⁱ_jk = avg τ_jk + avg (τ∇θ̄ʲ)_i: the species index i used as a derivative
    /// index. Only defined for i ≤ 2.
    Paper,
}

/// Homogenized constants. Per-species entries are indexed from 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCoefficients {
    #[serde(rename = "K")]
    pub k: Tensor2,
    #[serde(rename = "T")]
    pub t: Vec<Tensor2>,
    #[serde(rename = "D")]
    pub d: Vec<Tensor2>,
    #[serde(rename = "F")]
    pub f: Vec<Tensor2>,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    /// (1/|Y₁|) ∫_{Γ_R} g₀.
    pub heat_loss_factor: f64,
    /// Surface averages (1/|Γ|) ∫_Γ aᵢ, the per-area deposition rates.
    pub a_surface_mean: Vec<f64>,
    /// Surface averages (1/|Γ|) ∫_Γ bᵢ.
    pub b_surface_mean: Vec<f64>,
}

fn cell_average(mesh: &Mesh, f: impl Fn(usize, usize, [f64; 2]) -> f64) -> f64 {
    let w = GAUSS_WEIGHT * mesh.h() * mesh.h();
    let mut s = 0.0;
    for e in 0..mesh.elements().len() {
        for (q, &p) in GAUSS_POINTS.iter().enumerate() {
            s += w * f(e, q, element_point(mesh, e, p));
        }
    }
    s / mesh.area()
}

/// avg over Y₁ of A(e_j + ∇χʲ), returned as M[i][j] = avg [A(e_j + ∇χʲ)]_i.
fn flux_average(mesh: &Mesh, tensor: &TensorFieldSpec, cs: &CellSolution) -> Tensor2 {
    let grads = [gauss_gradients(mesh, cs.corrector(0)), gauss_gradients(mesh, cs.corrector(1))];
    let mut m = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = cell_average(mesh, |e, q, y| {
                let a = tensor.eval(y);
                let g = grads[j][e][q];
                let v = [g[0] + if j == 0 { 1.0 } else { 0.0 }, g[1] + if j == 1 { 1.0 } else { 0.0 }];
                a[i][0] * v[0] + a[i][1] * v[1]
            });
        }
    }
    m
}

fn tensor_average(mesh: &Mesh, tensor: &TensorFieldSpec) -> Tensor2 {
    let mut m = [[0.0; 2]; 2];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = cell_average(mesh, |_, _, y| tensor.eval(y)[i][j]);
        }
    }
    m
}

/// Secondary-coefficient tensor S_jk = avg s_jk + avg (s∇χʲ)_k.
fn cross_tensor(mesh: &Mesh, s: &TensorFieldSpec, cs: &CellSolution) -> Tensor2 {
    let grads = [gauss_gradients(mesh, cs.corrector(0)), gauss_gradients(mesh, cs.corrector(1))];
    let base = tensor_average(mesh, s);
    let mut m = base;
    for j in 0..2 {
        for k in 0..2 {
            m[j][k] += cell_average(mesh, |e, q, y| {
                let t = s.eval(y);
                let g = grads[j][e][q];
                t[k][0] * g[0] + t[k][1] * g[1]
            });
        }
    }
    m
}

fn surface_integral(mesh: &Mesh, part: SurfacePart, f: &ScalarFieldSpec) -> f64 {
    mesh.facets_in(part)
        .map(|fc| 0.5 * fc.length * (f.eval(mesh.nodes()[fc.nodes[0]]) + f.eval(mesh.nodes()[fc.nodes[1]])))
        .sum()
}

/// Assembles every effective constant from the cell solutions for κ and each dᵢ.
pub fn effective_tensors(
    theta: &CellSolution,
    species: &[CellSolution],
    params: &PhysicalParams,
    cell: &CellGeometry,
    convention: IndexConvention,
) -> Result<EffectiveCoefficients> {
    let mesh = theta.mesh();
    let n = params.species();
    if species.len() != n {
        return Err(Error::invalid("species", format!("expected {n} cell solutions, got {}", species.len())));
    }
    if convention == IndexConvention::Paper && n > 2 {
        return Err(Error::invalid(
            "index_convention",
            format!("the `paper` convention differentiates in y_i and needs N <= 2, got N = {n}"),
        ));
    }
    let k = flux_average(mesh, &params.kappa, theta);
    let t = (0..n)
        .map(|i| match convention {
            IndexConvention::Symmetric => cross_tensor(mesh, &params.tau, theta),
            IndexConvention::Paper => {
                let grads = [gauss_gradients(mesh, theta.corrector(0)), gauss_gradients(mesh, theta.corrector(1))];
                let mut m = tensor_average(mesh, &params.tau);
                for (j, row) in m.iter_mut().enumerate() {
                    let c = cell_average(mesh, |e, q, y| {
                        let t = params.tau.eval(y);
                        let g = grads[j][e][q];
                        t[i][0] * g[0] + t[i][1] * g[1]
                    });
                    row.iter_mut().for_each(|v| *v += c);
                }
                m
            }
        })
        .collect();
    let d = (0..n).map(|i| cross_tensor(species[i].mesh(), &params.d[i], &species[i])).collect();
    let f = (0..n).map(|i| cross_tensor(species[i].mesh(), &params.rho[i], &species[i])).collect();
    let y1 = cell.pore_area();
    let gamma = mesh.surface_length(SurfacePart::Gamma);
    let a_int: Vec<f64> = params.a.iter().map(|s| surface_integral(mesh, SurfacePart::Gamma, s)).collect();
    let b_int: Vec<f64> = params.b.iter().map(|s| surface_integral(mesh, SurfacePart::Gamma, s)).collect();
    let mean = |v: &[f64]| v.iter().map(|x| if gamma > 0.0 { x / gamma } else { 0.0 }).collect();
    Ok(EffectiveCoefficients {
        k,
        t,
        d,
        f,
        a: a_int.iter().map(|x| x / y1).collect(),
        b: b_int.iter().map(|x| x / y1).collect(),
        heat_loss_factor: surface_integral(mesh, SurfacePart::GammaR, &params.g0) / y1,
        a_surface_mean: mean(&a_int),
        b_surface_mean: mean(&b_int),
    })
}

/// Cell solutions for κ and every dᵢ together with the effective coefficients.
#[derive(Debug, Clone)]
pub struct CellProblems {
    pub theta: CellSolution,
    pub species: Vec<CellSolution>,
    pub effective: EffectiveCoefficients,
}

impl CellProblems {
    /// Solves all cell problems on an `n`-subdivision cell mesh. Identical tensor
    /// fields share one solve.
    pub fn solve(cell: &CellGeometry, n: usize, params: &PhysicalParams, convention: IndexConvention) -> Result<Self> {
        params.validate()?;
        let mesh = Mesh::cell(cell, n)?;
        let theta = solve_cell_problem(&mesh, &params.kappa)?;
        let mut species: Vec<CellSolution> = Vec::with_capacity(params.species());
        for i in 0..params.species() {
            let reuse = (0..i).find(|&k| params.d[k] == params.d[i]).map(|k| species[k].clone());
            let s = match reuse {
                Some(s) => s,
                None if params.d[i] == params.kappa => theta.clone(),
                None => solve_cell_problem(&mesh, &params.d[i])?,
            };
            species.push(s);
        }
        let effective = effective_tensors(&theta, &species, params, cell, convention)?;
        Ok(Self {
            theta,
            species,
            effective,
        })
    }
}
