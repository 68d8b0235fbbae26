use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Mesh;

/// Standard bump mollifier J_δ(z) = c_δ exp(−1/(1 − |z/δ|²)) on B(0, δ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierConfig {
    pub delta: f64,
}

impl Default for MollifierConfig {
    fn default() -> Self {
        Self { delta: 0.1 }
    }
}

/// ∫_{B(0,1)} exp(−1/(1−|z|²)) dz in two dimensions.
pub fn bump_mass() -> f64 {
    // 2π ∫₀¹ r exp(−1/(1−r²)) dr; the integrand is flat at both ends, so the
    // trapezoid rule converges spectrally.
    let n = 4000;
    let h = 1.0 / n as f64;
    let s: f64 = (1..n)
        .map(|k| {
            let r = k as f64 * h;
            r * (-1.0 / (1.0 - r * r)).exp()
        })
        .sum();
    2.0 * std::f64::consts::PI * s * h
}

impl MollifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta.is_finite() && self.delta > 0.0 {
            Ok(())
        } else {
            Err(Error::invalid("delta", "must be positive"))
        }
    }

    /// Normalization constant c_δ with ∫ J_δ = 1.
    pub fn c_delta(&self) -> f64 {
        1.0 / (bump_mass() * self.delta * self.delta)
    }

    pub fn kernel(&self, z: [f64; 2]) -> f64 {
        let r2 = (z[0] * z[0] + z[1] * z[1]) / (self.delta * self.delta);
        if r2 >= 1.0 {
            0.0
        } else {
            self.c_delta() * (-1.0 / (1.0 - r2)).exp()
        }
    }
}

fn good_fft_len(min: usize) -> usize {
    let mut n = min.max(1);
    loop {
        let mut m = n;
        for p in [2, 3, 5] {
            while m.is_multiple_of(p) {
                m /= p;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

/// Mollified gradient ∇^δ on the node grid of a mesh.
///
/// The field is extended by zero outside the mesh domain and convolved with
/// J_δ as a Riemann sum over the active nodes (weight h² each), renormalized by
/// the kernel mass over the mesh domain. The smoothed field lives on the full
/// grid, holes included; its gradient uses centered differences, one-sided at
/// the edges of the grid or next to points the kernel does not reach.
pub struct Mollifier {
    grid: usize,
    pad: usize,
    h: f64,
    node_grid: Vec<[usize; 2]>,
    kernel_hat: Vec<Complex<f64>>,
    denom: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Mollifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mollifier")
            .field("grid", &self.grid)
            .field("pad", &self.pad)
            .field("h", &self.h)
            .finish()
    }
}

impl Mollifier {
    pub fn new(mesh: &Mesh, cfg: &MollifierConfig) -> Result<Self> {
        cfg.validate()?;
        let h = mesh.h();
        if h > 0.5 * cfg.delta {
            return Err(Error::KernelUnresolved {
                h,
                half_delta: 0.5 * cfg.delta,
            });
        }
        let grid = mesh.cells_per_axis() + 1;
        let r = (cfg.delta / h).floor() as usize;
        let pad = good_fft_len(grid + r);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(pad);
        let inverse = planner.plan_fft_inverse(pad);

        let mut kernel = vec![Complex::new(0.0, 0.0); pad * pad];
        let ri = r as i64;
        for dj in -ri..=ri {
            for di in -ri..=ri {
                let k = cfg.kernel([di as f64 * h, dj as f64 * h]);
                if k > 0.0 {
                    let i = di.rem_euclid(pad as i64) as usize;
                    let j = dj.rem_euclid(pad as i64) as usize;
                    kernel[j * pad + i] = Complex::new(k * h * h, 0.0);
                }
            }
        }
        let mut m = Self {
            grid,
            pad,
            h,
            node_grid: mesh.node_grid().to_vec(),
            kernel_hat: Vec::new(),
            denom: Vec::new(),
            forward,
            inverse,
        };
        m.fft2(&mut kernel, false);
        m.kernel_hat = kernel;
        m.denom = m.convolve(&vec![1.0; mesh.n_nodes()]);
        Ok(m)
    }

    fn fft2(&self, data: &mut [Complex<f64>], inverse: bool) {
        let plan = if inverse { &self.inverse } else { &self.forward };
        let p = self.pad;
        for row in data.chunks_exact_mut(p) {
            plan.process(row);
        }
        let mut col = vec![Complex::new(0.0, 0.0); p];
        for i in 0..p {
            for j in 0..p {
                col[j] = data[j * p + i];
            }
            plan.process(&mut col);
            for j in 0..p {
                data[j * p + i] = col[j];
            }
        }
    }

    /// Σ_y J_δ(x − y) h² f(y) at every grid point x, row-major on the full grid.
    fn convolve(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.node_grid.len(), "field does not match the mesh");
        let p = self.pad;
        let mut data = vec![Complex::new(0.0, 0.0); p * p];
        for (node, &[i, j]) in self.node_grid.iter().enumerate() {
            data[j * p + i] = Complex::new(f[node], 0.0);
        }
        self.fft2(&mut data, false);
        for (d, k) in data.iter_mut().zip(&self.kernel_hat) {
            *d *= k;
        }
        self.fft2(&mut data, true);
        let scale = 1.0 / (p * p) as f64;
        let g = self.grid;
        let mut out = vec![0.0; g * g];
        for j in 0..g {
            for i in 0..g {
                out[j * g + i] = data[j * p + i].re * scale;
            }
        }
        out
    }

    /// Renormalized J_δ ∗ f on the full grid; NaN where the kernel misses the domain.
    pub fn smooth_grid(&self, f: &[f64]) -> Vec<f64> {
        let conv = self.convolve(f);
        let floor = 1e-9 * self.denom.iter().fold(0.0f64, |m, &d| m.max(d));
        conv.iter()
            .zip(&self.denom)
            .map(|(&c, &d)| if d > floor { c / d } else { f64::NAN })
            .collect()
    }

    /// Renormalized J_δ ∗ f at the mesh nodes.
    pub fn smooth(&self, f: &[f64]) -> Vec<f64> {
        let s = self.smooth_grid(f);
        self.node_grid.iter().map(|&[i, j]| s[j * self.grid + i]).collect()
    }

    /// ∇^δ f at every mesh node.
    pub fn gradient(&self, f: &[f64]) -> Vec<[f64; 2]> {
        let s = self.smooth_grid(f);
        let g = self.grid;
        let at = |i: usize, j: usize| Some(s[j * g + i]).filter(|v| v.is_finite());
        let diff = |c: Option<f64>, lo: Option<f64>, hi: Option<f64>| match (lo, c, hi) {
            (Some(l), _, Some(u)) => (u - l) / (2.0 * self.h),
            (None, Some(c), Some(u)) => (u - c) / self.h,
            (Some(l), Some(c), None) => (c - l) / self.h,
            _ => 0.0,
        };
        self.node_grid
            .iter()
            .map(|&[i, j]| {
                let c = at(i, j);
                let gx = diff(
                    c,
                    if i > 0 { at(i - 1, j) } else { None },
                    if i + 1 < g { at(i + 1, j) } else { None },
                );
                let gy = diff(
                    c,
                    if j > 0 { at(i, j - 1) } else { None },
                    if j + 1 < g { at(i, j + 1) } else { None },
                );
                [gx, gy]
            })
            .collect()
    }
}
