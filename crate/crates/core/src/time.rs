//! Time grid, initial data and helpers shared by the micro and homogenized steppers.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fem::q1::{self, GAUSS_POINTS};
use crate::fem::{solve_cg, CgOptions, CsrMatrix};
use crate::geometry::Mesh;

/// Time horizon and step rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// Nominal step; `None` means h/4.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Number of stored snapshots on [0, T], endpoints included.
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
}

fn default_t_end() -> f64 {
    0.1
}

fn default_snapshots() -> usize {
    11
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            dt: None,
            t_end: default_t_end(),
            snapshots: default_snapshots(),
        }
    }
}

/// Uniform step sequence aligned with the snapshot times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
    pub snapshot_every: usize,
}

impl TimeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::invalid("t_end", "must be positive"));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::invalid("dt", "must be positive"));
            }
        }
        if self.snapshots < 2 {
            return Err(Error::invalid("snapshots", "at least 2 are required"));
        }
        Ok(())
    }

    /// Steps for mesh size `h`: the nominal step is shrunk so that every
    /// snapshot time falls on a step.
    pub fn grid(&self, h: f64) -> Result<TimeGrid> {
        self.validate()?;
        let nominal = self.dt.unwrap_or(0.25 * h);
        let intervals = self.snapshots - 1;
        let per = (self.t_end / (nominal * intervals as f64) - 1e-9).ceil().max(1.0) as usize;
        let n_steps = per * intervals;
        Ok(TimeGrid {
            dt: self.t_end / n_steps as f64,
            n_steps,
            snapshot_every: per,
        })
    }
}

/// Nonnegative smooth initial profile c + s·x + A cos(πx₁)cos(πx₂).
///
/// The cosine part satisfies the homogeneous Neumann condition on ∂Ω.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialField {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub slope: [f64; 2],
    #[serde(default)]
    pub cos_amp: f64,
}

impl InitialField {
    pub const fn constant(c: f64) -> Self {
        Self {
            constant: c,
            slope: [0.0, 0.0],
            cos_amp: 0.0,
        }
    }

    pub const fn cosine(c: f64, amp: f64) -> Self {
        Self {
            constant: c,
            slope: [0.0, 0.0],
            cos_amp: amp,
        }
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.constant + self.slope[0] * x[0] + self.slope[1] * x[1] + self.cos_amp * (PI * x[0]).cos() * (PI * x[1]).cos()
    }

    /// Nodal interpolant at `points`; any negative value is rejected.
    pub fn sample(&self, points: &[[f64; 2]]) -> Result<Vec<f64>> {
        let v: Vec<f64> = points.iter().map(|&p| self.eval(p)).collect();
        if let Some(&bad) = v.iter().find(|&&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::NegativeInitialData(bad));
        }
        Ok(v)
    }
}

/// Initial temperature, concentrations and deposited masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub theta: InitialField,
    pub u: Vec<InitialField>,
    pub v: Vec<InitialField>,
}

impl InitialData {
    /// θ = 1 + ½cos(πx₁)cos(πx₂), uᵢ = ½ + ¼cos(πx₁)cos(πx₂), vᵢ = 0.
    pub fn default_for(species: usize) -> Self {
        Self {
            theta: InitialField::cosine(1.0, 0.5),
            u: vec![InitialField::cosine(0.5, 0.25); species],
            v: vec![InitialField::constant(0.0); species],
        }
    }

    pub fn constant(species: usize, theta: f64, u: f64, v: f64) -> Self {
        Self {
            theta: InitialField::constant(theta),
            u: vec![InitialField::constant(u); species],
            v: vec![InitialField::constant(v); species],
        }
    }

    /// Adds `amp`·cos(πx₁)cos(πx₂) to θ and every uᵢ.
    pub fn perturbed(&self, amp: f64) -> Self {
        let mut out = self.clone();
        out.theta.cos_amp += amp;
        out.u.iter_mut().for_each(|f| f.cos_amp += amp);
        out
    }

    pub fn validate(&self, species: usize) -> Result<()> {
        if self.u.len() != species || self.v.len() != species {
            return Err(Error::invalid(
                "initial",
                format!("expected {species} species, got u: {}, v: {}", self.u.len(), self.v.len()),
            ));
        }
        Ok(())
    }
}

/// Running energy and positivity diagnostics of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// max_t ‖∇θ(t)‖².
    pub max_grad_theta_sq: f64,
    /// max_t Σᵢ‖∇uᵢ(t)‖².
    pub max_grad_u_sq: f64,
    /// ∫₀ᵀ ‖∂_tθ‖² from difference quotients.
    pub dt_theta_sq_int: f64,
    /// ∫₀ᵀ Σᵢ‖∂_tuᵢ‖².
    pub dt_u_sq_int: f64,
    /// ∫₀ᵀ Σᵢ ε‖∂_tvᵢ‖²_Γ (micro) or Σᵢ‖∂_tvᵢ‖² (homogenized).
    pub dt_v_sq_int: f64,
    /// Smallest nodal value over all fields and steps.
    pub min_value: f64,
    /// Largest nodal magnitude over all fields and steps.
    pub max_abs_value: f64,
    pub positivity_ok: bool,
    /// Number of steps on which the advective guard halved dt.
    pub dt_halvings: usize,
    pub steps: usize,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Self {
            max_grad_theta_sq: 0.0,
            max_grad_u_sq: 0.0,
            dt_theta_sq_int: 0.0,
            dt_u_sq_int: 0.0,
            dt_v_sq_int: 0.0,
            min_value: f64::INFINITY,
            max_abs_value: 0.0,
            positivity_ok: true,
            dt_halvings: 0,
            steps: 0,
        }
    }
}

pub(crate) const POSITIVITY_TOL: f64 = -1e-10;
pub(crate) const BLOW_UP: f64 = 1e8;

impl Diagnostics {
    pub(crate) fn observe_values<'a>(&mut self, fields: impl IntoIterator<Item = &'a [f64]>) {
        for f in fields {
            for &v in f {
                self.min_value = self.min_value.min(v);
                self.max_abs_value = self.max_abs_value.max(v.abs());
            }
        }
        self.positivity_ok = self.min_value >= POSITIVITY_TOL;
    }
}

/// Fails with `BlowUp` on any non-finite or huge value.
pub(crate) fn check_blow_up<'a>(fields: impl IntoIterator<Item = &'a [f64]>) -> Result<()> {
    for f in fields {
        for &v in f {
            if !v.is_finite() {
                return Err(Error::BlowUp(f64::INFINITY));
            }
            if v.abs() > BLOW_UP {
                return Err(Error::BlowUp(v.abs()));
            }
        }
    }
    Ok(())
}

pub(crate) fn solve(a: &CsrMatrix, b: &[f64], warm: &[f64]) -> Result<Vec<f64>> {
    solve_cg(a, b, Some(warm), &CgOptions::default())?.into_converged()
}

/// `m/dt ⊙ x`
pub(crate) fn scaled_lumped(m: &[f64], dt: f64, x: &[f64]) -> Vec<f64> {
    m.iter().zip(x).map(|(m, x)| m / dt * x).collect()
}

/// Bilinear interpolation of a nodal vector field to the Gauss points of each element.
pub(crate) fn vector_at_gauss(mesh: &Mesh, v: &[[f64; 2]]) -> Vec<[[f64; 2]; 4]> {
    let shapes = GAUSS_POINTS.map(q1::shape);
    mesh.elements()
        .iter()
        .map(|e| {
            let mut out = [[0.0; 2]; 4];
            for (q, n) in shapes.iter().enumerate() {
                for a in 0..4 {
                    let g = v[e.nodes[a]];
                    out[q][0] += n[a] * g[0];
                    out[q][1] += n[a] * g[1];
                }
            }
            out
        })
        .collect()
}

#[inline]
pub(crate) fn mat_vec(t: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [t[0][0] * v[0] + t[0][1] * v[1], t[1][0] * v[0] + t[1][1] * v[1]]
}

#[inline]
pub(crate) fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Step count 2^k needed so that each substep keeps `speed·dt ≤ h/2`.
pub(crate) fn halving_level(speed: f64, dt: f64, h: f64) -> u32 {
    let mut k = 0;
    while k < 20 && speed * dt / f64::from(1u32 << k) > 0.5 * h {
        k += 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_aligns_snapshots() {
        let g = TimeConfig::default().grid(1.0 / 64.0).unwrap();
        assert_eq!(g.n_steps % 10, 0);
        assert!((g.dt * g.n_steps as f64 - 0.1).abs() < 1e-15);
        assert!(g.dt <= 0.25 / 64.0);
        let g = TimeConfig {
            dt: Some(1e-3),
            ..TimeConfig::default()
        }
        .grid(0.1)
        .unwrap();
        assert_eq!(g.n_steps, 100);
        assert_eq!(g.snapshot_every, 10);
    }

    #[test]
    fn initial_fields() {
        let f = InitialField {
            constant: 1.0,
            slope: [1.0, 0.0],
            cos_amp: 0.0,
        };
        assert_eq!(f.sample(&[[0.25, 0.9]]).unwrap(), vec![1.25]);
        assert_eq!(
            InitialField::constant(-1.0).sample(&[[0.0, 0.0]]),
            Err(Error::NegativeInitialData(-1.0))
        );
    }

    #[test]
    fn halving() {
        assert_eq!(halving_level(0.0, 1.0, 0.1), 0);
        assert_eq!(halving_level(1.0, 0.1, 0.1), 1);
    }
}
