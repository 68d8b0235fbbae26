//! Y-periodic coefficient fields, the Smoluchowski coagulation rate, the
//! mollified gradient and the boundary cut-off.

mod cutoff;
mod mollifier;
mod smoluchowski;

pub use cutoff::{cutoff_function, cutoff_gradient, cutoff_value, CutoffNorms};
pub use mollifier::{bump_mass, Mollifier, MollifierConfig};
pub use smoluchowski::{smoluchowski_rate, smoluchowski_rate_into, SmoluchowskiParams};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fem::Tensor2;

/// Scalar Y-periodic field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScalarFieldSpec {
    Constant { value: f64 },
    /// a + b·cos(2πy₁)cos(2πy₂)
    Trig { a: f64, b: f64 },
    /// c1 for y₁ < 1/2, c2 otherwise.
    Laminate { c1: f64, c2: f64 },
}

#[inline]
fn wrap(t: f64) -> f64 {
    let w = t - t.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

impl ScalarFieldSpec {
    pub const fn constant(value: f64) -> Self {
        ScalarFieldSpec::Constant { value }
    }

    pub const fn trig(a: f64, b: f64) -> Self {
        ScalarFieldSpec::Trig { a, b }
    }

    pub const fn laminate(c1: f64, c2: f64) -> Self {
        ScalarFieldSpec::Laminate { c1, c2 }
    }

    /// Value at `y`, wrapped into the unit cell.
    pub fn eval(&self, y: [f64; 2]) -> f64 {
        match *self {
            ScalarFieldSpec::Constant { value } => value,
            ScalarFieldSpec::Trig { a, b } => {
                a + b * (2.0 * PI * wrap(y[0])).cos() * (2.0 * PI * wrap(y[1])).cos()
            }
            ScalarFieldSpec::Laminate { c1, c2 } => {
                if wrap(y[0]) < 0.5 {
                    c1
                } else {
                    c2
                }
            }
        }
    }

    /// Exact (min, max) over Y.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            ScalarFieldSpec::Constant { value } => (value, value),
            ScalarFieldSpec::Trig { a, b } => (a - b.abs(), a + b.abs()),
            ScalarFieldSpec::Laminate { c1, c2 } => (c1.min(c2), c1.max(c2)),
        }
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            ScalarFieldSpec::Constant { .. } => true,
            ScalarFieldSpec::Trig { b, .. } => b == 0.0,
            ScalarFieldSpec::Laminate { c1, c2 } => c1 == c2,
        }
    }

    fn check_finite(&self, name: &str) -> Result<()> {
        let ok = match *self {
            ScalarFieldSpec::Constant { value } => value.is_finite(),
            ScalarFieldSpec::Trig { a, b } => a.is_finite() && b.is_finite(),
            ScalarFieldSpec::Laminate { c1, c2 } => c1.is_finite() && c2.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(name, "non-finite value"))
        }
    }

    /// Uniformly positive: min over Y strictly above zero.
    pub fn validate_positive(&self, name: &str) -> Result<()> {
        self.check_finite(name)?;
        let (lo, _) = self.bounds();
        if lo > 0.0 {
            Ok(())
        } else {
            Err(Error::NonElliptic(format!("{name} has minimum {lo} over the cell")))
        }
    }

    pub fn validate_nonnegative(&self, name: &str) -> Result<()> {
        self.check_finite(name)?;
        let (lo, _) = self.bounds();
        if lo >= 0.0 {
            Ok(())
        } else {
            Err(Error::invalid(name, format!("minimum {lo} over the cell is negative")))
        }
    }
}

/// Diagonal tensor field: either a scalar times the identity or one scalar
/// field per diagonal entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TensorFieldSpec {
    Diagonal { diagonal: [ScalarFieldSpec; 2] },
    Isotropic(ScalarFieldSpec),
}

impl TensorFieldSpec {
    pub const fn isotropic(s: ScalarFieldSpec) -> Self {
        TensorFieldSpec::Isotropic(s)
    }

    pub const fn constant(c: f64) -> Self {
        TensorFieldSpec::Isotropic(ScalarFieldSpec::constant(c))
    }

    fn entries(&self) -> [ScalarFieldSpec; 2] {
        match *self {
            TensorFieldSpec::Isotropic(s) => [s, s],
            TensorFieldSpec::Diagonal { diagonal } => diagonal,
        }
    }

    pub fn eval(&self, y: [f64; 2]) -> Tensor2 {
        match self {
            TensorFieldSpec::Isotropic(s) => {
                let v = s.eval(y);
                [[v, 0.0], [0.0, v]]
            }
            TensorFieldSpec::Diagonal { diagonal } => [[diagonal[0].eval(y), 0.0], [0.0, diagonal[1].eval(y)]],
        }
    }

    /// (min, max) of the eigenvalues over Y.
    pub fn bounds(&self) -> (f64, f64) {
        let [a, b] = self.entries().map(|s| s.bounds());
        (a.0.min(b.0), a.1.max(b.1))
    }

    pub fn is_constant(&self) -> bool {
        self.entries().iter().all(|s| s.is_constant())
    }

    pub fn validate_elliptic(&self, name: &str) -> Result<()> {
        self.entries().iter().try_for_each(|s| s.validate_positive(name))
    }

    pub fn validate_nonnegative(&self, name: &str) -> Result<()> {
        self.entries().iter().try_for_each(|s| s.validate_nonnegative(name))
    }
}

/// All oscillating coefficients of the microscopic system, in the cell variable y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Heat conductivity κ.
    pub kappa: TensorFieldSpec,
    /// Dufour coefficient τ (shared by all species).
    pub tau: TensorFieldSpec,
    /// Molecular diffusion dᵢ.
    pub d: Vec<TensorFieldSpec>,
    /// Soret coefficient ρᵢ.
    pub rho: Vec<TensorFieldSpec>,
    /// Heat exchange coefficient on Γ_R.
    pub g0: ScalarFieldSpec,
    /// Deposition rate aᵢ on Γ.
    pub a: Vec<ScalarFieldSpec>,
    /// Dissolution rate bᵢ on Γ.
    pub b: Vec<ScalarFieldSpec>,
}

impl PhysicalParams {
    /// κ = trig(2,1), dᵢ = trig(1.5,0.5), τ = ρᵢ = 0.1, g₀ = aᵢ = bᵢ = 1.
    pub fn default_for(species: usize) -> Self {
        Self {
            kappa: TensorFieldSpec::isotropic(ScalarFieldSpec::trig(2.0, 1.0)),
            tau: TensorFieldSpec::constant(0.1),
            d: vec![TensorFieldSpec::isotropic(ScalarFieldSpec::trig(1.5, 0.5)); species],
            rho: vec![TensorFieldSpec::constant(0.1); species],
            g0: ScalarFieldSpec::constant(1.0),
            a: vec![ScalarFieldSpec::constant(1.0); species],
            b: vec![ScalarFieldSpec::constant(1.0); species],
        }
    }

    /// Every coupling switched off, with constant diffusivities.
    pub fn decoupled(species: usize, kappa: f64, d: f64) -> Self {
        Self {
            kappa: TensorFieldSpec::constant(kappa),
            tau: TensorFieldSpec::constant(0.0),
            d: vec![TensorFieldSpec::constant(d); species],
            rho: vec![TensorFieldSpec::constant(0.0); species],
            g0: ScalarFieldSpec::constant(0.0),
            a: vec![ScalarFieldSpec::constant(0.0); species],
            b: vec![ScalarFieldSpec::constant(0.0); species],
        }
    }

    pub fn species(&self) -> usize {
        self.d.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.species();
        if n == 0 {
            return Err(Error::invalid("N", "at least one species is required"));
        }
        for (name, len) in [("rho", self.rho.len()), ("a", self.a.len()), ("b", self.b.len())] {
            if len != n {
                return Err(Error::invalid(name, format!("expected {n} entries, got {len}")));
            }
        }
        self.kappa.validate_elliptic("kappa")?;
        self.tau.validate_nonnegative("tau")?;
        self.g0.validate_nonnegative("g0")?;
        for i in 0..n {
            self.d[i].validate_elliptic(&format!("d[{}]", i + 1))?;
            self.rho[i].validate_nonnegative(&format!("rho[{}]", i + 1))?;
            self.a[i].validate_nonnegative(&format!("a[{}]", i + 1))?;
            self.b[i].validate_nonnegative(&format!("b[{}]", i + 1))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eval_examples() {
        assert_eq!(ScalarFieldSpec::constant(3.0).eval([0.7, 0.1]), 3.0);
        let t = ScalarFieldSpec::trig(2.0, 1.0);
        assert_abs_diff_eq!(t.eval([0.0, 0.0]), 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.eval([0.25, 0.0]), 2.0, epsilon = 1e-15);
        assert_eq!(ScalarFieldSpec::laminate(1.0, 4.0).eval([0.6, 0.3]), 4.0);
        assert_eq!(ScalarFieldSpec::laminate(1.0, 4.0).eval([1.6, -0.7]), 4.0);
        assert_abs_diff_eq!(t.eval([1.25, 0.5]), t.eval([0.25, 0.5]), epsilon = 1e-15);
    }

    #[test]
    fn bounds_and_validation() {
        assert_eq!(ScalarFieldSpec::trig(2.0, -1.0).bounds(), (1.0, 3.0));
        assert!(ScalarFieldSpec::trig(1.0, 1.0).validate_positive("k").is_err());
        assert!(matches!(
            TensorFieldSpec::constant(-1.0).validate_elliptic("kappa"),
            Err(Error::NonElliptic(_))
        ));
        PhysicalParams::default_for(3).validate().unwrap();
        PhysicalParams::decoupled(3, 1.0, 1.0).validate().unwrap();
        let mut p = PhysicalParams::default_for(3);
        p.a.pop();
        assert!(p.validate().is_err());
    }

    #[test]
    fn diagonal_tensor() {
        let t = TensorFieldSpec::Diagonal {
            diagonal: [ScalarFieldSpec::constant(1.0), ScalarFieldSpec::laminate(2.0, 5.0)],
        };
        assert_eq!(t.eval([0.7, 0.0]), [[1.0, 0.0], [0.0, 5.0]]);
        assert_eq!(t.bounds(), (1.0, 5.0));
    }

    #[test]
    fn spec_json_shape() {
        let s: TensorFieldSpec = serde_json::from_str(r#"{"kind":"trig","a":2,"b":1}"#).unwrap();
        assert_eq!(s, TensorFieldSpec::isotropic(ScalarFieldSpec::trig(2.0, 1.0)));
        let d: TensorFieldSpec =
            serde_json::from_str(r#"{"diagonal":[{"kind":"constant","value":1},{"kind":"constant","value":2}]}"#)
                .unwrap();
        assert_eq!(d.eval([0.0, 0.0]), [[1.0, 0.0], [0.0, 2.0]]);
    }
}
