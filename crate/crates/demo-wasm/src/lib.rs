//! Browser bindings for a few cheap core operations.

use wasm_bindgen::prelude::*;

use perfhom_core::cell::{CellProblems, IndexConvention};
use perfhom_core::coefficients::{
    smoluchowski_rate, PhysicalParams, ScalarFieldSpec, SmoluchowskiParams, TensorFieldSpec,
};
use perfhom_core::corrector::pep_diagnostic;
use perfhom_core::geometry::{CellGeometry, Face};

fn js(e: perfhom_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn cell(hole: f64) -> Result<CellGeometry, JsError> {
    if hole <= 0.0 {
        return Ok(CellGeometry::without_hole());
    }
    let lo = 0.5 - 0.5 * hole;
    CellGeometry::new([lo, lo], [1.0 - lo, 1.0 - lo], &[Face::Top, Face::Right]).map_err(js)
}

fn field(kind: &str, a: f64, b: f64) -> Result<ScalarFieldSpec, JsError> {
    match kind {
        "constant" => Ok(ScalarFieldSpec::constant(a)),
        "trig" => Ok(ScalarFieldSpec::trig(a, b)),
        "laminate" => Ok(ScalarFieldSpec::laminate(a, b)),
        _ => Err(JsError::new(&format!("unknown coefficient kind `{kind}`"))),
    }
}

/// Effective conductivity of a cell. Returns `[K11, K12, K21, K22, |Y1|]`.
///
/// `hole` is the side length of a centered square hole (0 for none); `n` is
/// the cell resolution, a multiple of the grid needed to align the hole.
#[wasm_bindgen]
pub fn effective_conductivity(kind: &str, a: f64, b: f64, hole: f64, n: usize) -> Result<Vec<f64>, JsError> {
    let geometry = cell(hole)?;
    let mut params = PhysicalParams::decoupled(1, 1.0, 1.0);
    params.kappa = TensorFieldSpec::isotropic(field(kind, a, b)?);
    let cp = CellProblems::solve(&geometry, n, &params, IndexConvention::Symmetric).map_err(js)?;
    let k = cp.effective.k;
    Ok(vec![k[0][0], k[0][1], k[1][0], k[1][1], geometry.pore_area()])
}

/// Coagulation rates R(s) for a constant kernel, followed by Σ i·R_i.
#[wasm_bindgen]
pub fn coagulation_rates(s: Vec<f64>, beta: f64) -> Result<Vec<f64>, JsError> {
    if s.iter().any(|&x| !(x >= 0.0)) {
        return Err(JsError::new("concentrations must be nonnegative"));
    }
    let params = SmoluchowskiParams::constant(s.len(), beta);
    params.validate().map_err(js)?;
    let mut r = smoluchowski_rate(&s, &params);
    let mass = r.iter().enumerate().map(|(i, ri)| (i + 1) as f64 * ri).sum();
    r.push(mass);
    Ok(r)
}

/// Ratios ‖p^ε − p̄‖ / (ε^½ ‖p^ε‖_H¹) for ε = 1/2, 1/4, …, 1/2^levels.
#[wasm_bindgen]
pub fn oscillation_ratios(a: f64, b: f64, levels: usize, n: usize) -> Result<Vec<f64>, JsError> {
    let eps: Vec<f64> = (1..=levels.clamp(1, 5)).map(|k| 0.5f64.powi(k as i32)).collect();
    let table = pep_diagnostic(&ScalarFieldSpec::trig(a, b), &CellGeometry::default(), &eps, n).map_err(js)?;
    Ok(table.rows.iter().map(|r| r.ratio).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laminate_means() {
        let k = effective_conductivity("laminate", 1.0, 4.0, 0.0, 32).unwrap();
        assert!((k[0] - 1.6).abs() < 1e-3 && (k[3] - 2.5).abs() < 1e-3);
        assert_eq!(k[4], 1.0);
    }

    #[test]
    fn holed_cell() {
        let k = effective_conductivity("constant", 1.0, 0.0, 0.5, 16).unwrap();
        assert!((k[4] - 0.75).abs() < 1e-12);
        assert!(k[0] > 0.0 && k[0] < 1.0);
    }

    #[test]
    fn rates_lose_truncated_mass() {
        let r = coagulation_rates(vec![1.0, 0.5, 0.25], 1.0).unwrap();
        assert_eq!(r.len(), 4);
        assert!(r[3] <= 0.0);
    }

    #[test]
    fn ratios_shrink() {
        let r = oscillation_ratios(2.0, 1.0, 3, 8).unwrap();
        assert_eq!(r.len(), 3);
        assert!(r.windows(2).all(|w| w[1] < w[0]));
    }
}
