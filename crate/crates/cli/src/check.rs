//! Fast built-in property suite behind `perfhom check`.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use perfhom_core::cell::{solve_cell_problem, CellProblems, IndexConvention};
use perfhom_core::coefficients::{smoluchowski_rate, CutoffNorms, ScalarFieldSpec, SmoluchowskiParams, TensorFieldSpec};
use perfhom_core::corrector::{fit_rate, pep_diagnostic};
use perfhom_core::fem::function::element_values;
use perfhom_core::fem::q1::{self, GAUSS_POINTS, GAUSS_WEIGHT};
use perfhom_core::fem::{assemble_load, assemble_stiffness, solve_cg, CgOptions, Scale};
use perfhom_core::geometry::{CellGeometry, Mesh, PerforatedDomain};
use perfhom_core::homogenized::{run_macro, MacroExchange};
use perfhom_core::micro::{run_micro, Physics};
use perfhom_core::time::{InitialData, TimeConfig};

use crate::output::write_json;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub name: &'static str,
    pub value: f64,
    pub limit: String,
    pub passed: bool,
}

fn outcome(name: &'static str, value: f64, limit: impl Into<String>, passed: bool) -> Outcome {
    Outcome {
        name,
        value,
        limit: limit.into(),
        passed: passed && value.is_finite(),
    }
}

type Check = fn() -> perfhom_core::Result<Outcome>;

fn laminate() -> perfhom_core::Result<Outcome> {
    let mut params = perfhom_core::coefficients::PhysicalParams::decoupled(1, 1.0, 1.0);
    params.kappa = TensorFieldSpec::isotropic(ScalarFieldSpec::laminate(1.0, 4.0));
    let cp = CellProblems::solve(&CellGeometry::without_hole(), 64, &params, IndexConvention::Symmetric)?;
    let k = cp.effective.k;
    // Harmonic mean across the layers, arithmetic mean along them.
    let err = (k[0][0] - 1.6).abs().max((k[1][1] - 2.5).abs()).max(k[0][1].abs());
    Ok(outcome("laminate_tensor", err, "<= 1e-3", err <= 1e-3))
}

fn trivial_cell() -> perfhom_core::Result<Outcome> {
    let mesh = Mesh::cell(&CellGeometry::without_hole(), 16)?;
    let cs = solve_cell_problem(&mesh, &TensorFieldSpec::constant(2.5))?;
    let h1 = cs.h1_norm(0).max(cs.h1_norm(1));
    Ok(outcome("trivial_cell_corrector", h1, "<= 1e-9", h1 <= 1e-9))
}

fn smoluchowski_mass() -> perfhom_core::Result<Outcome> {
    let beta = SmoluchowskiParams::constant(3, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let s: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..2.0)).collect();
        let r = smoluchowski_rate(&s, &beta);
        worst = worst.max(r.iter().enumerate().map(|(i, ri)| (i + 1) as f64 * ri).sum());
    }
    Ok(outcome("smoluchowski_truncated_mass", worst, "<= 1e-12", worst <= 1e-12))
}

fn cutoff() -> perfhom_core::Result<Outcome> {
    let mut pairs = Vec::new();
    for eps in [0.25, 0.125, 0.0625] {
        let mesh = Mesh::perforated(&PerforatedDomain::new(eps, CellGeometry::default())?, 8)?;
        pairs.push((eps, CutoffNorms::measure(&mesh, eps).one_minus_l2));
    }
    let (slope, _) = fit_rate(&pairs)?;
    Ok(outcome("cutoff_slope", slope, "0.5 +- 0.15", (slope - 0.5).abs() <= 0.15))
}

fn manufactured() -> perfhom_core::Result<Outcome> {
    let exact = |p: [f64; 2]| (PI * p[0]).cos() * (PI * p[1]).cos();
    let mut pairs = Vec::new();
    for cells in [8, 16, 32] {
        let mesh = Mesh::unit_square(cells);
        let a = assemble_stiffness(&mesh, &|_| [[1.0, 0.0], [0.0, 1.0]], Scale::Cell)?;
        let b = assemble_load(&mesh, |_, _, x| 2.0 * PI * PI * exact(x));
        let uh = solve_cg(&a, &b, None, &CgOptions::zero_mean())?.into_converged()?;
        let w = GAUSS_WEIGHT * mesh.h() * mesh.h();
        let mut err = 0.0;
        for (ei, e) in mesh.elements().iter().enumerate() {
            let ev = element_values(&mesh, &uh, ei);
            for p in GAUSS_POINTS {
                let x = [e.origin[0] + p[0] * mesh.h(), e.origin[1] + p[1] * mesh.h()];
                err += w * (q1::interpolate(ev, p) - exact(x)).powi(2);
            }
        }
        pairs.push((mesh.h(), err.sqrt()));
    }
    let (slope, _) = fit_rate(&pairs)?;
    Ok(outcome("fem_l2_slope", slope, "[1.8, 2.2]", (1.8..=2.2).contains(&slope)))
}

fn positivity() -> perfhom_core::Result<Outcome> {
    let mesh = Mesh::perforated(&PerforatedDomain::new(0.25, CellGeometry::default())?, 8)?;
    let grid = TimeConfig::default().grid(mesh.h())?;
    let run = run_micro(&mesh, &Physics::default_for(3), &InitialData::default_for(3), grid)?;
    let m = run.diagnostics.min_value;
    Ok(outcome("micro_positivity_min", m, ">= -1e-10", m >= -1e-10))
}

fn paired_trivial() -> perfhom_core::Result<Outcome> {
    let mut phys = Physics::default_for(2);
    phys.params.kappa = TensorFieldSpec::constant(2.0);
    phys.params.d = vec![TensorFieldSpec::constant(1.0); 2];
    let cell = CellGeometry::without_hole();
    let micro_mesh = Mesh::perforated(&PerforatedDomain::new(0.25, cell.clone())?, 8)?;
    let macro_mesh = Mesh::unit_square(micro_mesh.cells_per_axis());
    let cp = CellProblems::solve(&cell, 8, &phys.params, IndexConvention::Symmetric)?;
    let grid = TimeConfig {
        t_end: 0.02,
        ..TimeConfig::default()
    }
    .grid(micro_mesh.h())?;
    let init = InitialData::default_for(2);
    let a = run_micro(&micro_mesh, &phys, &init, grid)?;
    let b = run_macro(&macro_mesh, &phys, &cp.effective, MacroExchange::default(), &init, grid)?;
    let last_a = a.snapshots.last().expect("snapshots");
    let last_b = b.snapshots.last().expect("snapshots");
    let diff = last_a
        .fields()
        .zip(last_b.fields())
        .take(3)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max);
    Ok(outcome("paired_micro_macro", diff, "<= 1e-8", diff <= 1e-8))
}

fn oscillation() -> perfhom_core::Result<Outcome> {
    let t = pep_diagnostic(&ScalarFieldSpec::trig(2.0, 1.0), &CellGeometry::default(), &[0.25, 0.125, 0.0625], 8)?;
    Ok(outcome("oscillation_ratio_growth", t.max_growth, "<= 0.2", t.max_growth <= 0.2))
}

const CHECKS: [Check; 8] = [
    laminate,
    trivial_cell,
    smoluchowski_mass,
    cutoff,
    manufactured,
    positivity,
    paired_trivial,
    oscillation,
];

pub fn suite() -> Vec<Result<Outcome, perfhom_core::Error>> {
    CHECKS.iter().map(|c| c()).collect()
}

pub fn run(out: &Path) -> Result<Value, CliError> {
    let mut outcomes = Vec::new();
    for r in suite() {
        outcomes.push(r.map_err(CliError::from)?);
    }
    write_json(&out.join("check.json"), &outcomes)?;
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    for o in &outcomes {
        println!("{} {} = {:.6e} ({})", if o.passed { "PASS" } else { "FAIL" }, o.name, o.value, o.limit);
    }
    if failed.is_empty() {
        Ok(json!({"passed": outcomes.len()}))
    } else {
        Err(CliError::CheckFailed(failed.join(", ")))
    }
}
