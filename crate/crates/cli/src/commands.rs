use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use perfhom_core::corrector::{run_epsilon, ConvergenceReport};
use perfhom_core::geometry::{Mesh, PerforatedDomain};
use perfhom_core::homogenized::run_macro;
use perfhom_core::micro::run_micro;

use crate::config::{Mode, Resolved};
use crate::output::{heatmap_svg, points_csv, rates_svg, state_csv, surface_csv, write, write_json};
use crate::CliError;

pub fn dispatch(mode: Mode, r: &Resolved, out: &Path, svg: Option<&Path>) -> Result<Value, CliError> {
    match mode {
        Mode::Cell => cell(r, out, svg),
        Mode::Micro => micro(r, out, svg),
        Mode::Macro => homogenized(r, out, svg),
        Mode::Correct => correct(r, out, svg),
        Mode::Check => crate::check::run(out),
    }
}

fn core(e: perfhom_core::Error) -> CliError {
    CliError::from(e)
}

fn cell(r: &Resolved, out: &Path, svg: Option<&Path>) -> Result<Value, CliError> {
    let cells = r.study.solve_cells().map_err(core)?;
    let cell = &r.study.cell;
    let report = json!({
        "effective": cells.effective,
        "cell": {
            "pore_area": cell.pore_area(),
            "surface_measure": cell.surface_measure(),
            "robin_measure": cell.robin_measure(),
            "resolution": r.study.cell_resolution,
        },
        "corrector_h1": {
            "theta": [cells.theta.h1_norm(0), cells.theta.h1_norm(1)],
            "species": cells.species.iter().map(|s| [s.h1_norm(0), s.h1_norm(1)]).collect::<Vec<_>>(),
        },
    });
    write_json(&out.join("effective.json"), &report)?;
    let mesh = cells.theta.mesh();
    write(
        &out.join("cell_theta.csv"),
        &points_csv(
            mesh.nodes(),
            &[("chi1".into(), cells.theta.corrector(0)), ("chi2".into(), cells.theta.corrector(1))],
        ),
    )?;
    if let Some(path) = svg {
        write(path, &heatmap_svg(mesh, cells.theta.corrector(0), "cell function chi1"))?;
    }
    Ok(json!({ "K": cells.effective.k }))
}

fn micro_mesh(r: &Resolved, eps: f64) -> Result<Mesh, CliError> {
    let domain = PerforatedDomain::new(eps, r.study.cell.clone()).map_err(|e| CliError::from_core("epsilon", e))?;
    Mesh::perforated(&domain, r.study.n_per_cell).map_err(|e| CliError::from_core("n_per_cell", e))
}

fn micro(r: &Resolved, out: &Path, svg: Option<&Path>) -> Result<Value, CliError> {
    let mesh = micro_mesh(r, r.epsilon)?;
    let grid = r.study.time.grid(mesh.h()).map_err(|e| CliError::from_core("time", e))?;
    let run = run_micro(&mesh, &r.study.physics, &r.study.initial, grid).map_err(core)?;
    for (k, s) in run.snapshots.iter().enumerate() {
        write(&out.join(format!("micro_{k:04}.csv")), &state_csv(&mesh, &s.theta, &s.u))?;
        write(&out.join(format!("surface_{k:04}.csv")), &surface_csv(&mesh, &s.v))?;
    }
    let times: Vec<f64> = run.snapshots.iter().map(|s| s.t).collect();
    write_json(
        &out.join("diagnostics.json"),
        &json!({"grid": grid, "times": times, "diagnostics": run.diagnostics, "nodes": mesh.n_nodes()}),
    )?;
    if let Some(path) = svg {
        let last = run.snapshots.last().expect("at least one snapshot");
        write(path, &heatmap_svg(&mesh, &last.theta, "micro theta(T)"))?;
    }
    Ok(json!({"snapshots": run.snapshots.len(), "positivity_ok": run.diagnostics.positivity_ok, "min_value": run.diagnostics.min_value}))
}

fn homogenized(r: &Resolved, out: &Path, svg: Option<&Path>) -> Result<Value, CliError> {
    let cells = r.study.solve_cells().map_err(core)?;
    let cells_per_axis = micro_mesh(r, r.epsilon)?.cells_per_axis();
    let mesh = Mesh::unit_square(cells_per_axis);
    let grid = r.study.time.grid(mesh.h()).map_err(|e| CliError::from_core("time", e))?;
    let run = run_macro(&mesh, &r.study.physics, &cells.effective, r.study.exchange, &r.study.initial, grid)
        .map_err(core)?;
    write_json(&out.join("effective.json"), &json!({ "effective": cells.effective }))?;
    for (k, s) in run.snapshots.iter().enumerate() {
        let mut cols: Vec<(String, &[f64])> = vec![("theta".into(), s.theta.as_slice())];
        for (i, ui) in s.u.iter().enumerate() {
            cols.push((format!("u{}", i + 1), ui.as_slice()));
        }
        for (i, vi) in s.v.iter().enumerate() {
            cols.push((format!("v{}", i + 1), vi.as_slice()));
        }
        write(&out.join(format!("macro_{k:04}.csv")), &points_csv(mesh.nodes(), &cols))?;
    }
    let times: Vec<f64> = run.snapshots.iter().map(|s| s.t).collect();
    write_json(
        &out.join("diagnostics.json"),
        &json!({"grid": grid, "times": times, "diagnostics": run.diagnostics, "nodes": mesh.n_nodes()}),
    )?;
    if let Some(path) = svg {
        let last = run.snapshots.last().expect("at least one snapshot");
        write(path, &heatmap_svg(&mesh, &last.theta, "homogenized theta(T)"))?;
    }
    Ok(json!({"snapshots": run.snapshots.len(), "positivity_ok": run.diagnostics.positivity_ok}))
}

fn correct(r: &Resolved, out: &Path, svg: Option<&Path>) -> Result<Value, CliError> {
    if r.epsilon_list.len() < 3 {
        return Err(CliError::validation(
            "epsilon_list",
            format!("need at least 3 distinct values, got {}", r.epsilon_list.len()),
        ));
    }
    let cells = r.study.solve_cells().map_err(core)?;
    let run_one = |&eps: &f64| -> Result<_, CliError> {
        let rec = run_epsilon(&r.study, &cells, eps).map_err(core)?;
        let dir = out.join(format!("eps_1_{}", (1.0 / eps).round() as usize));
        write_json(&dir.join("record.json"), &rec)?;
        Ok(rec)
    };
    let records: Vec<_> = if r.config.run.deterministic {
        r.epsilon_list.iter().map(run_one).collect::<Result<_, _>>()?
    } else {
        r.epsilon_list.par_iter().map(run_one).collect::<Result<_, _>>()?
    };
    let report = ConvergenceReport::new(r.study.preparation, records).map_err(core)?;
    write_json(&out.join("report.json"), &report)?;
    write(&out.join("rates.csv"), &report.rates_csv())?;
    if let Some(path) = svg {
        write(path, &rates_svg(&report))?;
    }
    let slope = |x: &Option<perfhom_core::corrector::Rate>| x.map(|r| r.slope);
    Ok(json!({
        "slope_w1_sq": slope(&report.rates.w1_sq),
        "slope_w2_int": slope(&report.rates.w2_int),
        "slope_surf_sq": slope(&report.rates.surf_sq),
    }))
}
