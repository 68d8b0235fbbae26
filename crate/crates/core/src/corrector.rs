//! Macroscopic reconstructions, first-order correctors, the error norms of the
//! corrector estimate, ε-sweeps and rate fitting.

use serde::{Deserialize, Serialize};

use crate::cell::{eval_corrector, CellProblems, CellSolution, IndexConvention};
use crate::coefficients::{cutoff_value, CutoffNorms, ScalarFieldSpec};
use crate::error::{Error, Result};
use crate::fem::function::{element_values, h1_seminorm_sq, l2_norm_sq, patch_gradient};
use crate::fem::{q1, boundary_weights, Scale};
use crate::geometry::{CellGeometry, Mesh, PerforatedDomain, SurfacePart};
use crate::homogenized::{init_macro, MacroExchange, MacroSolver, MacroState};
use crate::micro::{init_micro, MicroSolver, MicroState, Physics};
use crate::time::{InitialData, TimeConfig};

/// Bilinear evaluation of macro fields at the micro nodes, plus the cell
/// functions sampled at x/ε.
pub struct Transfer<'a> {
    micro: &'a Mesh,
    macro_mesh: &'a Mesh,
    eps: f64,
    loc: Vec<(usize, [f64; 2])>,
    theta_cell: Vec<[f64; 2]>,
    species_cell: Vec<Vec<[f64; 2]>>,
    cutoff: Vec<f64>,
}

fn sample_cell(cs: &CellSolution, mesh: &Mesh, eps: f64) -> Result<Vec<[f64; 2]>> {
    mesh.nodes().iter().map(|&x| eval_corrector(cs, x, eps).map(|(v, _)| v)).collect()
}

impl<'a> Transfer<'a> {
    pub fn new(micro: &'a Mesh, macro_mesh: &'a Mesh, cells: &CellProblems) -> Result<Self> {
        let eps = micro.epsilon();
        let loc = micro
            .nodes()
            .iter()
            .map(|&p| macro_mesh.locate(p).ok_or(Error::NodeOutsideSource(p[0], p[1])))
            .collect::<Result<Vec<_>>>()?;
        let theta_cell = sample_cell(&cells.theta, micro, eps)?;
        let mut species_cell: Vec<Vec<[f64; 2]>> = Vec::with_capacity(cells.species.len());
        for (i, cs) in cells.species.iter().enumerate() {
            let same = |a: &CellSolution, b: &CellSolution| a.corrector(0) == b.corrector(0) && a.corrector(1) == b.corrector(1);
            let v = if same(cs, &cells.theta) {
                theta_cell.clone()
            } else if let Some(k) = (0..i).find(|&k| same(&cells.species[k], cs)) {
                species_cell[k].clone()
            } else {
                sample_cell(cs, micro, eps)?
            };
            species_cell.push(v);
        }
        Ok(Self {
            micro,
            macro_mesh,
            eps,
            loc,
            theta_cell,
            species_cell,
            cutoff: micro.nodes().iter().map(|&p| cutoff_value(p, eps)).collect(),
        })
    }

    pub fn micro_mesh(&self) -> &'a Mesh {
        self.micro
    }

    fn at_micro(&self, v: &[f64]) -> Vec<f64> {
        self.loc
            .iter()
            .map(|&(e, xi)| q1::interpolate(element_values(self.macro_mesh, v, e), xi))
            .collect()
    }

    /// Returns (f₀^ε, f₁^ε, f₁^ε with cut-off) for a macro field f.
    fn first_order(&self, f: &[f64], cell: &[[f64; 2]]) -> [Vec<f64>; 3] {
        let f0 = self.at_micro(f);
        let g = patch_gradient(self.macro_mesh, f);
        let gx: Vec<f64> = g.iter().map(|v| v[0]).collect();
        let gy: Vec<f64> = g.iter().map(|v| v[1]).collect();
        let (gx, gy) = (self.at_micro(&gx), self.at_micro(&gy));
        let mut f1 = f0.clone();
        let mut fc = f0.clone();
        for k in 0..f0.len() {
            let c = self.eps * (cell[k][0] * gx[k] + cell[k][1] * gy[k]);
            f1[k] += c;
            fc[k] += self.cutoff[k] * c;
        }
        [f0, f1, fc]
    }

    pub fn reconstruct(&self, m: &MacroState) -> Reconstruction {
        let [theta0, theta1, theta1_cut] = self.first_order(&m.theta, &self.theta_cell);
        let (mut u0, mut u1, mut u1_cut) = (Vec::new(), Vec::new(), Vec::new());
        for (i, ui) in m.u.iter().enumerate() {
            let [a, b, c] = self.first_order(ui, &self.species_cell[i]);
            u0.push(a);
            u1.push(b);
            u1_cut.push(c);
        }
        let v0 = m
            .v
            .iter()
            .map(|vi| {
                self.micro
                    .surface_nodes()
                    .iter()
                    .map(|&n| {
                        let (e, xi) = self.loc[n];
                        q1::interpolate(element_values(self.macro_mesh, vi, e), xi)
                    })
                    .collect()
            })
            .collect();
        Reconstruction {
            t: m.t,
            theta0,
            theta1,
            theta1_cut,
            u0,
            u1,
            u1_cut,
            v0,
        }
    }
}

/// Homogenized fields on Ω^ε: zeroth order, first order, and first order with
/// the corrector multiplied by the cut-off m^ε. `v0` lives on the surface nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub t: f64,
    pub theta0: Vec<f64>,
    pub theta1: Vec<f64>,
    pub theta1_cut: Vec<f64>,
    pub u0: Vec<Vec<f64>>,
    pub u1: Vec<Vec<f64>>,
    pub u1_cut: Vec<Vec<f64>>,
    pub v0: Vec<Vec<f64>>,
}

/// Instantaneous error quantities at one time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Instant {
    /// ‖θ^ε−θ₀^ε‖² + Σ‖uᵢ^ε−u_{i,0}^ε‖²
    pub w1: f64,
    /// ‖∇(θ^ε−θ₁^ε)‖² + Σ‖∇(uᵢ^ε−u_{i,1}^ε)‖²
    pub w2: f64,
    pub w2_cut: f64,
    /// ε Σ‖vᵢ^ε−vᵢ⁰‖²_{Γ^ε}
    pub surf: f64,
    /// Σ‖vᵢ^ε−vᵢ⁰‖²_{Γ^ε}
    pub surf_plain: f64,
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Error quantities between a micro state and a reconstruction on the same mesh.
pub fn instant_errors(mesh: &Mesh, s: &MicroState, r: &Reconstruction) -> Result<Instant> {
    let n = mesh.n_nodes();
    if s.theta.len() != n || r.theta0.len() != n {
        return Err(Error::MeshMismatch(s.theta.len(), r.theta0.len()));
    }
    if s.u.len() != r.u0.len() {
        return Err(Error::MeshMismatch(s.u.len(), r.u0.len()));
    }
    let mut out = Instant {
        w1: l2_norm_sq(mesh, &diff(&s.theta, &r.theta0)),
        w2: h1_seminorm_sq(mesh, &diff(&s.theta, &r.theta1)),
        w2_cut: h1_seminorm_sq(mesh, &diff(&s.theta, &r.theta1_cut)),
        ..Instant::default()
    };
    for i in 0..s.u.len() {
        out.w1 += l2_norm_sq(mesh, &diff(&s.u[i], &r.u0[i]));
        out.w2 += h1_seminorm_sq(mesh, &diff(&s.u[i], &r.u1[i]));
        out.w2_cut += h1_seminorm_sq(mesh, &diff(&s.u[i], &r.u1_cut[i]));
    }
    let weights = boundary_weights(mesh, SurfacePart::Gamma, &|_| 1.0, Scale::for_mesh(mesh))?;
    for i in 0..s.v.len() {
        out.surf_plain += mesh
            .surface_nodes()
            .iter()
            .enumerate()
            .map(|(k, &node)| weights[node] * (s.v[i][k] - r.v0[i][k]).powi(2))
            .sum::<f64>();
    }
    out.surf = mesh.epsilon() * out.surf_plain;
    Ok(out)
}

/// Corrector-estimate quantities for one ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub epsilon: f64,
    /// ∫₀ᵀ ‖θ^ε−θ⁰‖² + Σ‖uᵢ^ε−uᵢ⁰‖² dt
    pub w1_sq: f64,
    /// The same quantity at t = T.
    pub w1_final: f64,
    /// The same quantity at t = 0.
    pub w1_initial: f64,
    /// ∫₀ᵀ ‖∇(θ^ε−θ₁^ε)‖² + Σ‖∇(uᵢ^ε−u_{i,1}^ε)‖² dt
    pub w2_int: f64,
    /// w2_int with the corrector multiplied by m^ε.
    pub w2_cutoff_int: f64,
    /// ε ∫₀ᵀ Σ‖vᵢ^ε−vᵢ⁰‖²_{Γ^ε} dt
    pub surf_sq: f64,
    /// Initial mismatch, bulk plus surface.
    pub w0: f64,
    pub cutoff_one_minus_l2: f64,
    pub cutoff_eps_grad_l2: f64,
    pub steps: usize,
    pub micro_nodes: usize,
}

/// Trapezoidal time integration of [`Instant`] values.
#[derive(Debug, Clone, Default)]
pub struct NormAccumulator {
    last: Option<(f64, Instant)>,
    first: Option<Instant>,
    w1: f64,
    w2: f64,
    w2_cut: f64,
    surf: f64,
    steps: usize,
}

impl NormAccumulator {
    pub fn push(&mut self, t: f64, e: Instant) {
        if let Some((t0, p)) = self.last {
            let h = 0.5 * (t - t0);
            self.w1 += h * (p.w1 + e.w1);
            self.w2 += h * (p.w2 + e.w2);
            self.w2_cut += h * (p.w2_cut + e.w2_cut);
            self.surf += h * (p.surf + e.surf);
            self.steps += 1;
        } else {
            self.first = Some(e);
        }
        self.last = Some((t, e));
    }

    pub fn finish(&self, mesh: &Mesh) -> ErrorRecord {
        let first = self.first.unwrap_or_default();
        let last = self.last.map(|l| l.1).unwrap_or_default();
        let eps = mesh.epsilon();
        let cut = CutoffNorms::measure(mesh, eps);
        ErrorRecord {
            epsilon: eps,
            w1_sq: self.w1,
            w1_final: last.w1,
            w1_initial: first.w1,
            w2_int: self.w2,
            w2_cutoff_int: self.w2_cut,
            surf_sq: self.surf,
            w0: first.w1 + first.surf_plain,
            cutoff_one_minus_l2: cut.one_minus_l2,
            cutoff_eps_grad_l2: cut.eps_grad_l2,
            steps: self.steps,
            micro_nodes: mesh.n_nodes(),
        }
    }
}

/// Error norms along a stored pair of trajectories (trapezoid over the stored times).
pub fn corrector_norms(mesh: &Mesh, micro: &[MicroState], recon: &[Reconstruction]) -> Result<ErrorRecord> {
    if micro.len() != recon.len() {
        return Err(Error::MeshMismatch(micro.len(), recon.len()));
    }
    let mut acc = NormAccumulator::default();
    for (s, r) in micro.iter().zip(recon) {
        acc.push(s.t, instant_errors(mesh, s, r)?);
    }
    Ok(acc.finish(mesh))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Preparation {
    /// Micro and macro start from the same smooth data.
    #[default]
    Well,
    /// The micro data carry an extra amplitude·ε^{1/4} cosine mode, so w0 ∝ ε^{1/2}.
    Ill,
}

/// Everything a sweep needs apart from the ε list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub cell: CellGeometry,
    pub n_per_cell: usize,
    /// Subdivisions of the cell mesh for the cell problems.
    pub cell_resolution: usize,
    pub physics: Physics,
    pub time: TimeConfig,
    pub initial: InitialData,
    pub exchange: MacroExchange,
    pub convention: IndexConvention,
    pub preparation: Preparation,
    pub ill_amplitude: f64,
}

impl StudyConfig {
    pub fn default_for(species: usize) -> Self {
        Self {
            cell: CellGeometry::default(),
            n_per_cell: 16,
            cell_resolution: 16,
            physics: Physics::default_for(species),
            time: TimeConfig::default(),
            initial: InitialData::default_for(species),
            exchange: MacroExchange::default(),
            convention: IndexConvention::default(),
            preparation: Preparation::Well,
            ill_amplitude: 0.2,
        }
    }

    pub fn solve_cells(&self) -> Result<CellProblems> {
        CellProblems::solve(&self.cell, self.cell_resolution, &self.physics.params, self.convention)
    }

    pub fn micro_initial(&self, eps: f64) -> InitialData {
        match self.preparation {
            Preparation::Well => self.initial.clone(),
            Preparation::Ill => self.initial.perturbed(self.ill_amplitude * eps.powf(0.25)),
        }
    }
}

/// Runs micro and homogenized problems in lockstep at one ε and accumulates
/// the error norms at every step.
pub fn run_epsilon(cfg: &StudyConfig, cells: &CellProblems, eps: f64) -> Result<ErrorRecord> {
    let domain = PerforatedDomain::new(eps, cfg.cell.clone())?;
    let micro_mesh = Mesh::perforated(&domain, cfg.n_per_cell)?;
    let macro_mesh = Mesh::unit_square(micro_mesh.cells_per_axis());
    let grid = cfg.time.grid(micro_mesh.h())?;
    let transfer = Transfer::new(&micro_mesh, &macro_mesh, cells)?;
    let mut micro = MicroSolver::new(&micro_mesh, &cfg.physics)?;
    let mut homog = MacroSolver::new(&macro_mesh, &cfg.physics, &cells.effective, cfg.exchange)?;
    let micro_init = cfg.micro_initial(eps);
    micro_init.validate(cfg.physics.species())?;
    cfg.initial.validate(cfg.physics.species())?;
    let mut s = init_micro(&micro_mesh, &micro_init)?;
    let mut m = init_macro(&macro_mesh, &cfg.initial)?;
    let mut acc = NormAccumulator::default();
    acc.push(0.0, instant_errors(&micro_mesh, &s, &transfer.reconstruct(&m))?);
    for _ in 0..grid.n_steps {
        s = micro.advance(&s, grid.dt)?.0;
        m = homog.advance(&m, grid.dt)?.0;
        acc.push(s.t, instant_errors(&micro_mesh, &s, &transfer.reconstruct(&m))?);
    }
    Ok(acc.finish(&micro_mesh))
}

/// Least-squares slope of log(value) against log(ε), and C = max value/ε^slope.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<(f64, f64)> {
    if pairs.len() < 3 {
        return Err(Error::TooFewPoints(pairs.len()));
    }
    if let Some(&(e, v)) = pairs.iter().find(|(e, v)| !(*e > 0.0 && *v > 0.0 && v.is_finite())) {
        return Err(Error::NonPositiveValue(if e > 0.0 { v } else { e }));
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("epsilon", "all ε values coincide"));
    }
    let slope = sxy / sxx;
    let constant = pairs.iter().map(|&(e, v)| v / e.powf(slope)).fold(0.0, f64::max);
    Ok((slope, constant))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub slope: f64,
    pub constant: f64,
}

fn rate_of(records: &[ErrorRecord], f: impl Fn(&ErrorRecord) -> f64) -> Option<Rate> {
    let pairs: Vec<(f64, f64)> = records.iter().map(|r| (r.epsilon, f(r))).collect();
    fit_rate(&pairs).ok().map(|(slope, constant)| Rate { slope, constant })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub w1_sq: Option<Rate>,
    pub w2_int: Option<Rate>,
    pub surf_sq: Option<Rate>,
    /// The measured γ-branch: slope of the initial mismatch.
    pub w0: Option<Rate>,
    pub w2_cutoff_int: Option<Rate>,
    pub cutoff_one_minus_l2: Option<Rate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub preparation: Preparation,
    pub records: Vec<ErrorRecord>,
    pub rates: Rates,
    /// Largest of ‖1−m^ε‖/√ε and ε‖∇m^ε‖/√ε over the sweep.
    pub cutoff_constant: f64,
}

impl ConvergenceReport {
    /// Sorts by decreasing ε and fits every quantity. Quantities that are zero
    /// somewhere get no rate.
    pub fn new(preparation: Preparation, mut records: Vec<ErrorRecord>) -> Result<Self> {
        if records.len() < 3 {
            return Err(Error::TooFewPoints(records.len()));
        }
        records.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        if records.windows(2).any(|w| w[0].epsilon == w[1].epsilon) {
            return Err(Error::invalid("epsilon", "values must be distinct"));
        }
        let rates = Rates {
            w1_sq: rate_of(&records, |r| r.w1_sq),
            w2_int: rate_of(&records, |r| r.w2_int),
            surf_sq: rate_of(&records, |r| r.surf_sq),
            w0: rate_of(&records, |r| r.w0),
            w2_cutoff_int: rate_of(&records, |r| r.w2_cutoff_int),
            cutoff_one_minus_l2: rate_of(&records, |r| r.cutoff_one_minus_l2),
        };
        let cutoff_constant = records
            .iter()
            .map(|r| r.cutoff_one_minus_l2.max(r.cutoff_eps_grad_l2) / r.epsilon.sqrt())
            .fold(0.0, f64::max);
        Ok(Self {
            preparation,
            records,
            rates,
            cutoff_constant,
        })
    }

    /// `epsilon,w1_sq,w2_int,surf_sq,w0` with 17 significant digits.
    pub fn rates_csv(&self) -> String {
        let mut out = String::from("epsilon,w1_sq,w2_int,surf_sq,w0\n");
        for r in &self.records {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.epsilon, r.w1_sq, r.w2_int, r.surf_sq, r.w0
            ));
        }
        out
    }
}

/// Solves the cell problems once and runs every ε in turn.
pub fn convergence_study(cfg: &StudyConfig, eps_list: &[f64]) -> Result<ConvergenceReport> {
    if eps_list.len() < 3 {
        return Err(Error::TooFewPoints(eps_list.len()));
    }
    let cells = cfg.solve_cells()?;
    let records = eps_list.iter().map(|&e| run_epsilon(cfg, &cells, e)).collect::<Result<Vec<_>>>()?;
    ConvergenceReport::new(cfg.preparation, records)
}

/// One row of the oscillation diagnostic ‖p^ε − p̄‖ ≤ Cε^{1/2}‖p^ε‖_{H¹}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PepRow {
    pub epsilon: f64,
    pub mean: f64,
    pub distance: f64,
    pub h1_norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PepTable {
    pub rows: Vec<PepRow>,
    pub sup_ratio: f64,
    /// Largest growth r(ε_{k+1})/r(ε_k) − 1 over the decreasing ε list.
    pub max_growth: f64,
    /// (max r − min r)/max r.
    pub spread: f64,
}

/// p^ε(x) = p(x/ε) on Ω^ε against its Y₁-average p̄.
pub fn pep_diagnostic(spec: &ScalarFieldSpec, cell: &CellGeometry, eps_list: &[f64], n_per_cell: usize) -> Result<PepTable> {
    let cell_mesh = Mesh::cell(cell, n_per_cell)?;
    let mean = cell_average_of(&cell_mesh, spec);
    let mut eps_sorted = eps_list.to_vec();
    eps_sorted.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::with_capacity(eps_sorted.len());
    for eps in eps_sorted {
        let mesh = Mesh::perforated(&PerforatedDomain::new(eps, cell.clone())?, n_per_cell)?;
        let p: Vec<f64> = mesh.nodes().iter().map(|&x| spec.eval([x[0] / eps, x[1] / eps])).collect();
        let d: Vec<f64> = p.iter().map(|v| v - mean).collect();
        let distance = l2_norm_sq(&mesh, &d).sqrt();
        let h1_norm = (l2_norm_sq(&mesh, &p) + h1_seminorm_sq(&mesh, &p)).sqrt();
        let ratio = if distance == 0.0 { 0.0 } else { distance / (eps.sqrt() * h1_norm) };
        rows.push(PepRow {
            epsilon: eps,
            mean,
            distance,
            h1_norm,
            ratio,
        });
    }
    let sup_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let max_growth = rows
        .windows(2)
        .map(|w| if w[0].ratio > 0.0 { w[1].ratio / w[0].ratio - 1.0 } else { 0.0 })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(PepTable {
        rows,
        sup_ratio,
        max_growth,
        spread: if sup_ratio > 0.0 { (sup_ratio - min_ratio) / sup_ratio } else { 0.0 },
    })
}

fn cell_average_of(mesh: &Mesh, spec: &ScalarFieldSpec) -> f64 {
    use crate::fem::assembly::element_point;
    use crate::fem::q1::{GAUSS_POINTS, GAUSS_WEIGHT};
    let w = GAUSS_WEIGHT * mesh.h() * mesh.h();
    let s: f64 = (0..mesh.elements().len())
        .flat_map(|e| GAUSS_POINTS.map(|p| spec.eval(element_point(mesh, e, p))))
        .map(|v| w * v)
        .sum();
    s / mesh.area()
}

/// ε‖φ‖²_{Γ^ε} / (‖φ‖² + ε²‖∇φ‖²) for a smooth φ, the scaled trace inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epsilon: f64,
    pub ratio: f64,
}

pub fn trace_diagnostic(cell: &CellGeometry, eps_list: &[f64], n_per_cell: usize) -> Result<Vec<TraceRow>> {
    let phi = InitialData::default_for(1).theta;
    eps_list
        .iter()
        .map(|&eps| {
            let mesh = Mesh::perforated(&PerforatedDomain::new(eps, cell.clone())?, n_per_cell)?;
            let v = phi.sample(mesh.nodes())?;
            let surface = crate::fem::function::boundary_l2_sq(&mesh, &v, SurfacePart::Gamma);
            let bulk = l2_norm_sq(&mesh, &v) + eps * eps * h1_seminorm_sq(&mesh, &v);
            Ok(TraceRow {
                epsilon: eps,
                ratio: eps * surface / bulk,
            })
        })
        .collect()
}
