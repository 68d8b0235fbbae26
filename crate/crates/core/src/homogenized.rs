//! IMEX-Euler integration of the homogenized system on the unperforated square.
//!
//! Same splitting as [`crate::micro`]: constant-tensor diffusion, heat loss and
//! exchange implicit; mollified cross terms and coagulation explicit; the bulk
//! deposit ODE implicit nodewise.

use serde::{Deserialize, Serialize};

use crate::cell::EffectiveCoefficients;
use crate::coefficients::{smoluchowski_rate_into, Mollifier};
use crate::error::{Error, Result};
use crate::fem::function::{gauss_gradients, h1_seminorm_sq, l2_norm_sq};
use crate::fem::q1::{self, GAUSS_POINTS, GAUSS_WEIGHT};
use crate::fem::{assemble_stiffness, lumped_mass, CsrMatrix, Scale, Tensor2};
use crate::geometry::Mesh;
use crate::micro::Physics;
use crate::time::{
    check_blow_up, dot2, halving_level, mat_vec, scaled_lumped, solve, vector_at_gauss, Diagnostics, InitialData,
    TimeGrid,
};

/// Rates used in the bulk deposit ODE ∂ₜvᵢ⁰ = αᵢuᵢ⁰ − βᵢvᵢ⁰.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacroExchange {
    /// αᵢ, βᵢ are the surface means of aᵢ, bᵢ, so vᵢ⁰ is the limit of the surface field.
    #[default]
    SurfaceAverage,
    /// αᵢ = Aᵢ, βᵢ = Bᵢ.
    Paper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroState {
    pub t: f64,
    pub theta: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl MacroState {
    pub fn fields(&self) -> impl Iterator<Item = &[f64]> {
        std::iter::once(self.theta.as_slice())
            .chain(self.u.iter().map(|x| x.as_slice()))
            .chain(self.v.iter().map(|x| x.as_slice()))
    }
}

pub fn init_macro(mesh: &Mesh, init: &InitialData) -> Result<MacroState> {
    Ok(MacroState {
        t: 0.0,
        theta: init.theta.sample(mesh.nodes())?,
        u: init.u.iter().map(|f| f.sample(mesh.nodes())).collect::<Result<_>>()?,
        v: init.v.iter().map(|f| f.sample(mesh.nodes())).collect::<Result<_>>()?,
    })
}

fn validate_tensor(name: &str, t: &Tensor2) -> Result<()> {
    let sym = 0.5 * (t[0][1] + t[1][0]);
    let tr = t[0][0] + t[1][1];
    let det = t[0][0] * t[1][1] - sym * sym;
    if !t.iter().flatten().all(|x| x.is_finite()) {
        return Err(Error::invalid(name, "non-finite entry"));
    }
    if tr <= 0.0 || det <= 0.0 {
        return Err(Error::NonElliptic(format!("effective {name} = {t:?}")));
    }
    Ok(())
}

/// Symmetric part; the antisymmetric part of a constant tensor drops out of the divergence.
fn sym(t: &Tensor2) -> Tensor2 {
    let o = 0.5 * (t[0][1] + t[1][0]);
    [[t[0][0], o], [o, t[1][1]]]
}

struct Systems {
    dt: f64,
    theta: CsrMatrix,
    u: Vec<CsrMatrix>,
}

pub struct MacroSolver<'m> {
    mesh: &'m Mesh,
    physics: Physics,
    eff: EffectiveCoefficients,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    mollifier: Mollifier,
    mass: Vec<f64>,
    a_k: CsrMatrix,
    a_d: Vec<CsrMatrix>,
    shared_t: bool,
    t_max: f64,
    f_max: f64,
    systems: Vec<Systems>,
}

fn tensor_norm(t: &Tensor2) -> f64 {
    t.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

impl<'m> MacroSolver<'m> {
    pub fn new(mesh: &'m Mesh, physics: &Physics, eff: &EffectiveCoefficients, exchange: MacroExchange) -> Result<Self> {
        physics.validate()?;
        let n = physics.species();
        if [eff.t.len(), eff.d.len(), eff.f.len(), eff.a.len(), eff.b.len()].iter().any(|&l| l != n) {
            return Err(Error::invalid("effective", format!("coefficients do not describe {n} species")));
        }
        validate_tensor("K", &eff.k)?;
        for d in &eff.d {
            validate_tensor("D", d)?;
        }
        let (alpha, beta) = match exchange {
            MacroExchange::SurfaceAverage => (eff.a_surface_mean.clone(), eff.b_surface_mean.clone()),
            MacroExchange::Paper => (eff.a.clone(), eff.b.clone()),
        };
        let k = sym(&eff.k);
        let a_k = assemble_stiffness(mesh, &|_| k, Scale::Cell)?;
        let mut a_d: Vec<CsrMatrix> = Vec::with_capacity(n);
        for i in 0..n {
            let m = match (0..i).find(|&k| eff.d[k] == eff.d[i]) {
                Some(k) => a_d[k].clone(),
                None => {
                    let d = sym(&eff.d[i]);
                    assemble_stiffness(mesh, &|_| d, Scale::Cell)?
                }
            };
            a_d.push(m);
        }
        Ok(Self {
            mesh,
            physics: physics.clone(),
            eff: eff.clone(),
            alpha,
            beta,
            mollifier: Mollifier::new(mesh, &physics.mollifier)?,
            mass: lumped_mass(mesh),
            a_k,
            a_d,
            shared_t: eff.t.windows(2).all(|w| w[0] == w[1]),
            t_max: eff.t.iter().map(tensor_norm).fold(0.0, f64::max),
            f_max: eff.f.iter().map(tensor_norm).fold(0.0, f64::max),
            systems: Vec::new(),
        })
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    fn systems(&mut self, dt: f64) -> &Systems {
        if let Some(k) = self.systems.iter().position(|s| s.dt == dt) {
            return &self.systems[k];
        }
        let diag = |c: f64| CsrMatrix::diagonal_matrix(&self.mass.iter().map(|m| m / dt + c * m).collect::<Vec<_>>());
        let theta = self.a_k.add_scaled(&diag(self.eff.heat_loss_factor), 1.0);
        let u = (0..self.a_d.len())
            .map(|i| {
                let c = self.eff.a[i] - self.eff.b[i] * dt * self.alpha[i] / (1.0 + dt * self.beta[i]);
                self.a_d[i].add_scaled(&diag(c), 1.0)
            })
            .collect();
        self.systems.push(Systems { dt, theta, u });
        self.systems.last().unwrap()
    }

    pub fn step(&mut self, s: &MacroState, dt: f64) -> Result<MacroState> {
        let mesh = self.mesh;
        let n = self.physics.species();
        let grad_theta = gauss_gradients(mesh, &s.theta);
        let gq_theta = vector_at_gauss(mesh, &self.mollifier.gradient(&s.theta));
        // ∇^δ of Σuᵢ when every 𝕋ⁱ agrees, else one per species.
        let gq_u: Vec<Vec<[[f64; 2]; 4]>> = if self.shared_t {
            let mut sum = vec![0.0; mesh.n_nodes()];
            for ui in &s.u {
                sum.iter_mut().zip(ui).for_each(|(a, b)| *a += b);
            }
            vec![vector_at_gauss(mesh, &self.mollifier.gradient(&sum))]
        } else {
            s.u.iter().map(|ui| vector_at_gauss(mesh, &self.mollifier.gradient(ui))).collect()
        };
        let grad_u: Vec<_> = s.u.iter().map(|ui| gauss_gradients(mesh, ui)).collect();

        let mut b_theta = scaled_lumped(&self.mass, dt, &s.theta);
        let mut b_u: Vec<Vec<f64>> = s.u.iter().map(|ui| scaled_lumped(&self.mass, dt, ui)).collect();
        let w = GAUSS_WEIGHT * mesh.h() * mesh.h();
        let shapes = GAUSS_POINTS.map(q1::shape);
        for (ei, e) in mesh.elements().iter().enumerate() {
            for q in 0..4 {
                let src_theta: f64 = gq_u
                    .iter()
                    .enumerate()
                    .map(|(k, g)| dot2(mat_vec(&self.eff.t[k], g[ei][q]), grad_theta[ei][q]))
                    .sum();
                for a in 0..4 {
                    b_theta[e.nodes[a]] += w * shapes[q][a] * src_theta;
                }
                for i in 0..n {
                    let src = dot2(mat_vec(&self.eff.f[i], grad_u[i][ei][q]), gq_theta[ei][q]);
                    for a in 0..4 {
                        b_u[i][e.nodes[a]] += w * shapes[q][a] * src;
                    }
                }
            }
        }
        let beta_coag = &self.physics.smoluchowski;
        let mut si = vec![0.0; n];
        let mut ri = vec![0.0; n];
        for node in 0..mesh.n_nodes() {
            if !beta_coag.is_zero() {
                for i in 0..n {
                    si[i] = s.u[i][node];
                }
                smoluchowski_rate_into(&si, beta_coag, &mut ri);
            }
            for i in 0..n {
                let exchange = self.eff.b[i] * s.v[i][node] / (1.0 + dt * self.beta[i]);
                b_u[i][node] += self.mass[node] * (ri[i] + exchange);
            }
        }

        let (alpha, beta) = (self.alpha.clone(), self.beta.clone());
        let sys = self.systems(dt);
        let theta = solve(&sys.theta, &b_theta, &s.theta)?;
        let mut u = Vec::with_capacity(n);
        for i in 0..n {
            u.push(solve(&sys.u[i], &b_u[i], &s.u[i])?);
        }
        let v = (0..n)
            .map(|i| {
                s.v[i]
                    .iter()
                    .zip(&u[i])
                    .map(|(v, u)| (v + dt * alpha[i] * u) / (1.0 + dt * beta[i]))
                    .collect()
            })
            .collect();
        let next = MacroState {
            t: s.t + dt,
            theta,
            u,
            v,
        };
        check_blow_up(next.fields())?;
        Ok(next)
    }

    pub fn advance(&mut self, s: &MacroState, dt: f64) -> Result<(MacroState, u32)> {
        let speed = self.advective_speed(s);
        let k = halving_level(speed, dt, self.mesh.h());
        let sub = dt / f64::from(1u32 << k);
        let mut cur = self.step(s, sub)?;
        for _ in 1..(1u32 << k) {
            cur = self.step(&cur, sub)?;
        }
        cur.t = s.t + dt;
        Ok((cur, k))
    }

    fn advective_speed(&self, s: &MacroState) -> f64 {
        if self.t_max == 0.0 && self.f_max == 0.0 {
            return 0.0;
        }
        let mut sum = vec![0.0; self.mesh.n_nodes()];
        for ui in &s.u {
            sum.iter_mut().zip(ui).for_each(|(a, b)| *a += b);
        }
        let norm_max = |g: Vec<[f64; 2]>| g.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
        (self.t_max * norm_max(self.mollifier.gradient(&sum)))
            .max(self.f_max * norm_max(self.mollifier.gradient(&s.theta)))
    }

    /// Σᵢ ∫(uᵢ + cᵢvᵢ) with cᵢ = Bᵢ/βᵢ, the weight that the exchange conserves.
    pub fn total_species_mass(&self, s: &MacroState) -> f64 {
        (0..s.u.len())
            .map(|i| {
                let c = if self.beta[i] > 0.0 { self.eff.b[i] / self.beta[i] } else { 0.0 };
                s.u[i].iter().zip(&s.v[i]).zip(&self.mass).map(|((u, v), m)| m * (u + c * v)).sum::<f64>()
            })
            .sum()
    }

    pub(crate) fn record(&self, diag: &mut Diagnostics, prev: Option<(&MacroState, f64)>, s: &MacroState) {
        let mesh = self.mesh;
        diag.max_grad_theta_sq = diag.max_grad_theta_sq.max(h1_seminorm_sq(mesh, &s.theta));
        diag.max_grad_u_sq = diag.max_grad_u_sq.max(s.u.iter().map(|u| h1_seminorm_sq(mesh, u)).sum());
        if let Some((p, dt)) = prev {
            let dq = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| (x - y) / dt).collect() };
            diag.dt_theta_sq_int += dt * l2_norm_sq(mesh, &dq(&s.theta, &p.theta));
            diag.dt_u_sq_int += dt * (0..s.u.len()).map(|i| l2_norm_sq(mesh, &dq(&s.u[i], &p.u[i]))).sum::<f64>();
            diag.dt_v_sq_int += dt * (0..s.v.len()).map(|i| l2_norm_sq(mesh, &dq(&s.v[i], &p.v[i]))).sum::<f64>();
            diag.steps += 1;
        }
        diag.observe_values(s.fields());
    }
}

#[derive(Debug, Clone)]
pub struct MacroRun {
    pub grid: TimeGrid,
    pub snapshots: Vec<MacroState>,
    pub diagnostics: Diagnostics,
}

pub fn run_macro(
    mesh: &Mesh,
    physics: &Physics,
    eff: &EffectiveCoefficients,
    exchange: MacroExchange,
    init: &InitialData,
    grid: TimeGrid,
) -> Result<MacroRun> {
    init.validate(physics.species())?;
    let mut solver = MacroSolver::new(mesh, physics, eff, exchange)?;
    let mut state = init_macro(mesh, init)?;
    let mut diagnostics = Diagnostics::default();
    solver.record(&mut diagnostics, None, &state);
    let mut snapshots = vec![state.clone()];
    for n in 1..=grid.n_steps {
        let (next, k) = solver.advance(&state, grid.dt)?;
        if k > 0 {
            diagnostics.dt_halvings += 1;
        }
        solver.record(&mut diagnostics, Some((&state, grid.dt)), &next);
        state = next;
        if n % grid.snapshot_every == 0 {
            snapshots.push(state.clone());
        }
    }
    Ok(MacroRun {
        grid,
        snapshots,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{CellProblems, IndexConvention};
    use crate::coefficients::{MollifierConfig, PhysicalParams, SmoluchowskiParams};
    use crate::geometry::CellGeometry;

    fn eff_constant(n: usize, a: f64, b: f64, heat: f64) -> EffectiveCoefficients {
        let id = [[1.0, 0.0], [0.0, 1.0]];
        let zero = [[0.0; 2]; 2];
        EffectiveCoefficients {
            k: id,
            t: vec![zero; n],
            d: vec![id; n],
            f: vec![zero; n],
            a: vec![a; n],
            b: vec![b; n],
            heat_loss_factor: heat,
            a_surface_mean: vec![a; n],
            b_surface_mean: vec![b; n],
        }
    }

    fn decoupled(n: usize) -> Physics {
        Physics {
            params: PhysicalParams::decoupled(n, 1.0, 1.0),
            smoluchowski: SmoluchowskiParams::constant(n, 0.0),
            mollifier: MollifierConfig::default(),
        }
    }

    fn grid(dt: f64) -> TimeGrid {
        crate::time::TimeConfig {
            dt: Some(dt),
            t_end: 0.1,
            snapshots: 11,
        }
        .grid(1.0)
        .unwrap()
    }

    #[test]
    fn exchange_equilibrium_is_stationary() {
        let m = Mesh::unit_square(32);
        let (a, b) = (2.0, 0.5);
        let run = run_macro(
            &m,
            &decoupled(2),
            &eff_constant(2, a, b, 0.0),
            MacroExchange::Paper,
            &InitialData::constant(2, 1.0, 1.0, a / b),
            grid(1e-3),
        )
        .unwrap();
        let last = run.snapshots.last().unwrap();
        for i in 0..2 {
            assert!(last.u[i].iter().all(|x| (x - 1.0).abs() <= 1e-12));
            assert!(last.v[i].iter().all(|x| (x - a / b).abs() <= 1e-12));
        }
        assert!(run.diagnostics.dt_u_sq_int <= 1e-12 && run.diagnostics.dt_v_sq_int <= 1e-12);
    }

    #[test]
    fn heat_loss_decays_exponentially() {
        let m = Mesh::unit_square(32);
        let rate = 1.0 / 0.75;
        let run = run_macro(
            &m,
            &decoupled(1),
            &eff_constant(1, 0.0, 0.0, rate),
            MacroExchange::default(),
            &InitialData::constant(1, 1.0, 0.0, 0.0),
            grid(1e-3),
        )
        .unwrap();
        let want = (-rate * 0.1f64).exp();
        let last = run.snapshots.last().unwrap();
        assert!(last.theta.iter().all(|x| (x - want).abs() <= 1e-3));
    }

    #[test]
    fn exchange_conserves_weighted_mass() {
        let m = Mesh::unit_square(32);
        for mode in [MacroExchange::Paper, MacroExchange::SurfaceAverage] {
            let mut eff = eff_constant(1, 8.0 / 3.0, 8.0 / 3.0, 0.0);
            eff.a_surface_mean = vec![1.0];
            eff.b_surface_mean = vec![1.0];
            let mut solver = MacroSolver::new(&m, &decoupled(1), &eff, mode).unwrap();
            let mut s = init_macro(&m, &InitialData::default_for(1)).unwrap();
            for _ in 0..20 {
                let before = solver.total_species_mass(&s);
                s = solver.step(&s, 1e-2).unwrap();
                let after = solver.total_species_mass(&s);
                assert!((after - before).abs() <= 1e-12 * before, "{mode:?}: {before} -> {after}");
            }
        }
    }

    #[test]
    fn default_run_is_positive_and_dt_consistent() {
        let phys = Physics::default_for(3);
        let cp = CellProblems::solve(&CellGeometry::default(), 16, &phys.params, IndexConvention::Symmetric).unwrap();
        let m = Mesh::unit_square(32);
        let init = InitialData::default_for(3);
        let run = |dt| {
            run_macro(&m, &phys, &cp.effective, MacroExchange::default(), &init, grid(dt)).unwrap()
        };
        let coarse = run(2e-3);
        let fine = run(1e-3);
        assert!(coarse.diagnostics.positivity_ok && fine.diagnostics.positivity_ok);
        let norm = |r: &MacroRun| l2_norm_sq(&m, &r.snapshots.last().unwrap().theta).sqrt();
        assert!((norm(&coarse) / norm(&fine) - 1.0).abs() <= 0.05);
    }

    #[test]
    fn rejects_non_elliptic_effective_tensor() {
        let m = Mesh::unit_square(32);
        let mut eff = eff_constant(1, 0.0, 0.0, 0.0);
        eff.k = [[1.0, 0.0], [0.0, -1.0]];
        assert!(matches!(
            MacroSolver::new(&m, &decoupled(1), &eff, MacroExchange::default()),
            Err(Error::NonElliptic(_))
        ));
    }
}
