//! Sectioned TOML run configuration: parsing, defaults, validation and echo.

use std::path::Path;

use serde::{Deserialize, Serialize};

use perfhom_core::cell::IndexConvention;
use perfhom_core::coefficients::{MollifierConfig, PhysicalParams, ScalarFieldSpec, SmoluchowskiParams, TensorFieldSpec};
use perfhom_core::corrector::{Preparation, StudyConfig};
use perfhom_core::geometry::{unit_fraction_denominator, CellGeometry, Face};
use perfhom_core::homogenized::MacroExchange;
use perfhom_core::micro::Physics;
use perfhom_core::time::{InitialData, InitialField, TimeConfig};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Cell,
    Micro,
    Macro,
    Correct,
    Check,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Cell => "cell",
            Mode::Micro => "micro",
            Mode::Macro => "macro",
            Mode::Correct => "correct",
            Mode::Check => "check",
        }
    }
}

/// A single value applied to every species, or one value per species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerSpecies<T> {
    Each(Vec<T>),
    All(T),
}

impl<T: Clone> PerSpecies<T> {
    fn expand(&self, n: usize, field: &str) -> Result<Vec<T>, CliError> {
        match self {
            PerSpecies::All(v) => Ok(vec![v.clone(); n]),
            PerSpecies::Each(v) if v.len() == n => Ok(v.clone()),
            PerSpecies::Each(v) => Err(CliError::validation(field, format!("{} entries for {n} species", v.len()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Beta {
    Matrix(Vec<Vec<f64>>),
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct RunSection {
    pub mode: Option<Mode>,
    pub deterministic: bool,
    pub output: Option<String>,
    pub svg: Option<String>,
    pub threads: Option<usize>,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    /// Cell without a hole when false.
    pub hole: bool,
    pub hole_lo: [f64; 2],
    pub hole_hi: [f64; 2],
    pub robin_faces: Vec<Face>,
    pub epsilon: f64,
    pub epsilon_list: Vec<f64>,
    pub n_per_cell: usize,
    pub cell_resolution: Option<usize>,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            hole: true,
            hole_lo: [0.25, 0.25],
            hole_hi: [0.75, 0.75],
            robin_faces: vec![Face::Top, Face::Right],
            epsilon: 0.25,
            epsilon_list: vec![0.25, 0.125, 0.0625],
            n_per_cell: 16,
            cell_resolution: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsSection {
    pub species: usize,
    pub delta: f64,
    pub index_convention: IndexConvention,
    pub macro_exchange: MacroExchange,
    pub beta: Beta,
    pub kappa: TensorFieldSpec,
    pub tau: TensorFieldSpec,
    pub g0: ScalarFieldSpec,
    pub d: PerSpecies<TensorFieldSpec>,
    pub rho: PerSpecies<TensorFieldSpec>,
    pub a: PerSpecies<ScalarFieldSpec>,
    pub b: PerSpecies<ScalarFieldSpec>,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        let p = PhysicalParams::default_for(1);
        Self {
            species: 3,
            delta: MollifierConfig::default().delta,
            index_convention: IndexConvention::default(),
            macro_exchange: MacroExchange::default(),
            beta: Beta::Constant(1.0),
            kappa: p.kappa,
            tau: p.tau,
            g0: p.g0,
            d: PerSpecies::All(p.d[0]),
            rho: PerSpecies::All(p.rho[0]),
            a: PerSpecies::All(p.a[0]),
            b: PerSpecies::All(p.b[0]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub preparation: Preparation,
    pub ill_amplitude: f64,
    pub theta: InitialField,
    pub u: PerSpecies<InitialField>,
    pub v: PerSpecies<InitialField>,
}

impl Default for InitialSection {
    fn default() -> Self {
        let d = InitialData::default_for(1);
        Self {
            preparation: Preparation::Well,
            ill_amplitude: 0.2,
            theta: d.theta,
            u: PerSpecies::All(d.u[0]),
            v: PerSpecies::All(d.v[0]),
        }
    }
}

/// The whole configuration file. A bare top-level `mode` is accepted as
/// shorthand for `run.mode`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    pub run: RunSection,
    pub geometry: GeometrySection,
    pub physics: PhysicsSection,
    pub time: TimeConfig,
    pub initial: InitialSection,
}

/// Validated configuration turned into solver inputs.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub study: StudyConfig,
    pub epsilon: f64,
    pub epsilon_list: Vec<f64>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
            CliError::Parse {
                line,
                message: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok((Self::parse(&text)?, text))
    }

    /// Effective configuration as TOML: every default spelled out and
    /// per-species values expanded.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Checks every field, expands per-species values and builds the solver inputs.
    pub fn resolve(mut self) -> Result<Resolved, CliError> {
        if let Some(m) = self.mode.take() {
            self.run.mode.get_or_insert(m);
        }
        let g = &self.geometry;
        let cell = if g.hole {
            CellGeometry::new(g.hole_lo, g.hole_hi, &g.robin_faces).map_err(|e| CliError::validation("hole_lo", e))?
        } else {
            CellGeometry::without_hole()
        };
        let epsilon = snap_epsilon(g.epsilon, "epsilon")?;
        let mut epsilon_list = g
            .epsilon_list
            .iter()
            .map(|&e| snap_epsilon(e, "epsilon_list"))
            .collect::<Result<Vec<_>, _>>()?;
        epsilon_list.sort_by(|a, b| b.total_cmp(a));
        epsilon_list.dedup();
        if g.n_per_cell == 0 {
            return Err(CliError::validation("n_per_cell", "must be positive"));
        }
        let cell_resolution = g.cell_resolution.unwrap_or(g.n_per_cell);
        if cell_resolution == 0 {
            return Err(CliError::validation("cell_resolution", "must be positive"));
        }

        let p = &self.physics;
        let n = p.species;
        if n == 0 {
            return Err(CliError::validation("species", "at least one species is required"));
        }
        let params = PhysicalParams {
            kappa: p.kappa,
            tau: p.tau,
            d: p.d.expand(n, "d")?,
            rho: p.rho.expand(n, "rho")?,
            g0: p.g0,
            a: p.a.expand(n, "a")?,
            b: p.b.expand(n, "b")?,
        };
        params.validate().map_err(|e| CliError::from_core("physics", e))?;
        let beta = match &p.beta {
            Beta::Constant(c) => SmoluchowskiParams::constant(n, *c),
            Beta::Matrix(m) => SmoluchowskiParams { beta: m.clone() },
        };
        if beta.species() != n {
            return Err(CliError::validation("beta", format!("matrix must be {n}x{n}")));
        }
        beta.validate().map_err(|e| CliError::validation("beta", e))?;
        let mollifier = MollifierConfig { delta: p.delta };
        mollifier.validate().map_err(|e| CliError::validation("delta", e))?;
        let physics = Physics {
            params,
            smoluchowski: beta,
            mollifier,
        };
        physics.validate().map_err(|e| CliError::from_core("physics", e))?;

        self.time.validate().map_err(|e| CliError::from_core("time", e))?;
        let ini = &self.initial;
        let initial = InitialData {
            theta: ini.theta,
            u: ini.u.expand(n, "u")?,
            v: ini.v.expand(n, "v")?,
        };
        if !(ini.ill_amplitude.is_finite() && ini.ill_amplitude >= 0.0) {
            return Err(CliError::validation("ill_amplitude", "must be nonnegative"));
        }

        // Write back the expanded form so the echo is explicit.
        self.geometry.epsilon = epsilon;
        self.geometry.epsilon_list = epsilon_list.clone();
        self.geometry.cell_resolution = Some(cell_resolution);
        self.physics.d = PerSpecies::Each(physics.params.d.clone());
        self.physics.rho = PerSpecies::Each(physics.params.rho.clone());
        self.physics.a = PerSpecies::Each(physics.params.a.clone());
        self.physics.b = PerSpecies::Each(physics.params.b.clone());
        self.physics.beta = Beta::Matrix(physics.smoluchowski.beta.clone());
        self.initial.u = PerSpecies::Each(initial.u.clone());
        self.initial.v = PerSpecies::Each(initial.v.clone());

        let study = StudyConfig {
            cell,
            n_per_cell: self.geometry.n_per_cell,
            cell_resolution,
            physics,
            time: self.time,
            initial,
            exchange: self.physics.macro_exchange,
            convention: self.physics.index_convention,
            preparation: self.initial.preparation,
            ill_amplitude: self.initial.ill_amplitude,
        };
        Ok(Resolved {
            config: self,
            study,
            epsilon,
            epsilon_list,
        })
    }
}

fn snap_epsilon(e: f64, field: &str) -> Result<f64, CliError> {
    unit_fraction_denominator(e)
        .map(|n| 1.0 / n as f64)
        .map_err(|err| CliError::validation(field, err))
}
