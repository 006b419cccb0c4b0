//! Benchmark scenarios and their assembly into solvable problems.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dg::{project_to_dg, CrossSections, DgSpace};
use crate::dsa::DiffusionSystem;
use crate::error::{Error, Result};
use crate::mesh::RectMesh;
use crate::operators::DiscreteOperators;
use crate::orchestrator::{Problem, SolverConfig};
use crate::quadrature::AngularQuadrature;

/// Width of the initial Gaussian pulse in the variable-scattering problem.
pub const PULSE_WIDTH: f64 = 1e-2;

/// The shipped benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    TwoMaterial1d,
    GaussianSource2d,
    VariableScattering2d,
    Lattice2d,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::TwoMaterial1d,
        ScenarioKind::GaussianSource2d,
        ScenarioKind::VariableScattering2d,
        ScenarioKind::Lattice2d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::TwoMaterial1d => "two_material_1d",
            ScenarioKind::GaussianSource2d => "gaussian_source_2d",
            ScenarioKind::VariableScattering2d => "variable_scattering_2d",
            ScenarioKind::Lattice2d => "lattice_2d",
        }
    }

    pub fn is_1d(self) -> bool {
        self == ScenarioKind::TwoMaterial1d
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
                Error::Usage(format!("unknown scenario '{s}', expected one of {}", names.join(", ")))
            })
    }
}

/// Angular rule: `"n"` for Gauss-Legendre on the slab, `"n_phi,n_z"` for
/// Chebyshev-Legendre on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum QuadSpec {
    GaussLegendre(usize),
    ChebyshevLegendre(usize, usize),
}

impl QuadSpec {
    pub fn build(self) -> Result<AngularQuadrature> {
        match self {
            QuadSpec::GaussLegendre(n) => AngularQuadrature::gauss_legendre_1d(n),
            QuadSpec::ChebyshevLegendre(p, z) => AngularQuadrature::chebyshev_legendre(p, z),
        }
    }
}

impl fmt::Display for QuadSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuadSpec::GaussLegendre(n) => write!(f, "{n}"),
            QuadSpec::ChebyshevLegendre(p, z) => write!(f, "{p},{z}"),
        }
    }
}

impl FromStr for QuadSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: std::result::Result<Vec<usize>, _> =
            s.split(',').map(|p| p.trim().parse::<usize>()).collect();
        match parts.as_deref() {
            Ok([n]) => Ok(QuadSpec::GaussLegendre(*n)),
            Ok([p, z]) => Ok(QuadSpec::ChebyshevLegendre(*p, *z)),
            _ => Err(Error::Usage(format!("bad quadrature '{s}', expected 'n' or 'n_phi,n_z'"))),
        }
    }
}

impl TryFrom<String> for QuadSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<QuadSpec> for String {
    fn from(q: QuadSpec) -> String {
        q.to_string()
    }
}

/// A fully specified benchmark instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub scenario: ScenarioKind,
    pub nx: usize,
    /// Ignored in slab geometry.
    pub ny: usize,
    pub degree: usize,
    pub quad: QuadSpec,
    /// Fixed step size; takes precedence over `cfl`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Step size as a multiple of the x mesh size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    pub t_final: f64,
    /// Constant scattering cross section (Gaussian-source problem only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_sisa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_ig: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_pc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_up: Option<f64>,
}

/// Optional changes applied on top of a catalog entry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOverrides {
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub degree: Option<usize>,
    pub quad: Option<QuadSpec>,
    pub dt: Option<f64>,
    pub cfl: Option<f64>,
    pub t_final: Option<f64>,
    pub sigma_s: Option<f64>,
    pub eps_sisa: Option<f64>,
    pub eps_ig: Option<f64>,
    pub eps_pc: Option<f64>,
    pub eps_up: Option<f64>,
}

impl ScenarioOverrides {
    /// Fields set in `other` replace those in `self`.
    pub fn merged(mut self, other: &ScenarioOverrides) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(nx, ny, degree, quad, dt, cfl, t_final, sigma_s, eps_sisa, eps_ig, eps_pc, eps_up);
        self
    }
}

/// Catalog entry `name` at full scale with `overrides` applied.
pub fn scenario_catalog(name: &str, overrides: &ScenarioOverrides) -> Result<Scenario> {
    let kind: ScenarioKind = name.parse()?;
    let mut s = match kind {
        ScenarioKind::TwoMaterial1d => Scenario {
            scenario: kind,
            nx: 110,
            ny: 1,
            degree: 1,
            quad: QuadSpec::GaussLegendre(6),
            dt: Some(10.0),
            cfl: None,
            t_final: 1000.0,
            sigma_s: None,
            eps_sisa: None,
            eps_ig: None,
            eps_pc: None,
            eps_up: None,
        },
        ScenarioKind::GaussianSource2d => Scenario {
            scenario: kind,
            nx: 81,
            ny: 81,
            degree: 1,
            quad: QuadSpec::ChebyshevLegendre(40, 6),
            dt: None,
            cfl: Some(1.0),
            t_final: 2.5,
            sigma_s: Some(1.0),
            eps_sisa: Some(1e-12),
            eps_ig: None,
            eps_pc: None,
            eps_up: None,
        },
        ScenarioKind::VariableScattering2d => Scenario {
            scenario: kind,
            nx: 81,
            ny: 81,
            degree: 1,
            quad: QuadSpec::ChebyshevLegendre(40, 6),
            dt: None,
            cfl: Some(1.0),
            t_final: 2.5,
            sigma_s: None,
            eps_sisa: None,
            eps_ig: None,
            eps_pc: None,
            eps_up: None,
        },
        ScenarioKind::Lattice2d => Scenario {
            scenario: kind,
            nx: 80,
            ny: 80,
            degree: 1,
            quad: QuadSpec::ChebyshevLegendre(40, 6),
            dt: Some(1.0 / 16.0),
            cfl: None,
            t_final: 5.0,
            sigma_s: None,
            eps_sisa: None,
            eps_ig: Some(1e-6),
            eps_pc: Some(1e-6),
            eps_up: Some(1e-6),
        },
    };
    s.apply(overrides)?;
    Ok(s)
}

impl Scenario {
    /// Applies `o` in place. Setting `dt` clears `cfl` and vice versa.
    pub fn apply(&mut self, o: &ScenarioOverrides) -> Result<()> {
        if o.dt.is_some() && o.cfl.is_some() {
            return Err(Error::Usage("give either dt or cfl, not both".into()));
        }
        if let Some(v) = o.nx {
            self.nx = v;
        }
        if let Some(v) = o.ny {
            self.ny = v;
        }
        if let Some(v) = o.degree {
            self.degree = v;
        }
        if let Some(v) = o.quad {
            self.quad = v;
        }
        if let Some(v) = o.dt {
            self.dt = Some(v);
            self.cfl = None;
        }
        if let Some(v) = o.cfl {
            self.cfl = Some(v);
            self.dt = None;
        }
        if let Some(v) = o.t_final {
            self.t_final = v;
        }
        if let Some(v) = o.sigma_s {
            if self.scenario != ScenarioKind::GaussianSource2d {
                return Err(Error::Usage(format!(
                    "sigma_s can only be set for {}",
                    ScenarioKind::GaussianSource2d
                )));
            }
            self.sigma_s = Some(v);
        }
        for (dst, src) in [
            (&mut self.eps_sisa, o.eps_sisa),
            (&mut self.eps_ig, o.eps_ig),
            (&mut self.eps_pc, o.eps_pc),
            (&mut self.eps_up, o.eps_up),
        ] {
            if src.is_some() {
                *dst = src;
            }
        }
        if self.scenario.is_1d() {
            self.ny = 1;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::Config("cell counts must be positive".into()));
        }
        let dt = self.time_step();
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if !(self.t_final >= dt) {
            return Err(Error::Config(format!(
                "final time {} is shorter than one step {dt}",
                self.t_final
            )));
        }
        match (self.scenario.is_1d(), self.quad) {
            (true, QuadSpec::GaussLegendre(_)) | (false, QuadSpec::ChebyshevLegendre(..)) => Ok(()),
            _ => Err(Error::Config(format!(
                "quadrature '{}' does not match the geometry of {}",
                self.quad, self.scenario
            ))),
        }
    }

    pub fn bounds(&self) -> [(f64, f64); 2] {
        match self.scenario {
            ScenarioKind::TwoMaterial1d => [(0.0, 11.0), (0.0, 0.0)],
            ScenarioKind::GaussianSource2d | ScenarioKind::VariableScattering2d => [(-1.0, 1.0), (-1.0, 1.0)],
            ScenarioKind::Lattice2d => [(0.0, 5.0), (0.0, 5.0)],
        }
    }

    pub fn dx(&self) -> f64 {
        let (a, b) = self.bounds()[0];
        (b - a) / self.nx as f64
    }

    pub fn time_step(&self) -> f64 {
        match (self.dt, self.cfl) {
            (Some(dt), _) => dt,
            (None, Some(c)) => c * self.dx(),
            (None, None) => f64::NAN,
        }
    }

    /// `ceil(T / dt)`, with a relative slack so that exact multiples are not
    /// rounded up.
    pub fn n_steps(&self) -> usize {
        let r = self.t_final / self.time_step();
        let n = r.round();
        if (r - n).abs() <= 1e-9 * r.max(1.0) {
            n as usize
        } else {
            r.ceil() as usize
        }
    }

    /// Solver settings with this scenario's tolerance overrides applied.
    pub fn solver_config(&self, mut base: SolverConfig) -> SolverConfig {
        base.eps_sisa = self.eps_sisa.unwrap_or(base.eps_sisa);
        base.eps_ig = self.eps_ig.unwrap_or(base.eps_ig);
        base.eps_pc = self.eps_pc.unwrap_or(base.eps_pc);
        base.eps_up = self.eps_up.unwrap_or(base.eps_up);
        base
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn space(&self) -> Result<DgSpace> {
        let [bx, by] = self.bounds();
        let mesh = if self.scenario.is_1d() {
            RectMesh::new_1d(bx, self.nx)?
        } else {
            RectMesh::new_2d(bx, by, self.nx, self.ny)?
        };
        Ok(DgSpace::new(mesh, self.degree))
    }

    /// Builds operators, the diffusion system and the initial density.
    pub fn assemble(&self) -> Result<Problem> {
        self.validate()?;
        let space = self.space()?;
        let quad = self.quad.build()?;
        let dt = self.time_step();
        let kind = self.scenario;
        let sigma_s_const = self.sigma_s.unwrap_or(1.0);
        let scat = move |x: f64, y: f64| match kind {
            ScenarioKind::TwoMaterial1d => two_material(x).1,
            ScenarioKind::GaussianSource2d => sigma_s_const,
            ScenarioKind::VariableScattering2d => variable_scattering(x, y),
            ScenarioKind::Lattice2d => lattice(x, y).1,
        };
        let absorb = move |x: f64, y: f64| match kind {
            ScenarioKind::TwoMaterial1d => two_material(x).0,
            ScenarioKind::Lattice2d => lattice(x, y).0,
            _ => 0.0,
        };
        let xs = CrossSections::sample(&space, scat, |x, y| scat(x, y) + absorb(x, y))?;
        let source = move |x: f64, y: f64| match kind {
            ScenarioKind::GaussianSource2d => 10.0 / PI * (-100.0 * (x * x + y * y)).exp(),
            ScenarioKind::Lattice2d => {
                if (x - 2.5).abs() < 0.5 && (y - 2.5).abs() < 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            _ => 0.0,
        };
        let inflow = move |x: f64, _: f64| match kind {
            ScenarioKind::TwoMaterial1d if x < 5.5 => 5.0,
            _ => 0.0,
        };
        let ops = DiscreteOperators::assemble(&space, &quad, &xs, source, inflow, dt)?;
        let dsa = DiffusionSystem::assemble(&space, &xs, dt)?;
        let rho0 = project_to_dg(&space, |x, y| match kind {
            ScenarioKind::VariableScattering2d => gaussian_pulse(x, y, PULSE_WIDTH),
            _ => 0.0,
        });
        Ok(Problem {
            ops,
            dsa,
            rho0,
            n_steps: self.n_steps(),
        })
    }
}

/// `(sigma_a, sigma_s)` of the two-material slab.
pub fn two_material(x: f64) -> (f64, f64) {
    if x < 1.0 {
        (1.0, 0.0)
    } else {
        (0.0, 100.0)
    }
}

/// Scattering cross section of the variable-scattering problem. Inside the
/// unit disk it rises from 0.1 at the center to 100 at `c = 1`; outside it is
/// 1, so the field jumps at `c = 1`.
pub fn variable_scattering(x: f64, y: f64) -> f64 {
    let c = (x * x + y * y).sqrt();
    if c < 1.0 {
        99.9 * c.powi(4) * (c + SQRT_2).powi(2) * (c - SQRT_2).powi(2) + 0.1
    } else {
        1.0
    }
}

/// `(sigma_a, sigma_s)` of the lattice: absorbing unit blocks at
/// `[1,2]x[1,2]`, `[1,2]x[3,4]`, `[3,4]x[1,2]` and `[3,4]x[3,4]`, scattering
/// elsewhere.
pub fn lattice(x: f64, y: f64) -> (f64, f64) {
    let odd = |v: f64| {
        let b = v.floor();
        b == 1.0 || b == 3.0
    };
    if odd(x) && odd(y) {
        (100.0, 0.0)
    } else {
        (0.0, 1.0)
    }
}

/// `exp(-r^2 / (4 zeta^2)) / (4 pi zeta^2)`.
pub fn gaussian_pulse(x: f64, y: f64, zeta: f64) -> f64 {
    (-(x * x + y * y) / (4.0 * zeta * zeta)).exp() / (4.0 * PI * zeta * zeta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_defaults() {
        let s = scenario_catalog("two_material_1d", &ScenarioOverrides::default()).unwrap();
        assert!((s.dx() - 0.1).abs() < 1e-15);
        assert_eq!(s.n_steps(), 100);
        let l = scenario_catalog("lattice_2d", &ScenarioOverrides::default()).unwrap();
        assert_eq!(l.n_steps(), 80);
        assert_eq!(l.eps_ig, Some(1e-6));
        let g = scenario_catalog("gaussian_source_2d", &ScenarioOverrides::default()).unwrap();
        assert!((g.time_step() - 2.0 / 81.0).abs() < 1e-15);
        assert_eq!(g.n_steps(), 102);
    }

    #[test]
    fn unknown_name_lists_valid_ones() {
        let err = scenario_catalog("nope", &ScenarioOverrides::default()).unwrap_err();
        let msg = err.to_string();
        for k in ScenarioKind::ALL {
            assert!(msg.contains(k.name()), "{msg}");
        }
    }

    #[test]
    fn overrides_replace_time_step() {
        let o = ScenarioOverrides {
            cfl: Some(2.0),
            sigma_s: Some(100.0),
            ..Default::default()
        };
        let g = scenario_catalog("gaussian_source_2d", &o).unwrap();
        assert!((g.time_step() - 4.0 / 81.0).abs() < 1e-15);
        let o = ScenarioOverrides {
            dt: Some(0.5),
            ..Default::default()
        };
        let g = scenario_catalog("variable_scattering_2d", &o).unwrap();
        assert_eq!(g.cfl, None);
        assert_eq!(g.n_steps(), 5);
        let bad = ScenarioOverrides {
            sigma_s: Some(2.0),
            ..Default::default()
        };
        assert!(scenario_catalog("lattice_2d", &bad).is_err());
    }

    #[test]
    fn rejects_inconsistent_scenarios() {
        let quad = ScenarioOverrides {
            quad: Some(QuadSpec::ChebyshevLegendre(8, 4)),
            ..Default::default()
        };
        assert!(scenario_catalog("two_material_1d", &quad).is_err());
        let short = ScenarioOverrides {
            t_final: Some(1.0),
            ..Default::default()
        };
        assert!(scenario_catalog("two_material_1d", &short).is_err());
    }

    #[test]
    fn quad_spec_parsing() {
        assert_eq!("6".parse::<QuadSpec>().unwrap(), QuadSpec::GaussLegendre(6));
        assert_eq!("40, 6".parse::<QuadSpec>().unwrap(), QuadSpec::ChebyshevLegendre(40, 6));
        assert!("a,b".parse::<QuadSpec>().is_err());
        assert!("1,2,3".parse::<QuadSpec>().is_err());
    }

    #[test]
    fn material_fields() {
        assert_eq!(two_material(0.5), (1.0, 0.0));
        assert_eq!(two_material(5.0), (0.0, 100.0));
        assert!((variable_scattering(0.0, 0.0) - 0.1).abs() < 1e-15);
        assert!((variable_scattering(1.0 - 1e-12, 0.0) - 100.0).abs() < 1e-6);
        assert_eq!(variable_scattering(1.0, 0.5), 1.0);
        assert_eq!(lattice(1.5, 3.5), (100.0, 0.0));
        assert_eq!(lattice(2.5, 2.5), (0.0, 1.0));
        assert_eq!(lattice(0.5, 1.5), (0.0, 1.0));
    }

    #[test]
    fn small_assembly() {
        let o = ScenarioOverrides {
            nx: Some(8),
            ny: Some(8),
            quad: Some(QuadSpec::ChebyshevLegendre(4, 2)),
            ..Default::default()
        };
        let p = scenario_catalog("lattice_2d", &o).unwrap().assemble().unwrap();
        assert_eq!(p.ops.n_dofs(), 256);
        assert_eq!(p.ops.n_angles(), 8);
        assert!(p.rho0.iter().all(|&v| v == 0.0));
        assert!(p.ops.source().iter().any(|&v| v > 0.0));
    }
}
