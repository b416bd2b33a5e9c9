//! Flat TOML run configuration and the bundled presets.
//!
//! Every key is optional; unknown keys are rejected. Example:
//!
//! ```toml
//! x0 = [1.0, 1.0]
//! kappa = 1.0
//! horizon = 1.0
//! dt = 0.01
//! n_paths = 1000
//! seed = 7
//! ```

use serde::{Deserialize, Serialize};

use crate::bessel::BesselScheme;
use crate::bsde::{Basis, BsdeConfig, Integrator};
use crate::error::{Error, Result};
use crate::estimator::{MeshAxis, MeshSpec};
use crate::euler::{BoundaryConfig, DEFAULT_EPS_POS};
use crate::model::{validate_vsm, Interpolation, SimConfig, VsmParams, VsmSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Polynomial,
    #[default]
    LogPolynomial,
}

/// Resolved run configuration shared by all commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub x0: Vec<f64>,
    /// Defaults to 1 when `zeta` is absent too.
    pub kappa: Option<f64>,
    pub zeta: Option<f64>,
    pub bessel_dim: Option<f64>,
    pub horizon: f64,
    /// Uniform step: calendar mesh `T / n_steps` and Bessel clock step.
    pub dt: Option<f64>,
    /// Calendar mesh count; derived from `dt` when absent.
    pub n_steps: Option<usize>,
    pub n_paths: usize,
    pub seed: u64,
    pub interpolation: Interpolation,
    pub bridge_step: f64,
    pub scheme: BesselScheme,
    pub max_step_factor: f64,

    pub mesh_lo: f64,
    pub mesh_hi: f64,
    pub mesh_cells: usize,
    /// Coordinates `x_3, …, x_n` held fixed on the surface.
    pub fixed_coords: Vec<f64>,

    /// Seed of the driving trajectory for `upath`; defaults to `seed`.
    pub driving_seed: Option<u64>,

    pub eps_pos: f64,
    pub zero_noise: bool,
    pub keep_trajectories: usize,

    pub bsde_steps: usize,
    pub basis: BasisKind,
    pub degree: u32,
    pub integrator: Integrator,
    pub lambdas: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            x0: vec![1.0, 1.0],
            kappa: None,
            zeta: None,
            bessel_dim: None,
            horizon: 1.0,
            dt: Some(0.01),
            n_steps: None,
            n_paths: 1000,
            seed: 0,
            interpolation: Interpolation::Linear,
            bridge_step: 1e-4,
            scheme: BesselScheme::Auto,
            max_step_factor: 100.0,
            mesh_lo: 3.5,
            mesh_hi: 9.0,
            mesh_cells: 50,
            fixed_coords: Vec::new(),
            driving_seed: None,
            eps_pos: DEFAULT_EPS_POS,
            zero_noise: false,
            keep_trajectories: 0,
            bsde_steps: 100,
            basis: BasisKind::LogPolynomial,
            degree: 2,
            integrator: Integrator::Exponential,
            lambdas: vec![0.0, 1.0, 10.0, 100.0],
        }
    }
}

const PRESETS: &[(&str, &str)] = &[
    ("fig1a", include_str!("../presets/fig1a.toml")),
    ("fig1b", include_str!("../presets/fig1b.toml")),
    ("fig1c", include_str!("../presets/fig1c.toml")),
    ("fig1d", include_str!("../presets/fig1d.toml")),
    ("fig2a", include_str!("../presets/fig2a.toml")),
    ("fig2b", include_str!("../presets/fig2b.toml")),
    ("fig2c", include_str!("../presets/fig2c.toml")),
    ("euler_n8", include_str!("../presets/euler_n8.toml")),
    ("bsde", include_str!("../presets/bsde.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _)| *name)
}

pub fn preset_source(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, src)| *src)
        .ok_or_else(|| {
            let known: Vec<_> = preset_names().collect();
            Error::Config(format!("unknown preset `{name}` (known: {})", known.join(", ")))
        })
}

fn field(param: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("field `{param}`: {reason}"))
}

/// Maps domain errors raised while validating onto configuration errors.
fn as_config(e: Error) -> Error {
    match e {
        Error::Domain { param, reason } => field(param, reason),
        other => other,
    }
}

impl RunConfig {
    /// Parses and validates a TOML document. Parse errors carry line and
    /// column; validation errors name the field.
    pub fn from_toml(src: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_preset(name: &str) -> Result<Self> {
        Self::from_toml(preset_source(name)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.vsm()?;
        self.sim()?;
        if !(self.eps_pos > 0.0) {
            return Err(field("eps_pos", "must be positive"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config is serializable")
    }

    pub fn vsm(&self) -> Result<VsmParams> {
        // κ = 1 unless either parameter is given
        let kappa = match (self.kappa, self.zeta) {
            (None, None) => Some(1.0),
            (k, _) => k,
        };
        validate_vsm(&VsmSpec {
            x0: self.x0.clone(),
            kappa,
            zeta: self.zeta,
            bessel_dim: self.bessel_dim,
        })
        .map_err(as_config)
    }

    pub fn sim(&self) -> Result<SimConfig> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(field("horizon", "must be positive and finite"));
        }
        let (n_steps, clock_step) = match (self.n_steps, self.dt) {
            (Some(n), dt) => (n, dt),
            (None, Some(dt)) if dt > 0.0 => ((self.horizon / dt).round().max(1.0) as usize, None),
            (None, Some(_)) => return Err(field("dt", "must be positive")),
            (None, None) => return Err(field("dt", "either `dt` or `n_steps` is required")),
        };
        if let Some(dt) = clock_step {
            if !(dt > 0.0) {
                return Err(field("dt", "must be positive"));
            }
        }
        let cfg = SimConfig {
            horizon: self.horizon,
            n_steps,
            n_paths: self.n_paths,
            seed: self.seed,
            interpolation: self.interpolation,
            bridge_step: self.bridge_step,
            scheme: self.scheme,
            clock_step,
            max_step_factor: self.max_step_factor,
        };
        cfg.validate().map_err(as_config)?;
        Ok(cfg)
    }

    /// Calendar step of the uniform mesh.
    pub fn calendar_dt(&self) -> Result<f64> {
        let sim = self.sim()?;
        Ok(match sim.n_steps {
            0 => sim.dt(),
            n => sim.horizon / n as f64,
        })
    }

    pub fn mesh(&self) -> Result<MeshSpec> {
        let axis = MeshAxis::new(self.mesh_lo, self.mesh_hi, self.mesh_cells).map_err(as_config)?;
        Ok(MeshSpec { x1: axis, x2: axis })
    }

    pub fn boundary(&self) -> Result<BoundaryConfig> {
        if self.n_paths == 0 {
            return Err(field("n_paths", "path budget is empty"));
        }
        Ok(BoundaryConfig {
            x0: self.x0.clone(),
            horizon: self.horizon,
            dt: self.calendar_dt()?,
            n_paths: self.n_paths,
            seed: self.seed,
            eps_pos: self.eps_pos,
            zero_noise: self.zero_noise,
            keep_trajectories: self.keep_trajectories,
        })
    }

    pub fn bsde(&self) -> Result<BsdeConfig> {
        let basis = match self.basis {
            BasisKind::Polynomial => Basis::Polynomial(self.degree),
            BasisKind::LogPolynomial => Basis::LogPolynomial(self.degree),
        };
        let cfg = BsdeConfig {
            n_time_steps: self.bsde_steps,
            n_paths: self.n_paths,
            basis,
            integrator: self.integrator,
            lambdas: self.lambdas.clone(),
            seed: self.seed,
            clock_step: self.dt,
            scheme: self.scheme,
            max_step_factor: self.max_step_factor,
        };
        cfg.validate().map_err(as_config)?;
        if self.x0.len() > crate::bsde::MAX_STOCKS {
            return Err(field(
                "x0",
                format!("the BSDE solver is capped at {} stocks", crate::bsde::MAX_STOCKS),
            ));
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for name in preset_names() {
            RunConfig::from_preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(RunConfig::from_preset("nope").is_err());
    }

    #[test]
    fn fig1a_matches_caption() {
        let cfg = RunConfig::from_preset("fig1a").unwrap();
        let sim = cfg.sim().unwrap();
        assert_eq!((sim.horizon, sim.n_steps, sim.n_paths), (1.0, 100, 1000));
        assert_eq!(cfg.vsm().unwrap().bessel_dim(), 4.0);
        let mesh = cfg.mesh().unwrap();
        assert_eq!((mesh.x1.lo, mesh.x1.hi, mesh.x1.cells), (3.5, 9.0, 50));
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = RunConfig::from_toml("x0 = [1.0, 1.0]\nhorizon = \"one\"\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        let err = RunConfig::from_toml("horizn = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("horizn"), "{err}");
    }

    #[test]
    fn validation_errors_name_the_field() {
        let err = RunConfig::from_toml("kappa = 2.0\n").unwrap_err();
        assert!(err.to_string().contains("kappa"), "{err}");
        let err = RunConfig::from_toml("n_steps = 0\ndt = -1.0\n").unwrap_err();
        assert!(err.to_string().contains("dt"), "{err}");
    }

    #[test]
    fn zero_steps_needs_clock_step() {
        let cfg = RunConfig::from_toml("n_steps = 0\ndt = 0.01\n").unwrap();
        assert_eq!(cfg.sim().unwrap().n_steps, 0);
        assert!(RunConfig {
            n_steps: Some(0),
            dt: None,
            ..RunConfig::default()
        }
        .validate()
        .is_err());
    }
}
