//! Market-model parameters, simulation configuration and the shared path and
//! estimate containers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bessel::BesselScheme;
use crate::error::{Error, Result};

/// Relative condition-number threshold above which a diffusion matrix is
/// treated as singular.
pub const SINGULARITY_THRESHOLD: f64 = 1e12;

/// Coefficients of a Markovian market `dX = b(X) dt + s(X) dW`.
///
/// `b` and `s` are the capitalization-scaled coefficients, i.e.
/// `b_i = X_i β_i` and `s_ik = X_i σ_ik`.
pub trait MarketCoefficients {
    fn dim(&self) -> usize;
    fn drift(&self, x: &[f64]) -> DVector<f64>;
    fn diffusion(&self, x: &[f64]) -> DMatrix<f64>;

    /// `a = s sᵀ`.
    fn covariance(&self, x: &[f64]) -> DMatrix<f64> {
        let s = self.diffusion(x);
        &s * s.transpose()
    }
}

type DriftFn = Box<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
type DiffusionFn = Box<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// A general market given by closures for its drift and diffusion.
pub struct MarketParams {
    n: usize,
    drift: DriftFn,
    diffusion: DiffusionFn,
}

impl MarketParams {
    pub fn new(
        n: usize,
        drift: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
        diffusion: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("n", "market needs at least one stock"));
        }
        Ok(MarketParams {
            n,
            drift: Box::new(drift),
            diffusion: Box::new(diffusion),
        })
    }
}

impl std::fmt::Debug for MarketParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MarketParams").field("n", &self.n).finish_non_exhaustive()
    }
}

impl MarketCoefficients for MarketParams {
    fn dim(&self) -> usize {
        self.n
    }
    fn drift(&self, x: &[f64]) -> DVector<f64> {
        (self.drift)(x)
    }
    fn diffusion(&self, x: &[f64]) -> DMatrix<f64> {
        (self.diffusion)(x)
    }
}

/// Unvalidated volatility-stabilized market description, as read from a
/// configuration file. Exactly one of `kappa` / `zeta` is required; a
/// supplied `bessel_dim` must agree with `4 κ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct VsmSpec {
    pub x0: Vec<f64>,
    pub kappa: Option<f64>,
    pub zeta: Option<f64>,
    pub bessel_dim: Option<f64>,
}

/// Validated volatility-stabilized market
/// `dX_i = κ X dt + √(X_i X) dW_i`, `X = X_1 + … + X_n`.
///
/// `κ` is canonical; `ζ = 2κ − 1` and the Bessel dimension `m = 4κ` are
/// derived from it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VsmParams {
    kappa: f64,
    x0: Vec<f64>,
}

impl VsmParams {
    pub fn from_kappa(x0: Vec<f64>, kappa: f64) -> Result<Self> {
        validate_vsm(&VsmSpec {
            x0,
            kappa: Some(kappa),
            ..Default::default()
        })
    }

    pub fn from_zeta(x0: Vec<f64>, zeta: f64) -> Result<Self> {
        validate_vsm(&VsmSpec {
            x0,
            zeta: Some(zeta),
            ..Default::default()
        })
    }

    /// Single-stock market. Outside the model's admissible range (`n ≥ 2`);
    /// kept for degenerate-case checks where the arbitrage functional
    /// collapses to one.
    #[cfg(test)]
    pub(crate) fn single_stock(x: f64, kappa: f64) -> Self {
        VsmParams { kappa, x0: vec![x] }
    }

    pub fn n(&self) -> usize {
        self.x0.len()
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn zeta(&self) -> f64 {
        2.0 * self.kappa - 1.0
    }
    pub fn bessel_dim(&self) -> f64 {
        4.0 * self.kappa
    }
    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    /// Same market started from another state.
    pub fn with_x0(&self, x0: Vec<f64>) -> Result<Self> {
        check_state("x0", &x0)?;
        Ok(VsmParams {
            kappa: self.kappa,
            x0,
        })
    }

    /// Integer Bessel dimension, if `m = 4κ` is one.
    pub fn integer_dim(&self) -> Option<usize> {
        let m = self.bessel_dim();
        (m.fract() == 0.0 && m >= 1.0).then_some(m as usize)
    }
}

pub(crate) fn check_state(param: &'static str, x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::domain(param, "state vector is empty"));
    }
    if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::domain(
            param,
            format!("coordinate {i} = {v} is not strictly positive"),
        ));
    }
    Ok(())
}

/// Checks a market description and returns the validated parameters.
pub fn validate_vsm(spec: &VsmSpec) -> Result<VsmParams> {
    if spec.x0.len() < 2 {
        return Err(Error::domain(
            "n",
            format!("need n >= 2 stocks, got {}", spec.x0.len()),
        ));
    }
    check_state("x0", &spec.x0)?;
    let kappa = match (spec.kappa, spec.zeta) {
        (Some(k), None) => k,
        (None, Some(z)) => {
            if !(0.0..=1.0).contains(&z) {
                return Err(Error::domain("zeta", format!("zeta = {z} outside [0, 1]")));
            }
            (1.0 + z) / 2.0
        }
        (Some(k), Some(z)) => {
            if (2.0 * k - 1.0 - z).abs() > 1e-12 {
                return Err(Error::domain(
                    "zeta",
                    format!("zeta = {z} inconsistent with kappa = {k} (expected {})", 2.0 * k - 1.0),
                ));
            }
            k
        }
        (None, None) => return Err(Error::domain("kappa", "one of kappa or zeta is required")),
    };
    if !(0.5..=1.0).contains(&kappa) {
        return Err(Error::domain("kappa", format!("kappa = {kappa} outside [1/2, 1]")));
    }
    if let Some(m) = spec.bessel_dim {
        if m != 4.0 * kappa {
            return Err(Error::domain(
                "bessel_dim",
                format!("bessel_dim = {m} but 4*kappa = {}", 4.0 * kappa),
            ));
        }
    }
    Ok(VsmParams {
        kappa,
        x0: spec.x0.clone(),
    })
}

impl MarketCoefficients for VsmParams {
    fn dim(&self) -> usize {
        self.n()
    }
    fn drift(&self, x: &[f64]) -> DVector<f64> {
        let total: f64 = x.iter().sum();
        DVector::from_element(x.len(), self.kappa * total)
    }
    fn diffusion(&self, x: &[f64]) -> DMatrix<f64> {
        let total: f64 = x.iter().sum();
        DMatrix::from_diagonal(&DVector::from_iterator(
            x.len(),
            x.iter().map(|xi| (xi * total).sqrt()),
        ))
    }
}

/// Market price of risk `θ(x)` solving `σ(x) θ = β(x)`, equivalently
/// `s(x) θ = b(x)`.
pub fn market_price_of_risk<M: MarketCoefficients + ?Sized>(
    market: &M,
    x: &[f64],
) -> Result<DVector<f64>> {
    check_state("x", x)?;
    let s = market.diffusion(x);
    let b = market.drift(x);
    let condition = condition_number(&s);
    if !(condition <= SINGULARITY_THRESHOLD) {
        return Err(Error::SingularMatrix { condition });
    }
    s.lu()
        .solve(&b)
        .ok_or(Error::SingularMatrix { condition })
}

pub(crate) fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// How the terminal state inside the last clock cell is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    BesselBridge,
}

/// Monte Carlo configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    /// Calendar horizon `T`.
    pub horizon: f64,
    /// Number of uniform meshes `N_T` on `[0, T]`; `Δt = T / N_T`.
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub interpolation: Interpolation,
    /// Calendar step inside the last cell for bridge interpolation.
    pub bridge_step: f64,
    pub scheme: BesselScheme,
    /// Clock step override; defaults to `T / N_T`.
    pub clock_step: Option<f64>,
    /// Multiplier in the clock step cap.
    pub max_step_factor: f64,
}

impl SimConfig {
    pub fn new(horizon: f64, n_steps: usize, n_paths: usize, seed: u64) -> Self {
        SimConfig {
            horizon,
            n_steps,
            n_paths,
            seed,
            interpolation: Interpolation::Linear,
            bridge_step: 1e-4,
            scheme: BesselScheme::Auto,
            clock_step: None,
            max_step_factor: 100.0,
        }
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn with_bridge_step(mut self, step: f64) -> Self {
        self.bridge_step = step;
        self
    }

    pub fn with_scheme(mut self, scheme: BesselScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_paths(mut self, n_paths: usize) -> Self {
        self.n_paths = n_paths;
        self
    }

    /// Uniform clock step `Δt`.
    pub fn dt(&self) -> f64 {
        self.clock_step
            .unwrap_or(self.horizon / self.n_steps as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::domain("horizon", format!("{} is not positive", self.horizon)));
        }
        if self.n_steps == 0 && self.clock_step.is_none() {
            return Err(Error::domain("n_steps", "n_steps = 0 requires an explicit clock_step"));
        }
        let dt = self.dt();
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain("clock_step", format!("step {dt} is not positive")));
        }
        if self.n_paths < 2 {
            return Err(Error::domain("n_paths", "at least two paths are needed for a standard error"));
        }
        if !(self.max_step_factor >= 1.0) {
            return Err(Error::domain("max_step_factor", "must be at least 1"));
        }
        if self.interpolation == Interpolation::BesselBridge
            && !(self.bridge_step > 0.0 && self.bridge_step <= dt)
        {
            return Err(Error::domain(
                "bridge_step",
                format!("need 0 < bridge_step <= dt = {dt}, got {}", self.bridge_step),
            ));
        }
        Ok(())
    }
}

/// One stored trajectory. Paths may stop before the end of the time grid
/// (the Euler baseline stops a path where positivity is lost).
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub stream: u64,
    pub values: Vec<Vec<f64>>,
}

/// A seeded batch of strictly positive capitalization paths on a shared
/// time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    times: Vec<f64>,
    seed: u64,
    paths: Vec<PathRecord>,
}

impl PathBatch {
    pub fn new(times: Vec<f64>, seed: u64, paths: Vec<PathRecord>) -> Result<Self> {
        if times.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::domain("times", "time grid must be nondecreasing"));
        }
        for p in &paths {
            if p.values.len() > times.len() {
                return Err(Error::domain("values", "path longer than the time grid"));
            }
            for state in &p.values {
                check_state("values", state)?;
            }
        }
        Ok(PathBatch { times, seed, paths })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn paths(&self) -> &[PathRecord] {
        &self.paths
    }
    pub fn len(&self) -> usize {
        self.paths.len()
    }
    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Monte Carlo estimate of `u(τ, x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    /// Remaining time `τ = T − t`.
    pub tau: f64,
    pub state: Vec<f64>,
}

impl UEstimate {
    /// Two-sided confidence interval at the given level.
    pub fn ci(&self, level: f64) -> (f64, f64) {
        let z = crate::stats::z_two_sided(level);
        (self.mean - z * self.std_error, self.mean + z * self.std_error)
    }

    /// `mean ≤ 1 + 3 SE`.
    pub fn within_supermartingale_bound(&self) -> bool {
        self.mean <= 1.0 + 3.0 * self.std_error
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_reference_setting() {
        let p = VsmParams::from_kappa(vec![1.0, 1.0], 1.0).unwrap();
        assert_eq!(p.bessel_dim(), 4.0);
        assert_eq!(p.zeta(), 1.0);
        assert_eq!(p.integer_dim(), Some(4));
    }

    #[test]
    fn rejects_out_of_range() {
        let err = VsmParams::from_kappa(vec![1.0, 1.0], 0.4).unwrap_err();
        assert!(matches!(err, Error::Domain { param: "kappa", .. }));
        let err = VsmParams::from_kappa(vec![1.0], 1.0).unwrap_err();
        assert!(matches!(err, Error::Domain { param: "n", .. }));
        let err = VsmParams::from_kappa(vec![1.0, 0.0], 1.0).unwrap_err();
        assert!(matches!(err, Error::Domain { param: "x0", .. }));
        let err = VsmParams::from_zeta(vec![1.0, 1.0], 1.5).unwrap_err();
        assert!(matches!(err, Error::Domain { param: "zeta", .. }));
    }

    #[test]
    fn rejects_inconsistent_dimension() {
        let spec = VsmSpec {
            x0: vec![1.0, 2.0],
            kappa: Some(1.0),
            zeta: None,
            bessel_dim: Some(3.0),
        };
        let err = validate_vsm(&spec).unwrap_err();
        assert!(matches!(err, Error::Domain { param: "bessel_dim", .. }));
    }

    #[test]
    fn zeta_and_kappa_agree() {
        let a = VsmParams::from_zeta(vec![1.0, 2.0], 0.0).unwrap();
        assert_eq!(a.kappa(), 0.5);
        assert_eq!(a.bessel_dim(), 2.0);
        assert_eq!(a.integer_dim(), Some(2));
        let b = VsmParams::from_zeta(vec![1.0, 2.0], 0.3).unwrap();
        assert!(b.integer_dim().is_none());
        assert!((2.0 * (1.0 + b.zeta()) - b.bessel_dim()).abs() < 1e-15);
    }

    #[test]
    fn identity_diffusion_price_of_risk() {
        let m = MarketParams::new(
            2,
            |_| DVector::from_vec(vec![1.0, 0.0]),
            |_| DMatrix::identity(2, 2),
        )
        .unwrap();
        let theta = market_price_of_risk(&m, &[1.0, 1.0]).unwrap();
        assert_eq!(theta.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn vsm_price_of_risk_residual() {
        let p = VsmParams::from_kappa(vec![1.0, 1.0], 1.0).unwrap();
        for x in [[1.0, 1.0], [0.3, 7.0], [1e-3, 2.0]] {
            let theta = market_price_of_risk(&p, &x).unwrap();
            // σ θ = β with σ_ik = s_ik / x_i and β_i = b_i / x_i.
            let s = p.diffusion(&x);
            let b = p.drift(&x);
            let resid = (0..2)
                .map(|i| ((s.row(i) * &theta)[0] / x[i] - b[i] / x[i]).abs())
                .fold(0.0, f64::max);
            assert!(resid < 1e-12, "residual {resid}");
            let total = x[0] + x[1];
            for i in 0..2 {
                assert!((theta[i] - (total / x[i]).sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_diffusion_is_rejected() {
        let m = MarketParams::new(
            2,
            |_| DVector::from_vec(vec![1.0, 0.0]),
            |_| DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        )
        .unwrap();
        assert!(matches!(
            market_price_of_risk(&m, &[1.0, 1.0]),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn path_batch_rejects_nonpositive() {
        let bad = PathRecord {
            stream: 0,
            values: vec![vec![1.0, 1.0], vec![1.0, -1e-3]],
        };
        assert!(PathBatch::new(vec![0.0, 0.1], 0, vec![bad]).is_err());
        let good = PathRecord {
            stream: 0,
            values: vec![vec![1.0, 1.0]],
        };
        assert!(PathBatch::new(vec![0.0, 0.1], 0, vec![good]).is_ok());
    }

    #[test]
    fn sim_config_checks() {
        let cfg = SimConfig::new(1.0, 100, 1000, 1);
        assert!(cfg.validate().is_ok());
        assert!((cfg.dt() - 0.01).abs() < 1e-15);
        assert!(cfg.clone().with_paths(1).validate().is_err());
        let bridge = cfg
            .clone()
            .with_interpolation(Interpolation::BesselBridge)
            .with_bridge_step(0.02);
        assert!(bridge.validate().is_err());
    }
}
