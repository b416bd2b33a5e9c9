//! Backward regression solver for the linear BSDE satisfied by
//! `Y_t = u(T − t, X_t)`, and its penalized (reflected at `S ≡ 0`) variant.
//!
//! Sign convention: with `f(x, z) = b(x)ᵀ (sᵀ(x))⁻¹ z − (1/Σx_i) 1ᵀ s(x) z`,
//!
//! ```text
//! dY_t = DRIVER_SIGN · f(X_t, Z_t) dt + Z_tᵀ dW_t,   Y_T = 1,
//! ```
//!
//! which is what Itô's formula gives for `u(T − t, X_t)` once `∂u/∂τ` is
//! replaced by the Cauchy operator. The backward step is therefore
//! `Y_j = E_j[Y_{j+1}] − f(X_j, Z_j) Δt` and `Z_j = E_j[Y_{j+1} ΔW_j] / Δt`.
//! Since `f(x, z) = γ(x)·z` with `γ(X_j)` known at `t_j`, the first is
//! projected in one regression as `E_j[Y_{j+1} w_j]`. The Euler weight
//! `w_j = 1 − γ·ΔW_j` has conditional mean one, so that scheme is a true
//! martingale and drifts towards the trivial solution `Y ≡ 1`. The default
//! weight is the exact stochastic exponential of `−∫ γ·dW` over the step,
//! which for this market is a function of the two endpoint states (see
//! [`Integrator`]) and keeps the mass lost near the boundary. `Z_j` is
//! regressed separately and reported.
//!
//! Forward paths come from the Bessel engine. Brownian increments are
//! implied from the capitalization increments, centred by the exact
//! conditional drift `E[ΔX_i | x] = X (e^{nκΔt} − 1)/n`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::BesselScheme;
use crate::error::{Error, Result};
use crate::model::{check_state, market_price_of_risk, MarketCoefficients, VsmParams};
use crate::rng::SeedKey;
use crate::stats::{pairwise_sum, summarize};
use crate::time_change::{calendar_path, ClockSettings};

/// `+1`: `dY = +f dt + Zᵀ dW`.
pub const DRIVER_SIGN: f64 = 1.0;

/// Largest number of stocks the regression solver accepts.
pub const MAX_STOCKS: usize = 3;

/// Gram matrices with a larger condition estimate are rejected.
pub const GRAM_CONDITION_LIMIT: f64 = 1e15;

/// Regression basis: all monomials of total degree `≤ d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "degree")]
pub enum Basis {
    /// In `(x_1, …, x_n)`.
    Polynomial(u32),
    /// In `(ln x_1, …, ln x_n, ln Σx_i)` (the last one dropped for `n = 1`).
    LogPolynomial(u32),
}

impl Default for Basis {
    fn default() -> Self {
        Basis::LogPolynomial(2)
    }
}

impl Basis {
    fn degree(self) -> u32 {
        match self {
            Basis::Polynomial(d) | Basis::LogPolynomial(d) => d,
        }
    }

    fn coordinates(self, x: &[f64]) -> Vec<f64> {
        match self {
            Basis::Polynomial(_) => x.to_vec(),
            Basis::LogPolynomial(_) => {
                let mut c: Vec<f64> = x.iter().map(|v| v.ln()).collect();
                if x.len() > 1 {
                    c.push(x.iter().sum::<f64>().ln());
                }
                c
            }
        }
    }

    fn n_coordinates(self, n: usize) -> usize {
        match self {
            Basis::Polynomial(_) => n,
            Basis::LogPolynomial(_) if n > 1 => n + 1,
            Basis::LogPolynomial(_) => n,
        }
    }
}

/// Exponent vectors of all monomials in `k` variables with total degree `≤ d`,
/// constant first.
fn exponents(k: usize, d: u32) -> Vec<Vec<u32>> {
    fn rec(k: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for e in 0..=left {
            prefix.push(e);
            rec(k, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, d, &mut Vec::new(), &mut out);
    out.sort_by_key(|e| e.iter().sum::<u32>());
    out
}

fn features(coords: &[f64], exps: &[Vec<u32>]) -> Vec<f64> {
    exps.iter()
        .map(|e| coords.iter().zip(e).map(|(c, &p)| c.powi(p as i32)).product())
        .collect()
}

/// How the driver enters one backward step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Weight `exp(ΔΦ − ½κ(1−κ)∫ Σ X/x_i dt)` with `Φ = ln X − κ Σ ln x_i`:
    /// the stochastic exponential of `−∫ γ·dW` over the step, evaluated from
    /// the states.
    #[default]
    Exponential,
    /// Weight `1 − γ(X_j)·ΔW_j`.
    Euler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsdeConfig {
    pub n_time_steps: usize,
    pub n_paths: usize,
    pub basis: Basis,
    pub integrator: Integrator,
    /// Penalization ladder, nondecreasing.
    pub lambdas: Vec<f64>,
    pub seed: u64,
    /// Clock step of the forward Bessel engine; defaults to `T / n_time_steps`.
    pub clock_step: Option<f64>,
    pub scheme: BesselScheme,
    pub max_step_factor: f64,
}

impl BsdeConfig {
    pub fn new(n_time_steps: usize, n_paths: usize, seed: u64) -> Self {
        BsdeConfig {
            n_time_steps,
            n_paths,
            basis: Basis::default(),
            integrator: Integrator::default(),
            lambdas: vec![0.0, 1.0, 10.0, 100.0],
            seed,
            clock_step: None,
            scheme: BesselScheme::Auto,
            max_step_factor: 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_time_steps == 0 {
            return Err(Error::domain("n_time_steps", "need at least one time step"));
        }
        if self.n_paths < 2 {
            return Err(Error::domain("n_paths", "need at least two paths"));
        }
        if self.basis.degree() < 1 {
            return Err(Error::domain("basis", "degree must be at least 1"));
        }
        if self.lambdas.is_empty() {
            return Err(Error::domain("lambdas", "ladder is empty"));
        }
        if self.lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::domain("lambdas", "penalties must be finite and nonnegative"));
        }
        if self.lambdas.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::domain("lambdas", "ladder must be nondecreasing"));
        }
        if let Some(dt) = self.clock_step {
            if !(dt > 0.0) {
                return Err(Error::domain("clock_step", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BsdeSolution {
    pub lambda: f64,
    pub y0: f64,
    pub y0_se: f64,
    /// Per time step `j = 1..N−1`: coefficients of `E_j[Y_{j+1}]` in the
    /// standardized basis. Step 0 uses sample means and has no entry.
    pub y_coeffs: Vec<Vec<f64>>,
    /// Per time step and stock: coefficients of `Z_j^i`.
    pub z_coeffs: Vec<Vec<Vec<f64>>>,
    /// Path-averaged `K_{t_j}`, `j = 0..=N`, with `K_0 = 0`.
    pub k_trace: Vec<f64>,
    /// Path average of `|Σ_j Y_j ΔK_j|`.
    pub complementarity_residual: f64,
}

/// Solutions along the penalization ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReflectedLadder {
    pub rungs: Vec<BsdeSolution>,
    /// Set when some `y0` drops by more than 2 combined SE as `λ` grows.
    pub warning: Option<String>,
}

impl ReflectedLadder {
    /// The largest-`λ` solution.
    pub fn solution(&self) -> &BsdeSolution {
        self.rungs.last().expect("ladder is never empty")
    }

    pub fn is_monotone(&self) -> bool {
        self.warning.is_none()
    }
}

/// `f(x, z) = b(x)ᵀ (sᵀ(x))⁻¹ z − (1/Σx_i) 1ᵀ s(x) z`.
pub fn driver_f<M: MarketCoefficients + ?Sized>(market: &M, x: &[f64], z: &[f64]) -> Result<f64> {
    if z.len() != market.dim() || x.len() != market.dim() {
        return Err(Error::domain("z", "dimension mismatch"));
    }
    // bᵀ (sᵀ)⁻¹ z = (s⁻¹ b)ᵀ z = θᵀ z
    let theta = market_price_of_risk(market, x)?;
    let s = market.diffusion(x);
    let z = DVector::from_column_slice(z);
    let total: f64 = x.iter().sum();
    let sz = &s * &z;
    Ok(theta.dot(&z) - sz.sum() / total)
}

/// `f` for VSM in closed form: `Σ z_i (κ √(X/x_i) − √(x_i/X))`.
fn vsm_driver(kappa: f64, x: &[f64], z: &[f64]) -> f64 {
    let total: f64 = x.iter().sum();
    x.iter()
        .zip(z)
        .map(|(xi, zi)| zi * (kappa * (total / xi).sqrt() - (xi / total).sqrt()))
        .sum()
}

struct ForwardPaths {
    dt: f64,
    /// `states[j][p]`.
    states: Vec<Vec<Vec<f64>>>,
    /// `dw[j][p]`, implied increments over `[t_j, t_{j+1}]`.
    dw: Vec<Vec<Vec<f64>>>,
    /// `weights[j][p]`, one-step driver weights.
    weights: Vec<Vec<f64>>,
}

fn exponential_log_weight(kappa: f64, x: &[f64], y: &[f64], dt: f64) -> f64 {
    let phi = |v: &[f64]| v.iter().sum::<f64>().ln() - kappa * v.iter().map(|c| c.ln()).sum::<f64>();
    let g = |v: &[f64]| {
        let total: f64 = v.iter().sum();
        v.iter().map(|c| total / c).sum::<f64>()
    };
    let killing = if kappa == 1.0 {
        0.0
    } else {
        0.5 * kappa * (1.0 - kappa) * 0.5 * dt * (g(x) + g(y))
    };
    (phi(y) - phi(x)) - killing
}

fn simulate_forward(vsm: &VsmParams, horizon: f64, x0: &[f64], cfg: &BsdeConfig) -> Result<ForwardPaths> {
    let n_t = cfg.n_time_steps;
    let dt = horizon / n_t as f64;
    let times: Vec<f64> = (0..=n_t)
        .map(|j| if j == n_t { horizon } else { j as f64 * dt })
        .collect();
    let settings = ClockSettings {
        dt: cfg.clock_step.unwrap_or(dt),
        scheme: cfg.scheme,
        max_step_factor: cfg.max_step_factor,
    };
    let key = SeedKey::new(cfg.seed).domain("bsde-forward");
    let paths: Vec<Vec<Vec<f64>>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|p| calendar_path(vsm, x0, &times, &settings, &mut key.stream(p)))
        .collect::<Result<_>>()?;
    let n = vsm.n();
    let growth = ((n as f64) * vsm.kappa() * dt).exp_m1() / n as f64;
    let mut states = vec![Vec::with_capacity(cfg.n_paths); n_t + 1];
    let mut dw = vec![Vec::with_capacity(cfg.n_paths); n_t];
    let mut weights = vec![Vec::with_capacity(cfg.n_paths); n_t];
    for path in paths {
        for j in 0..n_t {
            let (x, y) = (&path[j], &path[j + 1]);
            let total: f64 = x.iter().sum();
            let inc: Vec<f64> = x
                .iter()
                .zip(y)
                .map(|(xi, yi)| (yi - xi - total * growth) / (xi * total).sqrt())
                .collect();
            weights[j].push(match cfg.integrator {
                Integrator::Exponential => exponential_log_weight(vsm.kappa(), x, y, dt).exp(),
                Integrator::Euler => 1.0 - DRIVER_SIGN * vsm_driver(vsm.kappa(), x, &inc),
            });
            dw[j].push(inc);
        }
        for (j, x) in path.into_iter().enumerate() {
            states[j].push(x);
        }
    }
    Ok(ForwardPaths {
        dt,
        states,
        dw,
        weights,
    })
}

/// Least squares on column-standardized features, solved through the SVD
/// of the design matrix.
struct Regression {
    design: DMatrix<f64>,
    svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Regression {
    fn new(rows: &[Vec<f64>], step: usize) -> Result<Self> {
        let (n_rows, n_cols) = (rows.len(), rows[0].len());
        let mut design = DMatrix::from_fn(n_rows, n_cols, |r, c| rows[r][c]);
        for c in 1..n_cols {
            let col: Vec<f64> = design.column(c).iter().copied().collect();
            let s = summarize(&col);
            let scale = if s.std_dev > 0.0 { s.std_dev } else { 1.0 };
            design.column_mut(c).apply(|v| *v = (*v - s.mean) / scale);
        }
        let svd = design.clone().svd(true, true);
        let (lo, hi) = (svd.singular_values.min(), svd.singular_values.max());
        // Gram condition = (design condition)²
        let condition = if lo > 0.0 { (hi / lo).powi(2) } else { f64::INFINITY };
        if !(condition <= GRAM_CONDITION_LIMIT) {
            return Err(Error::RegressionIllConditioned { step, condition });
        }
        Ok(Regression { design, svd })
    }

    /// Coefficients and fitted values.
    fn fit(&self, target: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let t = DVector::from_column_slice(target);
        let beta = self.svd.solve(&t, 0.0).expect("SVD was computed with U and V");
        let fitted = &self.design * &beta;
        (beta.iter().copied().collect(), fitted.iter().copied().collect())
    }
}

/// Implicit penalty step for `Ŷ` with obstacle 0: returns `(Y, ΔK)`.
fn penalize(y_hat: f64, lambda: f64, dt: f64) -> (f64, f64) {
    if y_hat >= 0.0 || lambda == 0.0 {
        (y_hat, 0.0)
    } else {
        let y = y_hat / (1.0 + lambda * dt);
        (y, -lambda * dt * y)
    }
}

fn backward(vsm: &VsmParams, fwd: &ForwardPaths, cfg: &BsdeConfig, lambda: f64) -> Result<BsdeSolution> {
    let n_t = fwd.dw.len();
    let n_paths = cfg.n_paths;
    let n = vsm.n();
    let dt = fwd.dt;
    let exps = exponents(cfg.basis.n_coordinates(n), cfg.basis.degree());
    let mut y_next = vec![1.0; n_paths];
    let mut dk = vec![vec![0.0; n_paths]; n_t];
    let mut y_coeffs = Vec::new();
    let mut z_coeffs = Vec::new();
    let mut complementarity = vec![0.0; n_paths];

    for j in (0..n_t).rev() {
        let xs = &fwd.states[j];
        let dws = &fwd.dw[j];
        let weighted: Vec<f64> = (0..n_paths).map(|p| y_next[p] * fwd.weights[j][p]).collect();
        let z_targets: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n_paths).map(|p| y_next[p] * dws[p][i] / dt).collect())
            .collect();
        let y_hat: Vec<f64> = if j == 0 {
            vec![pairwise_sum(&weighted) / n_paths as f64; n_paths]
        } else {
            let rows: Vec<Vec<f64>> = xs.iter().map(|x| features(&cfg.basis.coordinates(x), &exps)).collect();
            let reg = Regression::new(&rows, j)?;
            let (cy, fitted) = reg.fit(&weighted);
            y_coeffs.push(cy);
            z_coeffs.push(z_targets.iter().map(|t| reg.fit(t).0).collect());
            fitted
        };
        let mut y_now = vec![0.0; n_paths];
        for p in 0..n_paths {
            let (y, k) = penalize(y_hat[p], lambda, dt);
            y_now[p] = y;
            dk[j][p] = k;
            complementarity[p] += y * k;
        }
        if j == 0 {
            let samples = summarize(&weighted);
            let y0 = y_now[0];
            if !y0.is_finite() {
                return Err(Error::NonFinite { what: "bsde y0" });
            }
            y_coeffs.reverse();
            z_coeffs.reverse();
            let mut k_trace = vec![0.0];
            for step in &dk {
                let last = *k_trace.last().unwrap();
                k_trace.push(last + pairwise_sum(step) / n_paths as f64);
            }
            let residual: Vec<f64> = complementarity.iter().map(|c| c.abs()).collect();
            return Ok(BsdeSolution {
                lambda,
                y0,
                y0_se: samples.std_error,
                y_coeffs,
                z_coeffs,
                k_trace,
                complementarity_residual: pairwise_sum(&residual) / n_paths as f64,
            });
        }
        y_next = y_now;
    }
    unreachable!("loop returns at j = 0")
}

fn check_inputs(vsm: &VsmParams, horizon: f64, x0: &[f64], cfg: &BsdeConfig) -> Result<()> {
    cfg.validate()?;
    check_state("x0", x0)?;
    if vsm.n() > MAX_STOCKS {
        return Err(Error::domain(
            "n",
            format!("regression solver is capped at {MAX_STOCKS} stocks, got {}", vsm.n()),
        ));
    }
    if x0.len() != vsm.n() {
        return Err(Error::domain("x0", "dimension mismatch"));
    }
    if !(horizon >= 0.0) {
        return Err(Error::domain("horizon", "must be nonnegative"));
    }
    Ok(())
}

fn trivial(lambda: f64) -> BsdeSolution {
    BsdeSolution {
        lambda,
        y0: 1.0,
        y0_se: 0.0,
        y_coeffs: Vec::new(),
        z_coeffs: Vec::new(),
        k_trace: vec![0.0],
        complementarity_residual: 0.0,
    }
}

/// Unreflected solve; `y0 ≈ u(T, x0)`.
pub fn solve_bsde(vsm: &VsmParams, horizon: f64, x0: &[f64], cfg: &BsdeConfig) -> Result<BsdeSolution> {
    check_inputs(vsm, horizon, x0, cfg)?;
    if horizon == 0.0 {
        return Ok(trivial(0.0));
    }
    let fwd = simulate_forward(vsm, horizon, x0, cfg)?;
    backward(vsm, &fwd, cfg, 0.0)
}

/// Penalized solves for every `λ` of the ladder on one set of forward paths.
pub fn solve_reflected(vsm: &VsmParams, horizon: f64, x0: &[f64], cfg: &BsdeConfig) -> Result<ReflectedLadder> {
    check_inputs(vsm, horizon, x0, cfg)?;
    let rungs = if horizon == 0.0 {
        cfg.lambdas.iter().map(|&l| trivial(l)).collect()
    } else {
        let fwd = simulate_forward(vsm, horizon, x0, cfg)?;
        cfg.lambdas
            .iter()
            .map(|&l| backward(vsm, &fwd, cfg, l))
            .collect::<Result<Vec<_>>>()?
    };
    let warning = rungs.windows(2).find_map(|w: &[BsdeSolution]| {
        let tol = 2.0 * w[0].y0_se.hypot(w[1].y0_se);
        (w[1].y0 < w[0].y0 - tol).then(|| {
            format!(
                "y0 decreased from {} (lambda {}) to {} (lambda {})",
                w[0].y0, w[0].lambda, w[1].y0, w[1].lambda
            )
        })
    });
    Ok(ReflectedLadder { rungs, warning })
}
