//! Monte Carlo estimation of the optimal arbitrage quantity `u(T − t, x)`.
//!
//! For `κ = 1`:
//!
//! ```text
//! u(T − s, x) = Π x_i / Σ x_i · E[ Σ X_i(T) / Π X_i(T) | X(s) = x ]
//! ```
//!
//! and for `ζ ∈ [0, 1]` (`κ = (1 + ζ)/2`), with `p = (1 + ζ)/2`:
//!
//! ```text
//! u = (Π x_i)^p / Σ x_i · E[ Σ X_i(T) / (Π X_i(T))^p · exp(−∫ₛᵀ (1 − ζ²) X(r) Σ_j 1/(8 X_j(r)) dr) ]
//! ```
//!
//! Each path is a fresh time-changed Bessel run from `x` at time `s`.
//! Products and powers are evaluated as exponentials of log sums, and each
//! sample is the full ratio (prefactor included), so at `τ = 0` every sample
//! is `exp(0) = 1` exactly.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{check_state, Interpolation, SimConfig, UEstimate, VsmParams};
use crate::rng::SeedKey;
use crate::stats::summarize;
use crate::time_change::{bridge_in_cell, calendar_path, linear_in_cell, walk_clock, ClockSettings};

const ESTIMATE_DOMAIN: &str = "estimate";

/// `(x_1 + … + x_n) / (x_1 ⋯ x_n)`.
pub fn payoff_kappa1(x_t: &[f64]) -> Result<f64> {
    check_state("x_t", x_t)?;
    Ok(log_payoff(x_t, 1.0).exp())
}

/// `ln Σ x_i − power · Σ ln x_i`.
fn log_payoff(x: &[f64], power: f64) -> f64 {
    let total: f64 = x.iter().sum();
    total.ln() - power * x.iter().map(|v| v.ln()).sum::<f64>()
}

fn clock_settings(cfg: &SimConfig) -> ClockSettings {
    ClockSettings {
        dt: cfg.dt(),
        scheme: cfg.scheme,
        max_step_factor: cfg.max_step_factor,
    }
}

/// `(1 − ζ²) X Σ_j 1/(8 X_j)`.
fn killing_rate(coef: f64, y: &[f64]) -> f64 {
    let total: f64 = y.iter().sum();
    coef * total * y.iter().map(|v| 1.0 / (8.0 * v)).sum::<f64>()
}

/// Sample of the discounted ratio along one path.
fn path_sample(
    vsm: &VsmParams,
    start: f64,
    x: &[f64],
    cfg: &SimConfig,
    settings: &ClockSettings,
    log_prefactor: f64,
    stream: u64,
) -> Result<f64> {
    let power = vsm.kappa();
    let zeta = vsm.zeta();
    let coef = 1.0 - zeta * zeta;
    let mut rng = SeedKey::new(cfg.seed).domain(ESTIMATE_DOMAIN).stream(stream);
    let mut integral = 0.0;
    let mut pending = 0.0;
    let cell = walk_clock(vsm.bessel_dim(), start, x, cfg.horizon, settings, &mut rng, |lo, hi, y_lo, y_hi| {
        if coef != 0.0 {
            integral += pending;
            pending = 0.5 * (hi - lo) * (killing_rate(coef, y_lo) + killing_rate(coef, y_hi));
        }
    })?;
    let x_t = if cell.steps == 0 {
        cell.y_hi
    } else {
        match cfg.interpolation {
            Interpolation::Linear => linear_in_cell(cell.theta_lo, cell.theta_hi, &cell.y_lo, &cell.y_hi, cfg.horizon),
            Interpolation::BesselBridge => {
                let m = vsm.integer_dim().ok_or_else(|| {
                    Error::domain("interpolation", "bridge interpolation needs an integer Bessel dimension")
                })?;
                bridge_in_cell(
                    m,
                    settings.dt,
                    cell.theta_lo,
                    cell.theta_hi,
                    &cell.y_lo,
                    &cell.y_hi,
                    cfg.horizon,
                    // a cell narrower than the step gets one exact bridge draw at T
                    cfg.bridge_step.min(cell.theta_hi - cell.theta_lo),
                    &mut rng,
                )?
            }
        }
    };
    if coef != 0.0 && cell.steps > 0 {
        integral += 0.5 * (cfg.horizon - cell.theta_lo) * (killing_rate(coef, &cell.y_lo) + killing_rate(coef, &x_t));
    }
    let log_ratio = log_prefactor + (log_payoff(&x_t, power) - integral);
    Ok(log_ratio.exp())
}

fn estimate_with(vsm: &VsmParams, start: f64, x: &[f64], cfg: &SimConfig) -> Result<UEstimate> {
    cfg.validate()?;
    check_state("x", x)?;
    if x.len() != vsm.n() {
        return Err(Error::domain("x", format!("expected {} coordinates, got {}", vsm.n(), x.len())));
    }
    let settings = clock_settings(cfg);
    let log_prefactor = -log_payoff(x, vsm.kappa());
    let samples: Vec<f64> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|p| path_sample(vsm, start, x, cfg, &settings, log_prefactor, p))
        .collect::<Result<_>>()?;
    let summary = summarize(&samples);
    if !summary.mean.is_finite() || !summary.std_error.is_finite() {
        return Err(Error::NonFinite { what: "u estimate" });
    }
    Ok(UEstimate {
        mean: summary.mean,
        std_error: summary.std_error,
        n_paths: cfg.n_paths,
        tau: (cfg.horizon - start).max(0.0),
        state: x.to_vec(),
    })
}

/// Estimates `u(T − start, x)` for `κ = 1`.
pub fn estimate_u(vsm: &VsmParams, start: f64, x: &[f64], cfg: &SimConfig) -> Result<UEstimate> {
    if vsm.kappa() != 1.0 {
        return Err(Error::domain(
            "kappa",
            format!("closed-form functional needs kappa = 1, got {}", vsm.kappa()),
        ));
    }
    estimate_with(vsm, start, x, cfg)
}

/// Estimates `u(T − start, x)` for any `ζ ∈ [0, 1]`, including the
/// exponential correction (trapezoid rule on the reconstructed clock grid).
pub fn estimate_u_general(vsm: &VsmParams, start: f64, x: &[f64], cfg: &SimConfig) -> Result<UEstimate> {
    estimate_with(vsm, start, x, cfg)
}

/// Seed used for mesh node or time index `index` under a master seed.
pub fn derived_seed(master: u64, index: u64) -> u64 {
    SeedKey::new(master).child(index).0
}

/// `u(T − t_s, X(t_s))` along one driving trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UPath {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub estimates: Vec<UEstimate>,
}

/// Outer loop over `s = 0..=N_T`: simulate one driving trajectory of `X`
/// from `vsm.x0()` and estimate `u(T − t_s, X(t_s))` at each mesh time with
/// fresh inner paths. With `N_T = 0` only `u(T, x0)` is computed (this needs
/// an explicit `clock_step`).
pub fn sweep_time(vsm: &VsmParams, cfg: &SimConfig, driving_seed: u64) -> Result<UPath> {
    cfg.validate()?;
    let n_t = cfg.n_steps;
    let times: Vec<f64> = (0..=n_t)
        .map(|s| if s == n_t { cfg.horizon } else { s as f64 * cfg.horizon / n_t as f64 })
        .collect();
    let times = if n_t == 0 { vec![0.0] } else { times };
    let states = if times.len() == 1 {
        vec![vsm.x0().to_vec()]
    } else {
        let mut rng = SeedKey::new(driving_seed).domain("driving").stream(0);
        calendar_path(vsm, vsm.x0(), &times, &clock_settings(cfg), &mut rng)?
    };
    let estimates = times
        .iter()
        .zip(&states)
        .enumerate()
        .map(|(s, (t, x))| {
            let inner = cfg.clone().with_seed(derived_seed(cfg.seed, s as u64));
            estimate_with(vsm, *t, x, &inner)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UPath {
        times,
        states,
        estimates,
    })
}

/// One mesh axis: `cells` cells on `[lo, hi]`, evaluated at cell centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshAxis {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl MeshAxis {
    pub fn new(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::domain("cells", "mesh needs at least one cell"));
        }
        if !(lo < hi) || !(lo > 0.0) {
            return Err(Error::domain(
                "mesh",
                format!("need 0 < lo < hi, got [{lo}, {hi}]"),
            ));
        }
        Ok(MeshAxis { lo, hi, cells })
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = (self.hi - self.lo) / self.cells as f64;
        (0..self.cells).map(|i| self.lo + (i as f64 + 0.5) * h).collect()
    }
}

/// Mesh over `(x_1, x_2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshSpec {
    pub x1: MeshAxis,
    pub x2: MeshAxis,
}

/// Estimate (or the reason it failed) at one mesh node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeEstimate {
    pub x1: f64,
    pub x2: f64,
    pub seed: u64,
    pub estimate: Option<UEstimate>,
    pub failure: Option<String>,
}

/// `u(T, x)` over a 2-D mesh, row-major in `(x1, x2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct USurface {
    pub mesh: MeshSpec,
    pub fixed_coords: Vec<f64>,
    pub config: SimConfig,
    pub nodes: Vec<NodeEstimate>,
}

impl USurface {
    pub fn node(&self, i: usize, j: usize) -> &NodeEstimate {
        &self.nodes[i * self.mesh.x2.cells + j]
    }

    pub fn failures(&self) -> usize {
        self.nodes.iter().filter(|n| n.estimate.is_none()).count()
    }

    /// Pairs of horizontally or vertically adjacent nodes that both succeeded.
    pub fn adjacent_pairs(&self) -> Vec<(&UEstimate, &UEstimate)> {
        let (r, c) = (self.mesh.x1.cells, self.mesh.x2.cells);
        let mut out = Vec::new();
        for i in 0..r {
            for j in 0..c {
                let here = &self.node(i, j).estimate;
                let right = (j + 1 < c).then(|| &self.node(i, j + 1).estimate);
                let down = (i + 1 < r).then(|| &self.node(i + 1, j).estimate);
                for other in [right, down].into_iter().flatten() {
                    if let (Some(a), Some(b)) = (here, other) {
                        out.push((a, b));
                    }
                }
            }
        }
        out
    }
}

/// Evaluates `u(T, x)` at every mesh node, with coordinates 3..n held at
/// `fixed_coords`. Node `(i, j)` uses the seed derived from
/// `(cfg.seed, i · cells₂ + j)`. Nodes whose estimate fails (step budget,
/// overflow) are recorded, not dropped.
pub fn sweep_surface(vsm: &VsmParams, mesh: &MeshSpec, fixed_coords: &[f64], cfg: &SimConfig) -> Result<USurface> {
    cfg.validate()?;
    if fixed_coords.len() + 2 != vsm.n() {
        return Err(Error::domain(
            "fixed_coords",
            format!("expected {} fixed coordinates for n = {}", vsm.n().saturating_sub(2), vsm.n()),
        ));
    }
    check_state("fixed_coords", &[fixed_coords, &[1.0]].concat())?;
    let xs1 = mesh.x1.nodes();
    let xs2 = mesh.x2.nodes();
    let cells2 = mesh.x2.cells;
    let nodes = (0..xs1.len() * cells2)
        .into_par_iter()
        .map(|idx| {
            let (x1, x2) = (xs1[idx / cells2], xs2[idx % cells2]);
            let seed = derived_seed(cfg.seed, idx as u64);
            let mut x = vec![x1, x2];
            x.extend_from_slice(fixed_coords);
            let inner = cfg.clone().with_seed(seed);
            match estimate_with(vsm, 0.0, &x, &inner) {
                Ok(e) => NodeEstimate {
                    x1,
                    x2,
                    seed,
                    estimate: Some(e),
                    failure: None,
                },
                Err(e) => NodeEstimate {
                    x1,
                    x2,
                    seed,
                    estimate: None,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(USurface {
        mesh: *mesh,
        fixed_coords: fixed_coords.to_vec(),
        config: cfg.clone(),
        nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vsm2() -> VsmParams {
        VsmParams::from_kappa(vec![1.0, 1.0], 1.0).unwrap()
    }

    #[test]
    fn payoff_values() {
        assert!((payoff_kappa1(&[1.0, 1.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!((payoff_kappa1(&[2.0, 4.0]).unwrap() - 0.75).abs() < 1e-15);
        assert!((payoff_kappa1(&[3.7]).unwrap() - 1.0).abs() < 1e-15);
        assert!(payoff_kappa1(&[1.0, 0.0]).is_err());
        // 200 stocks at 1e-3: the naive product underflows, the log form does not.
        let p = payoff_kappa1(&vec![10.0; 400]).unwrap();
        assert!(p == 0.0 || p.is_finite());
        assert!(log_payoff(&vec![1e-3; 200], 1.0).is_finite());
    }

    #[test]
    fn zero_remaining_time_is_exactly_one() {
        let cfg = SimConfig::new(1.0, 100, 64, 1);
        for x in [vec![1.0, 1.0], vec![0.3, 7.5], vec![1e-4, 2.0]] {
            let e = estimate_u(&vsm2(), 1.0, &x, &cfg).unwrap();
            assert_eq!(e.mean, 1.0);
            assert_eq!(e.std_error, 0.0);
            assert_eq!(e.tau, 0.0);
        }
        let general = VsmParams::from_zeta(vec![1.0, 2.0, 3.0], 0.3).unwrap();
        let e = estimate_u_general(&general, 1.0, &[1.0, 2.0, 3.0], &cfg).unwrap();
        assert_eq!((e.mean, e.std_error), (1.0, 0.0));
    }

    #[test]
    fn single_stock_collapses_to_one() {
        let vsm = VsmParams::single_stock(2.0, 1.0);
        let cfg = SimConfig::new(1.0, 100, 32, 2);
        let e = estimate_u(&vsm, 0.0, &[2.0], &cfg).unwrap();
        assert!((e.mean - 1.0).abs() < 1e-12, "{e:?}");
        assert!(e.std_error < 1e-12);
    }

    #[test]
    fn closed_form_rejects_other_kappa() {
        let vsm = VsmParams::from_kappa(vec![1.0, 1.0], 0.75).unwrap();
        let cfg = SimConfig::new(1.0, 100, 32, 2);
        assert!(estimate_u(&vsm, 0.0, &[1.0, 1.0], &cfg).is_err());
        assert!(estimate_u_general(&vsm, 0.0, &[1.0, 1.0], &cfg).is_ok());
    }

    #[test]
    fn bridge_needs_integer_dimension() {
        let vsm = VsmParams::from_zeta(vec![1.0, 1.0], 0.3).unwrap();
        let cfg = SimConfig::new(1.0, 100, 8, 2).with_interpolation(Interpolation::BesselBridge);
        assert!(estimate_u_general(&vsm, 0.0, &[1.0, 1.0], &cfg).is_err());
    }

    #[test]
    fn estimates_are_deterministic() {
        let cfg = SimConfig::new(1.0, 100, 200, 42);
        let a = estimate_u(&vsm2(), 0.0, &[1.0, 1.0], &cfg).unwrap();
        let b = estimate_u(&vsm2(), 0.0, &[1.0, 1.0], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zeta_one_matches_closed_form_exactly() {
        let cfg = SimConfig::new(1.0, 100, 200, 5);
        let a = estimate_u(&vsm2(), 0.0, &[1.0, 1.5], &cfg).unwrap();
        let general = VsmParams::from_zeta(vec![1.0, 1.0], 1.0).unwrap();
        let b = estimate_u_general(&general, 0.0, &[1.0, 1.5], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_time_final_entry_is_one() {
        let cfg = SimConfig::new(1.0, 10, 100, 3);
        let path = sweep_time(&vsm2(), &cfg, 9).unwrap();
        assert_eq!(path.estimates.len(), 11);
        let last = path.estimates.last().unwrap();
        assert_eq!((last.mean, last.std_error), (1.0, 0.0));
        assert_eq!(*path.times.last().unwrap(), 1.0);
    }

    #[test]
    fn sweep_time_without_steps_has_one_entry() {
        let mut cfg = SimConfig::new(1.0, 0, 100, 3);
        cfg.clock_step = Some(0.01);
        let path = sweep_time(&vsm2(), &cfg, 9).unwrap();
        assert_eq!(path.estimates.len(), 1);
        assert_eq!(path.estimates[0].tau, 1.0);
    }

    #[test]
    fn single_cell_surface_matches_point_estimate() {
        let cfg = SimConfig::new(1.0, 100, 100, 17);
        let mesh = MeshSpec {
            x1: MeshAxis::new(3.5, 9.0, 1).unwrap(),
            x2: MeshAxis::new(3.5, 9.0, 1).unwrap(),
        };
        let surface = sweep_surface(&vsm2(), &mesh, &[], &cfg).unwrap();
        let node = surface.node(0, 0);
        assert_eq!((node.x1, node.x2), (6.25, 6.25));
        let direct = estimate_u(&vsm2(), 0.0, &[6.25, 6.25], &cfg.clone().with_seed(derived_seed(17, 0))).unwrap();
        assert_eq!(node.estimate.as_ref().unwrap(), &direct);
    }

    #[test]
    fn surface_checks_fixed_coordinates() {
        let cfg = SimConfig::new(1.0, 100, 10, 1);
        let mesh = MeshSpec {
            x1: MeshAxis::new(1.0, 2.0, 1).unwrap(),
            x2: MeshAxis::new(1.0, 2.0, 1).unwrap(),
        };
        let vsm3 = VsmParams::from_kappa(vec![1.0; 3], 1.0).unwrap();
        assert!(sweep_surface(&vsm3, &mesh, &[], &cfg).is_err());
        assert!(MeshAxis::new(2.0, 1.0, 3).is_err());
        assert!(MeshAxis::new(1.0, 2.0, 0).is_err());
    }

    #[test]
    fn surface_reports_budget_failures() {
        // with factor 1 the cap equals the expected step count, which some of
        // 200 paths exceed at every node
        let mut cfg = SimConfig::new(1.0, 100, 200, 1);
        cfg.max_step_factor = 1.0;
        let mesh = MeshSpec {
            x1: MeshAxis::new(3.5, 9.0, 2).unwrap(),
            x2: MeshAxis::new(3.5, 9.0, 2).unwrap(),
        };
        let surface = sweep_surface(&vsm2(), &mesh, &[], &cfg).unwrap();
        assert_eq!(surface.nodes.len(), 4);
        assert_eq!(surface.failures(), 4);
        assert!(surface.nodes[0].failure.as_ref().unwrap().contains("budget"));
        assert!(surface.adjacent_pairs().is_empty());
    }
}
