//! Euler–Maruyama baseline for the raw capitalization SDE, and the auxiliary
//! `ζ`-process boundary experiment.
//!
//! Neither scheme repairs negative states: a path that reaches the
//! positivity floor is recorded as failed (Euler) or absorbed (`ζ`).

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{check_state, PathBatch, PathRecord, SimConfig, VsmParams};
use crate::rng::SeedKey;
use crate::time_change::{calendar_path, ClockSettings};

/// Floor below which a capitalization counts as having touched zero.
pub const DEFAULT_EPS_POS: f64 = 1e-12;

/// Domain label for the per-path streams shared by the Euler and Bessel
/// path generators, so both methods consume the same seeds.
const PATH_DOMAIN: &str = "vsm-paths";

/// One Euler step `X_i + κ X Δt + √(X_i X) noise_i`, where `noise` holds the
/// Brownian increments.
pub fn euler_vsm_step(kappa: f64, x: &[f64], dt: f64, noise: &[f64]) -> Vec<f64> {
    let total: f64 = x.iter().sum();
    x.iter()
        .zip(noise)
        .map(|(xi, dw)| xi + kappa * total * dt + (xi * total).sqrt() * dw)
        .collect()
}

/// Failure statistics of a batch of simulated paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticReport {
    pub n_paths: usize,
    pub n_failed: usize,
    pub fail_fraction: f64,
    /// Calendar time of the first nonpositive coordinate, per path.
    pub first_failure: Vec<Option<f64>>,
}

impl DiagnosticReport {
    fn from_failures(first_failure: Vec<Option<f64>>) -> Self {
        let n_paths = first_failure.len();
        let n_failed = first_failure.iter().filter(|f| f.is_some()).count();
        DiagnosticReport {
            n_paths,
            n_failed,
            fail_fraction: n_failed as f64 / n_paths as f64,
            first_failure,
        }
    }
}

fn calendar_grid(cfg: &SimConfig) -> Vec<f64> {
    let dt = cfg.horizon / cfg.n_steps as f64;
    (0..=cfg.n_steps).map(|k| k as f64 * dt).collect()
}

/// Euler paths of the VSM on the calendar grid `t_k = kT/N_T`.
///
/// A path is stored up to its last strictly positive state; the report
/// records where each failed path first crossed `eps_pos`.
pub fn euler_vsm_paths(
    vsm: &VsmParams,
    cfg: &SimConfig,
    eps_pos: f64,
) -> Result<(PathBatch, DiagnosticReport)> {
    cfg.validate()?;
    let times = calendar_grid(cfg);
    let dt = cfg.horizon / cfg.n_steps as f64;
    let sd = dt.sqrt();
    let key = SeedKey::new(cfg.seed).domain(PATH_DOMAIN);
    let n = vsm.n();
    let runs: Vec<(PathRecord, Option<f64>)> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = key.stream(p);
            let mut x = vsm.x0().to_vec();
            let mut values = vec![x.clone()];
            let mut failed = None;
            let mut noise = vec![0.0; n];
            for t in &times[1..] {
                noise
                    .iter_mut()
                    .for_each(|z| *z = sd * rng.sample::<f64, _>(StandardNormal));
                x = euler_vsm_step(vsm.kappa(), &x, dt, &noise);
                if x.iter().any(|v| !(*v > eps_pos)) {
                    failed = Some(*t);
                    break;
                }
                values.push(x.clone());
            }
            (PathRecord { stream: p, values }, failed)
        })
        .collect();
    let (paths, failures): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let batch = PathBatch::new(times, cfg.seed, paths)?;
    Ok((batch, DiagnosticReport::from_failures(failures)))
}

/// Bessel-clock paths of the VSM on the same calendar grid and the same
/// per-path seeds as [`euler_vsm_paths`]. Positivity holds by construction,
/// so the report is expected to show no failures.
pub fn bessel_vsm_paths(
    vsm: &VsmParams,
    cfg: &SimConfig,
    eps_pos: f64,
) -> Result<(PathBatch, DiagnosticReport)> {
    cfg.validate()?;
    let times = calendar_grid(cfg);
    let settings = ClockSettings {
        dt: cfg.dt(),
        scheme: cfg.scheme,
        max_step_factor: cfg.max_step_factor,
    };
    let key = SeedKey::new(cfg.seed).domain(PATH_DOMAIN);
    let paths: Vec<PathRecord> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let values = calendar_path(vsm, vsm.x0(), &times, &settings, &mut key.stream(p))?;
            Ok(PathRecord { stream: p, values })
        })
        .collect::<Result<_>>()?;
    let failures: Vec<Option<f64>> = paths
        .iter()
        .map(|p| {
            p.values
                .iter()
                .position(|x| x.iter().any(|v| !(*v > eps_pos)))
                .map(|k| times[k])
        })
        .collect();
    let report = DiagnosticReport::from_failures(failures);
    if report.n_failed > 0 {
        return Err(Error::NonFinite {
            what: "bessel path positivity",
        });
    }
    Ok((PathBatch::new(times, cfg.seed, paths)?, report))
}

/// Settings of the auxiliary-process experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryConfig {
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub eps_pos: f64,
    /// Drop the Brownian term (deterministic check).
    pub zero_noise: bool,
    /// Number of leading paths whose trajectories are kept for plotting.
    pub keep_trajectories: usize,
}

impl BoundaryConfig {
    pub fn new(x0: Vec<f64>, horizon: f64, dt: f64, n_paths: usize, seed: u64) -> Self {
        BoundaryConfig {
            x0,
            horizon,
            dt,
            n_paths,
            seed,
            eps_pos: DEFAULT_EPS_POS,
            zero_noise: false,
            keep_trajectories: 0,
        }
    }
}

/// Outcome of the auxiliary-process experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HitReport {
    pub fraction_hit: f64,
    pub std_error: f64,
    /// Absorption time per path (`None` if the path stayed positive).
    pub hit_times: Vec<Option<f64>>,
    /// Trajectories of the first `keep_trajectories` paths, frozen after
    /// absorption.
    pub trajectories: Vec<Vec<Vec<f64>>>,
}

impl HitReport {
    pub fn n_hit(&self) -> usize {
        self.hit_times.iter().filter(|h| h.is_some()).count()
    }

    /// Wilson score interval for the hitting probability.
    pub fn ci(&self, level: f64) -> (f64, f64) {
        let z = crate::stats::z_two_sided(level);
        let n = self.hit_times.len() as f64;
        let p = self.fraction_hit;
        let denom = 1.0 + z * z / n;
        let centre = (p + z * z / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
        (centre - half, centre + half)
    }
}

/// Euler simulation of `dζ_i = ζ_i dt + √(ζ_i (ζ_1 + … + ζ_n)) dW_i` with an
/// absorbing boundary: a path is absorbed once any coordinate is at or below
/// `eps_pos`.
pub fn auxiliary_boundary_experiment(cfg: &BoundaryConfig) -> Result<HitReport> {
    check_state("x0", &cfg.x0)?;
    if !(cfg.horizon > 0.0 && cfg.dt > 0.0) {
        return Err(Error::domain("dt", "horizon and step must be positive"));
    }
    if cfg.n_paths == 0 {
        return Err(Error::domain("n_paths", "path budget is empty"));
    }
    let steps = (cfg.horizon / cfg.dt).round().max(1.0) as usize;
    let dt = cfg.horizon / steps as f64;
    let sd = dt.sqrt();
    let key = SeedKey::new(cfg.seed).domain("auxiliary");
    let runs: Vec<(Option<f64>, Option<Vec<Vec<f64>>>)> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = key.stream(p);
            let keep = (p as usize) < cfg.keep_trajectories;
            let mut z = cfg.x0.clone();
            let mut traj = keep.then(|| vec![z.clone()]);
            let mut hit = None;
            for k in 1..=steps {
                let total: f64 = z.iter().sum();
                for zi in z.iter_mut() {
                    let dw = if cfg.zero_noise {
                        0.0
                    } else {
                        sd * rng.sample::<f64, _>(StandardNormal)
                    };
                    *zi += *zi * dt + (*zi * total).sqrt() * dw;
                }
                if let Some(t) = traj.as_mut() {
                    t.push(z.clone());
                }
                if z.iter().any(|v| !(*v > cfg.eps_pos)) {
                    hit = Some(k as f64 * dt);
                    break;
                }
            }
            if let Some(t) = traj.as_mut() {
                let last = t.last().cloned().expect("trajectory starts non-empty");
                t.resize(steps + 1, last);
            }
            (hit, traj)
        })
        .collect();
    let hit_times: Vec<Option<f64>> = runs.iter().map(|r| r.0).collect();
    let trajectories = runs.into_iter().filter_map(|r| r.1).collect();
    let n = cfg.n_paths as f64;
    let p = hit_times.iter().filter(|h| h.is_some()).count() as f64 / n;
    Ok(HitReport {
        fraction_hit: p,
        std_error: (p * (1.0 - p) / n).sqrt(),
        hit_times,
        trajectories,
    })
}
