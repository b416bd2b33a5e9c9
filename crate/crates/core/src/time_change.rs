//! The stochastic clock.
//!
//! Under `Λ(t) = ∫₀ᵗ X(r)/4 dr` each VSM capitalization becomes an
//! independent squared Bessel process `Y_i` of dimension `m = 4κ`. We run the
//! Bessel processes on a uniform clock mesh `t_k = s + kΔt` and map the mesh
//! back to calendar time with `θ_{k+1} = θ_k + 4Δt / Y(t_k)`, stopping at the
//! first `k = N` with `θ_N ≥ T`. The terminal state `X(T)` is then read off
//! inside the last cell `[θ_{N-1}, θ_N]` by linear interpolation or by a
//! Bessel bridge.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::bessel::{self, BesselScheme, EndpointPlacement};
use crate::error::{Error, Result};
use crate::model::{check_state, VsmParams};

/// Uniform clock mesh and its calendar-time image.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockMap {
    t_grid: Vec<f64>,
    theta_grid: Vec<f64>,
    /// `Y(t_k)` for every `k` that has been advanced past.
    y_totals: Vec<f64>,
}

impl ClockMap {
    /// A clock started at calendar (and clock) time `start`.
    pub fn new(start: f64) -> Self {
        ClockMap {
            t_grid: vec![start],
            theta_grid: vec![start],
            y_totals: Vec::new(),
        }
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }
    pub fn theta_grid(&self) -> &[f64] {
        &self.theta_grid
    }
    pub fn y_totals(&self) -> &[f64] {
        &self.y_totals
    }
    pub fn start(&self) -> f64 {
        self.theta_grid[0]
    }
    /// Index `N` of the last mesh point.
    pub fn last_index(&self) -> usize {
        self.theta_grid.len() - 1
    }
    pub fn last_theta(&self) -> f64 {
        self.theta_grid[self.last_index()]
    }
}

/// Appends `θ_{k+1} = θ_k + 4 dt / Y(t_k)`, where `y_total = Y(t_k)` is the
/// total capitalization at the current last mesh point.
pub fn advance_clock(clock: &mut ClockMap, y_total: f64, dt: f64) -> Result<()> {
    if !(y_total > 0.0 && y_total.is_finite()) {
        return Err(Error::domain("y_total", format!("{y_total} must be positive")));
    }
    if !(dt > 0.0) {
        return Err(Error::domain("dt", format!("{dt} must be positive")));
    }
    let k = clock.last_index();
    let theta = clock.theta_grid[k] + 4.0 * dt / y_total;
    let t = clock.t_grid[0] + (k + 1) as f64 * dt;
    clock.y_totals.push(y_total);
    clock.theta_grid.push(theta);
    clock.t_grid.push(t);
    Ok(())
}

/// Per-stock squared Bessel state.
enum Stepper {
    SumOfSquares { m: usize, roots: Vec<f64>, w: Vec<f64> },
    Exact { m: f64 },
    Literal { start: Vec<f64>, sums: Vec<f64> },
}

impl Stepper {
    fn new(scheme: BesselScheme, m: f64, x: &[f64]) -> Result<Self> {
        Ok(match scheme.resolve(m)? {
            BesselScheme::SumOfSquares => Stepper::SumOfSquares {
                m: m as usize,
                roots: x.iter().map(|v| v.sqrt()).collect(),
                w: vec![0.0; x.len() * m as usize],
            },
            BesselScheme::ExactTransition => Stepper::Exact { m },
            BesselScheme::LiteralSingleSum => Stepper::Literal {
                start: x.to_vec(),
                sums: vec![0.0; x.len()],
            },
            BesselScheme::Auto => unreachable!("resolved above"),
        })
    }

    #[inline]
    fn step<R: Rng + ?Sized>(&mut self, y: &mut [f64], dt: f64, rng: &mut R) {
        let sd = dt.sqrt();
        match self {
            Stepper::SumOfSquares { m, roots, w } => {
                for (i, yi) in y.iter_mut().enumerate() {
                    let wi = &mut w[i * *m..(i + 1) * *m];
                    for v in wi.iter_mut() {
                        *v += sd * rng.sample::<f64, _>(StandardNormal);
                    }
                    *yi = bessel::sum_of_squares(roots[i], wi);
                }
            }
            Stepper::Exact { m } => {
                for yi in y.iter_mut() {
                    *yi = bessel::exact_transition(*m, *yi, dt, rng);
                }
            }
            Stepper::Literal { start, sums } => {
                for (i, yi) in y.iter_mut().enumerate() {
                    sums[i] += sd * rng.sample::<f64, _>(StandardNormal);
                    *yi = start[i] + sums[i] * sums[i];
                }
            }
        }
    }
}

/// Clock-loop parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockSettings {
    pub dt: f64,
    pub scheme: BesselScheme,
    pub max_step_factor: f64,
}

impl ClockSettings {
    /// Step cap `factor · ⌈max(τ/Δt, E[Λ(τ)]/Δt)⌉` for `n` stocks of Bessel
    /// dimension `m`, where `E[Λ(τ)] = Y(0) (e^{nκτ} − 1) / (4nκ)` and
    /// `κ = m/4`.
    pub fn step_cap(&self, remaining: f64, y0: f64, n: usize, m: f64) -> usize {
        let rate = n as f64 * m / 4.0;
        let expected_clock = y0 * (rate * remaining).exp_m1() / (4.0 * rate);
        let base = (remaining.max(expected_clock) / self.dt).ceil();
        let cap = (self.max_step_factor * base).ceil();
        if cap >= usize::MAX as f64 {
            usize::MAX
        } else {
            cap as usize
        }
    }
}

/// The cell `[θ_{N-1}, θ_N]` straddling the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct LastCell {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub y_lo: Vec<f64>,
    pub y_hi: Vec<f64>,
    pub steps: usize,
}

/// Runs the clock from `(start, x)` until `θ_N ≥ horizon`, calling `visit`
/// with `(θ_k, θ_{k+1}, Y(t_k), Y(t_{k+1}))` for every completed cell.
pub(crate) fn walk_clock<R: Rng + ?Sized>(
    m: f64,
    start: f64,
    x: &[f64],
    horizon: f64,
    settings: &ClockSettings,
    rng: &mut R,
    mut visit: impl FnMut(f64, f64, &[f64], &[f64]),
) -> Result<LastCell> {
    check_state("x", x)?;
    let mut y = x.to_vec();
    let mut y_prev = x.to_vec();
    let mut theta = start;
    let mut theta_prev = start;
    let mut steps = 0usize;
    if start >= horizon {
        return Ok(LastCell {
            theta_lo: start,
            theta_hi: start,
            y_lo: y_prev,
            y_hi: y,
            steps,
        });
    }
    let cap = settings.step_cap(horizon - start, x.iter().sum(), x.len(), m);
    let mut stepper = Stepper::new(settings.scheme, m, x)?;
    while theta < horizon {
        if steps >= cap {
            return Err(Error::BudgetExceeded { steps, cap });
        }
        let total: f64 = y.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::NonFinite { what: "clock total" });
        }
        y_prev.copy_from_slice(&y);
        theta_prev = theta;
        theta += 4.0 * settings.dt / total;
        stepper.step(&mut y, settings.dt, rng);
        steps += 1;
        visit(theta_prev, theta, &y_prev, &y);
    }
    Ok(LastCell {
        theta_lo: theta_prev,
        theta_hi: theta,
        y_lo: y_prev,
        y_hi: y,
        steps,
    })
}

/// A recorded clock run: the clock map and `Y_i(t_k)` for `k = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockRun {
    pub clock: ClockMap,
    pub y_paths: Vec<Vec<f64>>,
}

impl ClockRun {
    fn last_cell(&self) -> Option<(f64, f64, &[f64], &[f64])> {
        let n = self.clock.last_index();
        (n > 0).then(|| {
            (
                self.clock.theta_grid[n - 1],
                self.clock.theta_grid[n],
                self.y_paths[n - 1].as_slice(),
                self.y_paths[n].as_slice(),
            )
        })
    }
}

/// Runs the time-changed Bessel processes of `vsm` from state `x` at time
/// `start` until the clock passes `horizon`, recording the full path.
pub fn run_until_horizon<R: Rng + ?Sized>(
    vsm: &VsmParams,
    start: f64,
    x: &[f64],
    horizon: f64,
    settings: &ClockSettings,
    rng: &mut R,
) -> Result<ClockRun> {
    if x.len() != vsm.n() {
        return Err(Error::domain("x", format!("expected {} coordinates", vsm.n())));
    }
    let mut clock = ClockMap::new(start);
    let mut y_paths = vec![x.to_vec()];
    walk_clock(vsm.bessel_dim(), start, x, horizon, settings, rng, |_, _, y_prev, y| {
        advance_clock(&mut clock, y_prev.iter().sum(), settings.dt)
            .expect("positive totals are checked by the clock loop");
        y_paths.push(y.to_vec());
    })?;
    Ok(ClockRun { clock, y_paths })
}

fn check_in_cell(lo: f64, hi: f64, target: f64) -> Result<()> {
    if !(lo <= target && target <= hi) {
        return Err(Error::domain(
            "target",
            format!("target {target} outside the last cell [{lo}, {hi}]"),
        ));
    }
    Ok(())
}

/// Linear interpolation inside one cell; exact at both endpoints.
pub(crate) fn linear_in_cell(lo: f64, hi: f64, y_lo: &[f64], y_hi: &[f64], target: f64) -> Vec<f64> {
    if target == lo {
        return y_lo.to_vec();
    }
    if target == hi {
        return y_hi.to_vec();
    }
    let width = hi - lo;
    y_lo.iter()
        .zip(y_hi)
        .map(|(a, b)| ((hi - target) * a + (target - lo) * b) / width)
        .collect()
}

/// Bessel-bridge interpolation inside one cell of a clock with mesh `dt`.
///
/// The bridge runs in clock units (the cell spans `dt` on the Bessel clock);
/// the calendar grid `{θ_lo, θ_lo + bridge_step, …}` up to the target is
/// mapped linearly onto the clock cell.
pub(crate) fn bridge_in_cell<R: Rng + ?Sized>(
    m: usize,
    dt: f64,
    lo: f64,
    hi: f64,
    y_lo: &[f64],
    y_hi: &[f64],
    target: f64,
    bridge_step: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if target == lo {
        return Ok(y_lo.to_vec());
    }
    if target == hi {
        return Ok(y_hi.to_vec());
    }
    let width = hi - lo;
    if !(bridge_step > 0.0 && bridge_step <= width) {
        return Err(Error::domain(
            "bridge_step",
            format!("bridge step {bridge_step} exceeds the cell width {width}"),
        ));
    }
    let to_clock = dt / width;
    let mut grid: Vec<f64> = bessel::bridge_grid(target - lo, bridge_step.min(target - lo))
        .into_iter()
        .map(|c| c * to_clock)
        .collect();
    grid.push(dt);
    let at_target = grid.len() - 2;
    y_lo.iter()
        .zip(y_hi)
        .map(|(a, b)| {
            let r = bessel::bessel_bridge_on_grid(
                m,
                a.sqrt(),
                b.sqrt(),
                &grid,
                EndpointPlacement::Conditioned,
                rng,
            );
            Ok(r[at_target] * r[at_target])
        })
        .collect()
}

/// `X_i(T)` by linear interpolation in the last cell of `run`.
pub fn interpolate_linear(run: &ClockRun, target: f64) -> Result<Vec<f64>> {
    match run.last_cell() {
        None => {
            check_in_cell(run.clock.start(), run.clock.start(), target)?;
            Ok(run.y_paths[0].clone())
        }
        Some((lo, hi, y_lo, y_hi)) => {
            check_in_cell(lo, hi, target)?;
            Ok(linear_in_cell(lo, hi, y_lo, y_hi, target))
        }
    }
}

/// `X_i(T) = R_b(T)²` from a Bessel bridge in the last cell of `run`.
pub fn interpolate_bridge<R: Rng + ?Sized>(
    run: &ClockRun,
    target: f64,
    vsm: &VsmParams,
    dt: f64,
    bridge_step: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let m = vsm
        .integer_dim()
        .ok_or_else(|| Error::domain("dim", "bridge interpolation needs an integer Bessel dimension"))?;
    match run.last_cell() {
        None => {
            check_in_cell(run.clock.start(), run.clock.start(), target)?;
            Ok(run.y_paths[0].clone())
        }
        Some((lo, hi, y_lo, y_hi)) => {
            check_in_cell(lo, hi, target)?;
            bridge_in_cell(m, dt, lo, hi, y_lo, y_hi, target, bridge_step, rng)
        }
    }
}

/// Forward clock `Λ(θ_k)` (offset by the start time) from trapezoid
/// quadrature of `X/4` on the reconstructed `(θ, X)` grid. Should recover
/// the uniform mesh `t_k`.
pub fn forward_clock(run: &ClockRun) -> Vec<f64> {
    let theta = run.clock.theta_grid();
    let totals: Vec<f64> = run.y_paths.iter().map(|y| y.iter().sum()).collect();
    let mut acc = run.clock.start();
    let mut out = Vec::with_capacity(theta.len());
    out.push(acc);
    for k in 1..theta.len() {
        acc += (theta[k] - theta[k - 1]) * (totals[k - 1] + totals[k]) / 8.0;
        out.push(acc);
    }
    out
}

/// Capitalizations at the calendar `times` (sorted, `times[0]` the start),
/// reconstructed from one clock run with linear interpolation in each cell.
pub fn calendar_path<R: Rng + ?Sized>(
    vsm: &VsmParams,
    x: &[f64],
    times: &[f64],
    settings: &ClockSettings,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let start = times[0];
    let horizon = times[times.len() - 1];
    let mut out = Vec::with_capacity(times.len());
    out.push(x.to_vec());
    let mut next = 1;
    walk_clock(vsm.bessel_dim(), start, x, horizon, settings, rng, |lo, hi, y_lo, y_hi| {
        while next < times.len() && times[next] <= hi {
            out.push(linear_in_cell(lo, hi, y_lo, y_hi, times[next]));
            next += 1;
        }
    })?;
    Ok(out)
}
