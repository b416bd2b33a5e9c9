//! Squared Bessel processes and Bessel bridges.
//!
//! `BESQ^m` started at `x` solves `dQ = m dt + 2 √Q dW`. For integer `m` it is
//! the squared norm of an `m`-dimensional Brownian motion started at
//! `√x e₁`; for any `m > 0` its transition over `dt` is `dt` times a
//! noncentral χ² with `m` degrees of freedom and noncentrality `q / dt`.
//! Every sampler here produces nonnegative values structurally, without
//! clamping.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transition scheme for squared Bessel paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BesselScheme {
    /// `SumOfSquares` for integer dimensions, `ExactTransition` otherwise.
    #[default]
    Auto,
    /// `Q = ‖√x e₁ + W‖²` over `m` accumulated Brownian coordinates.
    SumOfSquares,
    /// Noncentral χ² transition; any real `m > 0`.
    ExactTransition,
    /// `Y(t_k) = Y(t_0) + (Σ ΔW)²` with one scalar Brownian sum per stock.
    /// This is not a squared Bessel process of dimension `m`; it exists only
    /// to compare against the single-sum recursion.
    LiteralSingleSum,
}

impl BesselScheme {
    /// Resolves `Auto` for a given dimension and rejects combinations that
    /// cannot be simulated.
    pub fn resolve(self, dim: f64) -> Result<BesselScheme> {
        let integer = dim.fract() == 0.0 && dim >= 1.0;
        match self {
            BesselScheme::Auto if integer => Ok(BesselScheme::SumOfSquares),
            BesselScheme::Auto => Ok(BesselScheme::ExactTransition),
            BesselScheme::SumOfSquares if !integer => Err(Error::domain(
                "scheme",
                format!("sum-of-squares needs an integer dimension, got m = {dim}"),
            )),
            s => Ok(s),
        }
    }
}

/// A squared Bessel process of dimension `dim` started at `start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquaredBesselSpec {
    pub dim: f64,
    pub start: f64,
    pub scheme: BesselScheme,
}

impl SquaredBesselSpec {
    pub fn new(dim: f64, start: f64, scheme: BesselScheme) -> Result<Self> {
        if !(dim > 0.0 && dim.is_finite()) {
            return Err(Error::domain("dim", format!("dimension {dim} must be positive")));
        }
        if !(start >= 0.0 && start.is_finite()) {
            return Err(Error::domain("start", format!("start {start} must be nonnegative")));
        }
        Ok(SquaredBesselSpec { dim, start, scheme })
    }

    fn integer_dim(&self) -> Option<usize> {
        (self.dim.fract() == 0.0).then_some(self.dim as usize)
    }
}

/// One sum-of-squares update: `newW = prevW + dW` and
/// `newQ = Σ_j (√x δ_{j1} + newW_j)²`.
pub fn besq_increment_sum_of_squares(
    spec: &SquaredBesselSpec,
    prev_w: &[f64],
    dw: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let m = spec.integer_dim().ok_or_else(|| {
        Error::domain("dim", format!("sum-of-squares needs an integer dimension, got {}", spec.dim))
    })?;
    if prev_w.len() != m || dw.len() != m {
        return Err(Error::domain(
            "dW",
            format!("expected {m} coordinates, got {} and {}", prev_w.len(), dw.len()),
        ));
    }
    let new_w: Vec<f64> = prev_w.iter().zip(dw).map(|(w, d)| w + d).collect();
    Ok((sum_of_squares(spec.start.sqrt(), &new_w), new_w))
}

#[inline]
pub(crate) fn sum_of_squares(root_start: f64, w: &[f64]) -> f64 {
    let first = root_start + w[0];
    first * first + w[1..].iter().map(|v| v * v).sum::<f64>()
}

/// Draws `Q_{t+dt}` given `Q_t = q` from the exact transition law.
pub fn besq_exact_transition<R: Rng + ?Sized>(
    spec: &SquaredBesselSpec,
    q: f64,
    dt: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain("dt", format!("step {dt} must be positive")));
    }
    if !(q >= 0.0) {
        return Err(Error::domain("q", format!("state {q} must be nonnegative")));
    }
    Ok(exact_transition(spec.dim, q, dt, rng))
}

/// `dt · χ'²(m, q/dt)`, without argument checks.
pub(crate) fn exact_transition<R: Rng + ?Sized>(m: f64, q: f64, dt: f64, rng: &mut R) -> f64 {
    if m.fract() == 0.0 && m >= 1.0 {
        let shift = q.sqrt();
        let sd = dt.sqrt();
        let z: f64 = rng.sample(StandardNormal);
        let first = shift + sd * z;
        let rest: f64 = (1..m as usize)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                z * z
            })
            .sum();
        first * first + dt * rest
    } else {
        // Poisson mixture of central χ²: χ'²(m, λ) = χ²(m + 2N), N ~ Poisson(λ/2).
        let half_lambda = q / (2.0 * dt);
        let extra = if half_lambda > 0.0 {
            Poisson::new(half_lambda)
                .expect("positive Poisson rate")
                .sample(rng)
        } else {
            0.0
        };
        let shape = 0.5 * m + extra;
        let gamma = Gamma::new(shape, 2.0).expect("positive gamma shape");
        dt * gamma.sample(rng)
    }
}

/// A Bessel bridge of dimension `dim` from `start` to `end` over `duration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeSpec {
    pub dim: f64,
    pub start: f64,
    pub end: f64,
    pub duration: f64,
    pub step: f64,
}

impl BridgeSpec {
    fn validate(&self) -> Result<usize> {
        if !(self.dim.fract() == 0.0 && self.dim >= 1.0) {
            return Err(Error::domain(
                "dim",
                format!("bridge construction needs an integer dimension, got {}", self.dim),
            ));
        }
        if !(self.start > 0.0 && self.end > 0.0) {
            return Err(Error::domain("endpoints", "bridge endpoints must be positive"));
        }
        check_grid(self.duration, self.step)?;
        Ok(self.dim as usize)
    }
}

/// Direction of the terminal point of the underlying vector Brownian bridge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EndpointPlacement {
    /// Terminal direction drawn from its law given the terminal norm (von
    /// Mises–Fisher around the start direction with concentration
    /// `start·end/duration`). Reproduces the Bessel bridge law.
    #[default]
    Conditioned,
    /// Both endpoints on the first axis. Biases the interior upwards.
    Aligned,
}

fn check_grid(duration: f64, step: f64) -> Result<()> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::domain("duration", format!("{duration} must be positive")));
    }
    if !(step > 0.0) {
        return Err(Error::domain("step", format!("{step} must be positive")));
    }
    if step > duration {
        return Err(Error::domain(
            "step",
            format!("step {step} exceeds duration {duration}"),
        ));
    }
    Ok(())
}

/// Grid `{0, step, 2 step, …, duration}`; the final step may be partial.
pub fn bridge_grid(duration: f64, step: f64) -> Vec<f64> {
    let full = ((duration / step) * (1.0 - 1e-12)).ceil() as usize;
    let mut grid: Vec<f64> = (0..full).map(|k| k as f64 * step).collect();
    grid.push(duration);
    grid
}

/// Brownian bridge from `a` to `b` sampled on `grid` (which starts at 0 and
/// ends at the bridge duration). Endpoints are pinned exactly.
pub(crate) fn brownian_bridge_on_grid(
    a: f64,
    b: f64,
    grid: &[f64],
    mut normal: impl FnMut() -> f64,
) -> Vec<f64> {
    let last = grid.len() - 1;
    let end = grid[last];
    let mut path = Vec::with_capacity(grid.len());
    path.push(a);
    let mut h = a;
    for k in 0..last {
        if k + 1 == last {
            path.push(b);
            break;
        }
        let remaining = end - grid[k];
        let dt = grid[k + 1] - grid[k];
        let mean = h + (b - h) * dt / remaining;
        let var = dt * (end - grid[k + 1]) / remaining;
        h = mean + var.sqrt() * normal();
        path.push(h);
    }
    path
}

/// Brownian bridge from `a` to `b` on `{0, step, …, duration}`.
pub fn brownian_bridge_path<R: Rng + ?Sized>(
    a: f64,
    b: f64,
    duration: f64,
    step: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_grid(duration, step)?;
    let grid = bridge_grid(duration, step);
    Ok(brownian_bridge_on_grid(a, b, &grid, || rng.sample(StandardNormal)))
}

/// Bessel bridge `R_b(t) = ‖H_t‖` for `m` independent scalar Brownian bridges
/// `H` from `start·e₁` to a terminal point of norm `end`.
pub fn bessel_bridge_path<R: Rng + ?Sized>(spec: &BridgeSpec, rng: &mut R) -> Result<Vec<f64>> {
    bessel_bridge_path_with(spec, EndpointPlacement::Conditioned, rng)
}

pub fn bessel_bridge_path_with<R: Rng + ?Sized>(
    spec: &BridgeSpec,
    placement: EndpointPlacement,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let m = spec.validate()?;
    let grid = bridge_grid(spec.duration, spec.step);
    Ok(bessel_bridge_on_grid(m, spec.start, spec.end, &grid, placement, rng))
}

pub(crate) fn bessel_bridge_on_grid<R: Rng + ?Sized>(
    m: usize,
    a: f64,
    b: f64,
    grid: &[f64],
    placement: EndpointPlacement,
    rng: &mut R,
) -> Vec<f64> {
    let duration = grid[grid.len() - 1];
    let direction = match placement {
        EndpointPlacement::Aligned => unit_e1(m),
        EndpointPlacement::Conditioned => sample_von_mises_fisher(m, a * b / duration, rng),
    };
    let mut squares = vec![0.0; grid.len()];
    for (j, dir) in direction.iter().enumerate() {
        let from = if j == 0 { a } else { 0.0 };
        let coord = brownian_bridge_on_grid(from, b * dir, grid, || rng.sample(StandardNormal));
        for (s, h) in squares.iter_mut().zip(coord) {
            *s += h * h;
        }
    }
    let last = grid.len() - 1;
    let mut r: Vec<f64> = squares.into_iter().map(f64::sqrt).collect();
    r[0] = a;
    r[last] = b;
    r
}

fn unit_e1(m: usize) -> Vec<f64> {
    let mut e = vec![0.0; m];
    e[0] = 1.0;
    e
}

/// Unit vector in `ℝ^m` from the von Mises–Fisher law with mean direction
/// `e₁` and the given concentration (Wood's rejection sampler).
pub fn sample_von_mises_fisher<R: Rng + ?Sized>(m: usize, concentration: f64, rng: &mut R) -> Vec<f64> {
    assert!(m >= 1, "dimension must be positive");
    let kappa = concentration;
    if m == 1 {
        let p_plus = 1.0 / (1.0 + (-2.0 * kappa).exp());
        return vec![if rng.random::<f64>() < p_plus { 1.0 } else { -1.0 }];
    }
    let p1 = (m - 1) as f64;
    let b = p1 / (2.0 * kappa + (4.0 * kappa * kappa + p1 * p1).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + p1 * (1.0 - x0 * x0).ln();
    let beta = Beta::new(0.5 * p1, 0.5 * p1).expect("positive beta parameters");
    let w = loop {
        let z: f64 = beta.sample(rng);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = rng.random();
        if kappa * w + p1 * (1.0 - x0 * w).ln() - c >= u.ln() {
            break w;
        }
    };
    let mut tail: Vec<f64> = (0..m - 1).map(|_| rng.sample(StandardNormal)).collect();
    let norm = tail.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = (1.0 - w * w).max(0.0).sqrt() / norm;
    tail.iter_mut().for_each(|v| *v *= scale);
    let mut out = Vec::with_capacity(m);
    out.push(w);
    out.extend(tail);
    out
}
