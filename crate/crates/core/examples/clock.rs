//! One time-changed run: the clock θ_k against the trapezoid forward clock.

use optimal_arbitrage::bessel::BesselScheme;
use optimal_arbitrage::rng::SeedKey;
use optimal_arbitrage::time_change::{forward_clock, interpolate_linear, run_until_horizon, ClockSettings};
use optimal_arbitrage::VsmParams;

fn main() -> optimal_arbitrage::Result<()> {
    let vsm = VsmParams::from_kappa(vec![1.0, 1.0], 1.0)?;
    let settings = ClockSettings {
        dt: 0.01,
        scheme: BesselScheme::Auto,
        max_step_factor: 100.0,
    };
    let run = run_until_horizon(&vsm, 0.0, vsm.x0(), 1.0, &settings, &mut SeedKey::new(4).stream(0))?;
    let lambda = forward_clock(&run);
    let theta = run.clock.theta_grid();
    let t = run.clock.t_grid();
    let n = run.clock.last_index();
    println!("{n} clock steps to reach T = 1");
    for k in (0..=n).step_by((n / 10).max(1)) {
        println!("t_k = {:>6.2}  theta_k = {:.4}  Lambda(theta_k) = {:.4}", t[k], theta[k], lambda[k]);
    }
    println!("X(T) = {:?}", interpolate_linear(&run, 1.0)?);
    Ok(())
}
