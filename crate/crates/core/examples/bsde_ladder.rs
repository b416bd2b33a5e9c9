//! Regression BSDE for u(1, (1, 1)) with the penalization ladder, next to
//! the Monte Carlo estimate.

use optimal_arbitrage::bsde::{solve_reflected, BsdeConfig, Integrator};
use optimal_arbitrage::{estimate_u, SimConfig, VsmParams};

fn main() -> optimal_arbitrage::Result<()> {
    let vsm = VsmParams::from_kappa(vec![1.0, 1.0], 1.0)?;
    let mc = estimate_u(&vsm, 0.0, &[1.0, 1.0], &SimConfig::new(1.0, 100, 10_000, 1))?;
    println!("monte carlo      {:.4} ± {:.4}", mc.mean, mc.std_error);

    for integrator in [Integrator::Exponential, Integrator::Euler] {
        let mut cfg = BsdeConfig::new(100, 5000, 2);
        cfg.integrator = integrator;
        match solve_reflected(&vsm, 1.0, &[1.0, 1.0], &cfg) {
            Ok(ladder) => {
                for rung in &ladder.rungs {
                    println!(
                        "{integrator:?} lambda {:>5}: y0 {:.4} ± {:.4}, K_T {:.2e}",
                        rung.lambda,
                        rung.y0,
                        rung.y0_se,
                        rung.k_trace.last().unwrap()
                    );
                }
                if let Some(w) = ladder.warning {
                    println!("{integrator:?}: {w}");
                }
            }
            Err(e) => println!("{integrator:?}: {e}"),
        }
    }
    Ok(())
}
