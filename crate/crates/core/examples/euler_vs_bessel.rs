//! Paired failure counts: raw Euler on the capitalizations vs the
//! time-changed Bessel representation.

use optimal_arbitrage::euler::{bessel_vsm_paths, euler_vsm_paths, DEFAULT_EPS_POS};
use optimal_arbitrage::{SimConfig, VsmParams};

fn main() -> optimal_arbitrage::Result<()> {
    let cfg = SimConfig::new(1.0, 100, 1000, 8);
    for n in [2, 4, 8] {
        let vsm = VsmParams::from_kappa(vec![0.01; n], 1.0)?;
        let (_, euler) = euler_vsm_paths(&vsm, &cfg, DEFAULT_EPS_POS)?;
        let (_, bessel) = bessel_vsm_paths(&vsm, &cfg, DEFAULT_EPS_POS)?;
        println!(
            "n = {n}: euler fails on {:>5.1}% of paths, bessel on {:.1}%",
            100.0 * euler.fail_fraction,
            100.0 * bessel.fail_fraction
        );
    }
    Ok(())
}
