//! u(1, (1, 1)) across the volatility-stabilized family ζ ∈ [0, 1].

use optimal_arbitrage::{estimate_u_general, SimConfig, VsmParams};

fn main() -> optimal_arbitrage::Result<()> {
    let cfg = SimConfig::new(1.0, 100, 5000, 5);
    for zeta in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let vsm = VsmParams::from_zeta(vec![1.0, 1.0], zeta)?;
        let e = estimate_u_general(&vsm, 0.0, &[1.0, 1.0], &cfg)?;
        println!("zeta = {zeta:<4} m = {:<4} u = {:.4} ± {:.4}", vsm.bessel_dim(), e.mean, e.std_error);
    }
    Ok(())
}
