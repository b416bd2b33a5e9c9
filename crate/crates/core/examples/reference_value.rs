//! High-budget reference for u(1, (1, 1)): N = 10⁵ paths at Δt = 10⁻³.
//!
//! ```text
//! cargo run --release --example reference_value
//! ```

use optimal_arbitrage::{estimate_u, SimConfig, VsmParams};

fn main() -> optimal_arbitrage::Result<()> {
    let vsm = VsmParams::from_kappa(vec![1.0, 1.0], 1.0)?;
    let cfg = SimConfig::new(1.0, 1000, 100_000, 20240601);
    let e = estimate_u(&vsm, 0.0, &[1.0, 1.0], &cfg)?;
    let (lo, hi) = e.ci(0.99);
    println!("u(1, (1,1)) = {:.17} ± {:.17}", e.mean, e.std_error);
    println!("99% CI [{lo:.5}, {hi:.5}]");
    Ok(())
}
