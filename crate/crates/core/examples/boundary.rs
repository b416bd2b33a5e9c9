//! Boundary hitting of the auxiliary process dζ_i = ζ_i dt + √(ζ_i Σζ) dW_i.

use optimal_arbitrage::euler::{auxiliary_boundary_experiment, BoundaryConfig};

fn main() -> optimal_arbitrage::Result<()> {
    for dt in [1e-2, 1e-3, 5e-4] {
        let report = auxiliary_boundary_experiment(&BoundaryConfig::new(vec![1.0, 1.0], 1.0, dt, 10_000, 7))?;
        let (lo, hi) = report.ci(0.99);
        let mean_hit = {
            let times: Vec<f64> = report.hit_times.iter().flatten().copied().collect();
            times.iter().sum::<f64>() / times.len().max(1) as f64
        };
        println!(
            "dt = {dt:<7} hit fraction {:.4} (99% CI [{lo:.4}, {hi:.4}]), mean hit time {mean_hit:.3}",
            report.fraction_hit
        );
    }
    Ok(())
}
