//! Bessel bridges from a = 2 to b = 3 in dimension 4: the default
//! conditioned endpoint against both endpoints on one axis.

use optimal_arbitrage::bessel::{bessel_bridge_path_with, BridgeSpec, EndpointPlacement};
use optimal_arbitrage::rng::SeedKey;
use optimal_arbitrage::stats::summarize;

fn main() -> optimal_arbitrage::Result<()> {
    let spec = BridgeSpec {
        dim: 4.0,
        start: 2.0,
        end: 3.0,
        duration: 1.0,
        step: 0.05,
    };
    let key = SeedKey::new(1);
    for placement in [EndpointPlacement::Conditioned, EndpointPlacement::Aligned] {
        let mid: Vec<f64> = (0..20_000u64)
            .map(|i| {
                let r = bessel_bridge_path_with(&spec, placement, &mut key.stream(i)).unwrap();
                r[10] * r[10]
            })
            .collect();
        let s = summarize(&mid);
        println!("{placement:?}: E[R(0.5)^2] = {:.4} ± {:.4}", s.mean, s.std_error);
    }
    let path = bessel_bridge_path_with(&spec, EndpointPlacement::Conditioned, &mut key.stream(0))?;
    println!("one path: {:?}", path.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>());
    Ok(())
}
