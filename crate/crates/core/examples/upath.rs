//! u(T − t, X(t)) along one trajectory started at (1, 1).

use optimal_arbitrage::{sweep_time, SimConfig, VsmParams};

fn main() -> optimal_arbitrage::Result<()> {
    let vsm = VsmParams::from_kappa(vec![1.0, 1.0], 1.0)?;
    let path = sweep_time(&vsm, &SimConfig::new(1.0, 20, 2000, 3), 42)?;
    println!("{:>6} {:>10} {:>10} {:>8} {:>8}", "t", "X1", "X2", "u", "se");
    for ((t, x), e) in path.times.iter().zip(&path.states).zip(&path.estimates) {
        println!("{t:>6.2} {:>10.4} {:>10.4} {:>8.4} {:>8.4}", x[0], x[1], e.mean, e.std_error);
    }
    Ok(())
}
