//! u(T, x) over a coarse mesh of (x1, x2) for two stocks.
//!
//! ```text
//! cargo run --release --example surface -- [cells] [paths]
//! ```

use optimal_arbitrage::{sweep_surface, MeshAxis, MeshSpec, SimConfig, VsmParams};

fn main() -> optimal_arbitrage::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let cells = args.next().unwrap_or(6);
    let paths = args.next().unwrap_or(1000);

    let vsm = VsmParams::from_kappa(vec![1.0, 1.0], 1.0)?;
    let axis = MeshAxis::new(3.5, 9.0, cells)?;
    let mesh = MeshSpec { x1: axis, x2: axis };
    let surface = sweep_surface(&vsm, &mesh, &[], &SimConfig::new(1.0, 100, paths, 1))?;

    print!("{:>8}", "x1\\x2");
    for x2 in axis.nodes() {
        print!("{x2:>8.3}");
    }
    println!();
    for (i, x1) in axis.nodes().into_iter().enumerate() {
        print!("{x1:>8.3}");
        for j in 0..cells {
            match &surface.node(i, j).estimate {
                Some(e) => print!("{:>8.4}", e.mean),
                None => print!("{:>8}", "NaN"),
            }
        }
        println!();
    }
    Ok(())
}
