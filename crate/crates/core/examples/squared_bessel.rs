//! Terminal law of BESQ(m) from x = 4 over one unit of time under the two
//! samplers, against the noncentral χ² moments x + mT and 2mT² + 4xT.

use optimal_arbitrage::bessel::{besq_exact_transition, besq_increment_sum_of_squares, BesselScheme, SquaredBesselSpec};
use optimal_arbitrage::rng::SeedKey;
use optimal_arbitrage::stats::{ks_p_value, ks_statistic, summarize, variance_with_se};
use rand_distr::{Distribution, StandardNormal};

fn main() -> optimal_arbitrage::Result<()> {
    let (x, m) = (4.0, 4usize);
    let sos = SquaredBesselSpec::new(m as f64, x, BesselScheme::SumOfSquares)?;
    let exact = SquaredBesselSpec::new(m as f64, x, BesselScheme::ExactTransition)?;
    let key = SeedKey::new(9);
    let a: Vec<f64> = (0..50_000u64)
        .map(|i| {
            let mut rng = key.domain("sos").stream(i);
            let dw: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
            besq_increment_sum_of_squares(&sos, &[0.0; 4], &dw).unwrap().0
        })
        .collect();
    let b: Vec<f64> = (0..50_000u64)
        .map(|i| besq_exact_transition(&exact, x, 1.0, &mut key.domain("exact").stream(i)).unwrap())
        .collect();
    for (name, s) in [("sum of squares", &a), ("exact", &b)] {
        let mean = summarize(s);
        let (var, var_se) = variance_with_se(s);
        println!("{name:>15}: mean {:.4} ± {:.4} (8), variance {var:.3} ± {var_se:.3} (24)", mean.mean, mean.std_error);
    }
    let d = ks_statistic(&a, &b);
    println!("two-sample KS: D = {d:.4}, p = {:.3}", ks_p_value(d, a.len(), b.len()));

    // non-integer dimension (κ = 0.6)
    let frac = SquaredBesselSpec::new(2.4, x, BesselScheme::ExactTransition)?;
    let c: Vec<f64> = (0..50_000u64)
        .map(|i| besq_exact_transition(&frac, x, 1.0, &mut key.domain("frac").stream(i)).unwrap())
        .collect();
    println!("m = 2.4: mean {:.4} (6.4)", summarize(&c).mean);
    Ok(())
}
