//! Small statistical helpers: pairwise summation, sample moments, confidence
//! bounds and the two-sample Kolmogorov–Smirnov statistic.

/// Pairwise (cascade) summation. The reduction order depends only on the
/// slice length, so results are independent of thread scheduling.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSummary {
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
    pub count: usize,
}

pub fn summarize(xs: &[f64]) -> SampleSummary {
    let n = xs.len();
    assert!(n > 0, "cannot summarize an empty sample");
    let mean = pairwise_sum(xs) / n as f64;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = if n > 1 {
        pairwise_sum(&dev) / (n - 1) as f64
    } else {
        0.0
    };
    let std_dev = var.sqrt();
    SampleSummary {
        mean,
        std_dev,
        std_error: std_dev / (n as f64).sqrt(),
        count: n,
    }
}

/// Sample variance together with its standard error (normal-theory-free,
/// from the fourth central moment).
pub fn variance_with_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let m2: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let m4: Vec<f64> = xs.iter().map(|x| (x - mean).powi(4)).collect();
    let var = pairwise_sum(&m2) / (n - 1.0);
    let mu4 = pairwise_sum(&m4) / n;
    let se = ((mu4 - var * var * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt();
    (var, se)
}

/// Two-sided standard normal quantile for the given confidence level
/// (only the levels used in this crate are tabulated).
pub fn z_two_sided(level: f64) -> f64 {
    match level {
        l if (l - 0.99).abs() < 1e-12 => 2.575_829_303_548_901,
        l if (l - 0.95).abs() < 1e-12 => 1.959_963_984_540_054,
        l if (l - 0.90).abs() < 1e-12 => 1.644_853_626_951_472,
        _ => panic!("unsupported confidence level {level}"),
    }
}

/// Combined standard error of the difference of two independent estimates.
pub fn combined_se(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

/// Two-sample Kolmogorov–Smirnov statistic `D = sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic p-value of the two-sample KS statistic (Kolmogorov series).
pub fn ks_p_value(d: f64, na: usize, nb: usize) -> f64 {
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}
