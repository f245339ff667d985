//! Helpers shared by the statistical tests.

/// One-sample Kolmogorov-Smirnov statistic of `samples` against Uniform(lo, hi).
pub fn ks_uniform(samples: &[f64], lo: f64, hi: f64) -> f64 {
    let mut x: Vec<f64> = samples.iter().map(|s| (s - lo) / (hi - lo)).collect();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &f)| {
            let f = f.clamp(0.0, 1.0);
            ((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the KS statistic `d` for `n` samples, with the
/// usual small-sample correction to the argument.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
