//! Small statistical helpers for checking samples of p-values.

/// Kolmogorov–Smirnov distance between the empirical distribution of `xs`
/// and the uniform distribution on `[0, 1]`.
pub fn ks_uniform(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            (x - i as f64 / n).max((i + 1) as f64 / n - x)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the KS distance for a sample of size `n`.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_6 / (n as f64).sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divisor `n − 1`).
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Standard error of the mean.
pub fn std_error(xs: &[f64]) -> f64 {
    std_dev(xs) / (xs.len() as f64).sqrt()
}

/// Lag-one sample autocorrelation.
pub fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let den: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    let num: f64 = xs.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ks_examples() {
        // Midpoints of n equal cells sit 1/(2n) from the uniform CDF.
        let mid: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        assert_relative_eq!(ks_uniform(&mid), 0.05, epsilon = 1e-15);
        assert_relative_eq!(ks_uniform(&[0.0, 0.0]), 1.0);
        assert_relative_eq!(ks_critical_1pct(10_000), 0.016276, epsilon = 1e-9);
    }

    #[test]
    fn moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert_relative_eq!(std_dev(&xs), (5.0f64 / 3.0).sqrt());
        assert_relative_eq!(lag1_autocorrelation(&[1.0, -1.0, 1.0, -1.0]), -0.75);
    }
}
