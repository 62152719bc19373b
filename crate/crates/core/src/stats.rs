//! Small statistics helpers: least squares and Kolmogorov–Smirnov.

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Least-squares coefficients for `y ≈ Σ c_k·column_k`.
pub fn least_squares(columns: &[Vec<f64>], ys: &[f64]) -> Vec<f64> {
    let a = nalgebra::DMatrix::from_fn(ys.len(), columns.len(), |i, j| columns[j][i]);
    let b = nalgebra::DVector::from_column_slice(ys);
    let svd = a.svd(true, true);
    svd.solve(&b, 1e-14).map(|x| x.iter().copied().collect()).unwrap_or_else(|_| vec![f64::NAN; columns.len()])
}

/// One-sample KS statistic `sup |F_n − F|` for a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at level `alpha`: `sqrt(-ln(α/2)/2)/√n`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Empirical CDF evaluated at `x`.
pub fn ecdf(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let (a, b) = linear_fit(&xs, &ys);
        assert!((a - 2.5).abs() < 1e-14 && (b + 1.0).abs() < 1e-14);
    }

    #[test]
    fn least_squares_recovers_quadratic() {
        let xs: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 2.0 * x + 0.5 * x * x).collect();
        let c = least_squares(&[vec![1.0; 6], xs.clone(), xs.iter().map(|x| x * x).collect()], &ys);
        assert!((c[0] - 1.0).abs() < 1e-12 && (c[1] + 2.0).abs() < 1e-12 && (c[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ks_of_uniform_grid() {
        let n = 100;
        let s: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&s, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.5 / n as f64).abs() < 1e-14);
        assert!(d < ks_critical(n, 0.05));
    }
}
