//! Gauss–Legendre rules and log-space accumulation.

use std::collections::HashMap;
use std::sync::Mutex;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    static CACHE: Mutex<Option<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = Mutex::new(None);
    let mut guard = CACHE.lock().unwrap_or_else(|e| e.into_inner());
    let map = guard.get_or_insert_with(HashMap::new);
    map.entry(n).or_insert_with(|| compute_rule(n)).clone()
}

fn compute_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess, then Newton on P_n
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Nodes and weights mapped to `[a, b]`.
pub fn mapped(n: usize, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    x.into_iter().zip(w).map(move |(xi, wi)| (mid + half * xi, half * wi))
}

/// Splits `[a, b]` into panels no longer than `max_len`.
pub fn panels(a: f64, b: f64, max_len: f64) -> Vec<(f64, f64)> {
    if b <= a {
        return Vec::new();
    }
    let k = ((b - a) / max_len).ceil().max(1.0) as usize;
    let h = (b - a) / k as f64;
    (0..k).map(|i| (a + i as f64 * h, if i + 1 == k { b } else { a + (i + 1) as f64 * h })).collect()
}

/// `log Σ exp(v_i)`, robust to large and `-inf` entries.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `log sinh(x)` for `x ≥ 0`; `-inf` at zero.
pub fn log_sinh(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    x + (-(-2.0 * x).exp_m1()).ln() - std::f64::consts::LN_2
}
