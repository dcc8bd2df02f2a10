/// Elementwise relative error with denominator `max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Central-difference gradient of `f` at `x`.
pub fn numerical_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + eps;
            let plus = f(&p);
            p[i] = orig - eps;
            let minus = f(&p);
            p[i] = orig;
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

/// Maximum relative error between `analytic` and the central-difference
/// gradient of the deterministic loss `f` at `x`.
pub fn fd_gradcheck(f: impl FnMut(&[f64]) -> f64, x: &[f64], analytic: &[f64], eps: f64) -> f64 {
    assert_eq!(x.len(), analytic.len(), "gradient length mismatch");
    numerical_gradient(f, x, eps)
        .iter()
        .zip(analytic)
        .map(|(&n, &a)| relative_error(a, n))
        .fold(0.0, f64::max)
}
