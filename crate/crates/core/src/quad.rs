//! Trapezoidal quadrature over paired samples.

/// Composite trapezoid rule over aligned samples.
///
/// Exact (up to rounding) whenever the sampled function is piecewise linear
/// between grid points.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    assert!(
        xs.len() == ys.len() && xs.len() >= 2,
        "trapezoid needs >= 2 aligned samples"
    );
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::trapezoid;

    #[test]
    fn exact_for_linear() {
        // integral of 2t + 1 over [0, 3] = 12
        let xs = [0.0, 0.5, 1.25, 3.0];
        let ys: Vec<f64> = xs.iter().map(|t| 2.0 * t + 1.0).collect();
        assert!((trapezoid(&xs, &ys) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn constant_over_interval() {
        let xs = [400.0, 500.0, 700.0];
        let ys = [1.0, 1.0, 1.0];
        assert_eq!(trapezoid(&xs, &ys), 300.0);
    }

    #[test]
    #[should_panic]
    fn rejects_single_sample() {
        trapezoid(&[1.0], &[1.0]);
    }
}
