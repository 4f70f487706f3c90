//! Small quadrature and differencing helpers on uniform grids.

/// Composite trapezoid rule for samples spaced `dx` apart.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dx * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])),
    }
}

/// Composite trapezoid rule of `f(i, values[i])` over the grid.
pub fn trapezoid_map(values: &[f64], dx: f64, mut f: impl FnMut(usize, f64) -> f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (i, &v) in values.iter().enumerate() {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += w * f(i, v);
    }
    acc * dx
}

/// First derivative by centered differences in the interior and second-order
/// one-sided differences at the two ends.
pub fn derivative(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        if n == 2 {
            let d = (values[1] - values[0]) / dx;
            out.fill(d);
        }
        return out;
    }
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dx);
    for i in 1..n - 1 {
        out[i] = (values[i + 1] - values[i - 1]) / (2.0 * dx);
    }
    out[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dx);
    out
}

/// Third derivative at `x` from the cubic through four (possibly
/// non-uniform) nodes, i.e. six times the third divided difference.
pub fn third_divided_difference(xs: [f64; 4], ys: [f64; 4]) -> f64 {
    let d1 = [
        (ys[1] - ys[0]) / (xs[1] - xs[0]),
        (ys[2] - ys[1]) / (xs[2] - xs[1]),
        (ys[3] - ys[2]) / (xs[3] - xs[2]),
    ];
    let d2 = [
        (d1[1] - d1[0]) / (xs[2] - xs[0]),
        (d1[2] - d1[1]) / (xs[3] - xs[1]),
    ];
    6.0 * (d2[1] - d2[0]) / (xs[3] - xs[0])
}

/// Relative difference `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_diff(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_is_exact_for_linear_data() {
        let v: Vec<f64> = (0..11).map(|i| 2.0 * i as f64 * 0.1 + 1.0).collect();
        assert!((trapezoid(&v, 0.1) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn derivative_is_exact_for_quadratics() {
        let dx = 0.25;
        let v: Vec<f64> = (0..9).map(|i| (i as f64 * dx).powi(2)).collect();
        for (i, d) in derivative(&v, dx).iter().enumerate() {
            assert!((d - 2.0 * i as f64 * dx).abs() < 1e-12);
        }
    }

    #[test]
    fn third_divided_difference_of_cubic() {
        let xs = [0.1, 0.35, 0.4, 0.9];
        let ys = xs.map(|x| 2.0 * x * x * x - x * x + 3.0);
        assert!((third_divided_difference(xs, ys) - 12.0).abs() < 1e-9);
    }
}
