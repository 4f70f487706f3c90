//! The Lagrangian energy as a function of the positions, with its exact
//! gradient and pentadiagonal Hessian.

use super::banded::Pentadiagonal;
use crate::functionals::{edge_energy_jet, link_energy, link_energy_jet};

/// `E(X) = (h/2) sum X_i^2 + beta(X)`; see [`crate::functionals`] for the
/// surface-energy terms.
pub fn energy(x: &[f64], h: f64) -> f64 {
    let n = x.len();
    let alpha = 0.5 * h * x.iter().map(|v| v * v).sum::<f64>();
    let mut beta = edge_energy_jet(x[1] - x[0], h).0 + edge_energy_jet(x[n - 1] - x[n - 2], h).0;
    for k in 0..n - 2 {
        beta += link_energy(x[k + 1] - x[k], x[k + 2] - x[k + 1], h);
    }
    alpha + beta
}

/// Gradient of the surface energy alone.
pub fn surface_gradient(x: &[f64], h: f64) -> Vec<f64> {
    let n = x.len();
    let mut g = vec![0.0; n];
    let e0 = edge_energy_jet(x[1] - x[0], h).1;
    g[0] -= e0;
    g[1] += e0;
    let e1 = edge_energy_jet(x[n - 1] - x[n - 2], h).1;
    g[n - 2] -= e1;
    g[n - 1] += e1;
    for k in 0..n - 2 {
        let (_, [fa, fb], _) = link_energy_jet(x[k + 1] - x[k], x[k + 2] - x[k + 1], h);
        g[k] -= fa;
        g[k + 1] += fa - fb;
        g[k + 2] += fb;
    }
    g
}

/// Per-position sum of the absolute values of the terms that make up the
/// energy gradient; the rounding error of the gradient is a small multiple
/// of machine epsilon times this.
pub fn gradient_magnitude(x: &[f64], h: f64) -> Vec<f64> {
    let n = x.len();
    let mut g: Vec<f64> = x.iter().map(|v| h * v.abs()).collect();
    let e0 = edge_energy_jet(x[1] - x[0], h).1.abs();
    g[0] += e0;
    g[1] += e0;
    let e1 = edge_energy_jet(x[n - 1] - x[n - 2], h).1.abs();
    g[n - 2] += e1;
    g[n - 1] += e1;
    for k in 0..n - 2 {
        let (a, b) = (x[k + 1] - x[k], x[k + 2] - x[k + 1]);
        let (_, [fa, fb], _) = link_energy_jet(a, b, h);
        // `h/b - h/a` is formed by cancellation; its rounding error is of
        // order `h (1/a + 1/b)`, amplified by `|df/dp|`.
        let p_err = 2.0 * h * h * (1.0 / a + 1.0 / b) * (1.0 / (a * a) + 1.0 / (b * b)) / (a + b);
        g[k] += fa.abs() + p_err;
        g[k + 1] += fa.abs() + fb.abs() + 2.0 * p_err;
        g[k + 2] += fb.abs() + p_err;
    }
    g
}

/// Energy, gradient and Hessian.
pub fn energy_derivatives(x: &[f64], h: f64) -> (f64, Vec<f64>, Pentadiagonal) {
    let n = x.len();
    let mut hess = Pentadiagonal::zeros(n);
    let mut g = vec![0.0; n];
    let mut value = 0.0;
    for i in 0..n {
        value += 0.5 * h * x[i] * x[i];
        g[i] += h * x[i];
        hess.add(i, i, h);
    }
    for (i, j) in [(0, 1), (n - 2, n - 1)] {
        let (f, d1, d2) = edge_energy_jet(x[j] - x[i], h);
        value += f;
        g[i] -= d1;
        g[j] += d1;
        hess.add(i, i, d2);
        hess.add(j, j, d2);
        hess.add(i, j, -d2);
    }
    // Columns of the Jacobian d(gap_k, gap_{k+1}) / d(X_k, X_{k+1}, X_{k+2}).
    const COLS: [[f64; 2]; 3] = [[-1.0, 0.0], [1.0, -1.0], [0.0, 1.0]];
    for k in 0..n - 2 {
        let (f, [fa, fb], [[faa, fab, fbb]]) = link_energy_jet(x[k + 1] - x[k], x[k + 2] - x[k + 1], h);
        value += f;
        g[k] -= fa;
        g[k + 1] += fa - fb;
        g[k + 2] += fb;
        for p in 0..3 {
            for q in p..3 {
                let (cp, cq) = (COLS[p], COLS[q]);
                let v = cp[0] * (faa * cq[0] + fab * cq[1]) + cp[1] * (fab * cq[0] + fbb * cq[1]);
                if v != 0.0 {
                    if p == q {
                        hess.add(k + p, k + p, v);
                    } else {
                        hess.add(k + p, k + q, v);
                    }
                }
            }
        }
    }
    (value, g, hess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::SmythHill;
    use crate::functionals::Functionals;

    fn bumpy(n: usize) -> Vec<f64> {
        let q = SmythHill::new(0.2).unwrap().quantiles(n).unwrap();
        q.positions().iter().enumerate().map(|(i, x)| x * (1.0 + 0.05 * (i as f64).sin()) + 0.1).collect()
    }

    #[test]
    fn energy_matches_functionals() {
        let x = bumpy(50);
        let q = crate::QuantileDensity::new(0.2, x.clone()).unwrap();
        let h = q.cell_mass();
        assert!((energy(&x, h) - q.energy()).abs() < 1e-15);
        assert!((energy_derivatives(&x, h).0 - q.energy()).abs() < 1e-15);
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let x = bumpy(12);
        let h = 0.2 / 12.0;
        let (_, g, hess) = energy_derivatives(&x, h);
        let gs = surface_gradient(&x, h);
        let eps = 1e-7;
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += eps;
            xm[i] -= eps;
            let num = (energy(&xp, h) - energy(&xm, h)) / (2.0 * eps);
            assert!((num - g[i]).abs() < 1e-6 * g[i].abs().max(1e-3), "grad {i}: {num} vs {}", g[i]);
            assert!((gs[i] + h * x[i] - g[i]).abs() < 1e-12 * g[i].abs().max(1.0));
            let gp = energy_derivatives(&xp, h).1;
            let gm = energy_derivatives(&xm, h).1;
            let mut e = vec![0.0; x.len()];
            e[i] = 1.0;
            let col = hess.mul(&e);
            for j in 0..x.len() {
                let num = (gp[j] - gm[j]) / (2.0 * eps);
                assert!((num - col[j]).abs() < 1e-5 * col[i].abs().max(1e-6), "hess ({j},{i}): {num} vs {}", col[j]);
            }
        }
    }
}
