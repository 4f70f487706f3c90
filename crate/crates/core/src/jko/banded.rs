//! Symmetric pentadiagonal matrices and their `L D L^T` factorization.

/// Symmetric matrix with nonzeros only on the main diagonal and the first
/// two off-diagonals.
#[derive(Clone, Debug, PartialEq)]
pub struct Pentadiagonal {
    /// `A[i][i]`.
    pub diag: Vec<f64>,
    /// `A[i][i+1]`, length `n - 1`.
    pub off1: Vec<f64>,
    /// `A[i][i+2]`, length `n - 2`.
    pub off2: Vec<f64>,
}

impl Pentadiagonal {
    /// Zero matrix of order `n >= 3`.
    pub fn zeros(n: usize) -> Self {
        Self { diag: vec![0.0; n], off1: vec![0.0; n - 1], off2: vec![0.0; n - 2] }
    }

    /// Order of the matrix.
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// Adds `value` to entry `(i, j)` and its mirror, `|i - j| <= 2`.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        match b - a {
            0 => self.diag[a] += value,
            1 => self.off1[a] += value,
            2 => self.off2[a] += value,
            _ => panic!("entry ({i}, {j}) lies outside the band"),
        }
    }

    /// Matrix-vector product.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i + 1 < n {
                s += self.off1[i] * x[i + 1];
            }
            if i + 2 < n {
                s += self.off2[i] * x[i + 2];
            }
            if i >= 1 {
                s += self.off1[i - 1] * x[i - 1];
            }
            if i >= 2 {
                s += self.off2[i - 2] * x[i - 2];
            }
            y[i] = s;
        }
        y
    }

    /// Factorizes `A + shift I` as `L D L^T` with unit lower-triangular `L`.
    /// Returns `None` unless every pivot exceeds `1e-13` times its diagonal
    /// entry, i.e. unless the shifted matrix is safely positive definite.
    pub fn factor(&self, shift: f64) -> Option<Ldl> {
        let n = self.n();
        let mut d = vec![0.0; n];
        let mut l1 = vec![0.0; n];
        let mut l2 = vec![0.0; n];
        for j in 0..n {
            let ajj = self.diag[j] + shift;
            let mut dj = ajj;
            if j >= 1 {
                dj -= l1[j] * l1[j] * d[j - 1];
            }
            if j >= 2 {
                dj -= l2[j] * l2[j] * d[j - 2];
            }
            if !(dj > 1e-13 * ajj.abs()) || !dj.is_finite() {
                return None;
            }
            d[j] = dj;
            if j + 1 < n {
                let mut a = self.off1[j];
                if j >= 1 {
                    a -= l2[j + 1] * l1[j] * d[j - 1];
                }
                l1[j + 1] = a / dj;
            }
            if j + 2 < n {
                l2[j + 2] = self.off2[j] / dj;
            }
        }
        Some(Ldl { d, l1, l2 })
    }
}

/// `L D L^T` factors of a pentadiagonal matrix; `l1[i] = L[i][i-1]`,
/// `l2[i] = L[i][i-2]`.
#[derive(Clone, Debug)]
pub struct Ldl {
    d: Vec<f64>,
    l1: Vec<f64>,
    l2: Vec<f64>,
}

impl Ldl {
    /// Solves `L D L^T x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut z = b.to_vec();
        for i in 0..n {
            if i >= 1 {
                z[i] -= self.l1[i] * z[i - 1];
            }
            if i >= 2 {
                z[i] -= self.l2[i] * z[i - 2];
            }
        }
        for i in 0..n {
            z[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                z[i] -= self.l1[i + 1] * z[i + 1];
            }
            if i + 2 < n {
                z[i] -= self.l2[i + 2] * z[i + 2];
            }
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn solves_diagonally_dominant_systems(
            n in 3usize..40,
            seed in proptest::collection::vec(-1.0f64..1.0, 120),
        ) {
            let mut a = Pentadiagonal::zeros(n);
            for i in 0..n {
                a.add(i, i, 6.0 + seed[i % 120].abs());
                if i + 1 < n { a.add(i, i + 1, seed[(i + 40) % 120]); }
                if i + 2 < n { a.add(i, i + 2, seed[(i + 80) % 120]); }
            }
            let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let b = a.mul(&x);
            let sol = a.factor(0.0).unwrap().solve(&b);
            for (p, q) in sol.iter().zip(&x) {
                prop_assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected_until_shifted() {
        let mut a = Pentadiagonal::zeros(4);
        for i in 0..4 {
            a.add(i, i, 1.0);
        }
        a.add(0, 1, 2.0);
        assert!(a.factor(0.0).is_none());
        assert!(a.factor(2.0).is_some());
    }
}
