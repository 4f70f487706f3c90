//! One-dimensional optimal transport on quantile states.
//!
//! For two measures of equal mass on the line, the monotone rearrangement is
//! optimal for the quadratic cost, so
//! `W_2^2(mu, nu) = int_0^M (X_mu(s) - X_nu(s))^2 ds`. On quantile states with
//! the same number of cells this is a weighted Euclidean distance of the
//! position vectors. The coupling is never materialized on this path.
//!
//! [`w2_sq_bruteforce`] solves the transportation linear program on small
//! discrete measures with a min-cost-flow algorithm that knows nothing about
//! monotonicity; it validates the quantile formula.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::density::QuantileDensity;
use crate::error::{invalid, Error, Result};
use crate::io::write_atomic;

/// Largest number of atoms accepted by [`w2_sq_bruteforce`].
pub const BRUTEFORCE_MAX_ATOMS: usize = 12;

fn check_compatible(mu: &QuantileDensity, nu: &QuantileDensity) -> Result<()> {
    if mu.n() != nu.n() {
        return Err(invalid(format!("quantile counts differ: {} vs {}", mu.n(), nu.n())));
    }
    if (mu.mass() - nu.mass()).abs() > 1e-10 * mu.mass().max(nu.mass()) {
        return Err(invalid(format!("masses differ: {} vs {}", mu.mass(), nu.mass())));
    }
    Ok(())
}

/// Squared Wasserstein distance `h sum (X_i^mu - X_i^nu)^2`.
pub fn w2_sq(mu: &QuantileDensity, nu: &QuantileDensity) -> Result<f64> {
    check_compatible(mu, nu)?;
    Ok(mu.cell_mass() * mu.positions().iter().zip(nu.positions()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
}

/// Wasserstein distance.
///
/// ```
/// use thinfilm::{smyth_hill, w2};
/// let sh = smyth_hill(2.0 / 45.0).unwrap();
/// let mu = sh.quantiles(100).unwrap();
/// let nu = mu.translated(0.3).unwrap();
/// let d = w2(&mu, &nu).unwrap();
/// assert!((d - 0.3 * sh.mass().sqrt()).abs() < 1e-12);
/// ```
pub fn w2(mu: &QuantileDensity, nu: &QuantileDensity) -> Result<f64> {
    Ok(w2_sq(mu, nu)?.sqrt())
}

/// Optimal (monotone) transport map between two quantile states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    /// Source measure.
    pub source: QuantileDensity,
    /// Target measure.
    pub target: QuantileDensity,
    /// Map values `T(X_i^source) = X_i^target`.
    pub map_values: Vec<f64>,
    /// Transport cost `W_2^2`.
    pub cost: f64,
}

/// The optimal plan from `mu` to `nu`.
pub fn transport_plan(mu: &QuantileDensity, nu: &QuantileDensity) -> Result<TransportPlan> {
    let cost = w2_sq(mu, nu)?;
    Ok(TransportPlan { source: mu.clone(), target: nu.clone(), map_values: nu.positions().to_vec(), cost })
}

impl TransportPlan {
    /// Writes the plan as CSV with header `s,X_source,X_target`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        writeln!(buf, "s,X_source,X_target").expect("write to memory");
        for (i, (a, b)) in self.source.positions().iter().zip(&self.map_values).enumerate() {
            writeln!(buf, "{},{},{}", self.source.fraction(i), a, b).expect("write to memory");
        }
        write_atomic(path, &buf)
    }
}

/// Displacement interpolation `(1 - t) X^mu + t X^nu`.
///
/// ```
/// use thinfilm::{displacement_interpolate, smyth_hill};
/// let mu = smyth_hill(1.0).unwrap().quantiles(64).unwrap();
/// let nu = mu.translated(1.0).unwrap();
/// let mid = displacement_interpolate(&mu, &nu, 0.5).unwrap();
/// assert!((mid.mean() - 0.5).abs() < 1e-12);
/// ```
pub fn displacement_interpolate(mu: &QuantileDensity, nu: &QuantileDensity, t: f64) -> Result<QuantileDensity> {
    check_compatible(mu, nu)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(invalid(format!("interpolation parameter must lie in [0, 1], got {t}")));
    }
    if t == 0.0 {
        return Ok(mu.clone());
    }
    if t == 1.0 {
        return Ok(QuantileDensity::new(mu.mass(), nu.positions().to_vec())?);
    }
    let pos = mu.positions().iter().zip(nu.positions()).map(|(a, b)| (1.0 - t) * a + t * b).collect();
    QuantileDensity::new(mu.mass(), pos)
}

/// Push-forward of `mu` under the nondecreasing map `map`.
pub fn pushforward(mu: &QuantileDensity, map: impl Fn(f64) -> f64) -> Result<QuantileDensity> {
    let values: Vec<f64> = mu.positions().iter().map(|x| map(*x)).collect();
    pushforward_sampled(mu, &values)
}

/// Push-forward of `mu` under a map given by its values at the quantiles.
pub fn pushforward_sampled(mu: &QuantileDensity, values: &[f64]) -> Result<QuantileDensity> {
    if values.len() != mu.n() {
        return Err(invalid("sampled map must have one value per quantile"));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("push-forward map must be strictly increasing on the quantiles"));
    }
    QuantileDensity::new(mu.mass(), values.to_vec())
}

/// Resamples `q` to `n` cells by linear interpolation of its quantile
/// function, extended linearly over the two half cells at the ends.
pub fn resample(q: &QuantileDensity, n: usize) -> Result<QuantileDensity> {
    if n < 2 {
        return Err(invalid("need at least two quantiles"));
    }
    if n == q.n() {
        return Ok(q.clone());
    }
    let m = q.n();
    let x = q.positions();
    let pos = (0..n)
        .map(|i| {
            let u = (i as f64 + 0.5) * m as f64 / n as f64 - 0.5;
            let k = (u.floor().max(0.0) as usize).min(m - 2);
            let w = u - k as f64;
            (1.0 - w) * x[k] + w * x[k + 1]
        })
        .collect();
    QuantileDensity::new(q.mass(), pos)
}

/// A point mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    /// Location.
    pub position: f64,
    /// Weight, positive.
    pub mass: f64,
}

fn check_atoms(a: &[Atom], b: &[Atom]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("atomic measures must be nonempty"));
    }
    if a.iter().chain(b).any(|t| !(t.mass > 0.0) || !t.position.is_finite()) {
        return Err(invalid("atoms need finite positions and positive masses"));
    }
    let ma: f64 = a.iter().map(|t| t.mass).sum();
    let mb: f64 = b.iter().map(|t| t.mass).sum();
    if (ma - mb).abs() > 1e-12 * ma.max(mb) {
        return Err(invalid(format!("total masses differ: {ma} vs {mb}")));
    }
    Ok(ma)
}

/// `W_2^2` of two atomic measures from their quantile functions: both are
/// step functions of the mass fraction, integrated exactly between the
/// merged breakpoints.
pub fn w2_sq_atoms_quantile(a: &[Atom], b: &[Atom]) -> Result<f64> {
    check_atoms(a, b)?;
    let sort = |v: &[Atom]| {
        let mut s = v.to_vec();
        s.sort_by(|p, q| p.position.total_cmp(&q.position));
        s
    };
    let (sa, sb) = (sort(a), sort(b));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (sa[0].mass, sb[0].mass);
    let mut cost = 0.0;
    while i < sa.len() && j < sb.len() {
        let step = ra.min(rb);
        let d = sa[i].position - sb[j].position;
        cost += step * d * d;
        ra -= step;
        rb -= step;
        if ra <= 0.0 {
            i += 1;
            if i < sa.len() {
                ra = sa[i].mass;
            }
        }
        if rb <= 0.0 {
            j += 1;
            if j < sb.len() {
                rb = sb[j].mass;
            }
        }
    }
    Ok(cost)
}

/// Exact optimum of the transportation problem
/// `min sum gamma_ij (x_i - y_j)^2` over couplings `gamma` of the two
/// atomic measures, by successive shortest augmenting paths on the
/// complete bipartite graph (Bellman-Ford on the residual network).
///
/// ```
/// use thinfilm::transport::{w2_sq_bruteforce, Atom};
/// let a = [Atom { position: 0.0, mass: 1.0 }];
/// let b = [Atom { position: 3.0, mass: 1.0 }];
/// assert!((w2_sq_bruteforce(&a, &b).unwrap() - 9.0).abs() < 1e-15);
/// ```
pub fn w2_sq_bruteforce(a: &[Atom], b: &[Atom]) -> Result<f64> {
    if a.len() > BRUTEFORCE_MAX_ATOMS || b.len() > BRUTEFORCE_MAX_ATOMS {
        return Err(invalid(format!("brute-force oracle accepts at most {BRUTEFORCE_MAX_ATOMS} atoms per side")));
    }
    let total = check_atoms(a, b)?;
    let (na, nb) = (a.len(), b.len());
    let cost = |i: usize, j: usize| (a[i].position - b[j].position).powi(2);
    let mut flow = vec![vec![0.0f64; nb]; na];
    let mut supply: Vec<f64> = a.iter().map(|t| t.mass).collect();
    let mut demand: Vec<f64> = b.iter().map(|t| t.mass).collect();
    let eps = 1e-15 * total;
    // Relaxations must improve by more than rounding, or zero-cost cycles
    // of the residual network turn into spurious negative cycles.
    let max_cost = (0..na).flat_map(|i| (0..nb).map(move |j| (i, j))).map(|(i, j)| cost(i, j)).fold(0.0, f64::max);
    let slack = 1e-12 * max_cost;
    // Nodes: sources 0..na, sinks na..na+nb.
    for _round in 0..10_000 {
        let remaining: f64 = supply.iter().sum();
        if remaining <= 1e-13 * total {
            break;
        }
        let nn = na + nb;
        let mut dist = vec![f64::INFINITY; nn];
        let mut pred = vec![usize::MAX; nn];
        for i in 0..na {
            if supply[i] > eps {
                dist[i] = 0.0;
            }
        }
        for _ in 0..nn {
            let mut changed = false;
            for i in 0..na {
                if dist[i].is_finite() {
                    for j in 0..nb {
                        let d = dist[i] + cost(i, j);
                        if d < dist[na + j] - slack {
                            dist[na + j] = d;
                            pred[na + j] = i;
                            changed = true;
                        }
                    }
                }
            }
            for j in 0..nb {
                if dist[na + j].is_finite() {
                    for i in 0..na {
                        if flow[i][j] > eps {
                            let d = dist[na + j] - cost(i, j);
                            if d < dist[i] - slack {
                                dist[i] = d;
                                pred[i] = na + j;
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let target = (0..nb)
            .filter(|&j| demand[j] > eps && dist[na + j].is_finite())
            .min_by(|&p, &q| dist[na + p].total_cmp(&dist[na + q]));
        let Some(jt) = target else {
            return Err(Error::InvalidArgument("transportation problem has no augmenting path".into()));
        };
        let mut path = vec![na + jt];
        let mut node = na + jt;
        while pred[node] != usize::MAX {
            node = pred[node];
            path.push(node);
            if path.len() > 2 * nn + 2 {
                return Err(Error::InvalidArgument("negative cycle in residual network".into()));
            }
        }
        path.reverse();
        let mut amount = supply[path[0]].min(demand[jt]);
        for w in path.windows(2) {
            if w[0] >= na {
                amount = amount.min(flow[w[1]][w[0] - na]);
            }
        }
        for w in path.windows(2) {
            if w[0] < na {
                flow[w[0]][w[1] - na] += amount;
            } else {
                flow[w[1]][w[0] - na] -= amount;
            }
        }
        supply[path[0]] -= amount;
        demand[jt] -= amount;
    }
    Ok((0..na).map(|i| (0..nb).map(|j| flow[i][j] * cost(i, j)).sum::<f64>()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atoms(v: &[(f64, f64)]) -> Vec<Atom> {
        v.iter().map(|&(position, mass)| Atom { position, mass }).collect()
    }

    #[test]
    fn sorted_uniform_atoms() {
        let a = atoms(&[(0.0, 1.0), (1.0, 1.0), (5.0, 1.0)]);
        let b = atoms(&[(2.0, 1.0), (-1.0, 1.0), (4.0, 1.0)]);
        let expected = 1.0 + 1.0 + 1.0;
        assert!((w2_sq_bruteforce(&a, &b).unwrap() - expected).abs() < 1e-12);
        assert!((w2_sq_atoms_quantile(&a, &b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn split_masses() {
        let a = atoms(&[(0.0, 0.5), (1.0, 0.5)]);
        let b = atoms(&[(0.0, 0.25), (2.0, 0.75)]);
        // Monotone coupling: 0.25 at 0->0, 0.25 at 0->2, 0.5 at 1->2.
        let expected = 0.25 * 4.0 + 0.5 * 1.0;
        assert!((w2_sq_bruteforce(&a, &b).unwrap() - expected).abs() < 1e-12);
        assert!((w2_sq_atoms_quantile(&a, &b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn size_cap() {
        let a = atoms(&[(0.0, 1.0); 13]);
        assert!(w2_sq_bruteforce(&a, &a).is_err());
    }

    #[test]
    fn resample_keeps_linear_quantiles() {
        let q = QuantileDensity::new(1.0, (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect()).unwrap();
        let r = resample(&q, 25).unwrap();
        for (i, x) in r.positions().iter().enumerate() {
            assert!((x - (i as f64 + 0.5) / 25.0).abs() < 1e-14);
        }
    }
}
