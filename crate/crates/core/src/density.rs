//! Density representations and the Smyth-Hill equilibrium family.
//!
//! Two representations are used side by side:
//!
//! * [`GridDensity`]: Eulerian samples `v_i = v(x_min + i dx)` on a uniform
//!   grid. Derivatives in `x` and all grid-based norms live here.
//! * [`QuantileDensity`]: Lagrangian positions `X_i = F^{-1}(s_i)` of the
//!   cumulative distribution at the cell-centred mass fractions
//!   `s_i = (i + 1/2) M / N`. This is the state of the JKO scheme, because
//!   in one dimension the Wasserstein distance is the `L^2` distance of
//!   quantile functions.
//!
//! Between the two particles `X_k < X_{k+1}` sits exactly one cell of mass
//! `h = M/N` with density `rho_k = h / (X_{k+1} - X_k)`, located at the
//! cell centre `y_k = (X_k + X_{k+1}) / 2`. The half cells of mass `h/2`
//! beyond `X_0` and `X_{N-1}` are represented by a quadratic-contact tail
//! `A (x - e)^2`, the edge shape of a thin film with zero contact angle.
//! The tail length `e` follows from the first gap: for an exact quadratic
//! profile the gap and the distance from `X_0` to the contact point are in
//! the fixed ratio `3^{1/3} - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::trapezoid;

/// Smallest admissible number of grid samples.
pub const MIN_GRID_SAMPLES: usize = 8;

/// Ratio between the distance from the outermost particle to the contact
/// point and the outermost gap, for a quadratic-contact edge.
pub fn contact_offset_ratio() -> f64 {
    1.0 / (3f64.cbrt() - 1.0)
}

/// Density sampled on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    x_min: f64,
    dx: f64,
    values: Vec<f64>,
    mass: f64,
}

impl GridDensity {
    /// Builds a grid density and computes its trapezoid mass.
    ///
    /// ```
    /// use thinfilm::GridDensity;
    /// let v = GridDensity::new(0.0, 0.125, vec![1.0; 9]).unwrap();
    /// assert!((v.mass() - 1.0).abs() < 1e-15);
    /// ```
    pub fn new(x_min: f64, dx: f64, values: Vec<f64>) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) || !x_min.is_finite() {
            return Err(invalid(format!("grid needs finite x_min and dx > 0, got x_min={x_min}, dx={dx}")));
        }
        if values.len() < MIN_GRID_SAMPLES {
            return Err(invalid(format!(
                "grid needs at least {MIN_GRID_SAMPLES} samples, got {}",
                values.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(invalid(format!("grid value {i} is {v}, densities must be finite and nonnegative")));
        }
        let mass = trapezoid(&values, dx);
        if mass <= 0.0 {
            return Err(invalid("grid density has zero mass"));
        }
        Ok(Self { x_min, dx, values, mass })
    }

    /// Samples `f` at `count` points starting at `x_min`.
    pub fn from_fn(x_min: f64, dx: f64, count: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..count).map(|i| f(x_min + i as f64 * dx)).collect();
        Self::new(x_min, dx, values)
    }

    /// Left end of the grid.
    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    /// Right end of the grid.
    pub fn x_max(&self) -> f64 {
        self.x(self.values.len() - 1)
    }

    /// Grid spacing.
    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Samples.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false: a grid density has at least [`MIN_GRID_SAMPLES`] samples.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Trapezoid mass.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Position of sample `i`.
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    /// All sample positions.
    pub fn xs(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.x(i)).collect()
    }

    /// True when `other` samples the same points.
    pub fn same_grid(&self, other: &GridDensity) -> bool {
        let tol = 1e-12 * (self.dx + self.x_min.abs());
        self.values.len() == other.values.len()
            && (self.x_min - other.x_min).abs() <= tol
            && (self.dx - other.dx).abs() <= 1e-12 * self.dx
    }

    /// Returns a copy with every value multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.x_min, self.dx, self.values.iter().map(|v| v * factor).collect())
    }

    /// Piecewise-linear interpolation, zero outside the grid.
    pub fn interpolate(&self, x: f64) -> f64 {
        let t = (x - self.x_min) / self.dx;
        if !(t >= 0.0) || t > (self.values.len() - 1) as f64 {
            return 0.0;
        }
        let i = (t.floor() as usize).min(self.values.len() - 2);
        let w = t - i as f64;
        (1.0 - w) * self.values[i] + w * self.values[i + 1]
    }

    /// Smallest and largest grid position with a positive value.
    pub fn positive_support(&self) -> (f64, f64) {
        let first = self.values.iter().position(|v| *v > 0.0).unwrap_or(0);
        let last = self.values.iter().rposition(|v| *v > 0.0).unwrap_or(self.values.len() - 1);
        (self.x(first), self.x(last))
    }
}

/// Density stored through its quantile function at cell-centred mass
/// fractions `s_i = (i + 1/2) M / N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileDensity {
    mass: f64,
    positions: Vec<f64>,
}

impl QuantileDensity {
    /// Builds a quantile density from strictly increasing finite positions.
    ///
    /// ```
    /// use thinfilm::QuantileDensity;
    /// let q = QuantileDensity::new(1.0, vec![0.25, 0.75]).unwrap();
    /// assert_eq!(q.cell_mass(), 0.5);
    /// assert!(QuantileDensity::new(1.0, vec![0.75, 0.25]).is_err());
    /// ```
    pub fn new(mass: f64, positions: Vec<f64>) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(invalid(format!("quantile density needs finite mass > 0, got {mass}")));
        }
        if positions.len() < 2 {
            return Err(invalid("quantile density needs at least two positions"));
        }
        if let Some(i) = positions.iter().position(|x| !x.is_finite()) {
            return Err(invalid(format!("position {i} is not finite")));
        }
        if let Some(i) = positions.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(invalid(format!(
                "positions must be strictly increasing, but X[{}]={} >= X[{}]={}",
                i,
                positions[i],
                i + 1,
                positions[i + 1]
            )));
        }
        Ok(Self { mass, positions })
    }

    /// Total mass `M`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Number of quantiles `N`.
    pub fn n(&self) -> usize {
        self.positions.len()
    }

    /// Mass per cell `h = M/N`.
    pub fn cell_mass(&self) -> f64 {
        self.mass / self.positions.len() as f64
    }

    /// Quantile positions `X_i`.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Consumes the density and returns its positions.
    pub fn into_positions(self) -> Vec<f64> {
        self.positions
    }

    /// Mass fraction `s_i = (i + 1/2) h`.
    pub fn fraction(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.cell_mass()
    }

    /// Gaps `X_{k+1} - X_k`, length `N - 1`.
    pub fn gaps(&self) -> Vec<f64> {
        self.positions.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Smallest gap.
    pub fn min_gap(&self) -> f64 {
        self.positions.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Cell densities `rho_k = h / (X_{k+1} - X_k)`.
    pub fn cell_densities(&self) -> Vec<f64> {
        let h = self.cell_mass();
        self.positions.windows(2).map(|w| h / (w[1] - w[0])).collect()
    }

    /// Cell centres `y_k = (X_k + X_{k+1}) / 2`.
    pub fn cell_centers(&self) -> Vec<f64> {
        self.positions.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Interval carrying the reconstructed density, contact tails included.
    pub fn support(&self) -> (f64, f64) {
        let n = self.positions.len();
        let k = contact_offset_ratio();
        (
            self.positions[0] - k * (self.positions[1] - self.positions[0]),
            self.positions[n - 1] + k * (self.positions[n - 1] - self.positions[n - 2]),
        )
    }

    /// Mean position `(1/M) int x v`.
    pub fn mean(&self) -> f64 {
        self.positions.iter().sum::<f64>() / self.positions.len() as f64
    }

    /// The same density moved by `d`.
    pub fn translated(&self, d: f64) -> Result<Self> {
        Self::new(self.mass, self.positions.iter().map(|x| x + d).collect())
    }

    /// The mass-preserving dilation `lambda v(lambda x)`.
    pub fn dilated(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(invalid("dilation factor must be positive"));
        }
        Self::new(self.mass, self.positions.iter().map(|x| x / lambda).collect())
    }
}

/// The equilibrium profile `(C^2 - x^2)^2_+ / 24` of mass `M`, with
/// `C = (45 M / 2)^{1/5}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmythHill {
    mass: f64,
    support_radius: f64,
}

/// The Smyth-Hill equilibrium of the given mass.
///
/// ```
/// let sh = thinfilm::smyth_hill(2.0 / 45.0).unwrap();
/// assert!((sh.support_radius() - 1.0).abs() < 1e-15);
/// assert_eq!(sh.value(1.5), 0.0);
/// ```
pub fn smyth_hill(mass: f64) -> Result<SmythHill> {
    SmythHill::new(mass)
}

impl SmythHill {
    /// Equilibrium of mass `mass > 0`.
    pub fn new(mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(invalid(format!("Smyth-Hill mass must be finite and positive, got {mass}")));
        }
        Ok(Self { mass, support_radius: (22.5 * mass).powf(0.2) })
    }

    /// Equilibrium with support `[-c, c]`.
    pub fn with_radius(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid("support radius must be finite and positive"));
        }
        Ok(Self { mass: 2.0 * c.powi(5) / 45.0, support_radius: c })
    }

    /// Mass `M`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Support radius `C`.
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// Profile value.
    pub fn value(&self, x: f64) -> f64 {
        let c2 = self.support_radius * self.support_radius;
        let w = c2 - x * x;
        if w > 0.0 {
            w * w / 24.0
        } else {
            0.0
        }
    }

    /// Derivative of order `k` in `0..=3`; zero outside the support.
    pub fn derivative(&self, x: f64, k: u32) -> f64 {
        let c2 = self.support_radius * self.support_radius;
        if x * x >= c2 {
            return 0.0;
        }
        match k {
            0 => self.value(x),
            1 => -x * (c2 - x * x) / 6.0,
            2 => (3.0 * x * x - c2) / 6.0,
            3 => x,
            _ => panic!("derivative order {k} not supported"),
        }
    }

    /// Cumulative mass `int_{-inf}^x v`.
    pub fn cdf(&self, x: f64) -> f64 {
        let c = self.support_radius;
        if x <= 0.0 {
            let w = (1.0 + x / c).max(0.0);
            c.powi(5) / 24.0 * contact_polynomial(w)
        } else {
            self.mass - self.cdf(-x)
        }
    }

    /// Quantile at mass fraction `s` in `[0, M]`.
    pub fn quantile(&self, s: f64) -> f64 {
        let half = 0.5 * self.mass;
        if s > half {
            return -self.quantile(self.mass - s);
        }
        let c = self.support_radius;
        let target = 24.0 * s.max(0.0) / c.powi(5);
        c * (solve_contact_polynomial(target) - 1.0)
    }

    /// Closed-form quantiles at `N` cell-centred mass fractions.
    pub fn quantiles(&self, n: usize) -> Result<QuantileDensity> {
        if n < 2 {
            return Err(invalid("need at least two quantiles"));
        }
        let h = self.mass / n as f64;
        let mut positions: Vec<f64> = (0..n).map(|i| self.quantile((i as f64 + 0.5) * h)).collect();
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let a = 0.5 * (positions[j] - positions[i]);
            positions[i] = -a;
            positions[j] = a;
        }
        if n % 2 == 1 {
            positions[n / 2] = 0.0;
        }
        QuantileDensity::new(self.mass, positions)
    }

    /// Samples the profile on a grid.
    pub fn sample(&self, x_min: f64, dx: f64, count: usize) -> Result<GridDensity> {
        GridDensity::from_fn(x_min, dx, count, |x| self.value(x))
    }

    /// Samples the profile on a symmetric grid over `[-margin C, margin C]`.
    pub fn sample_symmetric(&self, count: usize, margin: f64) -> Result<GridDensity> {
        let a = margin * self.support_radius;
        let dx = 2.0 * a / (count - 1) as f64;
        self.sample(-a, dx, count)
    }

    /// `alpha = (1/2) int x^2 v = C^7 / 315`.
    pub fn alpha(&self) -> f64 {
        self.support_radius.powi(7) / 315.0
    }

    /// `beta = (1/2) int v_x^2 = 2 C^7 / 945`.
    pub fn beta(&self) -> f64 {
        2.0 * self.support_radius.powi(7) / 945.0
    }

    /// `E = alpha + beta = C^7 / 189`.
    pub fn energy(&self) -> f64 {
        self.alpha() + self.beta()
    }

    /// `int v^{3/2} = sqrt(6) C^7 / 315` (so that the entropy is `C^7/63`).
    pub fn three_halves(&self) -> f64 {
        6f64.sqrt() * self.support_radius.powi(7) / 315.0
    }

    /// `H = int (x^2/2) v + 2 sqrt(2/3) v^{3/2} = C^7 / 63`.
    pub fn entropy(&self) -> f64 {
        self.support_radius.powi(7) / 63.0
    }

    /// `M_4 = int x^4 v = 2 C^9 / 945`.
    pub fn fourth_moment(&self) -> f64 {
        2.0 * self.support_radius.powi(9) / 945.0
    }

    /// `max v = C^4 / 24`.
    pub fn sup(&self) -> f64 {
        self.support_radius.powi(4) / 24.0
    }
}

/// `int_0^w (u (2 - u))^2 du`, the scaled cumulative mass measured from the
/// left contact point.
fn contact_polynomial(w: f64) -> f64 {
    w * w * w * (4.0 / 3.0 - w + w * w / 5.0)
}

/// Inverts [`contact_polynomial`] on `[0, 1]` by safeguarded Newton.
fn solve_contact_polynomial(target: f64) -> f64 {
    if target <= 0.0 {
        return 0.0;
    }
    let top = contact_polynomial(1.0);
    if target >= top {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut w = (0.75 * target).cbrt().min(1.0);
    for _ in 0..200 {
        let f = contact_polynomial(w) - target;
        if f > 0.0 {
            hi = w;
        } else {
            lo = w;
        }
        let dfdw = (w * (2.0 - w)).powi(2);
        let mut next = w - f / dfdw;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() <= 1e-17 * w.max(1e-300) || hi - lo <= f64::EPSILON * hi {
            return next;
        }
        w = next;
    }
    w
}

/// Edge model used by [`quantile_to_grid`] beyond the outermost cell centres.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reconstruction {
    /// Quadratic-contact tails carrying the half-cell mass beyond `X_0` and
    /// `X_{N-1}`.
    #[default]
    ContactTail,
    /// Density set to zero outside `[X_0, X_{N-1}]` and held at the edge
    /// cell value between the outermost particle and cell centre.
    Truncated,
}

/// Side information of a reconstruction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionDiagnostics {
    /// Factor applied so that the trapezoid mass equals the quantile mass.
    pub renormalization: f64,
    /// Edge model in use.
    pub model: Reconstruction,
}

/// Pointwise evaluator of the reconstructed density of a quantile state.
#[derive(Clone, Debug)]
pub struct Reconstructor<'a> {
    centers: Vec<f64>,
    rho: Vec<f64>,
    model: Reconstruction,
    left: (f64, f64),
    right: (f64, f64),
    q: &'a QuantileDensity,
}

impl<'a> Reconstructor<'a> {
    /// Prepares the reconstruction of `q`.
    pub fn new(q: &'a QuantileDensity, model: Reconstruction) -> Self {
        let centers = q.cell_centers();
        let rho = q.cell_densities();
        let (e_l, e_r) = q.support();
        let m = rho.len();
        let a_l = rho[0] / (centers[0] - e_l).powi(2);
        let a_r = rho[m - 1] / (e_r - centers[m - 1]).powi(2);
        Self { centers, rho, model, left: (e_l, a_l), right: (e_r, a_r), q }
    }

    /// Interval outside which the reconstruction vanishes.
    pub fn support(&self) -> (f64, f64) {
        match self.model {
            Reconstruction::ContactTail => (self.left.0, self.right.0),
            Reconstruction::Truncated => {
                let p = self.q.positions();
                (p[0], p[p.len() - 1])
            }
        }
    }

    /// Reconstructed value at `x` (before renormalization).
    pub fn value(&self, x: f64) -> f64 {
        let m = self.rho.len();
        let (lo, hi) = self.support();
        if x <= lo || x >= hi {
            return 0.0;
        }
        if x < self.centers[0] {
            return match self.model {
                Reconstruction::ContactTail => self.left.1 * (x - self.left.0).powi(2),
                Reconstruction::Truncated => self.rho[0],
            };
        }
        if x > self.centers[m - 1] {
            return match self.model {
                Reconstruction::ContactTail => self.right.1 * (self.right.0 - x).powi(2),
                Reconstruction::Truncated => self.rho[m - 1],
            };
        }
        let k = match self.centers.partition_point(|c| *c <= x) {
            0 => 0,
            p => (p - 1).min(m - 2),
        };
        let w = (x - self.centers[k]) / (self.centers[k + 1] - self.centers[k]);
        (1.0 - w) * self.rho[k] + w * self.rho[k + 1]
    }
}

/// Grid window `(x_min, dx)` with `count` points whose interior spans
/// `[lo, hi]` and leaves three spacings of margin on each side.
pub fn grid_window(lo: f64, hi: f64, count: usize) -> Result<(f64, f64)> {
    if count < MIN_GRID_SAMPLES || !(hi > lo) {
        return Err(invalid("grid window needs hi > lo and enough points"));
    }
    let dx = (hi - lo) / (count - 7) as f64;
    Ok((lo - 3.0 * dx, dx))
}

/// Converts a grid density into `n` cell-centred quantiles by piecewise
/// linear inversion of the trapezoid CDF.
///
/// ```
/// use thinfilm::{grid_to_quantile, GridDensity};
/// let v = GridDensity::from_fn(0.0, 0.01, 101, |_| 1.0).unwrap();
/// let q = grid_to_quantile(&v, 2).unwrap();
/// assert!((q.positions()[0] - 0.25).abs() < 1e-12);
/// assert!((q.positions()[1] - 0.75).abs() < 1e-12);
/// ```
pub fn grid_to_quantile(v: &GridDensity, n: usize) -> Result<QuantileDensity> {
    if n < 2 {
        return Err(invalid("need at least two quantiles"));
    }
    let vals = v.values();
    let dx = v.dx();
    let mut cdf = Vec::with_capacity(vals.len());
    let mut acc = 0.0;
    cdf.push(0.0);
    for w in vals.windows(2) {
        acc += 0.5 * dx * (w[0] + w[1]);
        cdf.push(acc);
    }
    let total = acc;
    if !(total > 0.0) {
        return Err(invalid("grid density has zero mass"));
    }
    let h = total / n as f64;
    let mut positions = Vec::with_capacity(n);
    let mut j = 0usize;
    for i in 0..n {
        let s = (i as f64 + 0.5) * h;
        while j + 1 < cdf.len() - 1 && cdf[j + 1] <= s {
            j += 1;
        }
        let df = cdf[j + 1] - cdf[j];
        let frac = if df > 0.0 { ((s - cdf[j]) / df).clamp(0.0, 1.0) } else { 0.5 };
        positions.push(v.x(j) + frac * dx);
    }
    QuantileDensity::new(v.mass(), positions)
}

/// Reconstructs a grid density from quantiles on the window
/// `x_min + i dx`, `i < count`, then renormalizes it to the quantile mass.
///
/// The window must contain the reconstruction support (see
/// [`Reconstructor::support`]) with at least two spacings of margin.
pub fn quantile_to_grid(
    q: &QuantileDensity,
    x_min: f64,
    dx: f64,
    count: usize,
    model: Reconstruction,
) -> Result<(GridDensity, ReconstructionDiagnostics)> {
    let rec = Reconstructor::new(q, model);
    let (lo, hi) = rec.support();
    let x_max = x_min + (count.saturating_sub(1)) as f64 * dx;
    if !(dx > 0.0) || lo - x_min < 2.0 * dx * (1.0 - 1e-9) || x_max - hi < 2.0 * dx * (1.0 - 1e-9) {
        return Err(invalid(format!(
            "grid window [{x_min}, {x_max}] with dx={dx} does not cover the support [{lo}, {hi}] with a margin of 2 dx"
        )));
    }
    let raw: Vec<f64> = (0..count).map(|i| rec.value(x_min + i as f64 * dx)).collect();
    let raw_mass = trapezoid(&raw, dx);
    if !(raw_mass > 0.0) {
        return Err(invalid("reconstruction has no mass on the requested grid"));
    }
    let factor = q.mass() / raw_mass;
    let grid = GridDensity::new(x_min, dx, raw.into_iter().map(|v| v * factor).collect())?;
    Ok((grid, ReconstructionDiagnostics { renormalization: factor, model }))
}

/// Reconstruction on an automatically chosen window covering `[lo, hi]`
/// together with the support of `q`.
pub fn reconstruct(
    q: &QuantileDensity,
    cover: Option<(f64, f64)>,
    count: usize,
    model: Reconstruction,
) -> Result<(GridDensity, ReconstructionDiagnostics)> {
    let (mut lo, mut hi) = Reconstructor::new(q, model).support();
    if let Some((a, b)) = cover {
        lo = lo.min(a);
        hi = hi.max(b);
    }
    let (x_min, dx) = grid_window(lo, hi, count)?;
    quantile_to_grid(q, x_min, dx, count, model)
}

/// Clock `b(t) = (e^{5t} - 1) / 5` of the self-similar change of variables.
pub fn clock(t: f64) -> f64 {
    (5.0 * t).exp_m1() / 5.0
}

/// Maps a solution `u` of the unscaled equation, read at time `b(t)`, to
/// `v(x, t) = a u(a x)` with `a = e^t`. Returns the rescaled density and
/// the clock value `b(t)`.
///
/// ```
/// use thinfilm::{rescale_u_to_v, smyth_hill};
/// let u = smyth_hill(1.0).unwrap().sample_symmetric(101, 1.2).unwrap();
/// let (v, b) = rescale_u_to_v(&u, 2f64.ln()).unwrap();
/// assert!((b - 31.0 / 5.0).abs() < 1e-12);
/// assert!((v.mass() - u.mass()).abs() < 1e-12);
/// ```
pub fn rescale_u_to_v(u: &GridDensity, t: f64) -> Result<(GridDensity, f64)> {
    if !(t >= 0.0) {
        return Err(invalid("rescaling time must be nonnegative"));
    }
    let a = t.exp();
    let v = GridDensity::new(u.x_min() / a, u.dx() / a, u.values().iter().map(|x| a * x).collect())?;
    Ok((v, clock(t)))
}

/// Inverse of [`rescale_u_to_v`]: `u(y) = v(y / a) / a`.
pub fn rescale_v_to_u(v: &GridDensity, t: f64) -> Result<(GridDensity, f64)> {
    if !(t >= 0.0) {
        return Err(invalid("rescaling time must be nonnegative"));
    }
    let a = t.exp();
    let u = GridDensity::new(v.x_min() * a, v.dx() * a, v.values().iter().map(|x| x / a).collect())?;
    Ok((u, clock(t)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contact_polynomial_inverse() {
        for &t in &[1e-12, 1e-6, 0.01, 0.2, 0.5, 8.0 / 15.0 - 1e-9] {
            let w = solve_contact_polynomial(t);
            assert!((contact_polynomial(w) - t).abs() <= 1e-15 * t.max(1e-3));
        }
    }

    #[test]
    fn cdf_and_quantile_are_inverse() {
        let sh = SmythHill::new(0.3).unwrap();
        for i in 1..100 {
            let s = sh.mass() * i as f64 / 100.0;
            assert!((sh.cdf(sh.quantile(s)) - s).abs() < 1e-14);
        }
        assert!((sh.cdf(sh.support_radius()) - sh.mass()).abs() < 1e-15);
    }

    #[test]
    fn reconstruction_of_exact_quadratic_edge() {
        let sh = SmythHill::new(2.0 / 45.0).unwrap();
        let q = sh.quantiles(2000).unwrap();
        let (lo, hi) = q.support();
        assert!((lo + 1.0).abs() < 2e-3 && (hi - 1.0).abs() < 2e-3);
    }
}
