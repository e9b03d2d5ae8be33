//! One-dimensional probability densities on uniform grids.
//!
//! A [`GriddedDensity`] stores density samples that are treated as constant
//! over each grid cell (a normalized histogram). All integrals of the
//! histogram model are evaluated exactly, including partial end cells, which
//! is what lets the quantizer fixed-point iterations run with continuous
//! boundaries instead of grid-snapped ones.
//!
//! The class of operations is exactly what sequential Bayesian filtering of
//! the plant state needs: affine maps, truncation to an interval, and
//! convolution with an independent disturbance. Each of these preserves
//! log-concavity of the sample sequence, which is what guarantees the
//! Lloyd-Max iterations downstream converge to the global optimum.

use crate::error::{Error, Result};

/// Default number of grid cells for constructed densities.
pub const DEFAULT_GRID_POINTS: usize = 1 << 14;

/// Default two-sided tail mass clipped from infinite supports.
pub const DEFAULT_TAIL_MASS: f64 = 1e-12;

/// Samples below this are treated as zero by the log-concavity scan.
const LOG_FLOOR: f64 = 1e-300;

/// Numerical PDF on a uniform grid; the carrier of all prior/posterior beliefs.
#[derive(Debug, Clone)]
pub struct GriddedDensity {
    lo: f64,
    step: f64,
    values: Vec<f64>,
    /// Cumulative mass at cell boundaries; `cdf[i]` integrates `[lo, lo + i*step)`.
    cdf: Vec<f64>,
}

impl GriddedDensity {
    /// Builds a density from raw samples, normalizing to unit mass.
    pub fn from_values(lo: f64, step: f64, mut values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::invalid("step", "grid step must be positive and finite"));
        }
        if values.len() < 2 {
            return Err(Error::invalid("values", "need at least two grid cells"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("values", "density samples must be finite and nonnegative"));
        }
        let total: f64 = values.iter().sum::<f64>() * step;
        if !(total > 0.0) {
            return Err(Error::invalid("values", "density has zero total mass"));
        }
        for v in &mut values {
            *v /= total;
        }
        Ok(Self::from_normalized(lo, step, values))
    }

    fn from_normalized(lo: f64, step: f64, values: Vec<f64>) -> Self {
        let mut cdf = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for v in &values {
            acc += v * step;
            cdf.push(acc);
        }
        GriddedDensity { lo, step, values, cdf }
    }

    /// Gaussian with the two-sided tail mass clipped off, then renormalized.
    pub fn from_gaussian(mean: f64, variance: f64, tail_mass: f64) -> Result<Self> {
        Self::from_gaussian_with_points(mean, variance, tail_mass, DEFAULT_GRID_POINTS)
    }

    pub fn from_gaussian_with_points(
        mean: f64,
        variance: f64,
        tail_mass: f64,
        points: usize,
    ) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::invalid("variance", "must be positive"));
        }
        check_tail_mass(tail_mass)?;
        let sd = variance.sqrt();
        let z = gaussian_upper_quantile(tail_mass / 2.0);
        let lo = mean - z * sd;
        let step = 2.0 * z * sd / points as f64;
        let values: Vec<f64> = (0..points)
            .map(|i| {
                let x = (lo + (i as f64 + 0.5) * step - mean) / sd;
                (-0.5 * x * x).exp()
            })
            .collect();
        Self::from_values(lo, step, values)
    }

    /// Uniform density on `[a, b]` (exactly representable, no tail clipping).
    pub fn from_uniform(a: f64, b: f64) -> Result<Self> {
        Self::from_uniform_with_points(a, b, DEFAULT_GRID_POINTS)
    }

    pub fn from_uniform_with_points(a: f64, b: f64, points: usize) -> Result<Self> {
        if !(b > a) {
            return Err(Error::invalid("interval", "upper edge must exceed lower edge"));
        }
        let step = (b - a) / points as f64;
        Self::from_values(a, step, vec![1.0; points])
    }

    /// Laplace density with scale `b`, clipped at the given two-sided tail mass.
    pub fn from_laplace(mu: f64, b: f64, tail_mass: f64) -> Result<Self> {
        Self::from_laplace_with_points(mu, b, tail_mass, DEFAULT_GRID_POINTS)
    }

    pub fn from_laplace_with_points(mu: f64, b: f64, tail_mass: f64, points: usize) -> Result<Self> {
        if !(b > 0.0) {
            return Err(Error::invalid("scale", "must be positive"));
        }
        check_tail_mass(tail_mass)?;
        let z = -b * (tail_mass).ln(); // each tail holds tail_mass/2 = exp(-z/b)/2
        let lo = mu - z;
        let step = 2.0 * z / points as f64;
        let values: Vec<f64> = (0..points)
            .map(|i| (-((lo + (i as f64 + 0.5) * step - mu).abs()) / b).exp())
            .collect();
        Self::from_values(lo, step, values)
    }

    /// Exponential density with the stated rate, right tail clipped.
    pub fn from_exponential(rate: f64, tail_mass: f64) -> Result<Self> {
        Self::from_exponential_with_points(rate, tail_mass, DEFAULT_GRID_POINTS)
    }

    pub fn from_exponential_with_points(rate: f64, tail_mass: f64, points: usize) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(Error::invalid("rate", "must be positive"));
        }
        check_tail_mass(tail_mass)?;
        let hi = -(tail_mass).ln() / rate;
        let step = hi / points as f64;
        let values: Vec<f64> = (0..points)
            .map(|i| (-rate * (i as f64 + 0.5) * step).exp())
            .collect();
        Self::from_values(0.0, step, values)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.step * self.values.len() as f64
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Total mass (maintained at 1 up to rounding by every constructor).
    pub fn mass(&self) -> f64 {
        *self.cdf.last().unwrap()
    }

    pub fn mean(&self) -> f64 {
        let (m0, m1, _) = self.cums(self.hi());
        m1 / m0
    }

    pub fn variance(&self) -> f64 {
        let (m0, m1, m2) = self.cums(self.hi());
        let mean = m1 / m0;
        (m2 - mean * m1) / m0
    }

    /// Cumulative `(mass, first moment, second moment)` of the histogram on
    /// `[lo, x]`, exact including the partial end cell.
    pub(crate) fn cums(&self, x: f64) -> (f64, f64, f64) {
        let n = self.values.len();
        let x = x.clamp(self.lo, self.hi());
        let mut i = ((x - self.lo) / self.step) as usize;
        if i >= n {
            i = n - 1;
        }
        let xl = self.lo + i as f64 * self.step;
        let d = (x - xl).clamp(0.0, self.step);
        let f = self.values[i];
        let m0 = self.cdf[i] + f * d;
        let m1 = self.moment1_prefix(i) + f * (xl * d + d * d / 2.0);
        let xr = xl + d;
        let m2 = self.moment2_prefix(i) + f * (xr * xr * xr - xl * xl * xl) / 3.0;
        (m0, m1, m2)
    }

    // First/second moment prefixes are rebuilt per call chain by `Moments`;
    // these direct versions are only for one-off queries.
    fn moment1_prefix(&self, upto: usize) -> f64 {
        let mut acc = 0.0;
        for i in 0..upto {
            acc += self.values[i] * self.mid(i) * self.step;
        }
        acc
    }

    fn moment2_prefix(&self, upto: usize) -> f64 {
        let s2 = self.step * self.step;
        let mut acc = 0.0;
        for i in 0..upto {
            let m = self.mid(i);
            acc += self.values[i] * (m * m + s2 / 12.0) * self.step;
        }
        acc
    }

    #[inline]
    fn mid(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.step
    }

    /// Probability mass on an interval (endpoints clamped to the support).
    pub fn mass_on(&self, interval: (f64, f64)) -> f64 {
        let (a, b) = interval;
        if b <= a {
            return 0.0;
        }
        self.cums(b).0 - self.cums(a).0
    }

    /// Conditional mean on an interval.
    pub fn mean_on(&self, interval: (f64, f64)) -> Result<f64> {
        let (a, b) = interval;
        let (m0a, m1a, _) = self.cums(a);
        let (m0b, m1b, _) = self.cums(b);
        let mass = m0b - m0a;
        if mass <= 0.0 {
            return Err(Error::EmptyCell { lo: a, hi: b });
        }
        Ok((m1b - m1a) / mass)
    }

    /// Unnormalized second moment about `point`: `∫ (x - point)^2 f(x) dx` over the interval.
    pub fn second_moment_about(&self, point: f64, interval: (f64, f64)) -> f64 {
        let (a, b) = interval;
        if b <= a {
            return 0.0;
        }
        let (m0a, m1a, m2a) = self.cums(a);
        let (m0b, m1b, m2b) = self.cums(b);
        (m2b - m2a) - 2.0 * point * (m1b - m1a) + point * point * (m0b - m0a)
    }

    /// Index of the grid boundary nearest to `x`.
    pub(crate) fn snap_boundary(&self, x: f64) -> usize {
        let i = ((x - self.lo) / self.step).round();
        (i.max(0.0) as usize).min(self.values.len())
    }

    pub(crate) fn boundary(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    /// Conditional density on the interval (edges snapped to the grid) and the
    /// normalization factor `γ` — the probability mass of the interval.
    pub fn truncate_normalize(&self, interval: (f64, f64)) -> Result<(GriddedDensity, f64)> {
        let i0 = self.snap_boundary(interval.0);
        let i1 = self.snap_boundary(interval.1);
        if i1 <= i0 {
            return Err(Error::EmptyCell { lo: interval.0, hi: interval.1 });
        }
        let gamma = self.cdf[i1] - self.cdf[i0];
        if gamma <= 0.0 {
            return Err(Error::EmptyCell { lo: interval.0, hi: interval.1 });
        }
        let values: Vec<f64> = self.values[i0..i1].iter().map(|v| v / gamma).collect();
        Ok((
            GriddedDensity::from_normalized(self.boundary(i0), self.step, values),
            gamma,
        ))
    }

    /// Density of `a·X + b`. The grid maps exactly: no resampling is involved.
    pub fn affine(&self, a: f64, b: f64) -> Result<GriddedDensity> {
        if a == 0.0 {
            return Err(Error::DegenerateTransform);
        }
        let scale = a.abs();
        let step = self.step * scale;
        let lo = if a > 0.0 {
            a * self.lo + b
        } else {
            a * self.hi() + b
        };
        let mut values: Vec<f64> = self.values.iter().map(|v| v / scale).collect();
        if a < 0.0 {
            values.reverse();
        }
        Ok(GriddedDensity::from_normalized(lo, step, values))
    }

    /// Density of `X + Y` for independent `X ~ self`, `Y ~ other`.
    ///
    /// Unequal steps are unified by resampling the finer grid onto the coarser
    /// step. The sum is computed by direct summation (all terms nonnegative,
    /// so the output sequence stays log-concave for log-concave inputs), the
    /// result is tail-clipped at [`DEFAULT_TAIL_MASS`] and renormalized, and
    /// the cell count is capped at [`DEFAULT_GRID_POINTS`] by pairwise
    /// averaging.
    pub fn convolve(&self, other: &GriddedDensity) -> GriddedDensity {
        let rel = (self.step - other.step).abs() / self.step.max(other.step);
        let (a, b);
        let (da, db) = if rel <= 1e-12 {
            (self, other)
        } else if self.step < other.step {
            a = self.resample_to_step(other.step, other.lo);
            (&a, other)
        } else {
            b = other.resample_to_step(self.step, self.lo);
            (self, &b)
        };
        let step = da.step;
        let n1 = da.values.len();
        let n2 = db.values.len();
        let mut out = vec![0.0; n1 + n2 - 1];
        // out[k] = step * sum_i da[i]*db[k-i]; accumulate row by row so the
        // summation order is fixed.
        for (i, &vi) in da.values.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (j, &vj) in db.values.iter().enumerate() {
                out[i + j] += vi * vj;
            }
        }
        for v in &mut out {
            *v *= step;
        }
        // Output cell k covers sums centered at mid_i + mid_j = lo_a + lo_b + (k+1)*step.
        let lo = da.lo + db.lo + step / 2.0;
        let mut d = GriddedDensity::from_values(lo, step, out)
            .expect("convolution of normalized densities has positive mass");
        d = d.clip_tails(DEFAULT_TAIL_MASS);
        while d.values.len() > DEFAULT_GRID_POINTS {
            d = d.halve();
        }
        d
    }

    /// Drops two-sided tail mass (snapped to grid cells) and renormalizes.
    pub fn clip_tails(&self, tail_mass: f64) -> GriddedDensity {
        let n = self.values.len();
        let total = self.mass();
        let target_lo = total * tail_mass / 2.0;
        let target_hi = total * (1.0 - tail_mass / 2.0);
        let mut i0 = match self.cdf.binary_search_by(|c| c.partial_cmp(&target_lo).unwrap()) {
            Ok(i) | Err(i) => i.saturating_sub(1),
        };
        let mut i1 = match self.cdf.binary_search_by(|c| c.partial_cmp(&target_hi).unwrap()) {
            Ok(i) | Err(i) => i.min(n),
        };
        // keep at least a handful of cells
        if i1 < i0 + 8 {
            i0 = i0.min(n.saturating_sub(8));
            i1 = (i0 + 8).min(n);
        }
        let gamma = self.cdf[i1] - self.cdf[i0];
        let values: Vec<f64> = self.values[i0..i1].iter().map(|v| v / gamma).collect();
        GriddedDensity::from_normalized(self.boundary(i0), self.step, values)
    }

    /// Halves the resolution by averaging adjacent cells (mass preserving,
    /// log-concavity preserving).
    fn halve(&self) -> GriddedDensity {
        let mut v = self.values.clone();
        if v.len() % 2 == 1 {
            v.push(0.0);
        }
        let out: Vec<f64> = v.chunks_exact(2).map(|p| (p[0] + p[1]) / 2.0).collect();
        GriddedDensity::from_normalized(self.lo, self.step * 2.0, out)
    }

    /// Resamples onto a new uniform grid of the given step, aligned to the
    /// lattice `anchor + k*step`.
    ///
    /// Interpolation is linear in log-density (geometric in density), which
    /// keeps the sample sequence of a log-concave density log-concave; plain
    /// linear interpolation does not. The result is renormalized.
    pub fn resample_to_step(&self, step: f64, anchor: f64) -> GriddedDensity {
        let src_n = self.values.len();
        let src_mid0 = self.lo + 0.5 * self.step;
        let lo = anchor + ((self.lo - anchor) / step).floor() * step;
        let n = (((self.hi() - lo) / step).ceil() as usize).max(2);
        // a source narrower than the target cells has no resolvable shape;
        // bin its mass instead of sampling it
        if self.hi() - self.lo <= 2.0 * step {
            return self.rebin(lo, step, n);
        }
        let log_v: Vec<f64> = self.values.iter().map(|v| v.max(LOG_FLOOR).ln()).collect();
        let mut out = vec![0.0; n];
        for (k, o) in out.iter_mut().enumerate() {
            let x = lo + (k as f64 + 0.5) * step;
            let pos = (x - src_mid0) / self.step;
            // log-linear within the sampled range, log-linear extrapolation up
            // to one cell beyond it, zero elsewhere
            let lv = if pos >= 0.0 && pos <= (src_n - 1) as f64 {
                let i = (pos as usize).min(src_n - 2);
                let frac = pos - i as f64;
                (1.0 - frac) * log_v[i] + frac * log_v[i + 1]
            } else if pos >= -1.0 && pos < 0.0 && src_n >= 2 {
                log_v[0] + pos * (log_v[1] - log_v[0])
            } else if pos > (src_n - 1) as f64 && pos <= src_n as f64 && src_n >= 2 {
                log_v[src_n - 1] + (pos - (src_n - 1) as f64) * (log_v[src_n - 1] - log_v[src_n - 2])
            } else {
                f64::NEG_INFINITY
            };
            *o = if lv <= LOG_FLOOR.ln() { 0.0 } else { lv.exp() };
        }
        if out.iter().sum::<f64>() <= 0.0 {
            return self.rebin(lo, step, n);
        }
        GriddedDensity::from_values(lo, step, out)
            .expect("resampled density keeps positive mass")
    }

    /// Mass-preserving fallback: each source cell's mass lands in the new cell
    /// containing its midpoint.
    fn rebin(&self, lo: f64, step: f64, n: usize) -> GriddedDensity {
        let mut out = vec![0.0; n];
        for i in 0..self.values.len() {
            let k = (((self.mid(i) - lo) / step) as usize).min(n - 1);
            out[k] += self.values[i] * self.step / step;
        }
        GriddedDensity::from_values(lo, step, out)
            .expect("rebinned density keeps positive mass")
    }

    /// Discrete log-concavity check: second differences of `log(values)` must
    /// not exceed `tol` wherever the three-point stencil sits above the zero
    /// floor. Used as a test oracle for closure of the filtering recursion.
    pub fn check_log_concavity(&self, tol: f64) -> bool {
        let v = &self.values;
        for i in 1..v.len().saturating_sub(1) {
            if v[i - 1] > LOG_FLOOR && v[i] > LOG_FLOOR && v[i + 1] > LOG_FLOOR {
                let d2 = v[i - 1].ln() - 2.0 * v[i].ln() + v[i + 1].ln();
                if d2 > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Continuous inverse CDF; `q` is a mass fraction in `[0, 1]`.
    pub fn quantile(&self, q: f64) -> f64 {
        let target = q.clamp(0.0, 1.0) * self.mass();
        let n = self.values.len();
        let i = match self
            .cdf
            .binary_search_by(|c| c.partial_cmp(&target).unwrap())
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
        .min(n - 1);
        if self.values[i] <= 0.0 {
            return self.boundary(i);
        }
        (self.boundary(i) + (target - self.cdf[i]) / self.values[i]).min(self.hi())
    }

    /// Inverse-CDF sampling from a uniform draw in `[0, 1)`.
    pub fn sample(&self, u: f64) -> f64 {
        self.quantile(u)
    }
}

fn check_tail_mass(tail_mass: f64) -> Result<()> {
    if !(tail_mass > 0.0 && tail_mass < 1e-3) {
        return Err(Error::invalid("tail_mass", "must lie in (0, 1e-3)"));
    }
    Ok(())
}

/// Upper-tail standard normal quantile: returns `z` with `Q(z) = p`.
/// Bisection on `erfc` is plenty; this only runs at construction time.
fn gaussian_upper_quantile(p: f64) -> f64 {
    let q = |z: f64| 0.5 * libm::erfc(z / std::f64::consts::SQRT_2);
    let (mut lo, mut hi) = (0.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact cumulative moments of one density, cached for O(1) cell statistics.
/// Rebuilt once per fixed-point run; `GriddedDensity` itself only stores the CDF.
pub(crate) struct Moments<'a> {
    d: &'a GriddedDensity,
    m1: Vec<f64>,
    m2: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CellStats {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
}

impl CellStats {
    pub fn centroid(&self) -> f64 {
        self.m1 / self.m0
    }

    /// `∫ (x - c)^2 f` over the cell for any point `c`.
    pub fn m2_about(&self, c: f64) -> f64 {
        self.m2 - 2.0 * c * self.m1 + c * c * self.m0
    }

    /// Second moment about the cell centroid.
    pub fn m2_centroid(&self) -> f64 {
        (self.m2 - self.m1 * self.m1 / self.m0).max(0.0)
    }
}

impl std::ops::Add for CellStats {
    type Output = CellStats;
    fn add(self, o: CellStats) -> CellStats {
        CellStats { m0: self.m0 + o.m0, m1: self.m1 + o.m1, m2: self.m2 + o.m2 }
    }
}

impl<'a> Moments<'a> {
    pub fn new(d: &'a GriddedDensity) -> Self {
        let n = d.len();
        let mut m1 = Vec::with_capacity(n + 1);
        let mut m2 = Vec::with_capacity(n + 1);
        let (mut a1, mut a2) = (0.0, 0.0);
        m1.push(0.0);
        m2.push(0.0);
        let s2 = d.step * d.step;
        for i in 0..n {
            let m = d.mid(i);
            a1 += d.values[i] * m * d.step;
            a2 += d.values[i] * (m * m + s2 / 12.0) * d.step;
            m1.push(a1);
            m2.push(a2);
        }
        Moments { d, m1, m2 }
    }

    pub fn density(&self) -> &GriddedDensity {
        self.d
    }

    /// Cumulative stats on `[lo, x]`, exact for the histogram.
    pub fn cums(&self, x: f64) -> CellStats {
        let n = self.d.values.len();
        let x = x.clamp(self.d.lo, self.d.hi());
        let mut i = ((x - self.d.lo) / self.d.step) as usize;
        if i >= n {
            i = n - 1;
        }
        let xl = self.d.boundary(i);
        let dd = (x - xl).clamp(0.0, self.d.step);
        let f = self.d.values[i];
        let xr = xl + dd;
        CellStats {
            m0: self.d.cdf[i] + f * dd,
            m1: self.m1[i] + f * (xl * dd + dd * dd / 2.0),
            m2: self.m2[i] + f * (xr * xr * xr - xl * xl * xl) / 3.0,
        }
    }

    pub fn cell(&self, a: f64, b: f64) -> CellStats {
        let ca = self.cums(a);
        let cb = self.cums(b);
        CellStats { m0: cb.m0 - ca.m0, m1: cb.m1 - ca.m1, m2: cb.m2 - ca.m2 }
    }
}

/// Parsed source-density description, e.g. `gaussian:0,1` or `uniform:0,1`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PdfSpec {
    Gaussian { mean: f64, variance: f64 },
    Uniform { a: f64, b: f64 },
    Laplace { mu: f64, b: f64 },
    Exponential { rate: f64 },
}

impl PdfSpec {
    pub fn to_density(&self, tail_mass: f64, points: usize) -> Result<GriddedDensity> {
        match *self {
            PdfSpec::Gaussian { mean, variance } => {
                GriddedDensity::from_gaussian_with_points(mean, variance, tail_mass, points)
            }
            PdfSpec::Uniform { a, b } => GriddedDensity::from_uniform_with_points(a, b, points),
            PdfSpec::Laplace { mu, b } => {
                GriddedDensity::from_laplace_with_points(mu, b, tail_mass, points)
            }
            PdfSpec::Exponential { rate } => {
                GriddedDensity::from_exponential_with_points(rate, tail_mass, points)
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            PdfSpec::Gaussian { variance, .. } => variance,
            PdfSpec::Uniform { a, b } => (b - a) * (b - a) / 12.0,
            PdfSpec::Laplace { b, .. } => 2.0 * b * b,
            PdfSpec::Exponential { rate } => 1.0 / (rate * rate),
        }
    }
}

impl std::str::FromStr for PdfSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid("pdf-spec", format!("`{s}` (expected name:params)")))?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::invalid("pdf-spec", format!("`{s}`: {e}")))?;
        match (name.trim().to_ascii_lowercase().as_str(), nums.as_slice()) {
            ("gaussian" | "normal", [mean, variance]) => Ok(PdfSpec::Gaussian {
                mean: *mean,
                variance: *variance,
            }),
            ("uniform", [a, b]) => Ok(PdfSpec::Uniform { a: *a, b: *b }),
            ("laplace", [mu, b]) => Ok(PdfSpec::Laplace { mu: *mu, b: *b }),
            ("exponential", [rate]) => Ok(PdfSpec::Exponential { rate: *rate }),
            _ => Err(Error::invalid(
                "pdf-spec",
                format!("`{s}` (supported: gaussian:mean,var uniform:a,b laplace:mu,b exponential:rate)"),
            )),
        }
    }
}

impl TryFrom<String> for PdfSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PdfSpec> for String {
    fn from(p: PdfSpec) -> String {
        match p {
            PdfSpec::Gaussian { mean, variance } => format!("gaussian:{mean},{variance}"),
            PdfSpec::Uniform { a, b } => format!("uniform:{a},{b}"),
            PdfSpec::Laplace { mu, b } => format!("laplace:{mu},{b}"),
            PdfSpec::Exponential { rate } => format!("exponential:{rate}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b} got {a} (tol {tol})");
    }

    #[test]
    fn gaussian_grid_moments() {
        let d = GriddedDensity::from_gaussian(0.0, 1.0, 1e-12).unwrap();
        close(d.mass(), 1.0, 1e-9);
        close(d.mean(), 0.0, 1e-9);
        close(d.second_moment_about(0.0, (d.lo(), d.hi())), 1.0, 1e-6);
    }

    #[test]
    fn gaussian_median_mass() {
        let d = GriddedDensity::from_gaussian(2.0, 4.0, 1e-12).unwrap();
        close(d.mass_on((2.0, d.hi())), 0.5, 1e-9);
    }

    #[test]
    fn gaussian_rejects_bad_variance() {
        assert!(GriddedDensity::from_gaussian(0.0, 0.0, 1e-12).is_err());
        assert!(GriddedDensity::from_gaussian(0.0, -1.0, 1e-12).is_err());
    }

    #[test]
    fn erf_reference_mass() {
        // mass on [-1, 1] for N(0,1) = erf(1/sqrt(2))
        let d = GriddedDensity::from_gaussian(0.0, 1.0, 1e-12).unwrap();
        close(d.mass_on((-1.0, 1.0)), 0.682689492137086, 1e-4);
    }

    #[test]
    fn affine_scales_and_shifts() {
        let d = GriddedDensity::from_gaussian(0.0, 1.0, 1e-12).unwrap();
        let d2 = d.affine(2.0, 0.0).unwrap();
        close(d2.variance(), 4.0, 1e-6);
        close(d2.mass(), 1.0, 1e-9);
        let d3 = d.affine(1.0, 3.0).unwrap();
        close(d3.mean(), 3.0, 1e-9);
    }

    #[test]
    fn affine_reflection_matches_symmetry() {
        let d = GriddedDensity::from_gaussian(0.0, 1.0, 1e-12).unwrap();
        let r = d.affine(-1.0, 0.0).unwrap();
        for (a, b) in d.values().iter().zip(r.values().iter().rev()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn affine_zero_scale_is_degenerate() {
        let d = GriddedDensity::from_uniform(0.0, 1.0).unwrap();
        assert!(matches!(d.affine(0.0, 1.0), Err(Error::DegenerateTransform)));
    }

    #[test]
    fn affine_round_trip_preserves_moments() {
        let d = GriddedDensity::from_gaussian(0.3, 2.0, 1e-12).unwrap();
        let back = d.affine(2.5, 1.0).unwrap().affine(1.0 / 2.5, -1.0 / 2.5).unwrap();
        close(back.mean(), d.mean(), 1e-6);
        close(back.variance(), d.variance(), 1e-6);
    }

    #[test]
    fn truncate_half_normal() {
        let d = GriddedDensity::from_gaussian(0.0, 1.0, 1e-12).unwrap();
        let (t, gamma) = d.truncate_normalize((0.0, d.hi())).unwrap();
        close(gamma, 0.5, 1e-9);
        close(t.mass(), 1.0, 1e-9);
        // half-normal mean = sqrt(2/pi)
        close(t.mean(), 0.797884560802865, 1e-4);
    }

    #[test]
    fn truncate_uniform_restriction() {
        let d = GriddedDensity::from_uniform(0.0, 1.0).unwrap();
        let (t, gamma) = d.truncate_normalize((0.25, 0.75)).unwrap();
        close(gamma, 0.5, 1e-12);
        close(t.lo(), 0.25, 1e-12);
        close(t.hi(), 0.75, 1e-12);
        close(t.values()[0], 2.0, 1e-9);
    }

    #[test]
    fn truncate_full_support_is_identity() {
        let d = GriddedDensity::from_gaussian(1.0, 2.0, 1e-12).unwrap();
        let (t, gamma) = d.truncate_normalize((d.lo(), d.hi())).unwrap();
        close(gamma, 1.0, 1e-9);
        close(t.mean(), d.mean(), 1e-9);
    }

    #[test]
    fn truncate_empty_interval_errors() {
        let d = GriddedDensity::from_uniform(0.0, 1.0).unwrap();
        assert!(matches!(
            d.truncate_normalize((0.5, 0.5)),
            Err(Error::EmptyCell { .. })
        ));
    }

    #[test]
    fn convolve_gaussians_adds_moments() {
        let d1 = GriddedDensity::from_gaussian(0.0, 1.0, 1e-12).unwrap();
        let c = d1.convolve(&d1);
        close(c.mass(), 1.0, 1e-8);
        close(c.variance(), 2.0, 1e-5);

        let a = GriddedDensity::from_gaussian(1.0, 1.0, 1e-12).unwrap();
        let b = GriddedDensity::from_gaussian(2.0, 4.0, 1e-12).unwrap();
        let c = a.convolve(&b);
        close(c.mean(), 3.0, 1e-6);
        close(c.variance(), 5.0, 1e-4);
    }

    #[test]
    fn convolve_uniforms_gives_triangle() {
        let u = GriddedDensity::from_uniform_with_points(0.0, 1.0, 512).unwrap();
        let t = u.convolve(&u);
        close(t.mass(), 1.0, 1e-8);
        // peak at 1, value 1
        let peak = t.mean_on((0.99, 1.01)).unwrap();
        close(peak, 1.0, 1e-2);
        close(t.variance(), 1.0 / 6.0, 1e-4);
        assert!(t.check_log_concavity(1e-6));
    }

    #[test]
    fn convolve_is_symmetric_in_moments() {
        let a = GriddedDensity::from_laplace(0.5, 1.0, 1e-12).unwrap();
        let b = GriddedDensity::from_gaussian(-0.2, 0.5, 1e-12).unwrap();
        let ab = a.convolve(&b);
        let ba = b.convolve(&a);
        close(ab.mean(), ba.mean(), 1e-8);
        close(ab.variance(), ba.variance(), 1e-8);
    }

    #[test]
    fn second_moment_uniform_reference() {
        let d = GriddedDensity::from_uniform(0.0, 1.0).unwrap();
        // ∫_0^0.5 (x - 0.25)^2 dx = 1/96
        close(d.second_moment_about(0.25, (0.0, 0.5)), 1.0 / 96.0, 1e-9);
        close(d.mean_on((0.0, 0.5)).unwrap(), 0.25, 1e-9);
    }

    #[test]
    fn mean_on_empty_cell_errors() {
        let d = GriddedDensity::from_uniform(0.0, 1.0).unwrap();
        assert!(d.mean_on((2.0, 3.0)).is_err());
    }

    #[test]
    fn log_concavity_oracle() {
        let g = GriddedDensity::from_gaussian(0.0, 1.0, 1e-12).unwrap();
        assert!(g.check_log_concavity(1e-6));
        let (t, _) = g.truncate_normalize((0.0, 2.0)).unwrap();
        assert!(t.check_log_concavity(1e-6));

        // bimodal mixture is not log-concave
        let a = GriddedDensity::from_gaussian_with_points(-5.0, 0.1, 1e-12, 4096).unwrap();
        let lo = -8.0;
        let step = 16.0 / 4096.0;
        let vals: Vec<f64> = (0..4096)
            .map(|i| {
                let x = lo + (i as f64 + 0.5) * step;
                (-(x - 5.0) * (x - 5.0) / 0.2).exp() + (-(x + 5.0) * (x + 5.0) / 0.2).exp()
            })
            .collect();
        let m = GriddedDensity::from_values(lo, step, vals).unwrap();
        assert!(a.check_log_concavity(1e-6));
        assert!(!m.check_log_concavity(1e-6));
    }

    #[test]
    fn resample_preserves_log_concavity_and_moments() {
        let d = GriddedDensity::from_gaussian(0.7, 1.7, 1e-12).unwrap();
        let r = d.resample_to_step(d.step() * 1.37, 0.0);
        assert!(r.check_log_concavity(1e-9));
        close(r.mean(), d.mean(), 1e-3);
        close(r.variance(), d.variance(), 1e-3);
        close(r.mass(), 1.0, 1e-12);
    }

    #[test]
    fn quantile_and_sample_invert_cdf() {
        let d = GriddedDensity::from_uniform(2.0, 4.0).unwrap();
        close(d.quantile(0.25), 2.5, 1e-9);
        close(d.sample(0.5), 3.0, 1e-9);
        let g = GriddedDensity::from_gaussian(0.0, 1.0, 1e-12).unwrap();
        close(g.quantile(0.5), 0.0, 1e-9);
        close(g.mass_on((g.lo(), g.quantile(0.31))), 0.31, 1e-9);
    }

    #[test]
    fn pdf_spec_parsing() {
        let p: PdfSpec = "gaussian:0,1".parse().unwrap();
        assert_eq!(p, PdfSpec::Gaussian { mean: 0.0, variance: 1.0 });
        let p: PdfSpec = "uniform: 0, 1".parse().unwrap();
        assert_eq!(p, PdfSpec::Uniform { a: 0.0, b: 1.0 });
        assert!("gauss".parse::<PdfSpec>().is_err());
        assert!("gaussian:1".parse::<PdfSpec>().is_err());
        let e: PdfSpec = "exponential:2".parse().unwrap();
        close(e.variance(), 0.25, 1e-12);
    }

    #[test]
    fn laplace_and_exponential_variance() {
        let l = GriddedDensity::from_laplace(0.0, 1.0, 1e-12).unwrap();
        close(l.variance(), 2.0, 1e-4);
        assert!(l.check_log_concavity(1e-6));
        let e = GriddedDensity::from_exponential(2.0, 1e-12).unwrap();
        close(e.variance(), 0.25, 1e-4);
        close(e.mean(), 0.5, 1e-5);
        assert!(e.check_log_concavity(1e-6));
    }
}
