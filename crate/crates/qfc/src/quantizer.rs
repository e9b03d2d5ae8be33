//! Regular scalar quantizers and the Lloyd-Max fixed-point iteration.
//!
//! A quantizer is stored as its partition-level set `levels` (cell boundaries,
//! the outermost pinned to the source support) and its reproduction-point set
//! `points`. Boundaries are kept as continuous reals: the alternation between
//! the centroid and nearest-neighbor conditions stalls far from the fixed
//! point if intermediate boundaries are rounded to the density grid.

use crate::density::{GriddedDensity, Moments};
use crate::error::{ConvergenceReport, Error, Result};

/// Default absolute distortion-decrease threshold for stopping.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Partition-level set `p` and reproduction-point set `c` of a regular scalar
/// quantizer with `len(p) = len(c) + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarQuantizer {
    levels: Vec<f64>,
    points: Vec<f64>,
}

impl ScalarQuantizer {
    /// Validates regularity: strictly increasing levels and points, each cell
    /// containing its reproduction point.
    pub fn new(levels: Vec<f64>, points: Vec<f64>) -> Result<Self> {
        if levels.len() != points.len() + 1 {
            return Err(Error::InvalidQuantizer(format!(
                "{} levels for {} points",
                levels.len(),
                points.len()
            )));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidQuantizer("levels must be strictly increasing".into()));
        }
        Self::from_parts(levels, points)
    }

    /// Same as [`ScalarQuantizer::new`] but tolerates zero-width cells, which
    /// the constrained silent-cell search can produce at its fallback edge.
    pub(crate) fn from_parts(levels: Vec<f64>, points: Vec<f64>) -> Result<Self> {
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidQuantizer("points must be strictly increasing".into()));
        }
        for (l, c) in points.iter().enumerate() {
            if *c < levels[l] || *c > levels[l + 1] {
                return Err(Error::InvalidQuantizer(format!(
                    "point {c} escapes its cell [{}, {}]",
                    levels[l],
                    levels[l + 1]
                )));
            }
        }
        Ok(ScalarQuantizer { levels, points })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn num_cells(&self) -> usize {
        self.points.len()
    }

    /// Rate in bits when the cell count is a power of two.
    pub fn rate(&self) -> Option<u32> {
        let n = self.points.len();
        n.is_power_of_two().then(|| n.trailing_zeros())
    }

    pub fn cell(&self, index: usize) -> (f64, f64) {
        (self.levels[index], self.levels[index + 1])
    }

    /// Maps `x` to its cell index. Cells are half-open `[p[l], p[l+1])` with
    /// the last cell closed on the right; inputs outside the support clamp to
    /// the outermost cells.
    pub fn encode(&self, x: f64) -> usize {
        let n = self.points.len();
        // first level strictly greater than x
        let mut idx = self.levels.partition_point(|p| *p <= x);
        if idx == 0 {
            return 0;
        }
        idx -= 1;
        idx.min(n - 1)
    }

    /// Reproduction point for an index.
    pub fn decode(&self, index: usize) -> Result<f64> {
        self.points
            .get(index)
            .copied()
            .ok_or(Error::IndexOutOfRange { index, len: self.points.len() })
    }

    /// Mean squared quantization error `E[(W - Q(W))^2]` under `d`.
    pub fn distortion(&self, d: &GriddedDensity) -> f64 {
        self.points
            .iter()
            .enumerate()
            .map(|(l, c)| d.second_moment_about(*c, self.cell(l)))
            .sum()
    }
}

/// Optimal reproduction points for fixed levels: per-cell conditional means.
pub fn centroid_step(d: &GriddedDensity, levels: &[f64]) -> Result<Vec<f64>> {
    levels
        .windows(2)
        .map(|w| d.mean_on((w[0], w[1])))
        .collect()
}

/// Optimal levels for fixed points: midpoints of adjacent reproduction
/// points, with the outer levels pinned to the support edges.
pub fn nn_step(points: &[f64], support: (f64, f64)) -> Result<Vec<f64>> {
    if points.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidQuantizer("points must be strictly increasing".into()));
    }
    let mut levels = Vec::with_capacity(points.len() + 1);
    levels.push(support.0);
    levels.extend(points.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    levels.push(support.1);
    Ok(levels)
}

/// Outcome of a Lloyd-Max run, including the per-iteration distortion trace.
#[derive(Debug, Clone)]
pub struct LloydMaxFit {
    pub quantizer: ScalarQuantizer,
    pub distortion: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
    /// Number of empty-cell repairs performed.
    pub repairs: usize,
}

/// Lloyd-Max design at a dyadic rate.
pub fn lloyd_max(d: &GriddedDensity, rate: u32, tol: f64, max_iter: usize) -> Result<ScalarQuantizer> {
    Ok(lloyd_max_cells(d, 1usize << rate, tol, max_iter)?.quantizer)
}

/// Lloyd-Max design with an arbitrary cell count.
pub fn lloyd_max_cells(
    d: &GriddedDensity,
    cells: usize,
    tol: f64,
    max_iter: usize,
) -> Result<LloydMaxFit> {
    let m = Moments::new(d);
    lloyd_max_on(&m, (d.lo(), d.hi()), cells, tol, max_iter)
}

/// Lloyd-Max on the conditional density over a sub-interval of `d`'s support.
/// Distortion is reported unconditionally (weighted by the interval's mass).
pub fn lloyd_max_on_interval(
    d: &GriddedDensity,
    interval: (f64, f64),
    cells: usize,
    tol: f64,
    max_iter: usize,
) -> Result<LloydMaxFit> {
    let m = Moments::new(d);
    lloyd_max_on(&m, interval, cells, tol, max_iter)
}

pub(crate) fn lloyd_max_on(
    m: &Moments,
    support: (f64, f64),
    cells: usize,
    tol: f64,
    max_iter: usize,
) -> Result<LloydMaxFit> {
    if cells == 0 {
        return Err(Error::invalid("cells", "need at least one cell"));
    }
    let (a, b) = support;
    let total = m.cell(a, b);
    if total.m0 <= 0.0 {
        return Err(Error::EmptyCell { lo: a, hi: b });
    }
    if cells == 1 {
        let c = total.centroid();
        return Ok(LloydMaxFit {
            quantizer: ScalarQuantizer::from_parts(vec![a, b], vec![c])?,
            distortion: total.m2_about(c),
            iterations: 0,
            trace: vec![total.m2_about(c)],
            repairs: 0,
        });
    }

    let mut levels = quantile_levels(m, support, cells);
    iterate(m, support, levels.as_mut(), tol, max_iter)
}

/// Equal-probability initialization: always-valid cells, fast convergence.
pub(crate) fn quantile_levels(m: &Moments, support: (f64, f64), cells: usize) -> Vec<f64> {
    let d = m.density();
    let (a, b) = support;
    let mass_a = m.cums(a).m0;
    let mass = m.cell(a, b).m0;
    let total = d.mass();
    let mut levels = Vec::with_capacity(cells + 1);
    levels.push(a);
    for k in 1..cells {
        let q = (mass_a + mass * k as f64 / cells as f64) / total;
        let x = d.quantile(q);
        let prev = *levels.last().unwrap();
        levels.push(x.max(prev + f64::EPSILON * (1.0 + prev.abs())));
    }
    levels.push(b);
    levels
}

pub(crate) fn iterate(
    m: &Moments,
    support: (f64, f64),
    levels: &mut Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<LloydMaxFit> {
    let cells = levels.len() - 1;
    let mut trace = Vec::new();
    let mut points = vec![0.0; cells];
    let mut last = f64::INFINITY;
    let mut repairs = 0usize;
    for it in 0..max_iter {
        // centroid condition, with empty-cell repair
        loop {
            let mut empty = None;
            for l in 0..cells {
                let cs = m.cell(levels[l], levels[l + 1]);
                if cs.m0 <= 0.0 {
                    empty = Some(l);
                    break;
                }
                points[l] = cs.centroid();
            }
            match empty {
                None => break,
                Some(l) => {
                    repair_empty_cell(m, levels, l)?;
                    repairs += 1;
                }
            }
        }
        let d: f64 = (0..cells)
            .map(|l| m.cell(levels[l], levels[l + 1]).m2_about(points[l]))
            .sum();
        trace.push(d);
        let decrease = last - d;
        if decrease >= 0.0 && decrease < tol {
            return Ok(LloydMaxFit {
                quantizer: ScalarQuantizer::from_parts(levels.clone(), points)?,
                distortion: d,
                iterations: it + 1,
                trace,
                repairs,
            });
        }
        last = d;
        // nearest-neighbor condition
        for l in 1..cells {
            levels[l] = 0.5 * (points[l - 1] + points[l]);
        }
        let _ = support;
    }
    Err(Error::ConvergenceFailure {
        report: Box::new(ConvergenceReport {
            context: "lloyd_max",
            iterations: max_iter,
            last_decrease: if trace.len() >= 2 {
                trace[trace.len() - 2] - trace[trace.len() - 1]
            } else {
                f64::INFINITY
            },
            distortion: last,
            quantizer: ScalarQuantizer::from_parts(levels.clone(), points).ok(),
        }),
    })
}

/// Deletes an empty cell and splits the surviving cell with the largest
/// distortion contribution at its centroid. Never fires for log-concave
/// inputs under quantile initialization; kept for non-log-concave inputs.
fn repair_empty_cell(m: &Moments, levels: &mut [f64], empty: usize) -> Result<()> {
    let cells = levels.len() - 1;
    let mut worst = None;
    let mut worst_d = -1.0;
    for l in 0..cells {
        let cs = m.cell(levels[l], levels[l + 1]);
        if cs.m0 > 0.0 {
            let d = cs.m2_centroid();
            if d > worst_d {
                worst_d = d;
                worst = Some((l, cs.centroid()));
            }
        }
    }
    let (_l, split) = worst.ok_or(Error::EmptyCell { lo: levels[0], hi: levels[cells] })?;
    // remove the boundary that closes the empty cell, insert the split point
    let removed = if empty == 0 { 1 } else { empty };
    let mut v = levels.to_vec();
    v.remove(removed);
    let pos = v.partition_point(|x| *x < split);
    v.insert(pos, split);
    levels.copy_from_slice(&v);
    Ok(())
}
