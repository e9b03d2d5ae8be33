//! Three-level quantization with a minimum-probability silent cell.
//!
//! Event-triggered control sends a single bit or stays silent; silence is one
//! more symbol, so the quantizer has three cells and the silent one must carry
//! probability at least `delta`. When the unconstrained three-level Lloyd-Max
//! quantizer already satisfies the constraint it is used as is; otherwise the
//! constraint is pinned to each cell in turn and the best candidate wins.

use crate::density::{GriddedDensity, Moments};
use crate::error::{ConvergenceReport, Error, Result};
use crate::quantizer::{self, ScalarQuantizer};

/// Mass slack accepted when checking the silent-cell constraint.
pub const FEASIBILITY_SLACK: f64 = 1e-9;
/// Distortion ties closer than this prefer the middle, then the left cell.
const TIE_BREAK: f64 = 1e-12;

/// A three-cell quantizer with a designated silent cell of probability >= delta.
#[derive(Debug, Clone)]
pub struct SilentQuantizer {
    pub quantizer: ScalarQuantizer,
    pub silent_index: usize,
    pub delta: f64,
}

impl SilentQuantizer {
    /// Probability mass of the silent cell under `d`.
    pub fn silent_mass(&self, d: &GriddedDensity) -> f64 {
        d.mass_on(self.quantizer.cell(self.silent_index))
    }

    /// Nominal average transmission rate `1 - delta`.
    pub fn nominal_rate(&self) -> f64 {
        1.0 - self.delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Minimum cell-probability constrained quantization.
///
/// Runs unconstrained three-level Lloyd-Max first; if some cell already holds
/// mass `delta`, that design is kept and the heaviest cell is silent. Otherwise
/// the three constrained candidates (silent cell pinned to 0, 1, 2) are built
/// and the minimum-distortion one is returned.
pub fn min_cell_prob_quantizer(
    d: &GriddedDensity,
    delta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SilentQuantizer> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", "must lie in (0, 1)"));
    }
    let free = quantizer::lloyd_max_cells(d, 3, tol, max_iter)?;
    let masses: Vec<f64> = (0..3).map(|l| d.mass_on(free.quantizer.cell(l))).collect();
    let (argmax, &max_mass) = masses
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    if max_mass >= delta - FEASIBILITY_SLACK {
        return Ok(SilentQuantizer {
            quantizer: free.quantizer,
            silent_index: argmax,
            delta,
        });
    }

    let candidates: [Result<(ScalarQuantizer, f64)>; 3] = [
        constrained_edge_candidate(d, delta, Side::Left, tol),
        constrained_middle_candidate(d, delta, tol, max_iter),
        constrained_edge_candidate(d, delta, Side::Right, tol),
    ];
    let mut best: Option<(usize, ScalarQuantizer, f64)> = None;
    // evaluation order encodes the tie-break preference: middle, left, right
    for idx in [1usize, 0, 2] {
        match &candidates[idx] {
            Ok((q, dist)) => {
                let better = match &best {
                    None => true,
                    Some((_, _, b)) => *dist < b - TIE_BREAK,
                };
                if better {
                    best = Some((idx, q.clone(), *dist));
                }
            }
            Err(_) => {}
        }
    }
    match best {
        Some((silent_index, quantizer, _)) => Ok(SilentQuantizer { quantizer, silent_index, delta }),
        None => Err(Error::InfeasibleConstraint { delta, max_cell_mass: max_mass }),
    }
}

/// Constrained candidate with the silent cell pinned to the support edge:
/// the edge cell gets mass exactly `delta`, its centroid is fixed, and
/// two-level Lloyd-Max runs on the remainder.
pub fn constrained_edge_candidate(
    d: &GriddedDensity,
    delta: f64,
    side: Side,
    tol: f64,
) -> Result<(ScalarQuantizer, f64)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", "must lie in (0, 1)"));
    }
    let m = Moments::new(d);
    let (lo, hi) = (d.lo(), d.hi());
    let (pin, rest) = match side {
        Side::Left => {
            let p1 = d.quantile(delta);
            ((lo, p1), (p1, hi))
        }
        Side::Right => {
            let p2 = d.quantile(1.0 - delta);
            ((p2, hi), (p2, lo.max(hi)))
        }
    };
    let rest_iv = match side {
        Side::Left => (pin.1, hi),
        Side::Right => (lo, pin.0),
    };
    let _ = rest;
    if rest_iv.1 - rest_iv.0 < 2.0 * d.step() || d.mass_on(rest_iv) <= 0.0 {
        return Err(Error::InfeasibleConstraint { delta, max_cell_mass: 1.0 - delta });
    }
    let pin_stats = m.cell(pin.0, pin.1);
    if pin_stats.m0 <= 0.0 {
        return Err(Error::EmptyCell { lo: pin.0, hi: pin.1 });
    }
    let pin_c = pin_stats.centroid();
    let fit = quantizer::lloyd_max_on(&m, rest_iv, 2, tol, quantizer::DEFAULT_MAX_ITER)?;
    let (levels, points) = match side {
        Side::Left => (
            vec![lo, pin.1, fit.quantizer.levels()[1], hi],
            vec![pin_c, fit.quantizer.points()[0], fit.quantizer.points()[1]],
        ),
        Side::Right => (
            vec![lo, fit.quantizer.levels()[1], pin.0, hi],
            vec![fit.quantizer.points()[0], fit.quantizer.points()[1], pin_c],
        ),
    };
    let q = ScalarQuantizer::from_parts(levels, points)?;
    let dist = q.distortion(d);
    Ok((q, dist))
}

/// Constrained candidate with the silent cell in the middle, solved through
/// the KKT system when the plain nearest-neighbor step violates the mass
/// constraint.
pub fn constrained_middle_candidate(
    d: &GriddedDensity,
    delta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(ScalarQuantizer, f64)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", "must lie in (0, 1)"));
    }
    let m = Moments::new(d);
    let (lo, hi) = (d.lo(), d.hi());
    // feasible start: middle cell carries exactly delta
    let mut p1 = d.quantile((1.0 - delta) / 2.0);
    let mut p2 = d.quantile((1.0 + delta) / 2.0);
    if p2 - p1 >= hi - lo - 2.0 * d.step() {
        return Err(Error::InfeasibleConstraint { delta, max_cell_mass: 1.0 });
    }
    let mut last = f64::INFINITY;
    let mut points = [0.0f64; 3];
    for it in 0..max_iter {
        points = centroids3(&m, lo, p1, p2, hi);
        let dist = m.cell(lo, p1).m2_about(points[0])
            + m.cell(p1, p2).m2_about(points[1])
            + m.cell(p2, hi).m2_about(points[2]);
        let decrease = last - dist;
        if decrease >= 0.0 && decrease < tol {
            let q = build3(lo, p1, p2, hi, points)?;
            return Ok((q, dist));
        }
        last = dist;
        // unconstrained nearest neighbor first
        let u1 = 0.5 * (points[0] + points[1]);
        let u2 = 0.5 * (points[1] + points[2]);
        if d.mass_on((u1, u2)) >= delta - FEASIBILITY_SLACK {
            p1 = u1;
            p2 = u2;
            continue;
        }
        // KKT system: mass pinned to delta plus the affine stationarity relation
        match solve_kkt(d, delta, points) {
            Some((k1, k2)) => {
                p1 = k1;
                p2 = k2;
            }
            None => {
                // pin one side to the support edge, keep the mass constraint,
                // take whichever side hurts less
                let a = (lo, d.quantile(delta));
                let b = (d.quantile(1.0 - delta), hi);
                let da = candidate_distortion(&m, lo, a.0, a.1, hi);
                let db = candidate_distortion(&m, lo, b.0, b.1, hi);
                if da <= db {
                    (p1, p2) = a;
                } else {
                    (p1, p2) = b;
                }
            }
        }
        let _ = it;
    }
    Err(Error::ConvergenceFailure {
        report: Box::new(ConvergenceReport {
            context: "constrained_middle_candidate",
            iterations: max_iter,
            last_decrease: f64::NAN,
            distortion: last,
            quantizer: build3(lo, p1, p2, hi, points).ok(),
        }),
    })
}

/// Solves `mass(p1, p2) = delta` together with the stationarity line
/// `p2 = ((c0-c1)/(c2-c1)) p1 + (c2^2-c0^2)/(2(c2-c1))` by bisection in `p1`.
/// The probability equation makes `p2` increasing in `p1` while the line is
/// decreasing, so the residual is monotone. Returns None when no root exists.
fn solve_kkt(d: &GriddedDensity, delta: f64, c: [f64; 3]) -> Option<(f64, f64)> {
    let lo = d.lo();
    let slope = (c[0] - c[1]) / (c[2] - c[1]);
    let intercept = (c[2] * c[2] - c[0] * c[0]) / (2.0 * (c[2] - c[1]));
    let p2_of = |p1: f64| {
        let q = d.mass_on((lo, p1)) + delta;
        d.quantile(q.min(1.0))
    };
    let resid = |p1: f64| p2_of(p1) - (slope * p1 + intercept);
    let mut a = lo;
    let mut b = d.quantile(1.0 - delta);
    if resid(a) > 0.0 || resid(b) < 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if resid(mid) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let p1 = 0.5 * (a + b);
    Some((p1, p2_of(p1)))
}

fn centroids3(m: &Moments, p0: f64, p1: f64, p2: f64, p3: f64) -> [f64; 3] {
    let c = |a: f64, b: f64| {
        let cs = m.cell(a, b);
        if cs.m0 > 0.0 {
            cs.centroid()
        } else {
            // zero-width edge cell produced by the fallback; park the point at
            // the cell location, it is never selected by the encoder
            0.5 * (a + b)
        }
    };
    [c(p0, p1), c(p1, p2), c(p2, p3)]
}

fn candidate_distortion(m: &Moments, p0: f64, p1: f64, p2: f64, p3: f64) -> f64 {
    let c = centroids3(m, p0, p1, p2, p3);
    m.cell(p0, p1).m2_about(c[0]) + m.cell(p1, p2).m2_about(c[1]) + m.cell(p2, p3).m2_about(c[2])
}

fn build3(p0: f64, p1: f64, p2: f64, p3: f64, c: [f64; 3]) -> Result<ScalarQuantizer> {
    ScalarQuantizer::from_parts(vec![p0, p1, p2, p3], c.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::{DEFAULT_MAX_ITER, DEFAULT_TOL};

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b} got {a} (tol {tol})");
    }

    #[test]
    fn gaussian_loose_delta_keeps_unconstrained() {
        let d = GriddedDensity::from_gaussian(0.0, 1.0, 1e-12).unwrap();
        let s = min_cell_prob_quantizer(&d, 0.4, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(s.silent_index, 1);
        // unconstrained middle-cell mass of the 3-level Lloyd-Max design
        close(s.silent_mass(&d), 0.459464347, 1e-3);
        close(s.quantizer.distortion(&d), 0.190174039, 1e-4);
    }

    #[test]
    fn any_delta_below_third_is_unconstrained() {
        let d = GriddedDensity::from_exponential(1.0, 1e-12).unwrap();
        let free = quantizer::lloyd_max_cells(&d, 3, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let s = min_cell_prob_quantizer(&d, 0.30, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        close(s.quantizer.distortion(&d), free.distortion, 1e-12);
        assert!(s.silent_mass(&d) >= 1.0 / 3.0 - 1e-9);
    }

    #[test]
    fn uniform_constrained_edge_left() {
        let d = GriddedDensity::from_uniform(0.0, 1.0).unwrap();
        let (q, dist) = constrained_edge_candidate(&d, 0.5, Side::Left, DEFAULT_TOL).unwrap();
        let expect_levels = [0.0, 0.5, 0.75, 1.0];
        for (a, b) in q.levels().iter().zip(expect_levels) {
            close(*a, b, 1e-9);
        }
        let expect_points = [0.25, 0.625, 0.875];
        for (a, b) in q.points().iter().zip(expect_points) {
            close(*a, b, 1e-9);
        }
        close(dist, (0.125 + 2.0 * 0.015625) / 12.0, 1e-9);
    }

    #[test]
    fn gaussian_edge_candidate_splits_at_median() {
        let d = GriddedDensity::from_gaussian(0.0, 1.0, 1e-12).unwrap();
        let (q, _) = constrained_edge_candidate(&d, 0.5, Side::Left, DEFAULT_TOL).unwrap();
        close(q.levels()[1], 0.0, d.step());
    }

    #[test]
    fn uniform_edge_candidate_right_quantile() {
        let d = GriddedDensity::from_uniform(0.0, 1.0).unwrap();
        let (q, _) = constrained_edge_candidate(&d, 0.25, Side::Right, DEFAULT_TOL).unwrap();
        close(q.levels()[2], 0.75, 1e-9);
    }

    #[test]
    fn uniform_constrained_middle() {
        let d = GriddedDensity::from_uniform(0.0, 1.0).unwrap();
        let (q, dist) = constrained_middle_candidate(&d, 0.5, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        close(q.levels()[1], 0.25, 1e-6);
        close(q.levels()[2], 0.75, 1e-6);
        close(dist, 0.15625 / 12.0, 1e-8);
    }

    #[test]
    fn middle_candidate_matches_unconstrained_at_boundary() {
        // delta equal to the free middle-cell mass: constraint just barely active
        let d = GriddedDensity::from_gaussian(0.0, 1.0, 1e-12).unwrap();
        let free = quantizer::lloyd_max_cells(&d, 3, 1e-13, DEFAULT_MAX_ITER).unwrap();
        let free_mid = d.mass_on(free.quantizer.cell(1));
        let (_, dist) = constrained_middle_candidate(&d, free_mid, 1e-13, DEFAULT_MAX_ITER).unwrap();
        close(dist, free.distortion, 1e-6);
    }

    #[test]
    fn symmetric_kkt_solution_is_symmetric() {
        let d = GriddedDensity::from_gaussian(0.0, 1.0, 1e-12).unwrap();
        let (q, _) = constrained_middle_candidate(&d, 0.6, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        close(q.levels()[1], -q.levels()[2], 1e-6);
        let mid_mass = d.mass_on((q.levels()[1], q.levels()[2]));
        assert!(mid_mass >= 0.6 - FEASIBILITY_SLACK);
    }

    #[test]
    fn uniform_tied_candidates_prefer_middle() {
        let d = GriddedDensity::from_uniform(0.0, 1.0).unwrap();
        let s = min_cell_prob_quantizer(&d, 0.5, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(s.silent_index, 1);
        close(s.quantizer.distortion(&d), 0.0130208333, 1e-7);
        assert!(s.silent_mass(&d) >= 0.5 - FEASIBILITY_SLACK);
    }

    #[test]
    fn feasibility_and_dominance_across_deltas() {
        let d = GriddedDensity::from_laplace(0.0, 1.0, 1e-12).unwrap();
        let free = quantizer::lloyd_max_cells(&d, 3, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let mut last_dist = 0.0;
        for k in 1..=9 {
            let delta = k as f64 / 10.0;
            let s = min_cell_prob_quantizer(&d, delta, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            let dist = s.quantizer.distortion(&d);
            assert!(s.silent_mass(&d) >= delta - FEASIBILITY_SLACK, "delta={delta}");
            assert!(dist >= free.distortion - 1e-12, "constraint cannot help");
            assert!(dist >= last_dist - 1e-9, "distortion must grow with delta");
            last_dist = dist;
        }
    }

    #[test]
    fn kkt_residual_small_when_active() {
        let d = GriddedDensity::from_gaussian(0.0, 1.0, 1e-12).unwrap();
        let delta = 0.7;
        let (q, _) = constrained_middle_candidate(&d, delta, 1e-13, DEFAULT_MAX_ITER).unwrap();
        let (p1, p2) = (q.levels()[1], q.levels()[2]);
        let c = q.points();
        let mass_resid = (d.mass_on((p1, p2)) - delta).abs();
        let line = (c[0] - c[1]) / (c[2] - c[1]) * p1 + (c[2] * c[2] - c[0] * c[0]) / (2.0 * (c[2] - c[1]));
        assert!(mass_resid < 1e-6, "mass residual {mass_resid}");
        assert!((p2 - line).abs() < 1e-6, "stationarity residual {}", p2 - line);
    }

    #[test]
    fn extreme_delta_is_infeasible() {
        let d = GriddedDensity::from_uniform_with_points(0.0, 1.0, 64).unwrap();
        let r = min_cell_prob_quantizer(&d, 0.9999, DEFAULT_TOL, DEFAULT_MAX_ITER);
        match r {
            Err(Error::InfeasibleConstraint { .. }) => {}
            Err(other) => panic!("unexpected error {other:?}"),
            Ok(s) => {
                // if a candidate exists it must still satisfy the constraint
                assert!(s.silent_mass(&d) >= 0.9999 - FEASIBILITY_SLACK);
            }
        }
    }

    #[test]
    fn rejects_bad_delta() {
        let d = GriddedDensity::from_uniform(0.0, 1.0).unwrap();
        assert!(min_cell_prob_quantizer(&d, 0.0, DEFAULT_TOL, DEFAULT_MAX_ITER).is_err());
        assert!(min_cell_prob_quantizer(&d, 1.0, DEFAULT_TOL, DEFAULT_MAX_ITER).is_err());
    }
}
