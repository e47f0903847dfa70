//! Curve-estimation accuracy and decision metrics.

use crate::model::ContourCurve;
use crate::stage2::{StopReason, Stage2Result};
use crate::{Error, Result};

/// Points used to discretize an estimated curve.
pub const CURVE_DISCRETIZATION: usize = 2001;

/// Points on the true curve at which accuracy is evaluated.
pub const EVALUATION_POINTS: usize = 101;

/// Evaluation grid: points of the true curve equally spaced in x.
pub fn evaluation_grid<C: ContourCurve + ?Sized>(true_curve: &C) -> Vec<(f64, f64)> {
    true_curve.points(EVALUATION_POINTS)
}

/// Signed minimum distance from `point` to the estimated curve.
///
/// The magnitude is the smallest Euclidean distance to a discretization of
/// `est`; the sign is positive when the estimated ordinate at the point's x is
/// at or above the point.
pub fn signed_distance<E: ContourCurve + ?Sized>(est: &E, point: (f64, f64)) -> f64 {
    signed_distance_to(&est.points(CURVE_DISCRETIZATION), est.ordinate(point.0), point)
}

fn signed_distance_to(points: &[(f64, f64)], est_ordinate: f64, (x, y): (f64, f64)) -> f64 {
    let d2 = points
        .iter()
        .map(|&(px, py)| (px - x).powi(2) + (py - y).powi(2))
        .fold(f64::INFINITY, f64::min);
    let d = d2.sqrt();
    if est_ordinate >= y {
        d
    } else {
        -d
    }
}

/// Signed distances at every grid point for one estimated curve.
pub fn signed_distances<E: ContourCurve + ?Sized>(est: &E, grid: &[(f64, f64)]) -> Vec<f64> {
    let points = est.points(CURVE_DISCRETIZATION);
    grid.iter()
        .map(|&p| signed_distance_to(&points, est.ordinate(p.0), p))
        .collect()
}

/// Mean signed distance per grid point over the estimated curves.
pub fn pointwise_bias<T, E>(true_curve: &T, est_curves: &[E]) -> Result<Vec<f64>>
where
    T: ContourCurve + ?Sized,
    E: ContourCurve,
{
    let grid = evaluation_grid(true_curve);
    let rows: Vec<Vec<f64>> = est_curves.iter().map(|e| signed_distances(e, &grid)).collect();
    bias_from_distances(&rows, grid.len())
}

pub(crate) fn bias_from_distances(rows: &[Vec<f64>], n: usize) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::EmptyReport("no estimated curves".into()));
    }
    let mut sums = vec![0.0; n];
    for r in rows {
        for (s, d) in sums.iter_mut().zip(r) {
            *s += d;
        }
    }
    Ok(sums.into_iter().map(|s| s / rows.len() as f64).collect())
}

/// Fraction of replicates whose estimate passes within `p·Δ` of each grid
/// point, `Δ` the point's distance from the origin. Missing estimates count as
/// misses.
pub fn percent_selection<T, E>(true_curve: &T, est_curves: &[Option<E>], p: f64) -> Result<Vec<f64>>
where
    T: ContourCurve + ?Sized,
    E: ContourCurve,
{
    let grid = evaluation_grid(true_curve);
    let rows: Vec<Option<Vec<f64>>> = est_curves
        .iter()
        .map(|e| e.as_ref().map(|e| signed_distances(e, &grid)))
        .collect();
    selection_from_distances(&rows, &grid, p)
}

pub(crate) fn selection_from_distances(rows: &[Option<Vec<f64>>], grid: &[(f64, f64)], p: f64) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::EmptyReport("no replicates".into()));
    }
    let mut hits = vec![0usize; grid.len()];
    for r in rows.iter().flatten() {
        for ((h, d), &(x, y)) in hits.iter_mut().zip(r).zip(grid) {
            if d.abs() <= p * x.hypot(y) {
                *h += 1;
            }
        }
    }
    Ok(hits.into_iter().map(|h| h as f64 / rows.len() as f64).collect())
}

/// Whether a completed stage-2 trial rejects the null at `delta_u`.
pub fn rejects(result: &Stage2Result, delta_u: f64) -> bool {
    result.stop_reason == StopReason::Completed && result.max_prob > delta_u
}

/// Fraction of trials rejecting the null at `delta_u`: power under an
/// alternative truth, type-I error under a null one.
pub fn estimate_power(results: &[Stage2Result], delta_u: f64) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::EmptyReport("no stage-2 results".into()));
    }
    Ok(results.iter().filter(|r| rejects(r, delta_u)).count() as f64 / results.len() as f64)
}

/// Fraction of `max_probs` strictly above `delta_u`.
pub fn exceedance_fraction(max_probs: &[f64], delta_u: f64) -> f64 {
    max_probs.iter().filter(|&&p| p > delta_u).count() as f64 / max_probs.len() as f64
}
