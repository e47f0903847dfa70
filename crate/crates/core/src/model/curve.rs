use serde::{Deserialize, Serialize};

use super::dose::{DoseCombination, DoseSpace};
use super::link::{Link, Logistic};
use super::toxicity::ToxParams;
use crate::{Error, Result};

/// Any decreasing contour `y = f(x)` in the unit square, defined on a clipped
/// x-range.
///
/// [`ordinate`](ContourCurve::ordinate) may be evaluated outside the clipped
/// range; it then returns the unclipped value, which can leave `[0, 1]`.
pub trait ContourCurve {
    fn x_range(&self) -> (f64, f64);
    fn ordinate(&self, x: f64) -> f64;

    /// `n` points equally spaced in x over the clipped range.
    fn points(&self, n: usize) -> Vec<(f64, f64)> {
        let (lo, hi) = self.x_range();
        if n == 1 {
            return vec![(lo, self.ordinate(lo))];
        }
        (0..n)
            .map(|i| {
                let x = if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                };
                (x, self.ordinate(x))
            })
            .collect()
    }
}

/// The set of combinations whose DLT probability equals `theta`:
///
/// ```text
/// y*(x) = [(F⁻¹(θ) − F⁻¹(ρ00)) − (F⁻¹(ρ10) − F⁻¹(ρ00)) x] / [(F⁻¹(ρ01) − F⁻¹(ρ00)) + η3 x]
/// ```
///
/// restricted to `[x_lo, x_hi]`, the x-range on which `y*` stays in `[0, 1]`.
/// Positions along the curve are indexed by `z = (x − x_lo)/(x_hi − x_lo)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtdCurve {
    pub params: ToxParams,
    pub theta: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

/// Tolerance in y for accepting a dose as lying on the curve.
const ON_CURVE_TOL: f64 = 1e-6;

impl MtdCurve {
    pub fn new(params: ToxParams, theta: f64) -> Result<Self> {
        params.validate()?;
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::domain(format!("target probability {theta} not in (0,1)")));
        }
        if theta <= params.rho00 {
            return Err(Error::NoCurve(format!(
                "theta {theta} <= rho00 {}",
                params.rho00
            )));
        }
        let lp = params.predictor();
        let num0 = Logistic::quantile(theta) - lp.intercept;
        // y*(x) = 1  <=>  num0 - b1 x = b2 + b3 x
        let x_lo = if num0 / lp.slope_y <= 1.0 {
            0.0
        } else {
            (num0 - lp.slope_y) / (lp.slope_x + lp.interaction)
        };
        let x_hi = (num0 / lp.slope_x).min(1.0);
        if x_lo >= x_hi {
            return Err(Error::NoCurve(format!(
                "curve misses the unit square (x range [{x_lo}, {x_hi}])"
            )));
        }
        Ok(MtdCurve {
            params,
            theta,
            x_lo,
            x_hi,
        })
    }

    /// Unclipped curve ordinate `y*(x)`.
    #[inline]
    pub fn y_at(&self, x: f64) -> f64 {
        let lp = self.params.predictor();
        let num = Logistic::quantile(self.theta) - lp.intercept - lp.slope_x * x;
        num / (lp.slope_y + lp.interaction * x)
    }

    /// Standardized combination at curve position `z`.
    pub fn point_at_z(&self, z: f64) -> Result<(f64, f64)> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::domain(format!("z = {z} outside [0,1]")));
        }
        let x = self.x_lo + z * (self.x_hi - self.x_lo);
        let x = x.clamp(self.x_lo, self.x_hi);
        Ok((x, self.y_at(x).clamp(0.0, 1.0)))
    }

    pub fn dose_at_z(&self, z: f64, space: &DoseSpace) -> Result<DoseCombination> {
        let (x, y) = self.point_at_z(z)?;
        space.standardized(x, y)
    }

    /// Curve position of a standardized combination lying on the curve.
    pub fn project_to_z(&self, x: f64, y: f64) -> Result<f64> {
        let span = self.x_hi - self.x_lo;
        if x < self.x_lo - ON_CURVE_TOL * span || x > self.x_hi + ON_CURVE_TOL * span {
            return Err(Error::domain(format!(
                "x = {x} outside the curve range [{}, {}]",
                self.x_lo, self.x_hi
            )));
        }
        let gap = (y - self.y_at(x)).abs();
        if gap > ON_CURVE_TOL {
            return Err(Error::domain(format!(
                "dose ({x}, {y}) is {gap:.3e} off the curve"
            )));
        }
        Ok(((x - self.x_lo) / span).clamp(0.0, 1.0))
    }

    pub fn project_dose(&self, dose: &DoseCombination) -> Result<f64> {
        self.project_to_z(dose.x, dose.y)
    }
}

impl ContourCurve for MtdCurve {
    fn x_range(&self) -> (f64, f64) {
        (self.x_lo, self.x_hi)
    }

    fn ordinate(&self, x: f64) -> f64 {
        self.y_at(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> MtdCurve {
        MtdCurve::new(ToxParams::new(0.05, 0.3, 0.3, 10.0).unwrap(), 0.3).unwrap()
    }

    #[test]
    fn symmetric_fixture_values() {
        let c = fixture();
        // 2.0971·0.5 / (2.0971 + 5)
        assert!((c.y_at(0.5) - 0.1478).abs() < 1e-3);
        assert!((c.y_at(0.0) - 1.0).abs() < 1e-12);
        assert_eq!(c.x_lo, 0.0);
        assert!((c.x_hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn points_end_exactly_on_the_range() {
        let c = MtdCurve {
            x_lo: 0.007091850774147697,
            x_hi: 1.0,
            ..fixture()
        };
        let pts = c.points(101);
        assert_eq!(pts[0].0, c.x_lo);
        assert_eq!(pts[100].0, 1.0);
        assert!(pts.iter().all(|p| p.0 <= 1.0));
    }

    #[test]
    fn rho10_equal_to_theta_puts_corner_on_curve() {
        let c = MtdCurve::new(ToxParams::new(0.1, 0.33, 0.6, 2.0).unwrap(), 0.33).unwrap();
        assert!(c.y_at(1.0).abs() < 1e-12);
        assert!((c.x_hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clipping_when_curve_exits_through_top_and_side() {
        // low toxicity in y: curve enters through y = 1 at x_lo > 0
        let c = MtdCurve::new(ToxParams::new(0.05, 0.6, 0.15, 1.0).unwrap(), 0.33).unwrap();
        assert!(c.x_lo > 0.0);
        assert!((c.y_at(c.x_lo) - 1.0).abs() < 1e-12);
        // steep in x: exits through y = 0 at x_hi < 1
        assert!(c.x_hi < 1.0);
        assert!(c.y_at(c.x_hi).abs() < 1e-12);
    }

    #[test]
    fn no_curve_errors() {
        let p = ToxParams::new(0.4, 0.6, 0.6, 1.0).unwrap();
        assert!(matches!(MtdCurve::new(p, 0.3), Err(Error::NoCurve(_))));
        // (1,1) still below theta
        let p = ToxParams::new(0.01, 0.02, 0.02, 0.1).unwrap();
        assert!(matches!(MtdCurve::new(p, 0.5), Err(Error::NoCurve(_))));
    }

    #[test]
    fn projection_endpoints_and_off_curve() {
        let c = fixture();
        let space = DoseSpace::default();
        let d0 = c.dose_at_z(0.0, &space).unwrap();
        assert_eq!(d0.x, c.x_lo);
        assert!((d0.y - c.y_at(c.x_lo)).abs() < 1e-12);
        let y = c.y_at(0.25);
        assert!((c.project_to_z(0.25, y).unwrap() - 0.25).abs() < 1e-12);
        assert!(c.project_to_z(0.25, y + 1e-3).is_err());
        assert!(c.dose_at_z(1.5, &space).is_err());
    }
}
