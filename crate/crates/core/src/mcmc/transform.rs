//! Bijections between a model's natural parameter space and `ℝᵖ`.
//!
//! The sampler walks in unconstrained coordinates `u` and targets
//! `log π(T(u)) + log |det ∂T/∂u|`.

use crate::{Error, Result};

pub trait SupportTransform {
    fn dim(&self) -> usize;

    /// Map a natural-space point into unconstrained space. Fails when the point
    /// is outside the support.
    fn to_unconstrained(&self, natural: &[f64]) -> Result<Vec<f64>>;

    /// Map `u` to natural space, writing into `out`; returns `log |det J|`.
    fn to_natural(&self, u: &[f64], out: &mut [f64]) -> f64;
}

#[inline]
fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// `ln(σ(u)(1 − σ(u)))`, the log-derivative of the logistic function.
#[inline]
fn ln_sigmoid_slope(u: f64) -> f64 {
    -softplus(-u) - softplus(u)
}

fn logit_checked(p: f64, what: &str) -> Result<f64> {
    if p > 0.0 && p < 1.0 {
        Ok((p / (1.0 - p)).ln())
    } else {
        Err(Error::Init(format!("{what} = {p} outside (0, 1)")))
    }
}

/// A one-dimensional bijection onto an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bijection {
    Identity,
    /// `(0, ∞)` via `exp`.
    Log,
    /// `(lo, hi)` via a scaled logistic.
    Interval { lo: f64, hi: f64 },
}

impl Bijection {
    fn forward(&self, v: f64) -> Result<f64> {
        match *self {
            Bijection::Identity => Ok(v),
            Bijection::Log => {
                if v > 0.0 {
                    Ok(v.ln())
                } else {
                    Err(Error::Init(format!("{v} not positive")))
                }
            }
            Bijection::Interval { lo, hi } => logit_checked((v - lo) / (hi - lo), "scaled value"),
        }
    }

    /// Returns `(value, ln |dvalue/du|)`.
    fn inverse(&self, u: f64) -> (f64, f64) {
        match *self {
            Bijection::Identity => (u, 0.0),
            Bijection::Log => (u.exp(), u),
            Bijection::Interval { lo, hi } => {
                (lo + (hi - lo) * sigmoid(u), (hi - lo).ln() + ln_sigmoid_slope(u))
            }
        }
    }
}

/// Independent per-coordinate bijections.
#[derive(Debug, Clone, PartialEq)]
pub struct PerParameter(pub Vec<Bijection>);

impl SupportTransform for PerParameter {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn to_unconstrained(&self, natural: &[f64]) -> Result<Vec<f64>> {
        self.0
            .iter()
            .zip(natural)
            .map(|(b, &v)| b.forward(v))
            .collect()
    }

    fn to_natural(&self, u: &[f64], out: &mut [f64]) -> f64 {
        let mut log_j = 0.0;
        for ((b, &ui), o) in self.0.iter().zip(u).zip(out.iter_mut()) {
            let (v, lj) = b.inverse(ui);
            *o = v;
            log_j += lj;
        }
        log_j
    }
}

/// Stage-1 parameters `[ρ00, ρ10, ρ01, η3]`.
///
/// `u = [logit(ρ00 / min(ρ10, ρ01)), logit ρ10, logit ρ01, ln η3]`. The Jacobian
/// is triangular, so its determinant is the product of the diagonal terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct ToxTransform;

impl SupportTransform for ToxTransform {
    fn dim(&self) -> usize {
        4
    }

    fn to_unconstrained(&self, v: &[f64]) -> Result<Vec<f64>> {
        let m = v[1].min(v[2]);
        if v[3] <= 0.0 {
            return Err(Error::Init(format!("eta3 = {} not positive", v[3])));
        }
        Ok(vec![
            logit_checked(v[0] / m, "rho00 / min(rho10, rho01)")?,
            logit_checked(v[1], "rho10")?,
            logit_checked(v[2], "rho01")?,
            v[3].ln(),
        ])
    }

    fn to_natural(&self, u: &[f64], out: &mut [f64]) -> f64 {
        let rho10 = sigmoid(u[1]);
        let rho01 = sigmoid(u[2]);
        let m = rho10.min(rho01);
        out[0] = m * sigmoid(u[0]);
        out[1] = rho10;
        out[2] = rho01;
        out[3] = u[3].exp();
        m.ln() + ln_sigmoid_slope(u[0]) + ln_sigmoid_slope(u[1]) + ln_sigmoid_slope(u[2]) + u[3]
    }
}

/// Stage-2 parameters `[β0..β5, φ4, φ5, k]`.
///
/// β is left unconstrained; the ordered knots use stick-breaking
/// (`φ5 = σ(u7)`, `φ4 = φ5 σ(u6)`) and `k` a scaled logistic onto `k_range`.
#[derive(Debug, Clone, Copy)]
pub struct TtpTransform {
    pub k_range: (f64, f64),
}

impl SupportTransform for TtpTransform {
    fn dim(&self) -> usize {
        9
    }

    fn to_unconstrained(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut u = v[..6].to_vec();
        let (lo, hi) = self.k_range;
        u.push(logit_checked(v[6] / v[7], "phi4 / phi5")?);
        u.push(logit_checked(v[7], "phi5")?);
        u.push(logit_checked((v[8] - lo) / (hi - lo), "scaled k")?);
        Ok(u)
    }

    fn to_natural(&self, u: &[f64], out: &mut [f64]) -> f64 {
        out[..6].copy_from_slice(&u[..6]);
        let phi5 = sigmoid(u[7]);
        out[6] = phi5 * sigmoid(u[6]);
        out[7] = phi5;
        let (lo, hi) = self.k_range;
        out[8] = lo + (hi - lo) * sigmoid(u[8]);
        phi5.ln() + ln_sigmoid_slope(u[6]) + ln_sigmoid_slope(u[7]) + (hi - lo).ln() + ln_sigmoid_slope(u[8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip<T: SupportTransform>(t: &T, v: &[f64]) {
        let u = t.to_unconstrained(v).unwrap();
        let mut back = vec![0.0; t.dim()];
        t.to_natural(&u, &mut back);
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12, "{v:?} -> {back:?}");
        }
    }

    /// Numerical log-Jacobian determinant by central differences.
    fn numeric_log_det<T: SupportTransform>(t: &T, u: &[f64]) -> f64 {
        let p = t.dim();
        let h = 1e-6;
        let mut jac = vec![vec![0.0; p]; p];
        for j in 0..p {
            let mut up = u.to_vec();
            let mut dn = u.to_vec();
            up[j] += h;
            dn[j] -= h;
            let mut a = vec![0.0; p];
            let mut b = vec![0.0; p];
            t.to_natural(&up, &mut a);
            t.to_natural(&dn, &mut b);
            for i in 0..p {
                jac[i][j] = (a[i] - b[i]) / (2.0 * h);
            }
        }
        // Gaussian elimination with partial pivoting
        let mut det = 1.0f64;
        for c in 0..p {
            let piv = (c..p).max_by(|&a, &b| jac[a][c].abs().total_cmp(&jac[b][c].abs())).unwrap();
            jac.swap(c, piv);
            det *= jac[c][c];
            for r in c + 1..p {
                let f = jac[r][c] / jac[c][c];
                for k in c..p {
                    jac[r][k] -= f * jac[c][k];
                }
            }
        }
        det.abs().ln()
    }

    #[test]
    fn tox_transform_round_trip_and_jacobian() {
        let t = ToxTransform;
        round_trip(&t, &[0.05, 0.3, 0.2, 4.0]);
        let u = [0.3, -0.8, 0.4, 1.1];
        let mut out = [0.0; 4];
        let lj = t.to_natural(&u, &mut out);
        assert!((lj - numeric_log_det(&t, &u)).abs() < 1e-6);
    }

    #[test]
    fn ttp_transform_round_trip_and_jacobian() {
        let t = TtpTransform { k_range: (1e-100, 10.0) };
        round_trip(&t, &[1.0, -2.0, 0.5, 3.0, -1.0, 0.2, 0.25, 0.8, 1.7]);
        let u = [0.1, 0.2, -0.3, 0.4, 0.0, 1.0, -0.5, 0.7, -0.2];
        let mut out = [0.0; 9];
        let lj = t.to_natural(&u, &mut out);
        assert!((lj - numeric_log_det(&t, &u)).abs() < 1e-6);
        assert!(out[6] < out[7]);
    }

    #[test]
    fn out_of_support_initial_points_fail() {
        assert!(ToxTransform.to_unconstrained(&[0.4, 0.3, 0.5, 1.0]).is_err());
        let t = TtpTransform { k_range: (0.0, 10.0) };
        assert!(t
            .to_unconstrained(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.7, 0.3, 1.0])
            .is_err());
        let pp = PerParameter(vec![Bijection::Log, Bijection::Interval { lo: 0.0, hi: 1.0 }]);
        assert!(pp.to_unconstrained(&[-1.0, 0.5]).is_err());
        round_trip(&pp, &[2.0, 0.25]);
    }
}
