use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Parameter names, in the order used by posterior chains.
pub const TTP_PARAM_NAMES: [&str; 9] = [
    "beta0", "beta1", "beta2", "beta3", "beta4", "beta5", "phi4", "phi5", "k",
];

/// Weibull time-to-progression model with a cubic-spline log scale:
///
/// ```text
/// log λ(z) = β0 + β1 z + β2 z² + Σ_{j=3..5} βj (z − φj)₊³,   φ3 = 0
/// Med(z)   = λ(z) (log 2)^(1/k)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtpParams {
    pub beta: [f64; 6],
    pub phi4: f64,
    pub phi5: f64,
    pub k: f64,
}

impl TtpParams {
    pub fn in_support(&self) -> bool {
        0.0 <= self.phi4
            && self.phi4 < self.phi5
            && self.phi5 <= 1.0
            && self.k > 0.0
            && self.k.is_finite()
            && self.beta.iter().all(|b| b.is_finite())
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_support() {
            Ok(())
        } else {
            Err(Error::domain(format!("TTP parameters out of support: {self:?}")))
        }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        TtpParams {
            beta: [v[0], v[1], v[2], v[3], v[4], v[5]],
            phi4: v[6],
            phi5: v[7],
            k: v[8],
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.beta.to_vec();
        v.extend([self.phi4, self.phi5, self.k]);
        v
    }

    /// Parameters giving the constant median `median` for Weibull shape `k`.
    pub fn constant_median(median: f64, k: f64) -> Self {
        TtpParams {
            beta: [median.ln() - (std::f64::consts::LN_2.ln()) / k, 0.0, 0.0, 0.0, 0.0, 0.0],
            phi4: 1.0 / 3.0,
            phi5: 2.0 / 3.0,
            k,
        }
    }

    /// `log λ(z)`.
    #[inline]
    pub fn log_lambda(&self, z: f64) -> f64 {
        let b = &self.beta;
        let cube = |d: f64| if d > 0.0 { d * d * d } else { 0.0 };
        b[0] + b[1] * z + b[2] * z * z + b[3] * cube(z) + b[4] * cube(z - self.phi4)
            + b[5] * cube(z - self.phi5)
    }

    /// `log Med(z)`.
    #[inline]
    pub fn log_median(&self, z: f64) -> f64 {
        self.log_lambda(z) + std::f64::consts::LN_2.ln() / self.k
    }
}

/// The spline scale `λ(z; ψ)`.
pub fn lambda_spline(params: &TtpParams, z: f64) -> f64 {
    params.log_lambda(z).exp()
}

/// Median time to progression at curve position `z`.
pub fn weibull_median(params: &TtpParams, z: f64) -> f64 {
    params.log_median(z).exp()
}

/// Weibull log density with scale `lambda` and shape `k`.
pub fn weibull_log_pdf(t: f64, lambda: f64, k: f64) -> f64 {
    let r = t / lambda;
    k.ln() - lambda.ln() + (k - 1.0) * r.ln() - r.powf(k)
}

pub fn weibull_cdf(t: f64, lambda: f64, k: f64) -> f64 {
    -(-(t / lambda).powf(k)).exp_m1()
}

/// Prior on [`TtpParams`]: `β ~ N(μ, σ² I₆)`, `(φ4, φ5)` uniform on
/// `{0 ≤ u < v ≤ 1}`, `k ~ Unif(k_range)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TtpPriorConfig {
    pub mu: [f64; 6],
    pub sigma2: f64,
    pub k_range: (f64, f64),
}

impl Default for TtpPriorConfig {
    /// `σ² = 10⁴` (standard deviation 100): the induced prior median TTP is
    /// vague, with 90% intervals spanning many orders of magnitude.
    fn default() -> Self {
        TtpPriorConfig {
            mu: [0.0; 6],
            sigma2: 1.0e4,
            k_range: (1e-100, 10.0),
        }
    }
}

impl TtpPriorConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.k_range;
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::config(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::config(format!("invalid k range ({lo}, {hi})")));
        }
        if !self.mu.iter().all(|m| m.is_finite()) {
            return Err(Error::config("prior mean must be finite"));
        }
        Ok(())
    }

    /// Normalized log prior density; `-inf` outside the support.
    pub fn log_density(&self, p: &TtpParams) -> f64 {
        let (lo, hi) = self.k_range;
        if !p.in_support() || p.k <= lo || p.k >= hi {
            return f64::NEG_INFINITY;
        }
        let ss: f64 = p
            .beta
            .iter()
            .zip(self.mu.iter())
            .map(|(b, m)| (b - m) * (b - m))
            .sum();
        -0.5 * ss / self.sigma2 - 3.0 * (2.0 * std::f64::consts::PI * self.sigma2).ln()
            + std::f64::consts::LN_2
            - (hi - lo).ln()
    }
}

/// The stage-2 posterior for a fixed data set, evaluated on the natural
/// parameter vector `[β0..β5, φ4, φ5, k]`.
#[derive(Debug, Clone)]
pub struct Stage2Posterior {
    prior: TtpPriorConfig,
    // (z, ln t, event)
    obs: Vec<(f64, f64, bool)>,
}

impl Stage2Posterior {
    /// `data` holds `(z, time, event)` triples.
    pub fn new(data: impl IntoIterator<Item = (f64, f64, bool)>, prior: TtpPriorConfig) -> Self {
        let obs = data.into_iter().map(|(z, t, d)| (z, t.ln(), d)).collect();
        Stage2Posterior { prior, obs }
    }

    pub fn log_likelihood(&self, p: &TtpParams) -> f64 {
        let k = p.k;
        let ln_k = k.ln();
        self.obs
            .iter()
            .map(|&(z, ln_t, event)| {
                let ln_lambda = p.log_lambda(z);
                let ln_r = ln_t - ln_lambda;
                let cum = (k * ln_r).exp();
                if event {
                    ln_k - ln_lambda + (k - 1.0) * ln_r - cum
                } else {
                    -cum
                }
            })
            .sum()
    }

    pub fn log_density(&self, v: &[f64]) -> f64 {
        let p = TtpParams::from_slice(v);
        let prior = self.prior.log_density(&p);
        if prior == f64::NEG_INFINITY {
            return prior;
        }
        let ll = self.log_likelihood(&p);
        if ll.is_nan() {
            return f64::NEG_INFINITY;
        }
        prior + ll
    }
}

/// Log posterior of the stage-2 parameters up to an additive constant.
///
/// `data` holds `(z, time, event)` triples with `time > 0`. Returns `-inf`
/// outside the prior support.
pub fn log_posterior_stage2(params: &TtpParams, data: &[(f64, f64, bool)], prior: &TtpPriorConfig) -> f64 {
    Stage2Posterior::new(data.iter().copied(), *prior).log_density(&params.to_vec())
}
