/// A link function `F` and its inverse, as used in the dose-toxicity model.
pub trait Link {
    fn cdf(u: f64) -> f64;
    fn quantile(p: f64) -> f64;
    /// `ln F(u)`.
    fn ln_cdf(u: f64) -> f64 {
        Self::cdf(u).ln()
    }
    /// `ln (1 - F(u))`.
    fn ln_ccdf(u: f64) -> f64 {
        (1.0 - Self::cdf(u)).ln()
    }
}

/// The logistic link, the only one shipped.
#[derive(Debug, Clone, Copy, Default)]
pub struct Logistic;

#[inline]
fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

impl Link for Logistic {
    #[inline]
    fn cdf(u: f64) -> f64 {
        if u >= 0.0 {
            1.0 / (1.0 + (-u).exp())
        } else {
            let e = u.exp();
            e / (1.0 + e)
        }
    }

    #[inline]
    fn quantile(p: f64) -> f64 {
        (p / (1.0 - p)).ln()
    }

    #[inline]
    fn ln_cdf(u: f64) -> f64 {
        -softplus(-u)
    }

    #[inline]
    fn ln_ccdf(u: f64) -> f64 {
        -softplus(u)
    }
}
