//! Adaptive random-walk Metropolis-within-Gibbs.
//!
//! Each sweep proposes a Gaussian move in every unconstrained coordinate in
//! turn. During burn-in the per-coordinate step sizes follow a Robbins-Monro
//! recursion on the log scale toward the target acceptance rate; they are
//! frozen afterwards, so retained draws come from a fixed Metropolis kernel.

mod transform;

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use transform::{Bijection, PerParameter, SupportTransform, ToxTransform, TtpTransform};

use crate::rng::rng_from_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub burn_in: usize,
    /// Retained draws.
    pub keep: usize,
    pub thin: usize,
    /// Proposal standard deviations in unconstrained space. Empty means
    /// [`DEFAULT_STEP`] for every coordinate.
    #[serde(default)]
    pub initial_step_sizes: Vec<f64>,
    pub adapt_target: f64,
    pub seed: u64,
}

pub const DEFAULT_STEP: f64 = 0.5;

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            burn_in: 2000,
            keep: 2000,
            thin: 1,
            initial_step_sizes: Vec::new(),
            adapt_target: 0.3,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        McmcConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.keep < 100 {
            return Err(Error::config(format!("keep must be >= 100, got {}", self.keep)));
        }
        if self.thin < 1 {
            return Err(Error::config("thin must be >= 1"));
        }
        if !(self.adapt_target > 0.0 && self.adapt_target < 1.0) {
            return Err(Error::config(format!(
                "adapt_target must be in (0,1), got {}",
                self.adapt_target
            )));
        }
        if self
            .initial_step_sizes
            .iter()
            .any(|s| !(s.is_finite() && *s > 0.0))
        {
            return Err(Error::config("step sizes must be positive"));
        }
        Ok(())
    }
}

/// Retained posterior draws in natural parameter space, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorChain {
    names: Vec<String>,
    dim: usize,
    draws: Vec<f64>,
    acceptance_rates: Vec<f64>,
    seed: u64,
}

impl PosteriorChain {
    /// Build a chain from explicit draws (fixtures, external samplers).
    pub fn from_draws<S: AsRef<str>>(names: &[S], rows: &[Vec<f64>]) -> Result<Self> {
        let dim = names.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::domain("draw length does not match parameter count"));
        }
        Ok(PosteriorChain {
            names: names.iter().map(|s| s.as_ref().to_string()).collect(),
            dim,
            draws: rows.iter().flatten().copied().collect(),
            acceptance_rates: vec![f64::NAN; dim],
            seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.draws.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn acceptance_rates(&self) -> &[f64] {
        &self.acceptance_rates
    }

    pub fn draw(&self, i: usize) -> &[f64] {
        &self.draws[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.draws.chunks_exact(self.dim.max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter().map(|d| d[j]).collect()
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.iter().map(|d| d[j]).sum::<f64>() / self.len() as f64
    }

    pub fn quantile(&self, j: usize, q: f64) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptyChain);
        }
        if j >= self.dim {
            return Err(Error::domain(format!("parameter index {j} out of range")));
        }
        empirical_quantile(&self.column(j), q)
    }

    pub fn median(&self, j: usize) -> Result<f64> {
        self.quantile(j, 0.5)
    }

    /// Write the chain as CSV: a header of parameter names, one draw per line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "{}", self.names.join(","))?;
        for d in self.iter() {
            let line: Vec<String> = d.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n − 1) q`).
pub fn empirical_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyChain);
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("quantile level {q} not in (0,1)")));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(sorted_quantile(&s, q))
}

pub(crate) fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Run the sampler.
///
/// `log_density` is evaluated on natural-space vectors and may return `-inf`
/// to reject a state. `initial` is a natural-space starting point at which the
/// density must be finite.
pub fn sample<F, T>(
    log_density: F,
    transform: &T,
    names: &[&str],
    initial: &[f64],
    config: &McmcConfig,
) -> Result<PosteriorChain>
where
    F: Fn(&[f64]) -> f64,
    T: SupportTransform + ?Sized,
{
    config.validate()?;
    let p = transform.dim();
    if names.len() != p || initial.len() != p {
        return Err(Error::config(format!(
            "dimension mismatch: transform {p}, names {}, initial {}",
            names.len(),
            initial.len()
        )));
    }
    let mut log_step: Vec<f64> = if config.initial_step_sizes.is_empty() {
        vec![DEFAULT_STEP.ln(); p]
    } else if config.initial_step_sizes.len() == p {
        config.initial_step_sizes.iter().map(|s| s.ln()).collect()
    } else {
        return Err(Error::config(format!(
            "{} step sizes for {p} parameters",
            config.initial_step_sizes.len()
        )));
    };

    let mut rng = rng_from_seed(config.seed);
    let mut u = transform.to_unconstrained(initial)?;
    let mut x = vec![0.0; p];
    let target = |u: &[f64], x: &mut [f64]| {
        let lj = transform.to_natural(u, x);
        let ld = log_density(x);
        if ld.is_nan() {
            f64::NEG_INFINITY
        } else {
            ld + lj
        }
    };
    let mut lp = target(&u, &mut x);
    if !lp.is_finite() {
        return Err(Error::Init(format!(
            "log density is {lp} at the initial point {initial:?}"
        )));
    }

    let total = config.burn_in + config.keep * config.thin;
    let mut draws = Vec::with_capacity(config.keep * p);
    let mut accepted = vec![0usize; p];
    let mut proposal = u.clone();
    let mut x_prop = vec![0.0; p];

    for iter in 0..total {
        let adapting = iter < config.burn_in;
        let gain = 1.0 / ((iter + 1) as f64).powf(0.6);
        for j in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            proposal[j] = u[j] + log_step[j].exp() * z;
            let lp_prop = target(&proposal, &mut x_prop);
            let log_r = lp_prop - lp;
            let accept = log_r >= 0.0 || rng.random::<f64>().ln() < log_r;
            if accept {
                u[j] = proposal[j];
                lp = lp_prop;
            } else {
                proposal[j] = u[j];
            }
            if adapting {
                let a = if accept { 1.0 } else { 0.0 };
                log_step[j] = (log_step[j] + gain * (a - config.adapt_target)).clamp(-12.0, 6.0);
            } else if accept {
                accepted[j] += 1;
            }
        }
        if !adapting && (iter - config.burn_in + 1) % config.thin == 0 {
            transform.to_natural(&u, &mut x);
            draws.extend_from_slice(&x);
        }
    }

    let proposals = (config.keep * config.thin) as f64;
    Ok(PosteriorChain {
        names: names.iter().map(|s| s.to_string()).collect(),
        dim: p,
        draws,
        acceptance_rates: accepted.iter().map(|&a| a as f64 / proposals).collect(),
        seed: config.seed,
    })
}
