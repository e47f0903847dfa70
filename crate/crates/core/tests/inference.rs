use combidose::mcmc::{self, Bijection, McmcConfig, PerParameter, PosteriorChain};
use combidose::model::{
    prob_dlt, Stage1Posterior, Stage1Record, Stage2Posterior, ToxParams, ToxPriorConfig, TtpParams, TtpPriorConfig,
};
use combidose::rng::rng_from_seed;
use combidose::stage1::{fit_posterior, next_dose_x_given_y, next_dose_y_given_x, posterior_medians};
use rand::Rng;
use statrs::distribution::{Beta, ContinuousCDF};
use statrs::statistics::Distribution;

fn central_difference(f: impl Fn(&[f64]) -> f64, v: &[f64], scale: f64) -> Vec<f64> {
    (0..v.len())
        .map(|j| {
            let h = 1e-5 * v[j].abs().max(scale);
            let mut up = v.to_vec();
            let mut dn = v.to_vec();
            up[j] += h;
            dn[j] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

fn assert_gradients_agree(analytic: &[f64], numeric: &[f64]) {
    for (j, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        let rel = (a - n).abs() / a.abs().max(1.0);
        assert!(rel < 1e-5, "coordinate {j}: analytic {a}, finite difference {n}");
    }
}

fn logit_slope(p: f64) -> f64 {
    1.0 / (p * (1.0 - p))
}

fn dbeta(p: f64, (a, b): (f64, f64)) -> f64 {
    (a - 1.0) / p - (b - 1.0) / (1.0 - p)
}

/// Hand-derived gradient of the stage-1 log posterior in `[ρ00, ρ10, ρ01, η3]`.
fn stage1_gradient(p: &ToxParams, records: &[Stage1Record], prior: &ToxPriorConfig) -> [f64; 4] {
    let mut g = [0.0; 4];
    for r in records {
        let q = prob_dlt(p, r.x, r.y).unwrap();
        let d = if r.dlt { 1.0 - q } else { -q };
        g[0] += d * logit_slope(p.rho00) * (1.0 - r.x - r.y);
        g[1] += d * logit_slope(p.rho10) * r.x;
        g[2] += d * logit_slope(p.rho01) * r.y;
        g[3] += d * r.x * r.y;
    }
    let m = p.rho10.min(p.rho01);
    let ratio = p.rho00 / m;
    g[0] += dbeta(ratio, prior.rho00_ratio) / m;
    g[1] += dbeta(p.rho10, prior.rho10);
    g[2] += dbeta(p.rho01, prior.rho01);
    let dm = dbeta(ratio, prior.rho00_ratio) * (-p.rho00 / (m * m)) - 1.0 / m;
    if p.rho10 < p.rho01 {
        g[1] += dm;
    } else {
        g[2] += dm;
    }
    g[3] += (prior.eta3.0 - 1.0) / p.eta3 - prior.eta3.1;
    g
}

/// Hand-derived gradient of the stage-2 log posterior in `[β0..β5, φ4, φ5, k]`.
fn stage2_gradient(p: &TtpParams, data: &[(f64, f64, bool)], prior: &TtpPriorConfig) -> [f64; 9] {
    let mut g = [0.0; 9];
    let k = p.k;
    for &(z, t, event) in data {
        let c4 = (z - p.phi4).max(0.0);
        let c5 = (z - p.phi5).max(0.0);
        let basis = [1.0, z, z * z, z.powi(3), c4.powi(3), c5.powi(3)];
        let ln_lambda: f64 = basis.iter().zip(&p.beta).map(|(b, c)| b * c).sum();
        let ln_r = t.ln() - ln_lambda;
        let cum = (k * ln_r).exp();
        let d_ln_lambda = if event { -k + k * cum } else { k * cum };
        for j in 0..6 {
            g[j] += d_ln_lambda * basis[j];
        }
        g[6] += d_ln_lambda * (-3.0 * p.beta[4] * c4 * c4);
        g[7] += d_ln_lambda * (-3.0 * p.beta[5] * c5 * c5);
        g[8] += if event { 1.0 / k + ln_r - cum * ln_r } else { -cum * ln_r };
    }
    for j in 0..6 {
        g[j] -= (p.beta[j] - prior.mu[j]) / prior.sigma2;
    }
    g
}

#[test]
fn stage1_log_posterior_gradient() {
    let prior = ToxPriorConfig::default();
    let mut rng = rng_from_seed(11);
    for _ in 0..20 {
        let rho00 = rng.random_range(0.02..0.15);
        let p = ToxParams::new(
            rho00,
            rng.random_range(rho00 + 0.05..0.9),
            rng.random_range(rho00 + 0.05..0.9),
            rng.random_range(0.2..8.0),
        )
        .unwrap();
        let records: Vec<Stage1Record> = (0..12)
            .map(|_| Stage1Record {
                x: rng.random(),
                y: rng.random(),
                dlt: rng.random_bool(0.3),
            })
            .collect();
        let post = Stage1Posterior::new(&records, prior);
        let numeric = central_difference(|v| post.log_density(v), &p.to_vec(), 1e-3);
        assert_gradients_agree(&stage1_gradient(&p, &records, &prior), &numeric);
    }
}

#[test]
fn stage2_log_posterior_gradient() {
    let prior = TtpPriorConfig::default();
    let mut rng = rng_from_seed(12);
    for _ in 0..20 {
        let phi5 = rng.random_range(0.3..0.9);
        let p = TtpParams {
            beta: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
            phi4: rng.random_range(0.05..phi5 - 0.05),
            phi5,
            k: rng.random_range(0.5..4.0),
        };
        let data: Vec<(f64, f64, bool)> = (0..15)
            .map(|_| (rng.random(), rng.random_range(0.1..6.0), rng.random_bool(0.6)))
            .collect();
        let post = Stage2Posterior::new(data.iter().copied(), prior);
        let numeric = central_difference(|v| post.log_density(v), &p.to_vec(), 1e-2);
        assert_gradients_agree(&stage2_gradient(&p, &data, &prior), &numeric);
    }
}

/// Standard error of a chain mean by batch means.
fn batch_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

#[test]
fn conjugate_beta_bernoulli_recovery() {
    let (a, b) = (2.0, 3.0);
    for (successes, n, seed) in [(7, 20, 1), (1, 30, 2), (45, 50, 3)] {
        let log_density = |v: &[f64]| {
            let p = v[0];
            (a - 1.0 + successes as f64) * p.ln() + (b - 1.0 + (n - successes) as f64) * (1.0 - p).ln()
        };
        let config = McmcConfig {
            burn_in: 2000,
            keep: 20000,
            seed,
            ..McmcConfig::default()
        };
        let transform = PerParameter(vec![Bijection::Interval { lo: 0.0, hi: 1.0 }]);
        let chain = mcmc::sample(log_density, &transform, &["p"], &[0.5], &config).unwrap();
        let post = Beta::new(a + successes as f64, b + (n - successes) as f64).unwrap();
        let draws = chain.column(0);
        let se = batch_se(&draws, 25);
        let mean = chain.mean(0);
        assert!((mean - post.mean().unwrap()).abs() < 3.0 * se, "mean {mean} vs {} (se {se})", post.mean().unwrap());
        for q in [0.1, 0.5, 0.9] {
            let got = chain.quantile(0, q).unwrap();
            assert!((got - post.inverse_cdf(q)).abs() < 0.02, "quantile {q}: {got}");
        }
    }
}

#[test]
fn stage1_posterior_recovers_truth_with_many_patients() {
    let truth = ToxParams::new(0.1, 0.35, 0.3, 3.0).unwrap();
    let mut rng = rng_from_seed(2000);
    let records: Vec<Stage1Record> = (0..2000)
        .map(|_| {
            let (x, y) = (rng.random::<f64>(), rng.random::<f64>());
            Stage1Record {
                x,
                y,
                dlt: rng.random::<f64>() < truth.prob_dlt_unchecked(x, y),
            }
        })
        .collect();
    let chain = fit_posterior(&records, &ToxPriorConfig::default(), &McmcConfig::default().with_seed(5)).unwrap();
    let med = posterior_medians(&chain).unwrap();
    for (name, got, want) in [
        ("rho00", med.rho00, truth.rho00),
        ("rho10", med.rho10, truth.rho10),
        ("rho01", med.rho01, truth.rho01),
    ] {
        assert!((got - want).abs() < 0.05, "{name}: {got} vs {want}");
    }
    // η3 lives on the link scale; ±0.05 in probability at (1,1) is the matching tolerance.
    let at_corner = |p: &ToxParams| p.prob_dlt_unchecked(1.0, 1.0);
    assert!((at_corner(&med) - at_corner(&truth)).abs() < 0.05, "eta3 {} vs {}", med.eta3, truth.eta3);
}

/// Per-draw bisection of `P(DLT | x, y) = θ` in x, clipped to [0, 1].
fn solve_x(p: &ToxParams, y: f64, theta: f64) -> f64 {
    let f = |x: f64| p.prob_dlt_unchecked(x, y) - theta;
    if f(0.0) >= 0.0 {
        return 0.0;
    }
    if f(1.0) <= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest grid value whose empirical CDF reaches `q`.
fn grid_quantile(values: &[f64], q: f64) -> f64 {
    let n = values.len() as f64;
    (0..=10_000)
        .map(|i| i as f64 / 10_000.0)
        .find(|&g| values.iter().filter(|&&v| v <= g).count() as f64 / n >= q)
        .unwrap_or(1.0)
}

fn random_posterior(rng: &mut impl Rng) -> PosteriorChain {
    let rho00 = rng.random_range(0.02..0.2);
    let center = [rho00, rng.random_range(rho00 + 0.1..0.8), rng.random_range(rho00 + 0.1..0.8), rng.random_range(0.5..6.0)];
    let spread: f64 = rng.random_range(0.05..0.4);
    let rows: Vec<Vec<f64>> = (0..2000)
        .map(|_| loop {
            let jitter = |v: f64, r: &mut dyn rand::RngCore| v * (spread * (r.random::<f64>() - 0.5) * 2.0).exp();
            let d = [
                jitter(center[0], rng),
                jitter(center[1], rng).min(0.99),
                jitter(center[2], rng).min(0.99),
                jitter(center[3], rng),
            ];
            if ToxParams::from_slice(&d).in_support() {
                break d.to_vec();
            }
        })
        .collect();
    PosteriorChain::from_draws(&combidose::model::TOX_PARAM_NAMES, &rows).unwrap()
}

#[test]
fn ewoc_quantile_matches_brute_force() {
    let mut rng = rng_from_seed(4);
    let theta = 0.33;
    for _ in 0..50 {
        let chain = random_posterior(&mut rng);
        let y: f64 = rng.random_range(0.0..1.0);
        let alpha = rng.random_range(0.25..=0.5);
        let solved: Vec<f64> = chain.iter().map(|d| solve_x(&ToxParams::from_slice(d), y, theta)).collect();
        let oracle = grid_quantile(&solved, alpha);
        let got = next_dose_x_given_y(&chain, y, alpha, theta).unwrap();
        assert!((got - oracle).abs() < 0.02, "x at y={y}, alpha={alpha}: {got} vs {oracle}");

        let x: f64 = rng.random_range(0.0..1.0);
        let solved_y: Vec<f64> = chain
            .iter()
            .map(|d| {
                let p = ToxParams::from_slice(d);
                let swapped = ToxParams { rho10: p.rho01, rho01: p.rho10, ..p };
                solve_x(&swapped, x, theta)
            })
            .collect();
        let oracle = grid_quantile(&solved_y, alpha);
        let got = next_dose_y_given_x(&chain, x, alpha, theta).unwrap();
        assert!((got - oracle).abs() < 0.02, "y at x={x}, alpha={alpha}: {got} vs {oracle}");
    }
}
