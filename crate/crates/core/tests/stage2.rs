use combidose::mcmc::PosteriorChain;
use combidose::model::{DoseSpace, MtdCurve, TtpParams, TTP_PARAM_NAMES};
use combidose::rng::rng_from_seed;
use combidose::stage2::{
    prob_exceed_curve, rejection_sample_doses, rejection_sample_from_grid, run_stage2, unit_grid, EfficacyTruth,
    StopReason, Stage2Config, TrueTtp,
};
use combidose::harness::calibrated_truth;
use combidose::ToxPriorConfig;
use rand::{Rng, RngCore};

/// Counts 64-bit draws so that proposals can be counted.
struct Counting<R> {
    inner: R,
    draws: u64,
}

impl<R: RngCore> RngCore for Counting<R> {
    fn next_u32(&mut self) -> u32 {
        self.draws += 1;
        self.inner.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.draws += 1;
        self.inner.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Asymptotic Kolmogorov p-value with the small-sample correction of
/// Stephens.
fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn constant_chain(medians: &[f64]) -> PosteriorChain {
    let rows: Vec<Vec<f64>> = medians.iter().map(|&m| TtpParams::constant_median(m, 1.5).to_vec()).collect();
    PosteriorChain::from_draws(&TTP_PARAM_NAMES, &rows).unwrap()
}

#[test]
fn rejection_sampler_matches_its_targets() {
    let n = 5000;
    let grid = unit_grid(1001);
    let cases: [(&str, Vec<f64>, fn(f64) -> f64, f64); 2] = [
        ("constant", vec![3.0; 1001], |z| z, 1.0),
        ("linear", grid.clone(), |z| z * z, 0.5),
    ];
    for (name, values, cdf, mean_over_max) in cases {
        let mut rng = Counting { inner: rng_from_seed(99), draws: 0 };
        let draws = rejection_sample_from_grid(&values, n, &mut rng).unwrap();
        let d = ks_distance(draws, cdf);
        let p = ks_p_value(d, n);
        assert!(p > 0.01, "{name}: KS distance {d}, p {p}");
        assert!(d < 0.03, "{name}: KS distance {d}");
        // Every proposal consumes two uniforms; acceptance rate = mean(g) / (1.01 max g).
        let proposals = rng.draws as f64 / 2.0;
        let rate = n as f64 / proposals;
        let expected = mean_over_max / 1.01;
        let se = (expected * (1.0 - expected) / proposals).sqrt();
        assert!((rate - expected).abs() < 4.0 * se + 1e-12, "{name}: rate {rate} vs {expected}");
    }
}

#[test]
fn allocation_from_a_constant_posterior_is_uniform() {
    let chain = constant_chain(&[3.0, 5.0, 8.0]);
    let draws = rejection_sample_doses(&chain, 5000, 1001, &mut rng_from_seed(3)).unwrap();
    assert!(ks_p_value(ks_distance(draws, |z| z), 5000) > 0.01);
}

#[test]
fn exceedance_matches_direct_count() {
    let mut rng = rng_from_seed(8);
    let rows: Vec<Vec<f64>> = (0..500)
        .map(|_| {
            let phi5 = rng.random_range(0.2..1.0);
            TtpParams {
                beta: std::array::from_fn(|_| rng.random_range(-1.5..2.5)),
                phi4: rng.random_range(0.0..phi5),
                phi5,
                k: rng.random_range(0.5..3.0),
            }
            .to_vec()
        })
        .collect();
    let chain = PosteriorChain::from_draws(&TTP_PARAM_NAMES, &rows).unwrap();
    let grid = unit_grid(101);
    let curve = prob_exceed_curve(&chain, 4.0, &grid).unwrap();
    for (i, &z) in grid.iter().enumerate() {
        let count = rows
            .iter()
            .filter(|r| {
                let b = &r[..6];
                let cube = |d: f64| d.max(0.0).powi(3);
                let lambda = (b[0] + b[1] * z + b[2] * z * z + b[3] * cube(z) + b[4] * cube(z - r[6]) + b[5] * cube(z - r[7])).exp();
                lambda * std::f64::consts::LN_2.powf(1.0 / r[8]) > 4.0
            })
            .count();
        assert_eq!(curve.probs[i], count as f64 / rows.len() as f64, "z = {z}");
    }
}

fn calibrated_curve() -> MtdCurve {
    let truth = calibrated_truth(&ToxPriorConfig::default(), 0.33).unwrap();
    MtdCurve::new(truth, 0.33).unwrap()
}

fn stop_fraction(truth: &EfficacyTruth, config: &Stage2Config, reason: StopReason) -> f64 {
    let curve = calibrated_curve();
    let space = DoseSpace::default();
    let runs = 200;
    let hits = (0..runs)
        .filter(|&s| run_stage2(&curve, &space, truth, config, 1000 + s).unwrap().stop_reason == reason)
        .count();
    hits as f64 / runs as f64
}

#[test]
fn clearly_futile_truth_stops_for_futility() {
    let config = Stage2Config {
        delta_0: 0.2,
        ..Stage2Config::default()
    };
    let truth = EfficacyTruth {
        ttp: TrueTtp::Spline {
            params: TtpParams::constant_median(config.med0 - 3.0, 2.0),
        },
        dlt_rate: None,
    };
    let f = stop_fraction(&truth, &config, StopReason::Futility);
    assert!(f >= 0.5, "futility stops {f}");
}

#[test]
fn toxic_curve_stops_for_toxicity() {
    let config = Stage2Config::default();
    let truth = EfficacyTruth {
        ttp: TrueTtp::Spline {
            params: TtpParams::constant_median(config.med0, 2.0),
        },
        dlt_rate: Some(0.8),
    };
    let f = stop_fraction(&truth, &config, StopReason::Toxicity);
    assert!(f >= 0.95, "toxicity stops {f}");
}

#[test]
fn same_seed_same_trajectory() {
    let config = Stage2Config::default();
    let truth = combidose::harness::scenario::shaped_efficacy(combidose::stage2::MedianShape::MidPeak, 2.0, config.med0);
    let curve = calibrated_curve();
    let a = run_stage2(&curve, &DoseSpace::default(), &truth, &config, 5).unwrap();
    let b = run_stage2(&curve, &DoseSpace::default(), &truth, &config, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.sample_size(), config.n_max);
    for p in &a.patients {
        assert!((0.0..=1.0).contains(&p.z));
        let on_curve = curve.project_dose(&p.dose).unwrap();
        assert!((on_curve - p.z).abs() < 1e-9);
    }
}
