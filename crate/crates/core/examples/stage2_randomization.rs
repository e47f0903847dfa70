//! Adaptive randomization along a fixed MTD curve toward combinations with
//! long median time to progression.
//!
//! `cargo run --release --example stage2_randomization -- [seed]`

use combidose::harness::calibrated_truth;
use combidose::model::{DoseSpace, MtdCurve};
use combidose::stage2::{run_stage2, EfficacyTruth, MedianShape, TrueTtp};
use combidose::{Stage1Config, Stage2Config};

fn main() -> combidose::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let s1 = Stage1Config::default();
    let curve = MtdCurve::new(calibrated_truth(&s1.prior, s1.theta)?, s1.theta)?;
    let config = Stage2Config::default();
    let truth = EfficacyTruth {
        ttp: TrueTtp::Shape {
            shape: MedianShape::MidPeak,
            med0: config.med0,
            effect_size: 2.0,
            drop: 1.0,
            weibull_k: 2.0,
        },
        dlt_rate: None,
    };

    let result = run_stage2(&curve, &DoseSpace::default(), &truth, &config, seed)?;

    println!("{:>3} {:>6} {:>6} {:>7} {:>9}", "id", "cohort", "z", "enroll", "true med");
    for p in &result.patients {
        println!(
            "{:>3} {:>6} {:>6.3} {:>7.2} {:>9.2}",
            p.patient_id,
            p.cohort,
            p.z,
            p.enroll_time,
            truth.ttp.median(p.z)
        );
    }
    println!(
        "stop: {:?} after {} analyses, n = {}",
        result.stop_reason,
        result.analyses,
        result.sample_size()
    );
    println!("z_opt = {:.2}, max P(Med > Med0) = {:.3}, reject H0: {}", result.z_opt, result.max_prob, result.reject_h0);
    for (z, p) in result.prob_curve.grid.iter().zip(&result.prob_curve.probs).step_by(10) {
        println!("  P(Med({z:.1}) > {}) = {p:.3}", config.med0);
    }
    Ok(())
}
