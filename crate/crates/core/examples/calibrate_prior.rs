//! Calibrate the stage-1 prior so that the prior mean DLT probability at the
//! reference combination hits the target, optionally for another target.
//!
//! `cargo run --release --example calibrate_prior -- [theta]`

use combidose::calibration::{calibrate_prior, prior_mean_prob_dlt, CalibrationSpec, DEFAULT_CALIBRATED_PRIOR};

fn main() -> combidose::Result<()> {
    let mut spec = CalibrationSpec::default();
    if let Some(theta) = std::env::args().nth(1).and_then(|s| s.parse().ok()) {
        spec.theta = theta;
    }
    let result = calibrate_prior(&spec)?;
    println!("target {} at ({:.4}, {:.4})", spec.theta, spec.x, spec.y);
    println!("calibrated prior: {:?}", result.prior);
    println!("prior mean P(DLT) {:.4}", result.prior_mean_prob);

    // fresh draws give an independent check of the calibrated mean
    let check = prior_mean_prob_dlt(&result.prior, spec.x, spec.y, 200_000, spec.seed + 1)?;
    println!("check with 200000 fresh draws: {check:.4}");
    if spec == CalibrationSpec::default() {
        println!("matches the shipped default: {}", result.prior == DEFAULT_CALIBRATED_PRIOR);
    }
    Ok(())
}
