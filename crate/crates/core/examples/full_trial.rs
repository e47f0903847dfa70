//! A complete two-stage trial: escalation to an estimated MTD curve, then
//! adaptive randomization along that estimate.
//!
//! `cargo run --release --example full_trial -- [seed]`

use combidose::harness::{calibrated_truth, replicate_seed};
use combidose::rng::{child_seed, label};
use combidose::stage1::run_stage1;
use combidose::stage2::{run_stage2, EfficacyTruth, MedianShape, TrueTtp};
use combidose::{Stage1Config, Stage2Config};

fn main() -> combidose::Result<()> {
    let master: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    // the same seed layout as replicate 0 of a campaign
    let seed = replicate_seed(master, 0);
    let s1 = Stage1Config::default();
    let s2 = Stage2Config::default();
    let tox = calibrated_truth(&s1.prior, s1.theta)?;

    let stage1 = run_stage1(&tox, &s1, child_seed(seed, label::STAGE1))?;
    let dlts = stage1.patients.iter().filter(|p| p.dlt).count();
    println!("stage 1: {} patients, {dlts} DLTs", stage1.patients.len());
    let Some(curve) = stage1.curve else {
        println!("no MTD curve (stopped for safety: {}), trial ends", stage1.stopped_for_safety);
        return Ok(());
    };
    println!("estimated curve over x in [{:.3}, {:.3}]", curve.x_lo, curve.x_hi);

    let truth = EfficacyTruth {
        ttp: TrueTtp::Shape {
            shape: MedianShape::EdgePeak,
            med0: s2.med0,
            effect_size: 2.0,
            drop: 1.0,
            weibull_k: 2.0,
        },
        // DLT probability along the estimated curve under the true model
        dlt_rate: None,
    };
    let stage2 = run_stage2(&curve, &s1.dose_space, &truth, &s2, child_seed(seed, label::STAGE2))?;
    println!(
        "stage 2: {:?}, n = {}, z_opt = {:.2} ({:.1}/{:.1} mg/m2), max prob {:.3}, reject H0: {}",
        stage2.stop_reason,
        stage2.sample_size(),
        stage2.z_opt,
        curve.dose_at_z(stage2.z_opt, &s1.dose_space)?.raw_x,
        curve.dose_at_z(stage2.z_opt, &s1.dose_space)?.raw_y,
        stage2.max_prob,
        stage2.reject_h0
    );
    Ok(())
}
