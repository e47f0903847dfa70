//! Build the MTD contour of a toxicity model and walk along it.
//!
//! `cargo run --example mtd_curve`

use combidose::harness::calibrated_truth;
use combidose::model::{prob_dlt, DoseSpace, MtdCurve};
use combidose::Stage1Config;

fn main() -> combidose::Result<()> {
    let config = Stage1Config::default();
    let truth = calibrated_truth(&config.prior, config.theta)?;
    let curve = MtdCurve::new(truth, config.theta)?;
    let space = DoseSpace::default();

    println!("truth: {truth:?}");
    println!("curve spans x in [{:.4}, {:.4}]", curve.x_lo, curve.x_hi);
    println!("{:>5} {:>8} {:>8} {:>9} {:>9} {:>7}", "z", "x", "y", "raw_x", "raw_y", "P(DLT)");
    for i in 0..=10 {
        let z = i as f64 / 10.0;
        let d = curve.dose_at_z(z, &space)?;
        let p = prob_dlt(&truth, d.x, d.y)?;
        println!("{z:>5.1} {:>8.4} {:>8.4} {:>9.3} {:>9.3} {p:>7.4}", d.x, d.y, d.raw_x, d.raw_y);
    }

    // doses on the curve map back to their position; doses off it are rejected
    let d = curve.dose_at_z(0.37, &space)?;
    println!("dose ({:.4}, {:.4}) is at z = {:.4}", d.x, d.y, curve.project_dose(&d)?);
    if let Err(e) = curve.project_to_z(0.5, 0.2) {
        println!("(0.5, 0.2): {e}");
    }
    Ok(())
}
