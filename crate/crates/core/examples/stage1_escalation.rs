//! Simulate one stage-1 escalation and print the trajectory and the
//! estimated MTD curve.
//!
//! `cargo run --release --example stage1_escalation -- [seed] [trajectory.csv]`

use std::path::Path;

use combidose::harness::calibrated_truth;
use combidose::stage1::run_stage1;
use combidose::Stage1Config;

fn main() -> combidose::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);
    let csv = args.next();

    let config = Stage1Config::default();
    let truth = calibrated_truth(&config.prior, config.theta)?;
    let result = run_stage1(&truth, &config, seed)?;

    println!("{:>3} {:>6} {:>7} {:>7} {:>4} {:>6}", "id", "cohort", "raw_x", "raw_y", "dlt", "alpha");
    for p in &result.patients {
        println!(
            "{:>3} {:>6} {:>7.2} {:>7.2} {:>4} {:>6.3}",
            p.patient_id, p.cohort, p.dose.raw_x, p.dose.raw_y, u8::from(p.dlt), p.alpha
        );
    }
    println!("DLT rate {:.3}, stopped for safety: {}", result.dlt_rate(), result.stopped_for_safety);
    match &result.curve {
        Some(c) => {
            println!("posterior medians: {:?}", c.params);
            for z in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let (x, y) = c.point_at_z(z)?;
                println!("  z = {z:.2}: ({x:.4}, {y:.4})");
            }
        }
        None => println!("no MTD curve estimated"),
    }
    if let Some(path) = csv {
        result.write_trajectory_csv(Path::new(&path))?;
        println!("wrote {path}");
    }
    Ok(())
}
