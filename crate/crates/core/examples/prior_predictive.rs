//! Quantiles of the median time to progression implied by the stage-2 prior.
//!
//! `cargo run --release --example prior_predictive -- [draws] [out.csv]`

use std::path::Path;

use combidose::report::prior_predictive_report;
use combidose::TtpPriorConfig;

fn main() -> combidose::Result<()> {
    let mut args = std::env::args().skip(1);
    let draws: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let table = prior_predictive_report(&TtpPriorConfig::default(), draws, 1)?;
    println!("{:>4} {:>12} {:>12} {:>12}", "z", "5%", "50%", "95%");
    for r in &table.rows {
        println!("{:>4.1} {:>12.3e} {:>12.3e} {:>12.3e}", r.z, r.q05, r.q50, r.q95);
    }
    if let Some(path) = args.next() {
        table.write_csv(Path::new(&path))?;
        println!("wrote {path}");
    }
    Ok(())
}
