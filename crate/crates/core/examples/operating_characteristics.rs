//! Monte Carlo operating characteristics of a built-in scenario, written as
//! JSON and CSV reports.
//!
//! `cargo run --release --example operating_characteristics -- [scenario] [replicates] [kind] [out_dir]`
//!
//! `kind` is `stage1`, `stage2` (default) or `full_trial`.

use std::path::PathBuf;

use combidose::harness::{builtin_pack, run_campaign, CampaignKind};
use combidose::report::emit_reports;
use combidose::Error;

fn main() -> combidose::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map(String::as_str).unwrap_or("midpeak-es2");
    let replicates: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let kind = match args.get(2).map(String::as_str).unwrap_or("stage2") {
        "stage1" => CampaignKind::Stage1,
        "stage2" => CampaignKind::Stage2,
        "full_trial" => CampaignKind::FullTrial,
        other => return Err(Error::Config(format!("unknown kind {other:?}"))),
    };
    let out = PathBuf::from(args.get(3).map(String::as_str).unwrap_or("oc-reports"));

    let pack = builtin_pack()?;
    let mut scenario = pack
        .get(name)
        .ok_or_else(|| Error::Config(format!("no built-in scenario {name:?}")))?
        .clone();
    scenario.replicates = replicates;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let oc = run_campaign(&scenario, kind, threads, 2024)?;

    if let Some(s1) = &oc.stage1 {
        println!("stage 1: mean DLT rate {:.3}, safety stops {:.3}, no curve {:.3}", s1.mean_dlt_rate, s1.safety_stop_prob, s1.curve_missing_prob);
        for sel in &s1.percent_selection {
            let mean = sel.fraction.iter().sum::<f64>() / sel.fraction.len().max(1) as f64;
            println!("  mean percent selection within p = {}: {:.1}%", sel.p, 100.0 * mean);
        }
    }
    if let Some(s2) = &oc.stage2 {
        for row in &s2.decisions {
            println!("delta_u {:.2}: power {:.3}, type I {:?}", row.delta_u, row.power, row.type1);
        }
        println!(
            "early stop {:.3} (futility {:.3}, toxicity {:.3}), mean n {:.1}",
            s2.stopping.early_stop_prob, s2.stopping.futility_stop_prob, s2.stopping.toxicity_stop_prob, s2.stopping.avg_sample_size
        );
        println!("allocation by z decile: {:?}", s2.allocation_histogram.counts);
    }
    for p in emit_reports(&oc, &out, &scenario.file_stem())? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
