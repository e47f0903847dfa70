use std::path::{Path, PathBuf};

use combidose::harness::{aggregate, builtin_pack, run_campaign, CampaignKind, Replicate, Scenario};
use combidose::model::{DoseCombination, MtdCurve};
use combidose::report::{emit_reports, to_json_string};
use combidose::stage1::{Stage1Patient, Stage1Result};
use combidose::stage2::{ProbCurve, StopReason, Stage2Patient, Stage2Result};

fn scenario(name: &str) -> Scenario {
    builtin_pack().unwrap().get(name).unwrap().clone()
}

fn dose(x: f64, y: f64) -> DoseCombination {
    DoseCombination { x, y, raw_x: x, raw_y: y }
}

fn stage1(n: usize, dlts: usize, curve: Option<MtdCurve>) -> Stage1Result {
    Stage1Result {
        patients: (0..n)
            .map(|i| Stage1Patient {
                patient_id: i + 1,
                cohort: i / 2 + 1,
                dose: dose(0.3, 0.5),
                dlt: i < dlts,
                alpha: 0.25,
            })
            .collect(),
        stopped_for_safety: curve.is_none(),
        posterior_medians: curve.map(|c| c.params),
        curve,
    }
}

fn stage2(n: usize, later_z: f64, max_prob: f64, reason: StopReason) -> Stage2Result {
    Stage2Result {
        patients: (0..n)
            .map(|i| Stage2Patient {
                patient_id: i + 1,
                cohort: if i < 10 { 1 } else { 2 + (i - 10) / 5 },
                z: if i < 10 { i as f64 / 9.0 } else { later_z },
                dose: dose(0.5, 0.5),
                enroll_time: i as f64,
                event_time: 3.0,
                dlt: false,
            })
            .collect(),
        records: Vec::new(),
        prob_curve: ProbCurve {
            grid: combidose::stage2::unit_grid(101),
            probs: vec![max_prob; 101],
        },
        z_opt: 0.0,
        max_prob,
        reject_h0: false,
        stop_reason: reason,
        calendar_time: n as f64,
        followup_cap: 6.0,
        analyses: 1,
    }
}

fn fixture() -> (Scenario, Vec<Replicate>) {
    let s = scenario("midpeak-es2");
    let truth = s.true_curve().unwrap();
    let rep = |s1, s2, null| Replicate { seed: 0, stage1: Some(s1), stage2: s2, stage2_null: null };
    let reps = vec![
        rep(
            stage1(30, 9, Some(truth)),
            Some(stage2(30, 0.5, 0.95, StopReason::Completed)),
            Some(stage2(30, 0.5, 0.85, StopReason::Completed)),
        ),
        rep(
            stage1(30, 15, Some(truth)),
            Some(stage2(30, 0.05, 0.7, StopReason::Completed)),
            Some(stage2(10, 0.05, 0.05, StopReason::Futility)),
        ),
        rep(stage1(6, 6, None), None, None),
        rep(
            stage1(30, 6, Some(truth)),
            Some(stage2(15, 1.0, 0.92, StopReason::Toxicity)),
            Some(stage2(30, 1.0, 0.95, StopReason::Completed)),
        ),
    ];
    (s, reps)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

#[test]
fn aggregates_match_hand_computation() {
    let (s, reps) = fixture();
    let oc = aggregate(&s, CampaignKind::FullTrial, 3, &reps).unwrap();
    assert_eq!(oc.replicates, 4);
    let s1 = oc.stage1.unwrap();
    assert!(close(s1.mean_dlt_rate, 0.5));
    assert!(close(s1.pct_trials_dlt_above, 0.5));
    assert!(close(s1.safety_stop_prob, 0.25));
    assert!(close(s1.curve_missing_prob, 0.25));
    assert!(close(s1.mean_sample_size, 24.0));
    assert!(s1.pointwise_bias.unwrap().iter().all(|b| b.abs() < 1e-12));
    for sel in &s1.percent_selection {
        assert!(sel.fraction.iter().all(|&f| close(f, 0.75)));
    }

    let s2 = oc.stage2.unwrap();
    assert!(close(s2.reached_stage2, 0.75));
    let row = |d: f64| s2.decisions.iter().find(|r| r.delta_u == d).unwrap();
    assert!(close(row(0.8).power, 0.25));
    assert!(close(row(0.8).type1.unwrap(), 0.5));
    assert!(close(row(0.8).type1_plus_type2.unwrap(), 1.25));
    assert!(close(row(0.9).power, 0.25));
    assert!(close(row(0.9).type1.unwrap(), 0.25));
    assert!(close(s2.power, 0.25));

    let st = &s2.stopping;
    assert!(close(st.early_stop_prob, 1.0 / 3.0));
    assert!(close(st.toxicity_stop_prob, 1.0 / 3.0));
    assert!(close(st.futility_stop_prob, 0.0));
    assert!(close(st.avg_sample_size, 25.0));
    assert!(close(st.avg_sample_size_at_stop.unwrap(), 15.0));
    let null = s2.stopping_null.as_ref().unwrap();
    assert!(close(null.futility_stop_prob, 1.0 / 3.0));
    assert!(close(null.avg_sample_size, 70.0 / 3.0));
    assert!(close(null.avg_sample_size_at_stop.unwrap(), 10.0));

    let h = &s2.allocation_histogram;
    let mut counts = vec![0u64; 10];
    counts[0] = 20;
    counts[5] = 20;
    counts[9] = 5;
    assert_eq!(h.counts, counts);
    assert!(close(s2.correct_allocation.unwrap(), 20.0 / 45.0));
    assert!(s2.mean_prob_curve.probs.iter().all(|&p| close(p, (0.95 + 0.7 + 0.92) / 3.0)));
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

#[test]
fn fixture_reports_match_golden_files() {
    let (s, reps) = fixture();
    let oc = aggregate(&s, CampaignKind::FullTrial, 3, &reps).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = emit_reports(&oc, dir.path(), "fixture").unwrap();
    assert_eq!(written.len(), 6);
    let bless = std::env::var_os("COMBIDOSE_BLESS").is_some();
    for path in written {
        let name = path.file_name().unwrap();
        let golden = golden_dir().join(name);
        let got = std::fs::read(&path).unwrap();
        if bless {
            std::fs::create_dir_all(golden_dir()).unwrap();
            std::fs::write(&golden, &got).unwrap();
        }
        let want = std::fs::read(&golden).unwrap_or_else(|e| panic!("{}: {e}", golden.display()));
        assert!(got == want, "{} differs from its golden copy", name.to_string_lossy());
    }
}

#[test]
fn empty_reports_are_errors() {
    let (s, reps) = fixture();
    let mut oc = aggregate(&s, CampaignKind::FullTrial, 3, &reps).unwrap();
    oc.stage1 = None;
    oc.stage2 = None;
    assert!(emit_reports(&oc, tempfile::tempdir().unwrap().path(), "x").is_err());
    assert!(aggregate(&s, CampaignKind::FullTrial, 3, &[]).is_err());
}

fn emitted_bytes(s: &Scenario, kind: CampaignKind, threads: usize) -> Vec<(String, Vec<u8>)> {
    let oc = run_campaign(s, kind, threads, 2024).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_reports(&oc, dir.path(), &s.file_stem())
        .unwrap()
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(p).unwrap()))
        .collect()
}

#[test]
fn reports_do_not_depend_on_parallelism() {
    let mut s1 = scenario("calibrated");
    s1.replicates = 6;
    let mut full = scenario("midpeak-es2");
    full.replicates = 3;
    for (s, kind) in [(&s1, CampaignKind::Stage1), (&full, CampaignKind::FullTrial)] {
        let one = emitted_bytes(s, kind, 1);
        assert_eq!(one, emitted_bytes(s, kind, 3));
        assert_eq!(one, emitted_bytes(s, kind, 1));
    }
}

#[test]
fn campaign_json_round_trips() {
    let mut s = scenario("flat-es2");
    s.replicates = 2;
    let oc = run_campaign(&s, CampaignKind::Stage2, 1, 9).unwrap();
    let text = to_json_string(&oc).unwrap();
    let back: combidose::harness::OperatingCharacteristics = serde_json::from_str(&text).unwrap();
    assert_eq!(back, oc);
    assert_eq!(to_json_string(&back).unwrap(), text);
}
