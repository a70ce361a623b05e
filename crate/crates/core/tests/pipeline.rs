use rrmon_core::harness::{
    emit_figure_data, evaluate, run_pipeline, write_jsonl, Estimator, EvaluationReport, GroundTruthSeries, RunConfig,
};
use rrmon_core::synthesis::{synthesize_frames, FrameSequence, SubjectScenario, SwayComponent};
use rrmon_core::FrameSequence64;

fn config(estimator: Estimator) -> RunConfig {
    RunConfig {
        estimator,
        ..RunConfig::default()
    }
}

fn steady(rate: f64, duration_s: f64) -> SubjectScenario {
    SubjectScenario {
        breath_rate_bpm: rate,
        breath_amp_m: 3e-3,
        duration_s,
        seed: 11,
        ..SubjectScenario::default()
    }
}

fn frames(cfg: &RunConfig, s: &SubjectScenario) -> FrameSequence64 {
    synthesize_frames(&cfg.radar, s).unwrap()
}

fn std_of(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

#[test]
fn constant_rate_settles_within_tolerance() {
    let cfg = config(Estimator::AdaptiveKalman);
    let seq = frames(&cfg, &steady(18.0, 60.0));
    let run = run_pipeline(&cfg, &seq).unwrap();
    let fs = cfg.radar.frame_rate_hz;
    assert_eq!(run.records.len(), seq.len() - cfg.window_frames() + 1);
    let tail: Vec<_> = run.records.iter().filter(|r| r.t >= 50.0 - 1e-9).collect();
    assert!(tail.len() as f64 >= 10.0 * fs - 1.0);
    for r in tail {
        let bpm = r.bpm.unwrap();
        assert!((bpm - 18.0).abs() <= 1.5, "t={} bpm={bpm}", r.t);
    }
}

#[test]
fn classical_locks_onto_strong_sway() {
    let cfg = config(Estimator::Classical);
    let s = SubjectScenario {
        sway_components: vec![SwayComponent::new(0.15, 8e-3, 0.3)],
        ..steady(18.0, 60.0)
    };
    let run = run_pipeline(&cfg, &frames(&cfg, &s)).unwrap();
    let locked = run
        .records
        .iter()
        .filter_map(|r| r.bpm)
        .filter(|b| (b - 9.0).abs() <= 1.5)
        .count();
    assert!(locked > 0);
}

#[test]
fn zero_duration_gives_empty_stream() {
    let cfg = config(Estimator::AdaptiveKalman);
    let run = run_pipeline(&cfg, &frames(&cfg, &steady(18.0, 0.0))).unwrap();
    assert!(run.records.is_empty());
    assert!(run.latencies.is_empty());
}

#[test]
fn identical_inputs_give_identical_jsonl() {
    let cfg = config(Estimator::AdaptiveKalman);
    let s = SubjectScenario {
        breath_rate_jitter: 0.08,
        sway_components: vec![SwayComponent::new(0.3, 1e-3, 0.0)],
        ..steady(14.0, 40.0)
    };
    let bytes = || {
        let run = run_pipeline(&cfg, &frames(&cfg, &s)).unwrap();
        let mut out = Vec::new();
        write_jsonl(&run.records, &mut out).unwrap();
        out
    };
    let a = bytes();
    assert!(!a.is_empty());
    assert_eq!(a, bytes());
}

#[test]
fn estimates_only_see_past_frames() {
    let cfg = config(Estimator::AdaptiveKalman);
    let s = SubjectScenario {
        breath_rate_jitter: 0.08,
        ..steady(22.0, 45.0)
    };
    let full = frames(&cfg, &s);
    let cut = 38 * 20;
    let prefix = FrameSequence {
        frames: full.frames[..cut].to_vec(),
        truth: full.truth[..cut].to_vec(),
        ..full.clone()
    };
    let a = run_pipeline(&cfg, &full).unwrap();
    let b = run_pipeline(&cfg, &prefix).unwrap();
    assert!(!b.records.is_empty());
    assert_eq!(&a.records[..b.records.len()], &b.records[..]);
}

#[test]
fn tracker_converges_on_constant_subject() {
    let cfg = config(Estimator::AdaptiveKalman);
    let run = run_pipeline(&cfg, &frames(&cfg, &steady(18.0, 33.0))).unwrap();
    assert!(run.traces.len() >= 60);
    let last = run.traces[59];
    assert!((last.rate_bpm - 18.0).abs() < 0.6, "x = {}", last.rate_bpm);
}

#[test]
fn filtered_sequence_is_smoother_than_measurements() {
    let cfg = config(Estimator::AdaptiveKalman);
    for (rate, seed) in [(12.0, 1), (18.0, 2), (26.0, 3)] {
        let s = SubjectScenario {
            breath_rate_jitter: 0.1,
            breath_rate_corr_s: 2.0,
            seed,
            ..steady(rate, 60.0)
        };
        let run = run_pipeline(&cfg, &frames(&cfg, &s)).unwrap();
        let z: Vec<f64> = run.traces.iter().filter_map(|t| t.z).collect();
        let x: Vec<f64> = run
            .traces
            .iter()
            .filter(|t| t.z.is_some())
            .map(|t| t.rate_bpm)
            .collect();
        assert!(std_of(&x) < std_of(&z), "rate {rate}: {} vs {}", std_of(&x), std_of(&z));
    }
}

fn snapshot_dir(cfg: &RunConfig) -> (tempfile::TempDir, rrmon_core::harness::PipelineRun<f64>) {
    let dir = tempfile::tempdir().unwrap();
    let s = SubjectScenario {
        sway_components: vec![SwayComponent::new(0.15, 2e-3, 0.0)],
        ..steady(14.0, 35.0)
    };
    let seq = frames(cfg, &s);
    let run = run_pipeline(cfg, &seq).unwrap();
    let truth = GroundTruthSeries::from_truth(&seq.truth, cfg.radar.frame_rate_hz);
    let report = EvaluationReport::from_subjects(vec![evaluate("s", &run.records, &truth).unwrap()]);
    let (spec, peaks) = run.snapshot.as_ref().unwrap();
    emit_figure_data(&report, Some((spec, peaks)), dir.path()).unwrap();
    (dir, run)
}

#[test]
fn spectrum_snapshot_marks_every_peak() {
    let cfg = config(Estimator::AdaptiveKalman);
    let (dir, run) = snapshot_dir(&cfg);
    let peaks = &run.snapshot.as_ref().unwrap().1;
    let mut rdr = csv::Reader::from_path(dir.path().join("spectrum_snapshot.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["bpm", "power", "peak_rank", "cm"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let marked: Vec<_> = rows.iter().filter(|r| !r[2].is_empty()).collect();
    assert_eq!(marked.len(), peaks.len());
    assert_eq!(marked.len(), cfg.peak_count);
    assert!(marked.iter().all(|r| r[3].parse::<f64>().is_ok()));
    for name in ["mae_hist.csv", "std_hist.csv"] {
        let mut rdr = csv::Reader::from_path(dir.path().join(name)).unwrap();
        assert_eq!(rdr.headers().unwrap(), vec!["bin_low", "bin_high", "count"]);
        let total: usize = rdr.records().map(|r| r.unwrap()[2].parse::<usize>().unwrap()).sum();
        assert_eq!(total, 1);
    }
}

#[test]
fn figure_data_is_byte_stable() {
    let cfg = config(Estimator::AdaptiveKalman);
    let (a, _) = snapshot_dir(&cfg);
    let (b, _) = snapshot_dir(&cfg);
    for name in ["spectrum_snapshot.csv", "mae_hist.csv", "std_hist.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap()
        );
    }
}

#[test]
fn empty_report_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let report = EvaluationReport::from_subjects(Vec::new());
    let written = emit_figure_data::<f64>(&report, None, dir.path()).unwrap();
    assert_eq!(written.len(), 2);
    for name in ["mae_hist.csv", "std_hist.csv"] {
        assert_eq!(
            std::fs::read_to_string(dir.path().join(name)).unwrap(),
            "bin_low,bin_high,count\n"
        );
    }
}

#[test]
fn single_precision_tracks_double() {
    let cfg = config(Estimator::AdaptiveKalman);
    let s = steady(18.0, 40.0);
    let a = run_pipeline(&cfg, &synthesize_frames::<f64>(&cfg.radar, &s).unwrap()).unwrap();
    let b = run_pipeline(&cfg, &synthesize_frames::<f32>(&cfg.radar, &s).unwrap()).unwrap();
    assert_eq!(a.records.len(), b.records.len());
    let (x, y) = (
        a.records.last().unwrap().bpm.unwrap(),
        b.records.last().unwrap().bpm.unwrap(),
    );
    assert!((x - y).abs() < 0.5, "{x} vs {y}");
}
