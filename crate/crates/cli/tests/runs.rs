use std::path::Path;

use mcf_core::spectral::build_grid;
use mcflab::checkpoint::{self, CheckpointBody};
use mcflab::presets::{self, PRESETS};
use mcflab::report::RunReport;
use mcflab::{resume, run_experiment, ExperimentConfig, LabError, Outcome};

fn preset(name: &str) -> ExperimentConfig {
    presets::find(name).unwrap().config()
}

/// Coarser grid and looser integrator tolerance for quick runs.
fn reduced(mut cfg: ExperimentConfig) -> ExperimentConfig {
    cfg.nodes = 16;
    cfg.integrator.tol = 1e-8;
    cfg
}

fn complete(outcome: Outcome) -> RunReport {
    match outcome {
        Outcome::Complete { report, .. } => *report,
        other => panic!("expected a finished run, got {other:?}"),
    }
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn every_preset_runs_at_reduced_resolution() {
    // looser settings may miss tolerances; they must still run end to end
    let root = tempfile::tempdir().unwrap();
    for p in PRESETS {
        let cfg = reduced(p.config());
        let report = complete(run_experiment(&cfg, root.path()).unwrap_or_else(|e| panic!("{}: {e}", p.name)));
        assert!(!report.assertions.is_empty(), "{}", p.name);
        let dir = root.path().join(p.name);
        for f in &report.files {
            assert!(dir.join(f).is_file(), "{}: missing {f}", p.name);
        }
        let stored: RunReport = serde_json::from_slice(&read(&dir.join("report.json"))).unwrap();
        assert_eq!(stored.assertions, report.assertions);
        assert_eq!(stored.config, cfg);
        assert_eq!(stored.passed, report.assertions.iter().all(|a| a.pass));
    }
}

#[test]
fn every_preset_passes_at_full_resolution() {
    let root = tempfile::tempdir().unwrap();
    for p in PRESETS {
        let report = complete(run_experiment(&p.config(), root.path()).unwrap());
        let failed: Vec<_> = report.assertions.iter().filter(|a| !a.pass).collect();
        assert!(report.passed && failed.is_empty(), "{}: {failed:?}", p.name);
    }
}

#[test]
fn csv_output_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for name in ["non-c3", "lemma-sweep"] {
        let cfg = reduced(preset(name));
        let ra = complete(run_experiment(&cfg, a.path()).unwrap());
        complete(run_experiment(&cfg, b.path()).unwrap());
        for f in ra.files.iter().filter(|f| f.ends_with(".csv") || *f == "regularity.json") {
            assert_eq!(read(&a.path().join(name).join(f)), read(&b.path().join(name).join(f)), "{name}/{f}");
        }
    }
    // the header row is fixed
    let csv = String::from_utf8(read(&a.path().join("non-c3/series_rescaled.csv"))).unwrap();
    assert!(csv.starts_with("s,r_mean,w_norm,w_max,a0,a1,a2,"));
    let csv = String::from_utf8(read(&a.path().join("non-c3/arrival.csv"))).unwrap();
    assert!(csv.starts_with("rho,u_0,"));
}

fn final_spectrum(body: &CheckpointBody) -> Vec<f64> {
    let cfg = &body.config;
    let grid = build_grid(cfg.n, cfg.nodes).unwrap();
    let last = body.rescaled.as_ref().unwrap().trace.snapshots.last().unwrap();
    grid.analyze(&last.r).unwrap().coeffs
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = reduced(preset("rate-2n"));
    cfg.integrator.tol = 1e-9;
    let whole = complete(run_experiment(&cfg, root.path()).unwrap());

    let mut halted = cfg.clone();
    halted.output_dir = Some("halted".into());
    halted.horizon.pause_at = Some(0.5 * cfg.s_max());
    let ckpt = match run_experiment(&halted, root.path()).unwrap() {
        Outcome::Paused { checkpoint, time, .. } => {
            assert!(time >= 0.5 * cfg.s_max() && time < cfg.s_max());
            checkpoint
        }
        other => panic!("expected a pause, got {other:?}"),
    };
    assert!(!root.path().join("halted/report.json").exists());
    let resumed = complete(resume(&ckpt).unwrap());
    assert_eq!(resumed.assertions.len(), whole.assertions.len());
    assert_eq!(resumed.runs[0].snapshots, whole.runs[0].snapshots);

    let a = final_spectrum(&checkpoint::load(&root.path().join("rate-2n/checkpoint.json")).unwrap());
    let b = final_spectrum(&checkpoint::load(&ckpt).unwrap());
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff < 10.0 * cfg.integrator.tol, "{diff}");

    // resuming a finished run changes nothing
    let report = read(&root.path().join("halted/report.json"));
    match resume(&ckpt).unwrap() {
        Outcome::AlreadyComplete { passed, .. } => assert!(passed),
        other => panic!("expected a no-op, got {other:?}"),
    }
    assert_eq!(read(&root.path().join("halted/report.json")), report);
}

#[test]
fn pause_in_the_second_phase_resumes() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = reduced(preset("non-c3"));
    cfg.horizon.pause_at = Some(1.0);
    let ckpt = match run_experiment(&cfg, root.path()).unwrap() {
        Outcome::Paused { checkpoint, frame, .. } => {
            assert_eq!(frame, mcf_core::flow::Frame::Rescaled);
            checkpoint
        }
        other => panic!("expected a pause, got {other:?}"),
    };
    let body = checkpoint::load(&ckpt).unwrap();
    assert!(body.mcf.is_none() && !body.rescaled.as_ref().unwrap().is_finished());
    let report = complete(resume(&ckpt).unwrap());
    assert!(report.passed, "{:?}", report.assertions);
    assert!(report.singularity.is_some() && report.regularity.is_some());
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = reduced(preset("rate-2n"));
    cfg.horizon.pause_at = Some(2.0);
    let Outcome::Paused { checkpoint: path, .. } = run_experiment(&cfg, root.path()).unwrap() else {
        panic!("expected a pause");
    };
    let text = std::fs::read_to_string(&path).unwrap();

    // flip one digit inside the body
    let at = text.find("\"time\":").unwrap() + 8;
    let mut bytes = text.clone().into_bytes();
    bytes[at] = if bytes[at] == b'1' { b'2' } else { b'1' };
    std::fs::write(&path, &bytes).unwrap();
    match resume(&path) {
        Err(LabError::CorruptSnapshot(msg)) => assert!(msg.contains("checksum mismatch"), "{msg}"),
        other => panic!("expected a checksum failure, got {other:?}"),
    }

    std::fs::write(&path, text.replacen("\"version\":1", "\"version\":7", 1)).unwrap();
    assert!(matches!(resume(&path), Err(LabError::VersionMismatch { found: 7, expected: 1 })));

    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(matches!(resume(&path), Err(LabError::CorruptSnapshot(_))));

    // an intact file still resumes
    std::fs::write(&path, &text).unwrap();
    assert!(complete(resume(&path).unwrap()).passed);
}

#[test]
fn checkpoint_round_trips_exactly() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = reduced(preset("non-c3"));
    cfg.horizon.pause_at = Some(3.0);
    let Outcome::Paused { checkpoint: path, .. } = run_experiment(&cfg, root.path()).unwrap() else {
        panic!("expected a pause");
    };
    let body = checkpoint::load(&path).unwrap();
    let again = checkpoint::decode(&checkpoint::encode(&body).unwrap()).unwrap();
    assert_eq!(again, body);
    assert_eq!(body.config, cfg);
}

#[test]
fn invalid_configs_do_not_run() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = preset("rate-2n");
    cfg.initial.amplitude = 0.06;
    assert!(matches!(run_experiment(&cfg, root.path()), Err(LabError::Config { .. })));
    assert_eq!(std::fs::read_dir(root.path()).unwrap().count(), 0);
}
