mod common;

use std::fs;
use std::process::Command;

use common::{load_corpus, small_simulation, write_corpus};
use farfield::config::PipelineConfig;
use farfield::manifest::Manifest;
use farfield::rttm::{read_rttm, read_session_rttm};
use farfield::sim::run_simulation;
use farfield::Pipeline;
use farfield_core::metrics::compute_der;
use tempfile::TempDir;

fn simulated() -> (TempDir, Manifest) {
    let dir = TempDir::new().unwrap();
    let corpus = write_corpus(dir.path(), 4, 4, 8000);
    let m = run_simulation(&small_simulation(5), &load_corpus(&corpus), &dir.path().join("sim")).unwrap();
    (dir, m)
}

fn quick_config() -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.preprocess.block_seconds = 10.0;
    c.gss.iterations = 3;
    c
}

#[test]
fn full_run_scores_and_reuses_cache() {
    let (dir, manifest) = simulated();
    let run = dir.path().join("run");
    let p = Pipeline::new(quick_config(), manifest.clone(), &run).unwrap();
    let first = p.run_full().unwrap();
    let id = &manifest.sessions[0].id;
    let score = &first.scores[id];
    assert_eq!(score.ref_speakers, score.hyp_speakers);
    assert!(score.der.der < 0.1, "DER {}", score.der.der);
    assert!(score.mean_si_sdr.is_some());
    let turns = &first.finals[id].turns;
    assert_eq!(first.separated[id].len(), turns.len());
    for (_, path) in &first.separated[id] {
        assert!(path.exists());
    }
    for f in ["config.toml", "manifest.toml", "score/report.txt"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let ext = read_session_rttm(&run.join("fusion").join(id).join("extended.rttm"), id).unwrap();
    assert_eq!(ext.num_speakers(), first.finals[id].num_speakers());

    let pre = p.run_preprocess().unwrap();
    assert!(pre.iter().all(|o| o.cached));
    let second = p.run_full().unwrap();
    assert_eq!(first.finals, second.finals);
    assert_eq!(first.scores, second.scores);
}

#[test]
fn changed_settings_invalidate_only_downstream_stages() {
    let (dir, manifest) = simulated();
    let run = dir.path().join("run");
    let mut cfg = quick_config();
    cfg.gss.enabled = false;
    Pipeline::new(cfg.clone(), manifest.clone(), &run).unwrap().run_full().unwrap();
    let key = |stage: &str| fs::read_to_string(run.join(stage).join(&manifest.sessions[0].id).join(".cache-key")).unwrap();
    let (pre, dia) = (key("preprocess"), key("diarize"));
    cfg.diarize.reject_thr = vec![10.0];
    let p = Pipeline::new(cfg, manifest.clone(), &run).unwrap();
    p.run_full().unwrap();
    assert!(p.run_preprocess().unwrap().iter().all(|o| o.cached));
    assert_eq!(key("preprocess"), pre);
    assert_ne!(key("diarize"), dia);
}

#[test]
fn reference_scoring_is_consistent_with_final_rttm() {
    let (dir, manifest) = simulated();
    let mut cfg = quick_config();
    cfg.gss.enabled = false;
    let s = Pipeline::new(cfg, manifest.clone(), dir.path().join("run")).unwrap().run_full().unwrap();
    let m = &manifest.sessions[0];
    let reference = read_session_rttm(m.reference.as_ref().unwrap(), &m.id).unwrap();
    let written = read_rttm(&dir.path().join("run/final").join(format!("{}.rttm", m.id))).unwrap();
    let der = compute_der(&reference, &written[&m.id], 0.0).unwrap();
    assert!((der.der - s.scores[&m.id].der.der).abs() < 1e-12);
}

fn farfield() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_farfield"));
    c.env("RUST_LOG", "warn");
    c
}

#[test]
fn cli_exit_codes() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "seed = 1\nunknown_key = 3\n").unwrap();
    let m = dir.path().join("m.toml");
    fs::write(&m, "[[session]]\nid = \"a\"\nwavs = [\"missing.wav\"]\n").unwrap();
    let run = dir.path().join("run");
    let status = |args: &[&str]| farfield().args(args).status().unwrap().code();
    let (m, bad, run) = (m.to_str().unwrap(), bad.to_str().unwrap(), run.to_str().unwrap());
    assert_eq!(status(&["run", "--manifest", m, "--config", bad, "--run-dir", run]), Some(2));
    assert_eq!(status(&["run", "--manifest", m, "--run-dir", run]), Some(3));
    assert_eq!(status(&["run", "--run-dir", run]), Some(2));
    assert_eq!(status(&["no-such-command"]), Some(2));
}

#[test]
fn cli_simulate_fuse_score_and_gss() {
    let dir = TempDir::new().unwrap();
    let corpus = write_corpus(dir.path(), 4, 4, 8000);
    let rooms = dir.path().join("rooms.toml");
    fs::write(
        &rooms,
        "sessions = 1\nduration = 15.0\nspeakers = 2\nchannels = 2\nsample_rate = 8000\nmax_order = 4\n[rooms]\nt60 = [0.2, 0.3]\n",
    )
    .unwrap();
    let sim = dir.path().join("sim");
    let ok = farfield()
        .args(["simulate", "--rooms"])
        .arg(&rooms)
        .arg("--corpus")
        .arg(&corpus)
        .arg("--out")
        .arg(&sim)
        .status()
        .unwrap();
    assert!(ok.success());
    let rttm = sim.join("sim000/sim000.rttm");
    assert!(rttm.exists() && sim.join("sim000/sim000.json").exists() && sim.join("sim000/sim000.wav").exists());

    let list = dir.path().join("fuse.toml");
    fs::write(
        &list,
        format!(
            "[[hypothesis]]\npath = \"{0}\"\n[[hypothesis]]\npath = \"{0}\"\nweight = 2.0\n",
            rttm.display()
        ),
    )
    .unwrap();
    let fused = dir.path().join("hyp/fused.rttm");
    assert!(farfield().arg("fuse").arg(&list).arg("-o").arg(&fused).status().unwrap().success());
    let out = farfield()
        .arg("score")
        .arg("--ref")
        .arg(sim.join("sim000"))
        .arg("--hyp")
        .arg(dir.path().join("hyp"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    let der_row = table.lines().find(|l| l.starts_with("DER%")).unwrap();
    assert!(der_row.split_whitespace().skip(1).all(|v| v == "0.00"), "{table}");

    let seg = read_session_rttm(&rttm, "sim000").unwrap();
    let frames = (15.0f64 / 0.1).ceil() as usize;
    let act = farfield_core::fusion::SoftActivity::from_segmentation(&seg, frames, 0.1).unwrap();
    let act_path = dir.path().join("a.act");
    farfield::binfmt::write_activity(&act_path, &act).unwrap();
    let gss_out = dir.path().join("gss");
    let ok = farfield()
        .args(["gss", "--wav"])
        .arg(sim.join("sim000/sim000.wav"))
        .arg("--rttm")
        .arg(&rttm)
        .arg("--activity")
        .arg(&act_path)
        .args(["--iterations", "2", "--no-wpe", "--out"])
        .arg(&gss_out)
        .status()
        .unwrap();
    assert!(ok.success());
    assert_eq!(fs::read_dir(&gss_out).unwrap().count(), seg.turns.len());
}
