mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use common::{load_corpus, small_simulation, write_corpus};
use farfield::commands::{fuse_files, greedy_select, FuseList, HypothesisRef, SelectionStep};
use farfield::config::PipelineConfig;
use farfield::manifest::Manifest;
use farfield::pipeline::read_cluster_ids;
use farfield::rttm::{read_rttm, read_session_rttm, write_rttm};
use farfield::sim::run_simulation;
use farfield::Pipeline;
use farfield_core::metrics::compute_der;
use farfield_core::{Segmentation, Turn};
use tempfile::TempDir;

fn farfield() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_farfield"));
    c.env("RUST_LOG", "warn");
    c
}

fn seg(turns: &[(&str, f64, f64)]) -> Segmentation {
    Segmentation::new("dev", turns.iter().map(|&(k, s, e)| Turn::new(k, s, e)).collect()).unwrap()
}

/// Reference speaker A on [0, 10); hypothesis `i` misses a different
/// 2-second stretch, so any two of them vote the gaps back in.
fn complementary(dir: &Path) -> (FuseList, Segmentation) {
    let reference = seg(&[("A", 0.0, 10.0)]);
    let hyps = [
        seg(&[("x", 2.0, 10.0)]),
        seg(&[("y", 0.0, 4.0), ("y", 6.0, 10.0)]),
        seg(&[("z", 0.0, 8.0)]),
    ];
    let list = FuseList {
        hypotheses: hyps
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let path = dir.join(format!("h{i}.rttm"));
                write_rttm(&path, h).unwrap();
                HypothesisRef { path, weight: 1.0 }
            })
            .collect(),
    };
    (list, reference)
}

#[test]
fn greedy_selection_stops_when_der_stops_falling() {
    let dir = TempDir::new().unwrap();
    let (list, reference) = complementary(dir.path());
    let refs = [("dev".to_string(), reference.clone())].into_iter().collect();
    let steps = greedy_select(&list, &refs, 0.0).unwrap();
    assert_eq!(
        steps,
        vec![SelectionStep { index: 0, der: 0.2 }, SelectionStep { index: 1, der: 0.0 }]
    );

    let perfect = FuseList {
        hypotheses: vec![
            list.hypotheses[2].clone(),
            {
                let path = dir.path().join("perfect.rttm");
                write_rttm(&path, &reference).unwrap();
                HypothesisRef { path, weight: 1.0 }
            },
        ],
    };
    let steps = greedy_select(&perfect, &refs, 0.0).unwrap();
    assert_eq!(steps, vec![SelectionStep { index: 1, der: 0.0 }]);
}

#[test]
fn cli_fuse_with_selection_writes_fused_subset() {
    let dir = TempDir::new().unwrap();
    let (list, reference) = complementary(dir.path());
    let toml: String = list
        .hypotheses
        .iter()
        .map(|h| format!("[[hypothesis]]\npath = \"{}\"\n", h.path.display()))
        .collect();
    let list_path = dir.path().join("list.toml");
    fs::write(&list_path, toml).unwrap();
    let ref_path = dir.path().join("ref.rttm");
    write_rttm(&ref_path, &reference).unwrap();
    let out = dir.path().join("fused.rttm");
    let run = farfield()
        .arg("fuse")
        .arg(&list_path)
        .arg("-o")
        .arg(&out)
        .arg("--select-against")
        .arg(&ref_path)
        .output()
        .unwrap();
    assert!(run.status.success());
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.starts_with("selected")).count(), 2, "{stdout}");
    let subset = FuseList { hypotheses: list.hypotheses[..2].to_vec() };
    assert_eq!(read_rttm(&out).unwrap(), fuse_files(&subset).unwrap());
    let fused = read_session_rttm(&out, "dev").unwrap();
    assert_eq!(compute_der(&reference, &fused, 0.0).unwrap().der, 0.0);
}

fn simulated(dir: &Path) -> Manifest {
    let corpus = write_corpus(dir, 4, 4, 8000);
    run_simulation(&small_simulation(9), &load_corpus(&corpus), &dir.join("sim")).unwrap();
    Manifest::load(&dir.join("sim/manifest.toml")).unwrap()
}

#[test]
fn cli_preprocess_flags_override_config() {
    let dir = TempDir::new().unwrap();
    let m = simulated(dir.path());
    let manifest = dir.path().join("sim/manifest.toml");
    let run_dir = dir.path().join("run");
    let ok = farfield()
        .arg("preprocess")
        .arg("--manifest")
        .arg(&manifest)
        .arg("--run-dir")
        .arg(&run_dir)
        .args(["--no-wpe", "--fraction", "1.0", "--percentile", "0.99", "--target-peak", "0.5"])
        .status()
        .unwrap();
    assert!(ok.success());
    let session = &m.sessions[0].id;
    let pre = run_dir.join("preprocess").join(session);
    assert!(!pre.join("wpe.wav").exists());
    let ranking = fs::read_to_string(pre.join("ranking.tsv")).unwrap();
    let rows: Vec<&str> = ranking.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.ends_with("\tyes")), "{ranking}");
    let audio = farfield::wav::read_wav(&pre.join("orig.wav")).unwrap();
    let peak = audio.channels().iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!((peak - 0.5).abs() < 1e-3, "peak {peak}");

    let bad = farfield()
        .arg("preprocess")
        .arg("--manifest")
        .arg(&manifest)
        .arg("--run-dir")
        .arg(&run_dir)
        .args(["--percentile", "2"])
        .status()
        .unwrap();
    assert_eq!(bad.code(), Some(2));
}

#[test]
fn non_speech_flags_reach_the_clustering() {
    let dir = TempDir::new().unwrap();
    let m = simulated(dir.path());
    let flags = dir.path().join("flags.txt");
    fs::write(&flags, "0 1\n2 3 4 5 6 7\n").unwrap();
    assert_eq!(read_cluster_ids(&flags).unwrap(), (0..8).collect::<Vec<_>>());
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "0 x").unwrap();
    assert_eq!(read_cluster_ids(&bad).unwrap_err().exit_code(), 3);

    let mut cfg = PipelineConfig::default();
    cfg.preprocess.block_seconds = 10.0;
    let diarize = |manifest: Manifest, run: &str| {
        let p = Pipeline::new(cfg.clone(), manifest, &dir.path().join(run)).unwrap();
        let pre = p.run_preprocess().unwrap();
        p.run_diarize_grid(&pre)
    };
    let baseline = diarize(m.clone(), "plain").unwrap();

    let out_of_range = dir.path().join("none.txt");
    fs::write(&out_of_range, "99").unwrap();
    let mut flagged = m.clone();
    flagged.sessions[0].embeddings.iter_mut().for_each(|e| e.non_speech = Some(out_of_range.clone()));
    assert_eq!(diarize(flagged, "ignored").unwrap(), baseline);

    let mut all = m.clone();
    all.sessions[0].embeddings.iter_mut().for_each(|e| e.non_speech = Some(flags.clone()));
    let err = diarize(all, "all").unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
}
