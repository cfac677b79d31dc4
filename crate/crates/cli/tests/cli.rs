//! End-to-end tests driving the built binary over a synthesized corpus.

use std::path::{Path, PathBuf};
use std::process::Command;

use finefm::ingest::write_wav;
use finefm::synth;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_finefm")
}

/// Write a small two-species corpus (slow vs fast trills) and a manifest.
fn make_corpus(dir: &Path, per_species: usize) -> PathBuf {
    let mut manifest = String::from("path,species\n");
    for i in 0..per_species {
        for (species, rate) in [("slowtrill", 6_000.0), ("fasttrill", 60_000.0)] {
            let name = format!("{species}_{i}.wav");
            let mut clip = synth::triangle_fm(
                5_000.0,
                2_000.0,
                rate,
                0.13 * i as f64,
                1.0,
                48_000,
                0.6,
                &name,
            );
            synth::apply_syllable_envelope(&mut clip.samples, 48_000, 0.4, 0.1, 0.012);
            synth::add_noise_snr(&mut clip.samples, 30.0, 1000 + i as u64);
            write_wav(&clip, &dir.join(&name)).unwrap();
            manifest.push_str(&format!("{name},{species}\n"));
        }
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest).unwrap();
    path
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(bin()).args(args).output().unwrap()
}

#[test]
fn extract_select_classify_degrade_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = make_corpus(dir.path(), 6);
    let out = dir.path().join("out");

    // extract
    let output = run(&[
        "extract",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--jobs",
        "2",
        "--seed",
        "7",
    ]);
    assert!(
        output.status.success(),
        "extract failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let features = out.join("features.csv");
    let text = std::fs::read_to_string(&features).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(header.split(',').count(), 30);
    assert_eq!(text.lines().count(), 13); // header + 12 rows

    // select
    let output = run(&[
        "select",
        "--features",
        features.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let ranking = std::fs::read_to_string(out.join("ranking.csv")).unwrap();
    assert_eq!(ranking.lines().count(), 29); // header + 28 features
                                             // FM features must out-rank frequency features on this corpus.
    let first = ranking.lines().nth(1).unwrap();
    assert!(first.contains("fm_"), "top feature was {first}");

    // classify (small fold count to keep the test quick)
    let output = run(&[
        "classify",
        "--features",
        features.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--folds",
        "3",
        "--methods",
        "ss,dd",
        "--sets",
        "FM,Freq",
        "--seed",
        "5",
        "--jobs",
        "2",
    ]);
    assert!(
        output.status.success(),
        "classify failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let folds = std::fs::read_to_string(out.join("folds.csv")).unwrap();
    assert_eq!(folds.lines().count(), 1 + 2 * 2 * 3);

    // degrade with the identity codec: every complete entry has r^2 = 1.
    let output = run(&[
        "degrade",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--no-noise",
        "--codec-cmd",
        "cp {in} {out}",
        "--methods",
        "ss",
        "--jobs",
        "2",
    ]);
    assert!(
        output.status.success(),
        "degrade failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let report = std::fs::read_to_string(out.join("robustness.csv")).unwrap();
    for line in report.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], "external_codec");
        if !fields[4].is_empty() {
            assert_eq!(fields[4], "1", "r^2 not exactly 1 in: {line}");
        }
    }
}

#[test]
fn extract_is_deterministic_across_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = make_corpus(dir.path(), 3);
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for (out, jobs) in [(&out1, "1"), (&out2, "4")] {
        let output = run(&[
            "extract",
            "--manifest",
            manifest.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--jobs",
            jobs,
            "--seed",
            "3",
        ]);
        assert!(output.status.success());
    }
    let a = std::fs::read(out1.join("features.csv")).unwrap();
    let b = std::fs::read(out2.join("features.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn unreadable_file_is_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = make_corpus(dir.path(), 2);
    // Append a garbage entry.
    let mut text = std::fs::read_to_string(&manifest).unwrap();
    std::fs::write(dir.path().join("broken.wav"), b"not audio").unwrap();
    text.push_str("broken.wav,mystery\n");
    std::fs::write(&manifest, text).unwrap();

    let out = dir.path().join("out");
    let output = run(&[
        "extract",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    let table = std::fs::read_to_string(out.join("features.csv")).unwrap();
    assert_eq!(table.lines().count(), 5); // header + 4 good rows
    assert!(String::from_utf8_lossy(&output.stderr).contains("broken.wav"));

    // Lenient mode downgrades the failure to exit 0.
    let output = run(&[
        "extract",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--lenient",
    ]);
    assert_eq!(output.status.code(), Some(0));
}

#[test]
fn bench_reports_ss_fastest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = make_corpus(dir.path(), 2);
    let out = dir.path().join("out");
    let output = run(&[
        "bench",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "bench failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let text = std::fs::read_to_string(out.join("timings.csv")).unwrap();
    let mut ratios = std::collections::HashMap::new();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        ratios.insert(fields[0].to_string(), fields[3].parse::<f64>().unwrap());
    }
    for method in ["ss", "rm", "mp", "dd"] {
        assert!(ratios.contains_key(method), "missing {method} row");
        if method != "ss" {
            assert!(
                ratios["ss"] <= ratios[method],
                "ss {} vs {method} {}",
                ratios["ss"],
                ratios[method]
            );
        }
    }
}

#[test]
fn invalid_configs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = make_corpus(dir.path(), 1);
    let out = dir.path().join("out");
    // Band upside down.
    let output = run(&[
        "extract",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--band",
        "9000:3000",
    ]);
    assert_eq!(output.status.code(), Some(2));
    // Unknown method.
    let output = run(&[
        "extract",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--methods",
        "ss,zz",
    ]);
    assert_eq!(output.status.code(), Some(2));
    // Empty manifest on bench.
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "path,species\n").unwrap();
    let output = run(&[
        "bench",
        "--manifest",
        empty.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
}
