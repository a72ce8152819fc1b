use std::path::Path;
use std::process::Command;

use evoimage::{load_image, save_image, Image};
use evoimage_cli::{run, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};

fn call(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("evoimage").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn sample(dir: &Path, name: &str) -> String {
    let img = Image::from_fn(48, 40, 3, |x, y, c| {
        let v = 0.3 + 0.4 * ((x as f64 * 0.3 + c as f64).sin() * (y as f64 * 0.2).cos());
        v.clamp(0.0, 1.0)
    })
    .unwrap();
    let path = dir.join(name);
    save_image(&img, &path).unwrap();
    path.to_string_lossy().into_owned()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn enhance_then_verified_replay_reproduces_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let input = sample(d, "a.png");
    let (b, t, c) = (p(d, "b.png"), p(d, "t.json"), p(d, "c.png"));
    let (code, out, err) = call(&[
        "enhance",
        "--input",
        &input,
        "--out",
        &b,
        "--trace",
        &t,
        "--seed",
        "7",
        "--population",
        "6",
        "--epochs",
        "8",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("steps"));

    let (code, out, err) = call(&[
        "replay", "--input", &input, "--trace", &t, "--out", &c, "--verify",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let replayed = load_image(&c).unwrap().content_hash();
    assert_eq!(replayed, load_image(&b).unwrap().content_hash());
    assert_eq!(out.trim(), replayed);

    // A different source fails verification at run time.
    let other = p(d, "other.png");
    save_image(&Image::filled(48, 40, 3, 0.5).unwrap(), &other).unwrap();
    let (code, _, err) = call(&[
        "replay", "--input", &other, "--trace", &t, "--out", &c, "--verify",
    ]);
    assert_eq!(code, EXIT_RUNTIME);
    assert!(err.contains("error"));
}

#[test]
fn score_prints_one_number() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample(dir.path(), "a.png");
    for metric in ["noise", "brisque"] {
        let (code, out, err) = call(&["score", "--input", &input, "--metric", metric]);
        assert_eq!(code, EXIT_OK, "{err}");
        let v: f64 = out.trim().parse().unwrap();
        assert!(v.is_finite());
        assert_eq!(out.lines().count(), 1);
    }
    let (code, out, _) = call(&[
        "score", "--input", &input, "--metric", "ssim", "--ref", &input,
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.trim().parse::<f64>().unwrap(), 1.0);

    let (code, _, err) = call(&["score", "--input", &input, "--metric", "ssim"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("--ref"));
}

#[test]
fn degrade_writes_the_expected_image() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample(dir.path(), "a.png");
    let out = p(dir.path(), "fog.png");
    let (code, _, err) = call(&["degrade", "--input", &input, "--out", &out, "--op", "fog:1"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(load_image(&out).unwrap().data().iter().all(|&v| v == 1.0));

    let (code, _, err) = call(&[
        "degrade", "--input", &input, "--out", &out, "--op", "blur:9",
    ]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("blur"));
}

#[test]
fn bench_writes_reports_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("in");
    std::fs::create_dir(&images).unwrap();
    sample(&images, "x.png");
    sample(&images, "y.png");
    let report = p(dir.path(), "out/report.csv");
    let (code, out, err) = call(&[
        "bench",
        "--dir",
        images.to_str().unwrap(),
        "--report",
        &report,
        "--degrade",
        "noise:0.05",
        "--population",
        "4",
        "--epochs",
        "3",
        "--jobs",
        "2",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("x.png") && out.contains("y.png"));
    for f in [
        "report.csv",
        "report.md",
        "x.trace.json",
        "y.out.png",
        "x.input.png",
    ] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }

    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let (code, _, _) = call(&[
        "bench",
        "--dir",
        empty.to_str().unwrap(),
        "--report",
        &report,
    ]);
    assert_eq!(code, EXIT_RUNTIME);
}

#[test]
fn usage_errors_exit_with_one() {
    let (code, _, err) = call(&[]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("Usage"));
    assert_eq!(call(&["enhance", "--input", "a.png"]).0, EXIT_USAGE);
    assert_eq!(
        call(&["score", "--input", "a.png", "--metric", "nima"]).0,
        EXIT_USAGE
    );
    let (code, _, err) = call(&[
        "enhance",
        "--input",
        "a.png",
        "--out",
        "b.png",
        "--trace",
        "t.json",
        "--population",
        "1",
    ]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("population"));
    let (code, _, err) = call(&[
        "enhance", "--input", "a.png", "--out", "b.png", "--trace", "t.json", "--scorer",
        "external",
    ]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("--scorer-cmd"));

    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("enhance"));
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = call(&[
        "score",
        "--input",
        &p(dir.path(), "nope.png"),
        "--metric",
        "noise",
    ]);
    assert_eq!(code, EXIT_RUNTIME);
    assert!(err.contains("nope.png"));
}

#[test]
fn external_scorer_drives_enhance() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample(dir.path(), "a.png");
    let (b, t) = (p(dir.path(), "b.png"), p(dir.path(), "t.json"));
    let (code, _, err) = call(&[
        "enhance",
        "--input",
        &input,
        "--out",
        &b,
        "--trace",
        &t,
        "--population",
        "3",
        "--epochs",
        "2",
        "--scorer",
        "external",
        "--scorer-cmd",
        "test -s {image} && echo 1.5",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(std::fs::read_to_string(&t)
        .unwrap()
        .contains("\"external\""));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_evoimage");
    let status = Command::new(bin).arg("frobnicate").output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));
    assert!(!status.stderr.is_empty());
    let version = Command::new(bin).arg("--version").output().unwrap();
    assert_eq!(version.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&version.stdout).starts_with("evoimage"));
}
