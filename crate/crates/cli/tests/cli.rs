use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mcstain::phantom::shape_coded_spec;

fn mcstain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcstain")).args(args).arg("-q").output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mcstain(args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn sidecar(p: &Path) -> serde_json::Value {
    let mut name = p.as_os_str().to_owned();
    name.push(".run.json");
    serde_json::from_slice(&read(Path::new(&name))).unwrap()
}

/// Simulate, then run the six chained pipeline commands; returns the
/// directory and the evaluate output.
fn pipeline(dir: &Path, extra_sim: &[&str]) -> String {
    let ph = dir.join("ph");
    let mut sim = vec!["simulate", "--out", s(&ph)];
    sim.extend_from_slice(extra_sim);
    ok(&sim);
    let cube = ph.join("cube.ptdc");
    let truth = ph.join("stain.png");
    let (conv, fs, stack, model, pred) =
        (dir.join("conv.pchs"), dir.join("fs.pfst"), dir.join("stack.pchs"), dir.join("model.plcm"), dir.join("pred.png"));
    ok(&["extract", "--cube", s(&cube), "--out", s(&conv)]);
    ok(&["learn", "--cube", s(&cube), "-k", "3", "--seed", "5", "--out", s(&fs)]);
    ok(&["features", "--cube", s(&cube), "--features", s(&fs), "--stack", s(&conv), "--out", s(&stack)]);
    ok(&["train", "--stack", s(&stack), "--truth", s(&truth), "--out", s(&model)]);
    ok(&["stain", "--stack", s(&stack), "--model", s(&model), "--out", s(&pred)]);
    ok(&["evaluate", "--pred", s(&pred), "--truth", s(&truth), "--region", "test"])
}

fn ssim_of(evaluate_stdout: &str) -> f64 {
    let mut words = evaluate_stdout.split_whitespace();
    assert_eq!(words.next(), Some("ssim"), "{evaluate_stdout}");
    words.next().unwrap().parse().unwrap()
}

#[test]
fn help_exits_zero_everywhere() {
    let top = mcstain(&["--help"]);
    assert_eq!(top.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&top.stdout).contains("cstudy"));
    for cmd in ["simulate", "extract", "learn", "features", "kstudy", "cstudy", "train", "stain", "evaluate", "report"] {
        let out = mcstain(&[cmd, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{cmd} --help");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"), "{cmd}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(mcstain(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mcstain(&["extract"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let out = mcstain(&["--config", s(&cfg), "report", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));
}

#[test]
fn corrupted_magic_names_the_format() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.bin");
    std::fs::write(&bad, b"JUNK0123456789abcdef").unwrap();
    let png = dir.path().join("t.png");
    ok(&["simulate", "--height", "16", "--width", "16", "--out", s(dir.path())]);
    std::fs::copy(dir.path().join("stain.png"), &png).unwrap();

    let out = mcstain(&["extract", "--cube", s(&bad), "--out", s(&dir.path().join("o.pchs"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("PTDC") && err.contains("magic"), "{err}");

    let out = mcstain(&["cstudy", "--stack", s(&bad), "--truth", s(&png), "--out", s(&dir.path().join("t.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("PCHS") && err.contains("magic"), "{err}");
}

#[test]
fn missing_spec_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere").join("spec.toml");
    let out = mcstain(&["simulate", "--spec", s(&missing), "--out", s(dir.path())]);
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains(s(&missing)));
    assert!(!dir.path().join("cube.ptdc").exists());
}

#[test]
fn degenerate_spec_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = shape_coded_spec(0);
    spec.basis[1] = spec.basis[0].clone();
    spec.basis[1].name = "copy".into();
    let path = dir.path().join("spec.toml");
    std::fs::write(&path, toml::to_string(&spec).unwrap()).unwrap();
    let out = mcstain(&["simulate", "--spec", s(&path), "--height", "16", "--width", "16", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_writes_four_files_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let files = ["cube.ptdc", "truth.pchs", "stain.png", "labels.png"];
    let args = |d: &Path| vec!["simulate".to_string(), "--height".into(), "48".into(), "--width".into(), "40".into(), "--out".into(), s(d).into()];
    let run = |d: &Path, extra: &[&str]| {
        let mut v = args(d);
        v.extend(extra.iter().map(|x| x.to_string()));
        ok(&v.iter().map(String::as_str).collect::<Vec<_>>());
    };
    run(a.path(), &[]);
    let first: Vec<Vec<u8>> = files.iter().map(|f| read(&a.path().join(f))).collect();
    run(a.path(), &[]);
    run(b.path(), &[]);
    for (f, bytes) in files.iter().zip(&first) {
        assert_eq!(&read(&a.path().join(f)), bytes, "{f} changed on rerun");
        assert_eq!(&read(&b.path().join(f)), bytes, "{f} differs between directories");
    }

    run(b.path(), &["--seed", "17"]);
    assert_ne!(read(&b.path().join("labels.png")), first[3], "seed override kept the layout");
    let meta = sidecar(&b.path().join("simulate"));
    assert_eq!(meta["seeds"]["phantom"], 17);
    assert!(meta["config"].as_str().unwrap().contains("seed = 17"));
}

#[test]
fn chained_pipeline_stains_shape_coded_phantom() {
    let dir = tempfile::tempdir().unwrap();
    let ssim = ssim_of(&pipeline(dir.path(), &[]));
    assert!(ssim >= 0.95, "end-to-end SSIM {ssim}");
    let meta = sidecar(&dir.path().join("fs.pfst"));
    assert_eq!(meta["seeds"]["kmeans"], 5);
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
    assert!(meta["inputs"]["cube"]["sha256"].is_string());
}

#[test]
fn same_seed_gives_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let small = ["--height", "96", "--width", "96"];
    let ea = pipeline(a.path(), &small);
    let eb = pipeline(b.path(), &small);
    assert_eq!(ea, eb);
    for f in ["conv.pchs", "fs.pfst", "stack.pchs", "model.plcm", "pred.png"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }
    let ha = sidecar(&a.path().join("model.plcm"))["config_hash"].clone();
    let hb = sidecar(&b.path().join("model.plcm"))["config_hash"].clone();
    assert_eq!(ha, hb);
}

#[test]
fn config_hash_tracks_parameters_not_paths() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--height", "32", "--width", "32", "--out", s(d)]);
    let cube = d.join("cube.ptdc");
    let hash = |out: &str, extra: &[&str]| {
        let out = d.join(out);
        let mut args = vec!["learn", "--cube", s(&cube), "--out", s(&out)];
        args.extend_from_slice(extra);
        ok(&args);
        sidecar(&out)["config_hash"].as_str().unwrap().to_string()
    };
    let base = hash("a.pfst", &["-k", "2"]);
    assert_eq!(hash("b.pfst", &["-k", "2"]), base);
    assert_ne!(hash("c.pfst", &["-k", "3"]), base);
    assert_ne!(hash("d.pfst", &["-k", "2", "--seed", "1"]), base);
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--height", "32", "--width", "32", "--out", s(&d.join("ph"))]);
    let cfg = d.join("run.toml");
    std::fs::write(&cfg, "k = 2\n[paths]\ncube = \"ph/cube.ptdc\"\n[study]\nlearn_fraction = 0.5\n").unwrap();
    let out = d.join("f.pfst");
    ok(&["--config", s(&cfg), "learn", "--out", s(&out)]);
    let text = sidecar(&out)["config"].as_str().unwrap().to_string();
    assert!(text.contains("k = 2") && text.contains("learn_fraction = 0.5"), "{text}");
    ok(&["--config", s(&cfg), "learn", "-k", "3", "--out", s(&out)]);
    let text = sidecar(&out)["config"].as_str().unwrap().to_string();
    assert!(text.contains("k = 3"), "{text}");
}

#[test]
fn cstudy_output_independent_of_jobs_and_reportable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d, &["--height", "64", "--width", "64"]);
    let (stack, truth) = (d.join("stack.pchs"), d.join("ph").join("stain.png"));
    let run = |jobs: &str, name: &str| {
        let out = d.join(name);
        let summary = ok(&["cstudy", "--stack", s(&stack), "--truth", s(&truth), "--jobs", jobs, "--out", s(&out)]);
        (read(&out), summary)
    };
    let (one, summary) = run("1", "t1.csv");
    let (three, _) = run("3", "t3.csv");
    assert_eq!(one, three);
    assert_eq!(String::from_utf8_lossy(&one).lines().count(), 64);
    assert!(summary.contains("[best]") && summary.contains("[worst]"));
    let report = ok(&["report", s(&d.join("t1.csv"))]);
    assert!(report.starts_with("63 combinations, backend linear, K 3"), "{report}");
    assert!(report.contains(&summary));
}

#[test]
fn kstudy_and_adversarial_train_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ph: PathBuf = d.join("ph");
    ok(&["simulate", "--preset", "three-shape", "--height", "96", "--width", "96", "--out", s(&ph)]);
    let (cube, truth) = (ph.join("cube.ptdc"), ph.join("stain.png"));
    let out = ok(&["kstudy", "--cube", s(&cube), "--truth", s(&truth), "--k-max", "4", "--out", s(&d.join("k.csv"))]);
    assert!(out.lines().last().unwrap().starts_with("best K = "), "{out}");
    assert_eq!(String::from_utf8_lossy(&read(&d.join("k.csv"))).lines().count(), 4);

    ok(&["extract", "--cube", s(&cube), "--out", s(&d.join("c.pchs"))]);
    let loss = d.join("loss.csv");
    ok(&[
        "train", "--stack", s(&d.join("c.pchs")), "--truth", s(&truth), "--backend", "adversarial", "--max-epochs", "5",
        "--out", s(&loss), "--stain-out", s(&d.join("adv.png")),
    ]);
    let text = String::from_utf8(read(&loss)).unwrap();
    assert!(text.starts_with("epoch,g_loss,d_loss,cycle_l1,val_g_loss\n"));
    assert_eq!(text.lines().count(), 6);
    let meta = sidecar(&loss);
    assert_eq!(meta["results"]["learning_rate"], "0.0002");
    assert_eq!(meta["results"]["split"], "70/30");
    assert!(d.join("adv.png").exists());
}

#[test]
fn inputs_are_not_modified() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--height", "32", "--width", "32", "--out", s(d)]);
    let cube = d.join("cube.ptdc");
    let before = read(&cube);
    ok(&["extract", "--cube", s(&cube), "--out", s(&d.join("c.pchs"))]);
    ok(&["learn", "--cube", s(&cube), "--out", s(&d.join("f.pfst"))]);
    assert_eq!(read(&cube), before);
}
