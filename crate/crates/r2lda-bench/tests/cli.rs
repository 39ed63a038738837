//! End-to-end checks of the command-line interface, driving the built
//! binary against temporary files.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_r2lda-bench"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_toy_csv(path: &Path) {
    let mut text = String::from("x,y,z,label\n");
    for i in 0..30 {
        let label = if i % 2 == 0 { "pos" } else { "neg" };
        text.push_str(&format!("{}.0,{}.5,{},{label}\n", i, (i * 7) % 13, i % 5));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn gen_synthetic_then_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("synth.csv");
    let stdout = run_ok(bin().args([
        "gen-synthetic",
        "--p",
        "6",
        "--n0",
        "8",
        "--n1",
        "8",
        "--test-per-class",
        "4",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert!(stdout.contains("p=6"));

    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "f0,f1,f2,f3,f4,f5,label,partition");
    assert_eq!(text.lines().count(), 1 + 16 + 8);

    let stdout = run_ok(bin().args([
        "inspect-dataset",
        "--csv",
        out.to_str().unwrap(),
        "--label-column",
        "label",
        "--positive-label",
        "0",
    ]));
    assert!(stdout.contains("dimension: 7")); // 6 features + the partition column
}

#[test]
fn select_features_prints_indices() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("toy.csv");
    write_toy_csv(&csv);
    let listing = dir.path().join("features.txt");
    let stdout = run_ok(bin().args([
        "select-features",
        "--csv",
        csv.to_str().unwrap(),
        "--label-column",
        "label",
        "--positive-label",
        "pos",
        "--k",
        "2",
        "--out",
        listing.to_str().unwrap(),
    ]));
    let printed: Vec<&str> = stdout.trim().split(',').collect();
    assert_eq!(printed.len(), 2);
    let written = std::fs::read_to_string(&listing).unwrap();
    assert_eq!(written.lines().count(), 2);
}

#[test]
fn run_experiment_from_config_writes_reports_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results.csv");
    let config = dir.path().join("exp.toml");
    std::fs::write(
        &config,
        format!(
            r#"
            classifiers = ["lda", "r2lda-bpr"]
            train_sizes = [12]
            noise_sigmas = [0.0, 0.1]
            trials_train = 4
            trials_test = 5
            master_seed = 11
            output = "{}"

            [dataset]
            kind = "synthetic"
            p = 8
            delta2 = 9.0
            offdiag = 0.1
            "#,
            out.display()
        ),
    )
    .unwrap();

    let stdout = run_ok(bin().args(["run", "--config", config.to_str().unwrap(), "--threads", "2"]));
    assert!(stdout.contains("wrote 4 cells"), "stdout: {stdout}");

    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 5); // header + 4 cells
    assert!(text.starts_with("classifier,selector,n,sigma,error_pct"));

    let sidecar = std::fs::read_to_string(format!("{}.meta.json", out.display())).unwrap();
    let meta: serde_json::Value = serde_json::from_str(&sidecar).unwrap();
    assert_eq!(meta["master_seed"], 11);
    assert_eq!(meta["switches"]["pooled_denominator"], "paper");

    // seed override lands in the sidecar
    run_ok(bin().args([
        "run",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "99",
        "--out",
        dir.path().join("override.csv").to_str().unwrap(),
    ]));
    let sidecar =
        std::fs::read_to_string(format!("{}.meta.json", dir.path().join("override.csv").display()))
            .unwrap();
    let meta: serde_json::Value = serde_json::from_str(&sidecar).unwrap();
    assert_eq!(meta["master_seed"], 99);
}

#[test]
fn run_with_manifest_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("toy.csv");
    // enough rows per class to survive the split and training draws
    let mut text = String::from("a,b,c,label\n");
    for i in 0..60 {
        let label = if i % 2 == 0 { "pos" } else { "neg" };
        text.push_str(&format!(
            "{:.1},{:.1},{:.1},{label}\n",
            i as f64 * 0.1 + if i % 2 == 0 { 2.0 } else { -2.0 },
            (i % 7) as f64,
            ((i * 3) % 11) as f64
        ));
    }
    std::fs::write(&csv, text).unwrap();

    let manifest = dir.path().join("toy.toml");
    std::fs::write(
        &manifest,
        r#"
        kind = "csv"
        name = "toy"
        path = "toy.csv"
        label_column = "label"
        positive_label = "pos"
        test_fraction = 0.4
        split_seed = 2
        "#,
    )
    .unwrap();

    let out = dir.path().join("toy-results.csv");
    let config = dir.path().join("toy-exp.toml");
    std::fs::write(
        &config,
        format!(
            r#"
            classifiers = ["r2lda-gcv"]
            train_sizes = [10]
            noise_sigmas = [0.0]
            trials_train = 3
            trials_test = 4
            master_seed = 5
            output = "{}"

            [dataset]
            kind = "manifest"
            path = "{}"
            "#,
            out.display(),
            manifest.display()
        ),
    )
    .unwrap();

    run_ok(bin().args(["run", "--config", config.to_str().unwrap()]));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("r2lda,gcv,10,0,"));
}

#[test]
fn inspect_idx_pair() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("images-idx3-ubyte");
    let labels = dir.path().join("labels-idx1-ubyte");

    let mut img = Vec::new();
    img.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    img.extend_from_slice(&4u32.to_be_bytes());
    img.extend_from_slice(&2u32.to_be_bytes());
    img.extend_from_slice(&2u32.to_be_bytes());
    img.extend_from_slice(&[9u8; 16]);
    std::fs::write(&images, img).unwrap();

    let mut lab = Vec::new();
    lab.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    lab.extend_from_slice(&4u32.to_be_bytes());
    lab.extend_from_slice(&[1, 7, 1, 7]);
    std::fs::write(&labels, lab).unwrap();

    let stdout = run_ok(bin().args([
        "inspect-dataset",
        "--idx-images",
        images.to_str().unwrap(),
        "--idx-labels",
        labels.to_str().unwrap(),
        "--digits",
        "1,7",
    ]));
    assert!(stdout.contains("dimension: 4"));
    assert!(stdout.contains("train: n0=2 n1=2"));
}
