use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;

use flate2::write::GzEncoder;
use paralens_cli::data::{self, parse_idx_images, parse_idx_labels};
use paralens_cli::{CliError, DataError, ExperimentConfig};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_paralens"))
}

fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    ExperimentConfig::from_str(text, Path::new("."))
}

fn config_path(err: CliError) -> String {
    match err {
        CliError::Config { path, .. } => path,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn minimal_regression_config_is_accepted() {
    let cfg = parse(
        r#"{"model": {"layers": [{"kind": "linear", "input": 1, "output": 1}]},
            "loss": "quadratic", "rate": {"kind": "constant", "value": 0.1},
            "optimiser": {"kind": "descent"}}"#,
    )
    .unwrap();
    assert_eq!(cfg.batch_size, 1);
    assert!(paralens_cli::run::build_model(&cfg).is_ok());
}

#[test]
fn unknown_optimiser_names_the_field() {
    let err = parse(r#"{"optimiser": {"kind": "adamw"}}"#).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("adamw"), "{msg}");
    assert_eq!(config_path(err), "optimiser.kind");
    let err = parse(r#"{"rate": {"kind": "constant", "value": "fast"}}"#).unwrap_err();
    assert!(err.to_string().contains("fast"));
    // tagged sections are buffered, so the path stops at the section
    assert_eq!(config_path(err), "rate");
    let err = parse(r#"{"epochs": -3}"#).unwrap_err();
    assert_eq!(config_path(err), "epochs");
}

#[test]
fn mnist_shape_chain_validates() {
    let cfg = ExperimentConfig::load(&configs().join("mnist_subset.json")).unwrap();
    let model = match paralens_cli::run::build_model(&cfg).unwrap() {
        paralens_cli::run::Model::Smooth(m) => m,
        _ => panic!("smooth model expected"),
    };
    assert_eq!(model.src().point.numel(), 784);
    assert_eq!(model.dst().point.numel(), 10);
    assert_eq!(model.param().point.numel(), 784 * 128 + 128 + 128 * 10 + 10);
}

#[test]
fn inconsistent_chain_is_rejected_at_the_offending_layer() {
    let cfg = parse(
        r#"{"model": {"layers": [
                {"kind": "dense", "input": 4, "output": 3, "activation": "relu"},
                {"kind": "dense", "input": 5, "output": 2, "activation": "identity"}]},
            "loss": "quadratic", "rate": {"kind": "constant", "value": 0.1},
            "optimiser": {"kind": "descent"}}"#,
    )
    .unwrap();
    let err = paralens_cli::run::build_model(&cfg).err().unwrap();
    assert_eq!(config_path(err), "model.layers[1]");
}

#[test]
fn loss_backend_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse(&format!(
        r#"{{"model": {{"layers": [{{"kind": "linear", "input": 1, "output": 1}}]}},
            "loss": "xor", "rate": {{"kind": "identity"}},
            "optimiser": {{"kind": "ascent"}},
            "data": {{"format": "csv", "train": "{}", "label_columns": 1}},
            "output_dir": "{}"}}"#,
        configs().join("data/two_point.csv").display(),
        dir.path().display()
    ))
    .unwrap();
    let err = paralens_cli::run::train(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert_eq!(config_path(err), "loss");
}

fn idx_images(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let mut v = Vec::new();
    for w in [0x803, count, rows, cols] {
        v.extend_from_slice(&u32::to_be_bytes(w));
    }
    v.extend_from_slice(pixels);
    v
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut v = Vec::new();
    for w in [0x801, labels.len() as u32] {
        v.extend_from_slice(&u32::to_be_bytes(w));
    }
    v.extend_from_slice(labels);
    v
}

#[test]
fn idx_scaling_and_one_hot() {
    let im = parse_idx_images(&idx_images(2, 1, 2, &[0, 255, 51, 102])).unwrap();
    let lb = parse_idx_labels(&idx_labels(&[3, 9])).unwrap();
    let d = data::idx_dataset(&im, &lb, None).unwrap();
    assert_eq!(d.inputs[0].data(), &[0.0, 1.0]);
    assert_eq!(d.inputs[1].data(), &[0.2, 0.4]);
    let mut hot = [0.0; 10];
    hot[9] = 1.0;
    assert_eq!(d.labels[1].data(), &hot);
}

#[test]
fn idx_errors() {
    assert_eq!(
        parse_idx_images(&idx_images(2, 2, 2, &[0; 7])),
        Err(DataError::TruncatedFile {
            expected: 24,
            found: 23
        })
    );
    assert!(matches!(
        parse_idx_images(&[0, 0, 8]),
        Err(DataError::TruncatedFile { .. })
    ));
    assert_eq!(
        parse_idx_images(&idx_labels(&[1])),
        Err(DataError::BadMagic {
            expected: 0x803,
            found: 0x801
        })
    );
    let im = parse_idx_images(&idx_images(2, 1, 1, &[0, 0])).unwrap();
    let lb = parse_idx_labels(&idx_labels(&[1, 2, 3])).unwrap();
    assert_eq!(
        data::idx_dataset(&im, &lb, None).unwrap_err(),
        DataError::CountMismatch {
            images: 2,
            labels: 3
        }
    );
}

#[test]
fn gzipped_idx_reads_like_plain() {
    let dir = tempfile::tempdir().unwrap();
    let raw = idx_images(1, 2, 2, &[1, 2, 3, 4]);
    let gz = dir.path().join("a.gz");
    let mut enc = GzEncoder::new(Vec::new(), flate2::Compression::default());
    enc.write_all(&raw).unwrap();
    std::fs::write(&gz, enc.finish().unwrap()).unwrap();
    assert_eq!(data::read_bytes(&gz).unwrap(), raw);
}

#[test]
fn bundled_mnist_subset_loads() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist_subset");
    let d = data::load_idx(
        &root.join("t10k-images-idx3-ubyte.gz"),
        &root.join("t10k-labels-idx1-ubyte.gz"),
        None,
    )
    .unwrap();
    assert_eq!(d.len(), 1000);
    assert_eq!(d.inputs[0].numel(), 784);
    assert!(d.inputs.iter().flat_map(|t| t.data()).all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn csv_requires_numeric_rows_under_a_header() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.csv");
    std::fs::write(&p, "a,b\n1,x\n").unwrap();
    assert!(matches!(data::load_csv::<f64>(&p, 1), Err(DataError::Csv(_))));
    std::fs::write(&p, "a,b\n1,2\n3,4\n").unwrap();
    let d = data::load_csv::<f64>(&p, 1).unwrap();
    assert_eq!(d.labels[1].data(), &[4.0]);
    std::fs::write(&p, "a,b\n1,2\n").unwrap();
    assert!(data::load_csv::<paralens::Z2>(&p, 1).is_err());
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn two_point_regression_reaches_tiny_loss() {
    let out = tempfile::tempdir().unwrap();
    let st = bin()
        .args(["train", "--config"])
        .arg(configs().join("regression_two_point.json"))
        .arg("--output-dir")
        .arg(out.path())
        .output()
        .map(|o| o.status)
        .unwrap();
    assert!(st.success());
    let s = summary(out.path());
    assert!(s["train_loss"].as_f64().unwrap() < 1e-6, "{s}");
    assert!(out.path().join("params.bin").is_file());
    let metrics = std::fs::read_to_string(out.path().join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("epoch,step,loss,accuracy\n"));
}

#[test]
fn same_seed_gives_identical_metrics() {
    let run = |seed: &str| {
        let out = tempfile::tempdir().unwrap();
        let st = bin()
            .args(["train", "--config"])
            .arg(configs().join("regression_two_point.json"))
            .args(["--epochs", "20", "--seed", seed, "--output-dir"])
            .arg(out.path())
            .output()
        .map(|o| o.status)
            .unwrap();
        assert!(st.success());
        std::fs::read(out.path().join("metrics.csv")).unwrap()
    };
    assert_eq!(run("4"), run("4"));
    assert_ne!(run("4"), run("5"));
}

#[test]
fn dream_trajectory_increases_on_linear_model() {
    let out = tempfile::tempdir().unwrap();
    let st = bin()
        .args(["dream", "--config"])
        .arg(configs().join("dream_linear.json"))
        .arg("--output-dir")
        .arg(out.path())
        .output()
        .map(|o| o.status)
        .unwrap();
    assert!(st.success());
    let mut rd = csv::Reader::from_path(out.path().join("dream_trajectory.csv")).unwrap();
    let obj: Vec<f64> = rd
        .records()
        .map(|r| r.unwrap()[1].parse().unwrap())
        .collect();
    assert_eq!(obj.len(), 26);
    assert!(obj.windows(2).all(|w| w[1] > w[0]), "{obj:?}");
    assert!(out.path().join("dream_input.bin").is_file());
}

#[test]
fn circuit_training_fits_or() {
    let out = tempfile::tempdir().unwrap();
    let st = bin()
        .args(["train", "--config"])
        .arg(configs().join("circuit_or.json"))
        .arg("--output-dir")
        .arg(out.path())
        .output()
        .map(|o| o.status)
        .unwrap();
    assert!(st.success());
    assert_eq!(summary(out.path())["train_accuracy"].as_f64(), Some(1.0));
}

#[test]
fn gan_runs_and_writes_both_parameter_files() {
    let out = tempfile::tempdir().unwrap();
    let st = bin()
        .args(["gan", "--config"])
        .arg(configs().join("gan_toy.json"))
        .arg("--output-dir")
        .arg(out.path())
        .output()
        .map(|o| o.status)
        .unwrap();
    assert!(st.success());
    assert!(out.path().join("generator_params.bin").is_file());
    assert!(out.path().join("discriminator_params.bin").is_file());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"optimiser": {"kind": "adamw"}}"#).unwrap();
    let st = bin().args(["train", "--config"]).arg(&bad).output().unwrap().status;
    assert_eq!(st.code(), Some(1));

    let images = dir.path().join("im");
    let labels = dir.path().join("lb");
    std::fs::write(&images, idx_images(3, 1, 1, &[1, 2])).unwrap();
    std::fs::write(&labels, idx_labels(&[1, 2, 3])).unwrap();
    let cfg = dir.path().join("trunc.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"model": {{"layers": [{{"kind": "dense", "input": 1, "output": 10, "activation": "identity"}}]}},
                "loss": "softmax_cross_entropy", "rate": {{"kind": "constant", "value": -1.0}},
                "optimiser": {{"kind": "adam"}},
                "data": {{"format": "idx", "train_images": "im", "train_labels": "lb"}},
                "output_dir": "{}"}}"#,
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let out = bin().args(["train", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncated"));

    let st = bin().args(["train", "--no-such-flag"]).output().unwrap().status;
    assert_eq!(st.code(), Some(1));
}

#[test]
fn check_subcommand_prints_a_passing_table() {
    let out = bin()
        .args(["check", "--instances", "20", "--composites", "10", "--circuits", "10"])
        .output()
        .unwrap();
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{table}");
    assert!(table.contains("RD.5") && table.contains("PASS") && !table.contains("FAIL"));
}
