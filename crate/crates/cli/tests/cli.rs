use std::fs;
use std::path::Path;

use clap::Parser;
use laprop::optim::{step_into, OptimizerKind};
use laprop_cli::bench::{bench_from_file, load_study, replay, Overrides, StudyConfig};
use laprop_cli::error::exit_code;
use laprop_cli::output::{RunManifest, MANIFEST_FILE};
use laprop_cli::smooth::{read_table, smooth_table, Kernel};
use laprop_cli::verify::cmd_verify_with;
use laprop_cli::{execute, Battery, BenchKind, Cli, CliError, Outcome};
use tempfile::tempdir;

const ROSENBROCK_TOML: &str = r#"
sigmas = [0.04, 0.10, 0.12]
nus = [0.6, 0.98]
optimizers = ["laprop", "adam"]
lambdas = [1e-2]
seeds = [0, 1]
max_steps = 300
"#;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn csv_bodies(dir: &Path) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for entry in walk(dir) {
        if entry.extension().is_some_and(|e| e == "csv") {
            out.push((entry.strip_prefix(dir).unwrap().display().to_string(), fs::read_to_string(&entry).unwrap()));
        }
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn missing_config_names_the_path() {
    let tmp = tempdir().unwrap();
    let missing = tmp.path().join("nope.toml");
    let cli = Cli::try_parse_from([
        "laprop",
        "bench",
        "rosenbrock",
        "--config",
        missing.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ])
    .unwrap();
    let result = execute(cli);
    assert_eq!(exit_code(&result), 1);
    let msg = result.unwrap_err().to_string();
    assert!(msg.contains("nope.toml"), "{msg}");
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", &format!("{ROSENBROCK_TOML}\nnu_typo = 0.3\n"));
    let err = bench_from_file(BenchKind::Rosenbrock, &cfg, &tmp.path().join("o"), &Overrides::default()).unwrap_err();
    assert!(matches!(err, CliError::Parse { .. }));
    assert!(err.to_string().contains("nu_typo"), "{err}");
}

#[test]
fn rosenbrock_rows_and_determinism() {
    let tmp = tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", ROSENBROCK_TOML);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let manifest = bench_from_file(BenchKind::Rosenbrock, &cfg, &a, &Overrides::default()).unwrap();
    bench_from_file(BenchKind::Rosenbrock, &cfg, &b, &Overrides::default()).unwrap();

    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], laprop_cli::bench::ROSENBROCK_HEADER);
    assert_eq!(lines.len(), 1 + 2 * 3 * 2);
    assert_eq!(csv_bodies(&a), csv_bodies(&b));
    assert!(manifest.outputs.iter().any(|o| o == "summary.csv"));
    assert!(manifest.outputs.iter().any(|o| o.starts_with("trajectories/")));
    assert_eq!(manifest.seeds, vec![0, 1]);
}

#[test]
fn replay_reproduces_csv_bodies() {
    let tmp = tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", ROSENBROCK_TOML);
    let a = tmp.path().join("a");
    let overrides = Overrides { seeds: Some(3), mnist: None };
    bench_from_file(BenchKind::Rosenbrock, &cfg, &a, &overrides).unwrap();
    let m = RunManifest::read(&a.join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.seeds, vec![0, 1, 2]);
    let parsed = StudyConfig::from_json(BenchKind::Rosenbrock, m.config.clone(), Path::new("m")).unwrap();
    assert_eq!(parsed.to_json(), m.config);

    let b = tmp.path().join("b");
    replay(&a.join(MANIFEST_FILE), &b).unwrap();
    assert_eq!(csv_bodies(&a), csv_bodies(&b));
}

#[test]
fn regret_and_grid_and_spike_benches() {
    let tmp = tempdir().unwrap();
    let regret = write(tmp.path(), "r.toml", "dim = 3\nhorizon = 500\nseeds = [0]\nearly_checkpoint = 50\nlate_checkpoint = 500\n");
    bench_from_file(BenchKind::Regret, &regret, &tmp.path().join("r"), &Overrides::default()).unwrap();
    let text = fs::read_to_string(tmp.path().join("r/regret.csv")).unwrap();
    assert!(text.starts_with(laprop_cli::bench::REGRET_HEADER));
    assert!(text.lines().any(|l| l.starts_with("0,500,")));

    let grid = write(
        tmp.path(),
        "g.toml",
        r#"
mus = [0.5, 0.9]
nus = [0.9]
lambdas = [1e-2]
[base]
max_steps = 200
seeds = [0, 1]
[base.problem]
kind = "rosenbrock"
sigma = 0.05
[base.optimizer]
kind = "laprop"
"#,
    );
    bench_from_file(BenchKind::Grid, &grid, &tmp.path().join("g"), &Overrides::default()).unwrap();
    let text = fs::read_to_string(tmp.path().join("g/grid.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);

    let spike = write(
        tmp.path(),
        "s.toml",
        r#"
width = 8
batch_size = 16
lambda = 1e-3
seeds = [0]
max_steps = 300
[data]
source = "synthetic"
n = 100
input_dim = 4
classes = 3
"#,
    );
    bench_from_file(BenchKind::Spike, &spike, &tmp.path().join("s"), &Overrides::default()).unwrap();
    let text = fs::read_to_string(tmp.path().join("s/summary.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn deep_fc_with_mnist_override() {
    let tmp = tempdir().unwrap();
    let images = tmp.path().join("img.idx");
    let labels = tmp.path().join("lab.idx");
    let pixels: Vec<u8> = (0..40 * 16).map(|i| ((i * 37) % 256) as u8).collect();
    laprop::problems::write_idx_images(&images, 4, 4, &pixels).unwrap();
    laprop::problems::write_idx_labels(&labels, &(0..40).map(|i| (i % 10) as u8).collect::<Vec<_>>()).unwrap();
    let cfg = write(
        tmp.path(),
        "d.toml",
        r#"
depths = [2]
width = 8
batch_size = 8
lambdas = [1e-3]
seeds = [0]
max_steps = 20
[data]
source = "synthetic"
n = 30
input_dim = 4
classes = 10
"#,
    );
    let overrides = Overrides { seeds: None, mnist: Some((images, labels)) };
    let out = tmp.path().join("d");
    let manifest = bench_from_file(BenchKind::Deepfc, &cfg, &out, &overrides).unwrap();
    assert_eq!(manifest.config["data"]["source"], "mnist");
    assert_eq!(manifest.config["data"]["limit"], 30);
    assert!(fs::read_to_string(out.join("summary.csv")).unwrap().lines().count() == 3);

    let err = bench_from_file(
        BenchKind::Rosenbrock,
        &write(tmp.path(), "c.toml", ROSENBROCK_TOML),
        &out,
        &overrides,
    )
    .unwrap_err();
    assert!(matches!(err, CliError::Config(_)));
}

#[test]
fn verify_bounds_passes_and_catches_coupled_momentum() {
    let tmp = tempdir().unwrap();
    let ok = cmd_verify_with(Battery::Bounds, &tmp.path().join("ok"), None, None);
    assert_eq!(exit_code(&ok), 0);
    assert!(tmp.path().join("ok/bounds.json").exists());

    // momentum accumulated before preconditioning, as in Adam
    let mut broken = |s: &mut laprop::OptimizerState, g: &[f64], hp: &laprop::HyperParams, d: &mut [f64]| {
        s.kind = OptimizerKind::Adam;
        let r = step_into(s, g, hp, None, d);
        s.kind = OptimizerKind::LaProp;
        r
    };
    let bad = cmd_verify_with(Battery::Bounds, &tmp.path().join("bad"), None, Some(&mut broken));
    assert_eq!(exit_code(&bad), 2);
    let file: laprop_cli::verify::BoundsFile =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("bad/bounds.json")).unwrap()).unwrap();
    let failing: Vec<f64> = file.laprop.iter().filter(|r| !r.passed()).map(|r| r.nu).collect();
    assert!(failing.contains(&0.0), "{failing:?}");
}

#[test]
fn verify_all_writes_every_report() {
    let tmp = tempdir().unwrap();
    let cli = Cli::try_parse_from(["laprop", "verify", "all", "--seeds", "2", "--out", tmp.path().to_str().unwrap()])
        .unwrap();
    assert_eq!(exit_code(&execute(cli)), 0);
    for f in ["bounds.json", "heavytail.json", "equivalence.json", "gradcheck.json", MANIFEST_FILE] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    let m = RunManifest::read(&tmp.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.outputs.len(), 4);
}

#[test]
fn out_dir_from_environment() {
    let tmp = tempdir().unwrap();
    std::env::set_var(laprop_cli::OUT_DIR_ENV, tmp.path());
    let cli = Cli::try_parse_from(["laprop", "verify", "gradcheck"]).unwrap();
    std::env::remove_var(laprop_cli::OUT_DIR_ENV);
    assert_eq!(execute(cli).unwrap(), Outcome::Success);
    assert!(tmp.path().join("gradcheck.json").exists());
}

#[test]
fn flag_parsing() {
    assert!(Cli::try_parse_from(["laprop", "smooth", "--input", "x.csv"]).is_err());
    assert!(Cli::try_parse_from(["laprop", "smooth", "--input", "x.csv", "--window", "3", "--gaussian", "2"]).is_err());
    assert!(Cli::try_parse_from(["laprop", "bench", "nope", "--config", "c"]).is_err());
    assert!(Cli::try_parse_from(["laprop", "bench", "deepfc", "--config", "c", "--mnist-images", "i"]).is_err());
    let cli = Cli::try_parse_from(["laprop", "--threads", "1", "verify", "bounds", "--out", "o"]).unwrap();
    assert_eq!(cli.threads, Some(1));
}

fn smooth_text(text: &str, kernel: Kernel, columns: &[&str]) -> Result<String, CliError> {
    let tmp = tempdir().unwrap();
    let p = write(tmp.path(), "in.csv", text);
    let table = read_table(&p)?;
    let cols: Vec<String> = columns.iter().map(|s| s.to_string()).collect();
    smooth_table(&table, kernel, &cols, &p)
}

fn column(text: &str, idx: usize) -> Vec<f64> {
    text.lines().skip(1).map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn smoothing_window_one_and_constants() {
    let input = "step,loss,status\n1,0.5,running\n2,0.25,running\n3,2,done\n";
    let out = smooth_text(input, Kernel::Window(1), &[]).unwrap();
    assert_eq!(column(&out, 1), vec![0.5, 0.25, 2.0]);
    assert!(out.lines().nth(3).unwrap().ends_with(",done"));
    assert_eq!(column(&out, 0), vec![1.0, 2.0, 3.0]);

    let constant = "step,v\n1,3\n2,3\n3,3\n4,3\n";
    for k in [Kernel::Window(3), Kernel::Window(50), Kernel::Gaussian(1.5)] {
        for x in column(&smooth_text(constant, k, &[]).unwrap(), 1) {
            assert!((x - 3.0).abs() < 1e-14, "{x}");
        }
    }
}

#[test]
fn smoothing_impulse_and_row_count() {
    let mut input = String::from("step,v\n");
    for i in 0..200 {
        input.push_str(&format!("{i},{}\n", if i == 100 { 1.0 } else { 0.0 }));
    }
    let out = smooth_text(&input, Kernel::Window(50), &["v"]).unwrap();
    let v = column(&out, 1);
    assert_eq!(v.len(), 200);
    assert_eq!(v.iter().filter(|&&x| x != 0.0).count(), 50);
    assert!(v.iter().filter(|&&x| x != 0.0).all(|x| (x - 0.02).abs() < 1e-15));
}

#[test]
fn malformed_csv_reports_line() {
    let err = smooth_text("step,v\n1,2\n2,3,4\n", Kernel::Window(2), &[]).unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
    let err = smooth_text("step,v\n1,2\n2,x\n", Kernel::Window(2), &["v"]).unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
    let err = smooth_text("step,status\n1,a\n", Kernel::Window(2), &[]).unwrap_err();
    assert!(err.to_string().contains("numeric"), "{err}");
    assert!(smooth_text("step,v\n1,2\n", Kernel::Window(2), &["w"]).is_err());
}

#[test]
fn smooth_command_writes_default_output() {
    let tmp = tempdir().unwrap();
    let p = write(tmp.path(), "traj.csv", "step,loss\n1,1\n2,3\n");
    let cli = Cli::try_parse_from(["laprop", "smooth", "--input", p.to_str().unwrap(), "--window", "2"]).unwrap();
    assert_eq!(execute(cli).unwrap(), Outcome::Success);
    let out = fs::read_to_string(tmp.path().join("traj.smoothed.csv")).unwrap();
    assert_eq!(column(&out, 1), vec![2.0, 3.0]);
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for kind in [BenchKind::Rosenbrock, BenchKind::Deepfc, BenchKind::Regret, BenchKind::Grid, BenchKind::Spike] {
        let path = dir.join(format!("{}.toml", kind.name()));
        let study = load_study(kind, &path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(study.kind(), kind);
        assert!(!study.seeds().is_empty());
    }
}
