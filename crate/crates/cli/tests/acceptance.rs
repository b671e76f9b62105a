//! End-to-end acceptance criteria. Runs every criterion in order, prints one
//! `PASS`/`FAIL` line each and exits non-zero if any fails.
//!
//! Pass criterion numbers as arguments to run a subset:
//! `cargo test -p laprop-cli --test acceptance -- 1 4 7`.
//!
//! The deep network criterion trains on the synthetic fallback unless
//! `LAPROP_MNIST_IMAGES` and `LAPROP_MNIST_LABELS` point at IDX files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use laprop::harness::{
    deep_fc_study, regret_study, rosenbrock_study, spike_study, DataSpec, DeepFcRow, DeepFcStudy, RegretStudy,
    RosenbrockRow, RosenbrockStudy, SpikeStudy,
};
use laprop::optim::OptimizerKind;
use laprop::verify::{
    adam_battery, gradcheck_battery, heavy_tail_battery, identity_battery, laprop_battery, BatterySize, BoundStatus,
    GRADCHECK_TOLERANCE, HEAVY_TAIL_CAP_SLACK,
};
use laprop_cli::bench::{bench_from_file, replay, Overrides};
use laprop_cli::output::MANIFEST_FILE;
use laprop_cli::BenchKind;

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Verdict {
        Verdict { passed, detail: detail.into() }
    }
}

type Criterion = fn() -> Verdict;

const CRITERIA: [(u32, &str, Criterion); 10] = [
    (1, "LaProp update bound", laprop_bound),
    (2, "Adam update bound", adam_bound),
    (3, "heavy-tail blow-up at nu = 0", heavy_tail),
    (4, "limit identities", identities),
    (5, "noisy Rosenbrock", noisy_rosenbrock),
    (6, "regret growth", regret_rate),
    (7, "MLP gradient oracle", gradient_oracle),
    (8, "deep network initiation", deep_network),
    (9, "loss spike demo", loss_spikes),
    (10, "replay determinism", determinism),
];

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, check) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let verdict = check();
        let label = if verdict.passed { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {label} {name} ({:.1}s): {}", t0.elapsed().as_secs_f64(), verdict.detail);
        if !verdict.passed {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}

fn within(t0: Instant, limit: Duration) -> bool {
    t0.elapsed() < limit
}

fn laprop_bound() -> Verdict {
    let t0 = Instant::now();
    let reports = laprop_battery(BatterySize::default(), 0);
    let steps: usize = reports.iter().map(|r| r.total_steps).sum();
    let violations: usize = reports.iter().map(|r| r.violations).sum();
    let errors: usize = reports.iter().map(|r| r.step_errors).sum();
    let all_pass = reports.iter().all(|r| r.status == BoundStatus::Pass);
    let worst = reports
        .iter()
        .map(|r| r.empirical_max / r.bound.expect("decoupled bound always exists"))
        .fold(0.0, f64::max);
    let fast = within(t0, Duration::from_secs(60));
    Verdict::new(
        reports.len() == 20 && steps >= 100_000 && violations == 0 && errors == 0 && all_pass && fast,
        format!("{} pairs, {steps} steps, {violations} violations, worst max/bound {worst:.6}", reports.len()),
    )
}

fn adam_bound() -> Verdict {
    let reports = adam_battery(BatterySize::default(), 0);
    let mut applicable = 0;
    let mut inapplicable = 0;
    let mut ok = true;
    for r in &reports {
        if r.mu < r.nu.sqrt() {
            applicable += 1;
            ok &= r.status == BoundStatus::Pass && r.violations == 0 && r.step_errors == 0;
        } else {
            inapplicable += 1;
            ok &= r.status == BoundStatus::NotApplicable && r.bound.is_none();
        }
    }
    Verdict::new(
        ok && applicable > 0 && inapplicable > 0,
        format!("{applicable} applicable pairs within bound, {inapplicable} pairs not applicable"),
    )
}

fn heavy_tail() -> Verdict {
    let t0 = Instant::now();
    let battery = match heavy_tail_battery(0.9, &[1_000, 1_000_000], 20, 0) {
        Ok(b) => b,
        Err(e) => return Verdict::new(false, e.to_string()),
    };
    let laprop_max = battery
        .reports
        .iter()
        .filter_map(|r| r.entry(1_000_000))
        .map(|e| e.laprop_max)
        .fold(0.0, f64::max);
    let fast = within(t0, Duration::from_secs(120));
    Verdict::new(
        battery.exceeding_seeds >= 18
            && battery.growing_seeds >= 19
            && battery.laprop_capped_seeds == 20
            && laprop_max <= 1.0 + HEAVY_TAIL_CAP_SLACK
            && fast,
        format!(
            "Adam max > 10 on {}/20 seeds, grows on {}/20, LaProp max {laprop_max}",
            battery.exceeding_seeds, battery.growing_seeds
        ),
    )
}

fn identities() -> Verdict {
    let reports = match identity_battery(1_000, 0) {
        Ok(r) => r,
        Err(e) => return Verdict::new(false, e.to_string()),
    };
    let detail: Vec<String> = reports.iter().map(|r| format!("{:?} {:e}", r.identity, r.max_deviation)).collect();
    let ok = reports.iter().all(|r| r.n_sequences == 1_000 && r.passed());
    Verdict::new(ok && !reports.is_empty(), detail.join(", "))
}

fn noisy_rosenbrock() -> Verdict {
    let t0 = Instant::now();
    let study: RosenbrockStudy = toml::from_str(
        r#"
sigmas = [0.04, 0.12]
nus = [0.3, 0.6, 0.9, 0.98]
optimizers = ["laprop", "adam", "amsgrad"]
lambdas = [1e-3, 3e-3, 1e-2]
mu = 0.9
trajectory_seeds = 0
"#,
    )
    .expect("valid study");
    let result = match rosenbrock_study(&study) {
        Ok(r) => r,
        Err(e) => return Verdict::new(false, e.to_string()),
    };
    let seeds = study.seeds.len();
    let rows = |kind: OptimizerKind, sigma: f64| -> Vec<&RosenbrockRow> {
        result.rows.iter().filter(|r| r.optimizer == kind && r.sigma == sigma).collect()
    };

    let low: Vec<Option<f64>> = rows(OptimizerKind::LaProp, 0.04).iter().map(|r| r.best.summary.median_steps).collect();
    let spread = if low.iter().all(Option::is_some) {
        let v: Vec<f64> = low.iter().flatten().copied().collect();
        Some(v.iter().copied().fold(0.0, f64::max) / v.iter().copied().fold(f64::INFINITY, f64::min))
    } else {
        None
    };
    let invariant = spread.is_some_and(|s| s < 2.0);

    let converged = |kind| rows(kind, 0.12).iter().map(|r| r.best.summary.converged).collect::<Vec<_>>();
    let laprop_high = converged(OptimizerKind::LaProp);
    let adam_high = converged(OptimizerKind::Adam);
    let ams_high = converged(OptimizerKind::AmsGrad);
    let budget_ok = rows(OptimizerKind::LaProp, 0.12).iter().all(|r| r.max_steps <= 10_000);
    let laprop_ok = laprop_high.iter().any(|&c| c as f64 >= 0.7 * seeds as f64);
    let others_fail = adam_high.iter().chain(&ams_high).all(|&c| (c as f64) < 0.3 * seeds as f64);
    let fast = within(t0, Duration::from_secs(600));

    Verdict::new(
        invariant && budget_ok && laprop_ok && others_fail && fast,
        format!(
            "sigma 0.04 LaProp medians {low:?} (max/min {spread:?}, need < 2: {}); sigma 0.12 converged of {seeds}: \
             LaProp {laprop_high:?} (need one >= 70%: {laprop_ok}), Adam {adam_high:?}, AMSGrad {ams_high:?} \
             (need all < 30%: {others_fail})",
            if invariant { "ok" } else { "no" },
        ),
    )
}

fn regret_rate() -> Verdict {
    let t0 = Instant::now();
    let study: RegretStudy = toml::from_str("").expect("defaults");
    let result = match regret_study(&study) {
        Ok(r) => r,
        Err(e) => return Verdict::new(false, e.to_string()),
    };
    let ratios: Vec<f64> = result.seeds.iter().map(|s| s.growth_ratio).collect();
    let ok = result.early_checkpoint == 10_000
        && result.late_checkpoint == 100_000
        && ratios.len() == 5
        && ratios.iter().all(|&r| r <= 2.0);
    let fast = within(t0, Duration::from_secs(60));
    Verdict::new(ok && fast, format!("R(T)/sqrt(T) growth 1e4 -> 1e5 per seed {ratios:.3?}"))
}

fn gradient_oracle() -> Verdict {
    let report = match gradcheck_battery(20, 0) {
        Ok(r) => r,
        Err(e) => return Verdict::new(false, e.to_string()),
    };
    let worst = report.cases.iter().map(|c| c.max_relative_error).fold(0.0, f64::max);
    let small = report.cases.iter().all(|c| c.spec.param_count() <= 200);
    Verdict::new(
        report.passed && report.cases.len() == 20 && small && worst <= GRADCHECK_TOLERANCE,
        format!("20 nets, worst relative error {worst:.3e}"),
    )
}

fn deep_network_data() -> DataSpec {
    match (std::env::var_os("LAPROP_MNIST_IMAGES"), std::env::var_os("LAPROP_MNIST_LABELS")) {
        (Some(images), Some(labels)) => {
            DataSpec::Mnist { images: PathBuf::from(images), labels: PathBuf::from(labels), limit: Some(2000) }
        }
        _ => DataSpec::Synthetic { n: 2000, input_dim: 64, classes: 10, spread: None, seed: 0 },
    }
}

fn deep_network() -> Verdict {
    let base = DeepFcStudy {
        data: deep_network_data(),
        depths: vec![100],
        width: 32,
        batch_size: 256,
        mu: 0.8,
        nu: 0.96,
        epsilon: 1e-26,
        lambdas: vec![4e-4, 1e-4, 4e-5, 1e-5],
        optimizers: vec![OptimizerKind::LaProp, OptimizerKind::Adam],
        seeds: (0..5).collect(),
        max_steps: 5000,
        smoothing_window: 50,
        loss_fraction: 0.8,
        record_stride: 1,
    };
    let mut reports = Vec::new();
    let mut passed = false;
    for depth in [100, 200] {
        let study = DeepFcStudy { depths: vec![depth], ..base.clone() };
        let rows = match deep_fc_study(&study) {
            Ok(r) => r,
            Err(e) => return Verdict::new(false, e.to_string()),
        };
        let find = |kind| rows.iter().find(|r: &&DeepFcRow| r.optimizer == kind).expect("row per optimizer");
        let (laprop, adam) = (find(OptimizerKind::LaProp), find(OptimizerKind::Adam));
        reports.push(format!(
            "depth {depth}: LaProp {}/5 (lambda {:e}), Adam {}/5 (lambda {:e})",
            laprop.successes, laprop.best_lambda, adam.successes, adam.best_lambda
        ));
        if laprop.successes >= 3 && adam.successes < laprop.successes {
            passed = true;
            break;
        }
    }
    Verdict::new(passed, reports.join("; "))
}

fn loss_spikes() -> Verdict {
    let study: SpikeStudy = toml::from_str(
        r#"
width = 32
depth = 1
batch_size = 32
lambda = 1e-3
mu = 0.9
nu = 0.7
max_steps = 50000
spike_factor = 10.0

[data]
source = "synthetic"
n = 2000
input_dim = 32
classes = 10
"#,
    )
    .expect("valid study");
    let rows = match spike_study(&study) {
        Ok(r) => r,
        Err(e) => return Verdict::new(false, e.to_string()),
    };
    let spikes = |kind| rows.iter().filter(|r| r.optimizer == kind && r.spike_step.is_some()).count();
    let adam = spikes(OptimizerKind::Adam);
    let laprop = spikes(OptimizerKind::LaProp);
    let steps: Vec<Option<u64>> =
        rows.iter().filter(|r| r.optimizer == OptimizerKind::Adam).map(|r| r.spike_step).collect();
    Verdict::new(
        rows.len() == 10 && adam >= 3 && laprop == 0,
        format!("Adam spikes on {adam}/5 seeds at {steps:?}, LaProp on {laprop}/5"),
    )
}

fn csv_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).expect("readable output dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                let bytes = fs::read(&path).expect("readable csv");
                out.push((path.strip_prefix(dir).expect("inside dir").to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().expect("temp dir");
    let configs = [
        (
            BenchKind::Rosenbrock,
            "sigmas = [0.04, 0.12]\nnus = [0.6, 0.98]\noptimizers = [\"laprop\", \"adam\"]\nlambdas = [3e-3, 1e-2]\nseeds = [0, 1, 2]\nmax_steps = 1500\n",
        ),
        (
            BenchKind::Spike,
            "width = 16\nbatch_size = 32\nlambda = 1e-2\nseeds = [0, 1]\nmax_steps = 1500\n[data]\nsource = \"synthetic\"\nn = 300\ninput_dim = 16\nclasses = 5\n",
        ),
    ];
    let mut compared = 0;
    for (kind, text) in configs {
        let root = tmp.path().join(kind.name());
        let cfg = root.with_extension("toml");
        fs::write(&cfg, text).expect("write config");
        let first = root.join("first");
        if let Err(e) = bench_from_file(kind, &cfg, &first, &Overrides::default()) {
            return Verdict::new(false, e.to_string());
        }
        let manifest = first.join(MANIFEST_FILE);
        let reference = csv_files(&first);
        for run in ["replay_a", "replay_b"] {
            let dir = root.join(run);
            if let Err(e) = replay(&manifest, &dir) {
                return Verdict::new(false, e.to_string());
            }
            let again = csv_files(&dir);
            if again != reference {
                return Verdict::new(false, format!("{} {run}: CSV output differs", kind.name()));
            }
            compared += again.len();
        }
    }
    Verdict::new(compared > 0, format!("{compared} replayed CSV files byte-identical"))
}
