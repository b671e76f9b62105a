use std::path::Path;
use std::time::Instant;

use laprop::verify::{
    adam_battery, gradcheck_battery, heavy_tail_battery, identity_battery, laprop_battery, laprop_battery_with,
    BatterySize, BoundCheckReport, EquivalenceReport, GradCheckReport, HeavyTailBattery, StepFn,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Outcome};
use crate::output::OutputDir;
use crate::Battery;

pub const VERIFY_SEED: u64 = 0;
pub const HEAVY_TAIL_MU: f64 = 0.9;
pub const HEAVY_TAIL_SIZES: [usize; 4] = [1_000, 10_000, 100_000, 1_000_000];
pub const HEAVY_TAIL_SEEDS: u64 = 20;
pub const EQUIVALENCE_SEQUENCES: usize = 1000;
pub const GRADCHECK_NETS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsFile {
    pub laprop: Vec<BoundCheckReport>,
    pub adam: Vec<BoundCheckReport>,
    pub laprop_total_steps: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceFile {
    pub reports: Vec<EquivalenceReport>,
    pub passed: bool,
}

pub fn bounds_file(laprop: Vec<BoundCheckReport>, adam: Vec<BoundCheckReport>) -> BoundsFile {
    let passed = laprop.iter().chain(&adam).all(BoundCheckReport::passed);
    BoundsFile { laprop_total_steps: laprop.iter().map(|r| r.total_steps).sum(), laprop, adam, passed }
}

/// Update-bound battery. `stepper` replaces the LaProp rule under test.
pub fn verify_bounds(dir: &mut OutputDir, stepper: Option<&mut StepFn<'_>>) -> Result<bool, CliError> {
    let size = BatterySize::default();
    let laprop = match stepper {
        Some(s) => laprop_battery_with(size, VERIFY_SEED, s),
        None => laprop_battery(size, VERIFY_SEED),
    };
    let file = bounds_file(laprop, adam_battery(size, VERIFY_SEED));
    dir.write_json("bounds.json", &file)?;
    Ok(file.passed)
}

pub fn verify_heavy_tail(dir: &mut OutputDir, seeds: u64) -> Result<bool, CliError> {
    let battery: HeavyTailBattery = heavy_tail_battery(HEAVY_TAIL_MU, &HEAVY_TAIL_SIZES, seeds as usize, VERIFY_SEED)?;
    dir.write_json("heavytail.json", &battery)?;
    Ok(battery.passed)
}

pub fn verify_equivalence(dir: &mut OutputDir) -> Result<bool, CliError> {
    let reports = identity_battery(EQUIVALENCE_SEQUENCES, VERIFY_SEED)?;
    let file = EquivalenceFile { passed: reports.iter().all(EquivalenceReport::passed), reports };
    dir.write_json("equivalence.json", &file)?;
    Ok(file.passed)
}

pub fn verify_gradcheck(dir: &mut OutputDir) -> Result<bool, CliError> {
    let report: GradCheckReport = gradcheck_battery(GRADCHECK_NETS, VERIFY_SEED)?;
    dir.write_json("gradcheck.json", &report)?;
    Ok(report.passed)
}

fn battery_name(b: Battery) -> &'static str {
    match b {
        Battery::Bounds => "bounds",
        Battery::Heavytail => "heavytail",
        Battery::Equivalence => "equivalence",
        Battery::Gradcheck => "gradcheck",
        Battery::All => "all",
    }
}

/// Runs the requested battery (or all four), writing one JSON report per
/// battery plus a manifest.
pub fn cmd_verify(battery: Battery, out: &Path, seeds: Option<u64>) -> Result<Outcome, CliError> {
    cmd_verify_with(battery, out, seeds, None)
}

pub fn cmd_verify_with(
    battery: Battery,
    out: &Path,
    seeds: Option<u64>,
    stepper: Option<&mut StepFn<'_>>,
) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let heavy_seeds = seeds.unwrap_or(HEAVY_TAIL_SEEDS);
    if heavy_seeds == 0 {
        return Err(CliError::Config("--seeds must be >= 1".into()));
    }
    let mut dir = OutputDir::create(out)?;
    let all = battery == Battery::All;
    let mut passed = true;
    let mut stepper = stepper;
    if all || battery == Battery::Bounds {
        let ok = verify_bounds(&mut dir, stepper.take())?;
        report("bounds", ok);
        passed &= ok;
    }
    if all || battery == Battery::Heavytail {
        let ok = verify_heavy_tail(&mut dir, heavy_seeds)?;
        report("heavytail", ok);
        passed &= ok;
    }
    if all || battery == Battery::Equivalence {
        let ok = verify_equivalence(&mut dir)?;
        report("equivalence", ok);
        passed &= ok;
    }
    if all || battery == Battery::Gradcheck {
        let ok = verify_gradcheck(&mut dir)?;
        report("gradcheck", ok);
        passed &= ok;
    }
    let config = serde_json::json!({ "battery": battery_name(battery), "heavytail_seeds": heavy_seeds });
    dir.finish(
        &format!("verify {}", battery_name(battery)),
        config,
        (0..heavy_seeds).collect(),
        start.elapsed(),
    )?;
    Ok(if passed { Outcome::Success } else { Outcome::VerificationFailed })
}

fn report(name: &str, ok: bool) {
    eprintln!("{name}: {}", if ok { "pass" } else { "FAIL" });
}
