use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{init_state, step_into, HyperParams, OptimizerKind};
use crate::rng::{self, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeavyTailEntry {
    pub n: usize,
    pub adam_max: f64,
    pub adam_p99: f64,
    pub adam_p999: f64,
    pub laprop_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeavyTailReport {
    pub mu: f64,
    pub seed: u64,
    /// Closed-form cap on LaProp's normalized update at `nu = 0`.
    pub laprop_cap: f64,
    pub entries: Vec<HeavyTailEntry>,
}

impl HeavyTailReport {
    pub fn entry(&self, n: usize) -> Option<&HeavyTailEntry> {
        self.entries.iter().find(|e| e.n == n)
    }
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Streams i.i.d. standard normal gradients through Adam and LaProp at
/// `nu = 0` and records the normalized update magnitudes over nested prefixes
/// of the stream (one prefix per entry of `sample_sizes`).
pub fn heavy_tail_scan(mu: f64, sample_sizes: &[usize], seed: u64) -> Result<HeavyTailReport> {
    if !(0.0..1.0).contains(&mu) {
        return Err(Error::invalid(format!("mu must lie in [0, 1), got {mu}")));
    }
    if sample_sizes.is_empty() || sample_sizes.contains(&0) {
        return Err(Error::invalid("sample sizes must be nonempty and positive"));
    }
    let mut sizes = sample_sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    let total = *sizes.last().expect("nonempty");

    let hp = HyperParams { lambda: 1.0, mu, nu: 0.0, epsilon: 0.0, ..HyperParams::default() };
    let mut adam = init_state(1, OptimizerKind::Adam)?;
    let mut laprop = init_state(1, OptimizerKind::LaProp)?;
    let mut rng = rng::seeded(seed, streams::GRADIENTS);
    let mut delta = [0.0];
    let mut adam_u = Vec::with_capacity(total);
    let (mut adam_max, mut laprop_max) = (0.0f64, 0.0f64);
    let mut entries = Vec::with_capacity(sizes.len());
    let mut next = 0;
    for i in 1..=total {
        let g = [rng.sample::<f64, _>(StandardNormal)];
        let u = step_into(&mut adam, &g, &hp, None, &mut delta)?;
        adam_u.push(u);
        adam_max = adam_max.max(u);
        laprop_max = laprop_max.max(step_into(&mut laprop, &g, &hp, None, &mut delta)?);
        if i == sizes[next] {
            let mut sorted = adam_u.clone();
            sorted.sort_unstable_by(f64::total_cmp);
            entries.push(HeavyTailEntry {
                n: i,
                adam_max,
                adam_p99: percentile(&sorted, 0.99),
                adam_p999: percentile(&sorted, 0.999),
                laprop_max,
            });
            next += 1;
        }
    }
    Ok(HeavyTailReport { mu, seed, laprop_cap: 1.0, entries })
}

/// Seed-level summary of the heavy-tail scan at the smallest and largest
/// sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeavyTailBattery {
    pub mu: f64,
    pub n_small: usize,
    pub n_large: usize,
    /// Adam's largest normalized update must exceed this many LaProp caps.
    pub exceed_factor: f64,
    pub reports: Vec<HeavyTailReport>,
    /// Seeds where Adam's max at `n_large` exceeds `exceed_factor * cap`.
    pub exceeding_seeds: usize,
    /// Seeds where Adam's max grows from `n_small` to `n_large`.
    pub growing_seeds: usize,
    /// Seeds where LaProp stays within its cap (plus 1e-12).
    pub laprop_capped_seeds: usize,
    pub min_exceeding: usize,
    pub min_growing: usize,
    pub passed: bool,
}

pub const HEAVY_TAIL_CAP_SLACK: f64 = 1e-12;

/// Runs [`heavy_tail_scan`] for seeds `0..n_seeds` and counts how many seeds
/// show the blow-up. Passing requires `exceeding_seeds >= 0.9 n` and
/// `growing_seeds >= 0.95 n` (rounded up) and LaProp capped on every seed.
pub fn heavy_tail_battery(mu: f64, sample_sizes: &[usize], n_seeds: usize, seed: u64) -> Result<HeavyTailBattery> {
    if n_seeds == 0 {
        return Err(Error::invalid("need at least one seed"));
    }
    let reports = (0..n_seeds as u64)
        .map(|i| heavy_tail_scan(mu, sample_sizes, seed.wrapping_add(i)))
        .collect::<Result<Vec<_>>>()?;
    let exceed_factor = 10.0;
    let first = |r: &HeavyTailReport| r.entries.first().cloned().expect("nonempty");
    let last = |r: &HeavyTailReport| r.entries.last().cloned().expect("nonempty");
    let exceeding_seeds = reports.iter().filter(|r| last(r).adam_max > exceed_factor * r.laprop_cap).count();
    let growing_seeds = reports.iter().filter(|r| last(r).adam_max > first(r).adam_max).count();
    let laprop_capped_seeds = reports
        .iter()
        .filter(|r| r.entries.iter().all(|e| e.laprop_max <= r.laprop_cap + HEAVY_TAIL_CAP_SLACK))
        .count();
    let min_exceeding = (0.9 * n_seeds as f64).ceil() as usize;
    let min_growing = (0.95 * n_seeds as f64).ceil() as usize;
    Ok(HeavyTailBattery {
        mu,
        n_small: first(&reports[0]).n,
        n_large: last(&reports[0]).n,
        exceed_factor,
        passed: exceeding_seeds >= min_exceeding && growing_seeds >= min_growing && laprop_capped_seeds == n_seeds,
        reports,
        exceeding_seeds,
        growing_seeds,
        laprop_capped_seeds,
        min_exceeding,
        min_growing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_momentum_is_self_normalized() {
        let r = heavy_tail_scan(0.0, &[10, 1000, 5000], 1).unwrap();
        for e in &r.entries {
            assert_eq!(e.adam_max, 1.0);
            assert_eq!(e.laprop_max, 1.0);
        }
    }

    #[test]
    fn extremes_grow_with_prefix_and_quantiles_order() {
        let r = heavy_tail_scan(0.9, &[1000, 100, 100_000], 3).unwrap();
        assert_eq!(r.entries.iter().map(|e| e.n).collect::<Vec<_>>(), vec![100, 1000, 100_000]);
        for w in r.entries.windows(2) {
            assert!(w[1].adam_max >= w[0].adam_max);
        }
        for e in &r.entries {
            assert!(e.adam_p99 <= e.adam_p999 && e.adam_p999 <= e.adam_max);
            assert!(e.laprop_max <= 1.0 + 1e-12);
        }
        assert!(r.entry(100_000).unwrap().adam_max > 10.0);
    }

    #[test]
    fn battery_counts() {
        let b = heavy_tail_battery(0.9, &[100, 20_000], 4, 11).unwrap();
        assert_eq!(b.reports.len(), 4);
        assert_eq!((b.min_exceeding, b.min_growing), (4, 4));
        assert_eq!(b.laprop_capped_seeds, 4);
        assert!(heavy_tail_battery(0.9, &[10], 0, 0).is_err());
        let flat = heavy_tail_battery(0.0, &[10, 100], 3, 0).unwrap();
        assert_eq!(flat.exceeding_seeds, 0);
        assert!(!flat.passed);
    }

    #[test]
    fn invalid_inputs() {
        assert!(heavy_tail_scan(1.0, &[10], 0).is_err());
        assert!(heavy_tail_scan(0.5, &[], 0).is_err());
    }
}
