//! Executable checks of the update-magnitude bounds, the heavy-tail blow-up
//! of coupled momentum, the limit identities between rules, and gradient
//! correctness of the MLP.

mod bounds;
mod equivalence;
mod finite_diff;
mod gradcheck;
mod heavy_tail;

pub use bounds::{
    adam_battery, check_update_bound, laprop_battery, laprop_battery_with, main_text_bound, theoretical_bound,
    BatterySize, BoundCheck, BoundCheckReport, BoundStatus, GradientDistribution, StepFn, ADAM_BATTERY_PAIRS,
    ADAM_INAPPLICABLE_PAIRS, BOUND_SLACK, LAPROP_BATTERY_MUS, LAPROP_BATTERY_NUS,
};
pub use equivalence::{
    equivalence_check, identify, identity_battery, Configured, EquivalenceReport, Identity, EQUIVALENCE_STEPS,
};
pub use finite_diff::{finite_diff_grad, max_relative_error};
pub use gradcheck::{gradcheck_battery, GradCheckCase, GradCheckReport, GRADCHECK_FLOOR, GRADCHECK_STEP, GRADCHECK_TOLERANCE};
pub use heavy_tail::{
    heavy_tail_battery, heavy_tail_scan, HeavyTailBattery, HeavyTailEntry, HeavyTailReport, HEAVY_TAIL_CAP_SLACK,
};
