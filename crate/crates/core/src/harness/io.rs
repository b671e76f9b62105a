use std::fmt::Write;

use super::TrajectoryRecord;

pub const TRAJECTORY_HEADER: &str = "step,loss,update_inf_norm,dist_to_opt,regret,status";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn optional(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

/// One row per recorded step. The status column reads `running` except on
/// the final row, which carries the terminal status.
pub fn trajectory_csv(record: &TrajectoryRecord) -> String {
    let mut out = String::with_capacity(64 * (record.rows.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    let last = record.rows.len().saturating_sub(1);
    for (i, row) in record.rows.iter().enumerate() {
        let status = if i == last { record.status.label() } else { "running" };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.step,
            format_float(row.loss),
            format_float(row.update_inf_norm),
            optional(row.dist_to_opt),
            optional(row.regret),
            status
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{RunStatus, TrajectoryRow};

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, -7.5e200, f64::MIN_POSITIVE] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn csv_layout() {
        let rec = TrajectoryRecord {
            seed: 0,
            rows: vec![
                TrajectoryRow { step: 1, loss: 1.0, update_inf_norm: 0.5, dist_to_opt: Some(2.0), regret: None },
                TrajectoryRow { step: 2, loss: 0.5, update_inf_norm: 0.25, dist_to_opt: Some(1.0), regret: None },
            ],
            status: RunStatus::Exhausted,
            steps: 2,
            max_update_inf_norm: 0.5,
            final_loss: 0.5,
        };
        let csv = trajectory_csv(&rec);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TRAJECTORY_HEADER);
        assert_eq!(lines[1], "1,1.0000000000000000e0,5.0000000000000000e-1,2.0000000000000000e0,,running");
        assert!(lines[2].ends_with(",,exhausted"));
    }
}
