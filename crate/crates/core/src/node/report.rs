use std::time::Duration;

use crate::num::Scalar;

use super::{Bucket, EnergyLedger, PowerMode, PowerTable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerRow<S> {
    pub mode: PowerMode,
    /// Instantaneous power in this mode. For `ook_tx` this is the average
    /// over the frames sent, since it depends on each frame's bit pattern.
    pub power_w: S,
    pub time: Duration,
    pub energy_j: S,
    pub share_pct: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerReport<S> {
    pub rows: Vec<PowerRow<S>>,
    pub total_time: Duration,
    pub total_energy_j: S,
}

/// One row per mode in [`PowerMode::ALL`] order, including modes the node
/// never entered.
pub fn power_report<S: Scalar>(ledger: &EnergyLedger<S>, table: &PowerTable<S>) -> PowerReport<S> {
    let total_energy_j = ledger.total_energy_j();
    let rows = PowerMode::ALL
        .iter()
        .map(|&mode| {
            let bucket = ledger.bucket(mode);
            let time = bucket.map_or(Duration::ZERO, |b| b.time);
            let energy_j = bucket.map_or(S::zero(), |b| b.energy_j);
            let power_w = match (mode, bucket) {
                (PowerMode::OokTx, Some(b)) => b.power_w.unwrap_or(energy_j / S::seconds(time)),
                (_, Some(Bucket { power_w: Some(p), .. })) => *p,
                (_, Some(b)) => b.energy_j / S::seconds(b.time),
                (_, None) => table.power_of(mode, S::one()),
            };
            let share_pct = if total_energy_j > S::zero() {
                S::lit(100.0) * energy_j / total_energy_j
            } else {
                S::zero()
            };
            PowerRow {
                mode,
                power_w,
                time,
                energy_j,
                share_pct,
            }
        })
        .collect();
    PowerReport {
        rows,
        total_time: ledger.total_time(),
        total_energy_j,
    }
}
