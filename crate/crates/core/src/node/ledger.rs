use std::collections::BTreeMap;
use std::time::Duration;

use crate::num::Scalar;

use super::PowerMode;

/// Time and energy charged to one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bucket<S> {
    pub time: Duration,
    pub energy_j: S,
    /// The power every accrual used, or `None` once accruals disagreed.
    pub power_w: Option<S>,
}

/// Time-integrating energy account for one node.
///
/// The battery is debited `power * dt` and credited
/// `harvest_rate * efficiency * dt` on every accrual, floored at zero. Any
/// demand the battery could not cover is tracked as a deficit so that
/// `consumed = initial - remaining + harvested + deficit` holds exactly up
/// to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger<S> {
    buckets: BTreeMap<PowerMode, Bucket<S>>,
    initial_battery_j: S,
    battery_j: S,
    harvest_rate_w: S,
    harvest_efficiency: S,
    harvested_j: S,
    deficit_j: S,
}

impl<S: Scalar> EnergyLedger<S> {
    pub fn new(battery_j: S, harvest_rate_w: S, harvest_efficiency: S) -> Self {
        EnergyLedger {
            buckets: BTreeMap::new(),
            initial_battery_j: battery_j,
            battery_j,
            harvest_rate_w,
            harvest_efficiency,
            harvested_j: S::zero(),
            deficit_j: S::zero(),
        }
    }

    pub fn accrue(&mut self, mode: PowerMode, power_w: S, dt: Duration) {
        if dt.is_zero() {
            return;
        }
        let secs = S::seconds(dt);
        let energy = power_w * secs;
        let bucket = self.buckets.entry(mode).or_insert(Bucket {
            time: Duration::ZERO,
            energy_j: S::zero(),
            power_w: Some(power_w),
        });
        bucket.time += dt;
        bucket.energy_j = bucket.energy_j + energy;
        if bucket.power_w != Some(power_w) {
            bucket.power_w = None;
        }

        let inflow = self.harvest_rate_w * self.harvest_efficiency * secs;
        self.harvested_j = self.harvested_j + inflow;
        let next = self.battery_j - energy + inflow;
        if next < S::zero() {
            self.deficit_j = self.deficit_j - next;
            self.battery_j = S::zero();
        } else {
            self.battery_j = next;
        }
    }

    pub fn bucket(&self, mode: PowerMode) -> Option<&Bucket<S>> {
        self.buckets.get(&mode)
    }

    pub fn buckets(&self) -> impl Iterator<Item = (PowerMode, &Bucket<S>)> {
        self.buckets.iter().map(|(m, b)| (*m, b))
    }

    pub fn time_in(&self, mode: PowerMode) -> Duration {
        self.buckets.get(&mode).map_or(Duration::ZERO, |b| b.time)
    }

    pub fn energy_in(&self, mode: PowerMode) -> S {
        self.buckets.get(&mode).map_or(S::zero(), |b| b.energy_j)
    }

    pub fn total_time(&self) -> Duration {
        self.buckets.values().map(|b| b.time).sum()
    }

    pub fn total_energy_j(&self) -> S {
        self.buckets
            .values()
            .fold(S::zero(), |acc, b| acc + b.energy_j)
    }

    pub fn initial_battery_j(&self) -> S {
        self.initial_battery_j
    }

    pub fn battery_remaining_j(&self) -> S {
        self.battery_j
    }

    pub fn harvested_j(&self) -> S {
        self.harvested_j
    }

    pub fn deficit_j(&self) -> S {
        self.deficit_j
    }

    pub fn harvest_rate_w(&self) -> S {
        self.harvest_rate_w
    }

    pub fn harvest_efficiency(&self) -> S {
        self.harvest_efficiency
    }

    pub fn is_depleted(&self) -> bool {
        self.deficit_j > S::zero()
    }

    /// `|consumed - (initial - remaining + harvested + deficit)|` relative
    /// to the consumed total (absolute when nothing was consumed).
    pub fn conservation_error(&self) -> S {
        let consumed = self.total_energy_j();
        let budget =
            self.initial_battery_j - self.battery_j + self.harvested_j + self.deficit_j;
        let diff = (consumed - budget).abs();
        if consumed > S::zero() {
            diff / consumed
        } else {
            diff
        }
    }
}
