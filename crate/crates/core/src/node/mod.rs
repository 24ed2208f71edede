//! The composite mote: MCU, main radio and wake-up receiver as one state
//! machine, plus the energy ledger that integrates its modal power.

mod ledger;
mod power;
mod report;
mod state;

pub use ledger::{Bucket, EnergyLedger};
pub use power::{McuParams, PowerMode, PowerTable, DEFAULT_SUPPLY_VOLTAGE_V};
pub use report::{power_report, PowerReport, PowerRow};
pub use state::{
    McuMode, NodeError, NodeEvent, NodeState, Notice, RadioGoal, RadioMode, TimerId, Timing,
    Transition, TxKind, WakeCause,
};
