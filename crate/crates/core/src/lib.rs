//! Deterministic discrete-event simulator for dual-radio LPWAN motes: a
//! LoRa main transceiver, an OOK wake-up receiver, a Rime-style unicast
//! stack and a per-node energy ledger.
//!
//! The link-budget, wake-up and energy arithmetic is generic over
//! [`num::Scalar`] (`f32` or `f64`); the engine runs in `f64` on an integer
//! nanosecond clock. The aliases below fix the scalar to `f64`.

pub mod channel;
pub mod engine;
pub mod node;
pub mod num;
pub mod phy;
pub mod stack;
pub mod time;
pub mod wurx;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use phy::{time_on_air, RadioConfig};
pub use time::SimTime;

/// 16-bit link-layer address.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeAddress(pub u16);

impl fmt::Display for NodeAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

pub type Real = f64;
pub type SensitivityTable = phy::SensitivityTable<Real>;
pub type ReceptionDecision = phy::ReceptionDecision<Real>;
pub type ChannelParams = channel::ChannelParams<Real>;
pub type Position = channel::Position<Real>;
pub type WurxConfig = wurx::WurxConfig<Real>;
pub type EnergyLedger = node::EnergyLedger<Real>;
pub type PowerTable = node::PowerTable<Real>;
pub type PowerReport = node::PowerReport<Real>;
