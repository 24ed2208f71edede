//! Discrete-event engine: scenario loading, the event loop, experiment
//! presets and output emission.
//!
//! Events are ordered by `(timestamp, sequence)` over an integer-nanosecond
//! clock; identical scenario and seed give an identical trace.

mod bench;
mod emit;
mod metrics;
mod presets;
mod radio;
mod scenario;
mod sim;

pub use bench::SimDriverBench;
pub use emit::{emit_power_profile, emit_run, emit_sweep, write_artifacts, Artifact, Format, FORMAT_VERSION};
pub use metrics::{
    wilson_interval, Exchange, ExchangeOutcome, LinkStats, NodeSummary, NoteKind, NoteRecord,
    PacketOutcome, PacketRecord, RunMetrics, TraceEntry, WakeRecord,
};
pub use presets::{
    coverage_scenario, power_profile, power_profile_scenario, range_sweep, Sweep, SweepPoint,
    DEFAULT_SWEEP_DISTANCES_M, DEFAULT_SWEEP_PACKETS, POWER_PROFILE_TARGET, POWER_PROFILE_WAKE_ADDRESS,
};
pub use radio::SimRadio;
pub use scenario::{
    AppSpec, NodeSpec, PeriodicSpec, Role, Scenario, ScenarioError, SimSpec, WakeupExchangeSpec,
    DEFAULT_BATTERY_J, DEFAULT_HARVEST_EFFICIENCY, DEFAULT_RADIO_TURN_ON_NS,
};
pub use sim::{default_apps, run, Simulator};

use thiserror::Error;

use crate::channel::ChannelError;
use crate::node::NodeError;
use crate::phy::PhyError;
use crate::stack::StackError;
use crate::time::SimTime;
use crate::wurx::WurxError;
use crate::NodeAddress;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("node {node} at {time}: {source}")]
    IllegalTransition {
        node: NodeAddress,
        time: SimTime,
        #[source]
        source: NodeError,
        /// Every event dispatched up to and including the failing one.
        trace: Vec<TraceEntry>,
    },
    #[error("event scheduled at {at} while the clock reads {now}")]
    Causality { now: SimTime, at: SimTime },
    #[error("node {node} application: {source}")]
    App {
        node: NodeAddress,
        #[source]
        source: StackError,
    },
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Wurx(#[from] WurxError),
    #[error("engine fault: {0}")]
    Internal(&'static str),
}

impl EngineError {
    /// Configuration problems found before any event ran.
    pub fn is_validation(&self) -> bool {
        matches!(self, EngineError::Scenario(_))
    }

    pub(crate) fn with_trace(mut self, full: &[TraceEntry]) -> Self {
        if let EngineError::IllegalTransition { trace, .. } = &mut self {
            *trace = full.to_vec();
        }
        self
    }
}
