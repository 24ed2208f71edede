//! Scenario files: TOML with `sim`, `radio`, `channel`, `app` and `nodes`
//! sections. Unknown keys are rejected. See `docs/scenario-schema.md`.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::channel::{ChannelError, ChannelParams, Position};
use crate::node::{McuParams, PowerTable, Timing};
use crate::phy::{time_on_air, PhyError, RadioConfig};
use crate::stack::HEADER_LEN;
use crate::time::{duration_from_secs, SimTime};
use crate::wurx::{wub_airtime, WakeUpFrame, WurxConfig, WurxError};
use crate::NodeAddress;

pub const DEFAULT_RADIO_TURN_ON_NS: u64 = 1_000_000;
pub const DEFAULT_BATTERY_J: f64 = 20_000.0;
pub const DEFAULT_HARVEST_EFFICIENCY: f64 = 0.90;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("reading scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing scenario: {0}")]
    Parse(String),
    #[error("scenario has no nodes")]
    NoNodes,
    #[error("duplicate node address {0}")]
    DuplicateAddress(NodeAddress),
    #[error("{what} refers to unknown node {address}")]
    UnknownNode { what: &'static str, address: NodeAddress },
    #[error("nodes {0} and {1} share a position")]
    CoLocated(NodeAddress, NodeAddress),
    #[error("horizon must be a positive number of seconds")]
    Horizon,
    #[error("`{0}` must be a finite, non-negative number of seconds")]
    Seconds(&'static str),
    #[error("radio: {0}")]
    Radio(#[from] PhyError),
    #[error("channel: {0}")]
    Channel(#[from] ChannelError),
    #[error("node {address}: {msg}")]
    Node { address: NodeAddress, msg: String },
    #[error("node {address} wake-up receiver: {source}")]
    Wurx {
        address: NodeAddress,
        #[source]
        source: WurxError,
    },
    #[error("app: {0}")]
    App(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub horizon_s: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Base station: listens continuously when idle.
    Sink,
    /// Mote: sleeps when idle.
    #[default]
    Sensor,
}

fn default_turn_on() -> u64 {
    DEFAULT_RADIO_TURN_ON_NS
}

fn default_battery() -> f64 {
    DEFAULT_BATTERY_J
}

fn default_efficiency() -> f64 {
    DEFAULT_HARVEST_EFFICIENCY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub address: NodeAddress,
    #[serde(default)]
    pub position: Position<f64>,
    #[serde(default)]
    pub role: Role,
    #[serde(default)]
    pub power: PowerTable<f64>,
    #[serde(default)]
    pub mcu: McuParams<f64>,
    #[serde(default = "default_turn_on")]
    pub radio_turn_on_ns: u64,
    #[serde(default)]
    pub wurx: Option<WurxConfig<f64>>,
    #[serde(default = "default_battery")]
    pub battery_j: f64,
    #[serde(default)]
    pub harvest_w: f64,
    #[serde(default = "default_efficiency")]
    pub harvest_efficiency: f64,
}

impl NodeSpec {
    pub fn new(address: u16, x: f64, role: Role) -> Self {
        NodeSpec {
            address: NodeAddress(address),
            position: Position::new(x, 0.0, 0.0),
            role,
            power: PowerTable::default(),
            mcu: McuParams::default(),
            radio_turn_on_ns: DEFAULT_RADIO_TURN_ON_NS,
            wurx: None,
            battery_j: DEFAULT_BATTERY_J,
            harvest_w: 0.0,
            harvest_efficiency: DEFAULT_HARVEST_EFFICIENCY,
        }
    }

    pub fn timing(&self) -> Timing {
        Timing {
            wakeup_latency: self.mcu.wakeup_latency(),
            radio_turn_on: Duration::from_nanos(self.radio_turn_on_ns),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicSpec {
    pub senders: Vec<NodeAddress>,
    pub dst: NodeAddress,
    #[serde(default = "ten_seconds")]
    pub period_s: f64,
    #[serde(default = "sixteen")]
    pub payload_len: usize,
    /// Offset of each successive sender's schedule, to spread them out.
    #[serde(default)]
    pub stagger_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WakeupExchangeSpec {
    pub initiator: NodeAddress,
    pub target: NodeAddress,
    /// Address keyed into the wake-up frame; the target's own by default.
    #[serde(default)]
    pub wake_address: Option<u8>,
    #[serde(default = "sixteen")]
    pub payload_len: usize,
    #[serde(default = "ten_seconds")]
    pub period_s: f64,
    #[serde(default = "one_second")]
    pub first_at_s: f64,
    #[serde(default = "one")]
    pub cycles: u64,
    #[serde(default = "five_ms")]
    pub linger_s: f64,
    #[serde(default = "one_second")]
    pub rx_window_s: f64,
    #[serde(default)]
    pub wake_frame: WakeUpFrame,
}

fn ten_seconds() -> f64 {
    10.0
}
fn one_second() -> f64 {
    1.0
}
fn five_ms() -> f64 {
    0.005
}
fn sixteen() -> usize {
    16
}
fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AppSpec {
    Periodic(PeriodicSpec),
    WakeupExchange(WakeupExchangeSpec),
    /// Every node just follows its role's idle policy.
    Idle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub sim: SimSpec,
    #[serde(default)]
    pub radio: RadioConfig,
    #[serde(default)]
    pub channel: ChannelParams<f64>,
    pub app: AppSpec,
    #[serde(default)]
    pub nodes: Vec<NodeSpec>,
}

pub(crate) fn secs(what: &'static str, s: f64) -> Result<Duration, ScenarioError> {
    duration_from_secs(s).ok_or(ScenarioError::Seconds(what))
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn horizon(&self) -> Result<SimTime, ScenarioError> {
        let d = secs("sim.horizon_s", self.sim.horizon_s)?;
        if d.is_zero() {
            return Err(ScenarioError::Horizon);
        }
        SimTime::ZERO.checked_add(d).ok_or(ScenarioError::Horizon)
    }

    pub fn node(&self, address: NodeAddress) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.address == address)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        Sha256::digest(&json)
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Wake-up frame the initiator keys, with the resolved address.
    pub fn wake_frame(&self) -> WakeUpFrame {
        match &self.app {
            AppSpec::WakeupExchange(w) => {
                let address = w.wake_address.unwrap_or_else(|| {
                    self.node(w.target)
                        .and_then(|n| n.wurx.map(|c| c.address))
                        .unwrap_or(0)
                });
                WakeUpFrame {
                    address,
                    ..w.wake_frame
                }
            }
            _ => WakeUpFrame::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.horizon()?;
        self.radio.validate()?;
        self.channel.validate()?;
        if self.nodes.is_empty() {
            return Err(ScenarioError::NoNodes);
        }
        let mut seen = BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(n.address) {
                return Err(ScenarioError::DuplicateAddress(n.address));
            }
            self.validate_node(n)?;
        }
        for (i, a) in self.nodes.iter().enumerate() {
            for b in &self.nodes[i + 1..] {
                if a.position.distance(&b.position) <= 0.0 {
                    return Err(ScenarioError::CoLocated(a.address, b.address));
                }
            }
        }
        self.validate_app()
    }

    fn validate_node(&self, n: &NodeSpec) -> Result<(), ScenarioError> {
        let node_err = |msg: &str| ScenarioError::Node {
            address: n.address,
            msg: msg.to_string(),
        };
        if !n.position.is_finite() {
            return Err(ScenarioError::Channel(ChannelError::NonFinitePosition));
        }
        n.power.validate().map_err(node_err)?;
        n.mcu.validate().map_err(node_err)?;
        if !(n.battery_j.is_finite() && n.battery_j >= 0.0) {
            return Err(node_err("battery_j must be finite and non-negative"));
        }
        if !(n.harvest_w.is_finite() && n.harvest_w >= 0.0) {
            return Err(node_err("harvest_w must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&n.harvest_efficiency) {
            return Err(node_err("harvest_efficiency must lie in [0, 1]"));
        }
        if let Some(w) = &n.wurx {
            w.validate().map_err(|source| ScenarioError::Wurx {
                address: n.address,
                source,
            })?;
        }
        Ok(())
    }

    fn require(&self, what: &'static str, address: NodeAddress) -> Result<&NodeSpec, ScenarioError> {
        self.node(address)
            .ok_or(ScenarioError::UnknownNode { what, address })
    }

    fn validate_app(&self) -> Result<(), ScenarioError> {
        match &self.app {
            AppSpec::Idle => Ok(()),
            AppSpec::Periodic(p) => {
                self.require("app.dst", p.dst)?;
                for &s in &p.senders {
                    self.require("app.senders", s)?;
                    if s == p.dst {
                        return Err(ScenarioError::App(format!(
                            "sender {s} is also the destination"
                        )));
                    }
                }
                let unique: BTreeSet<_> = p.senders.iter().collect();
                if unique.len() != p.senders.len() {
                    return Err(ScenarioError::App("duplicate sender".into()));
                }
                if p.payload_len > crate::stack::DEFAULT_MTU {
                    return Err(ScenarioError::App(format!(
                        "payload_len {} exceeds the {} B MTU",
                        p.payload_len,
                        crate::stack::DEFAULT_MTU
                    )));
                }
                let period = secs("app.period_s", p.period_s)?;
                secs("app.stagger_s", p.stagger_s)?;
                let airtime = time_on_air(&self.radio, p.payload_len + HEADER_LEN)?;
                for &s in &p.senders {
                    let t = self.require("app.senders", s)?.timing();
                    let cycle = t.wakeup_latency + t.radio_turn_on + airtime;
                    if period <= cycle {
                        return Err(ScenarioError::App(format!(
                            "period {period:?} must exceed the {cycle:?} wake, turn-on and frame airtime of sender {s}"
                        )));
                    }
                }
                Ok(())
            }
            AppSpec::WakeupExchange(w) => {
                self.require("app.initiator", w.initiator)?;
                let target = self.require("app.target", w.target)?;
                if w.initiator == w.target {
                    return Err(ScenarioError::App("initiator and target coincide".into()));
                }
                if target.wurx.is_none() {
                    return Err(ScenarioError::App(format!(
                        "target {} has no wake-up receiver",
                        w.target
                    )));
                }
                if w.payload_len > crate::stack::DEFAULT_MTU {
                    return Err(ScenarioError::App("payload_len exceeds the MTU".into()));
                }
                let period = secs("app.period_s", w.period_s)?;
                secs("app.first_at_s", w.first_at_s)?;
                let linger = secs("app.linger_s", w.linger_s)?;
                let window = secs("app.rx_window_s", w.rx_window_s)?;
                let wub = wub_airtime(&self.wake_frame()).map_err(|source| ScenarioError::Wurx {
                    address: w.initiator,
                    source,
                })?;
                let t = target.timing();
                let data = time_on_air(&self.radio, w.payload_len + HEADER_LEN)?;
                let exchange = wub + t.wakeup_latency + t.radio_turn_on + data + linger.max(window);
                if period <= exchange {
                    return Err(ScenarioError::App(format!(
                        "period {period:?} must exceed one exchange ({exchange:?})"
                    )));
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
[sim]
horizon_s = 60.0
seed = 3

[radio]
spreading_factor = 12

[app]
kind = "periodic"
senders = [2]
dst = 1

[[nodes]]
address = 1
role = "sink"

[[nodes]]
address = 2
position = { x = 100.0 }
"#;

    #[test]
    fn parses_with_defaults() {
        let s = Scenario::from_toml_str(EXAMPLE).unwrap();
        s.validate().unwrap();
        assert_eq!(s.nodes[1].position.x, 100.0);
        assert_eq!(s.nodes[1].role, Role::Sensor);
        assert_eq!(s.radio.bandwidth_hz, 500_000);
        let AppSpec::Periodic(p) = &s.app else { panic!() };
        assert_eq!((p.period_s, p.payload_len), (10.0, 16));
    }

    #[test]
    fn unknown_keys_rejected() {
        for (from, to) in [
            ("seed = 3", "sed = 3"),
            ("spreading_factor = 12", "spreadingfactor = 12"),
            ("dst = 1", "dst = 1\nperiod = 5"),
            ("role = \"sink\"", "role = \"sink\"\nrol = 1"),
        ] {
            let text = EXAMPLE.replace(from, to);
            assert!(
                matches!(Scenario::from_toml_str(&text), Err(ScenarioError::Parse(_))),
                "{to}"
            );
        }
    }

    #[test]
    fn validation_errors() {
        let base = Scenario::from_toml_str(EXAMPLE).unwrap();
        let mut s = base.clone();
        s.nodes.clear();
        assert!(matches!(s.validate(), Err(ScenarioError::NoNodes)));
        let mut s = base.clone();
        s.nodes[1].address = NodeAddress(1);
        assert!(matches!(s.validate(), Err(ScenarioError::DuplicateAddress(_))));
        let mut s = base.clone();
        s.sim.horizon_s = 0.0;
        assert!(matches!(s.validate(), Err(ScenarioError::Horizon)));
        let mut s = base.clone();
        s.nodes[1].position.x = 0.0;
        assert!(matches!(s.validate(), Err(ScenarioError::CoLocated(..))));
        let mut s = base.clone();
        if let AppSpec::Periodic(p) = &mut s.app {
            p.period_s = 0.3;
        }
        assert!(matches!(s.validate(), Err(ScenarioError::App(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = Scenario::from_toml_str(EXAMPLE).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        b.sim.seed = 4;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn toml_roundtrip_preserves_scenario() {
        let a = Scenario::from_toml_str(EXAMPLE).unwrap();
        let b = Scenario::from_toml_str(&a.to_toml_string()).unwrap();
        assert_eq!(a, b);
    }
}
