use std::collections::BTreeMap;
use std::time::Duration;

use serde::Serialize;

use crate::node::{EnergyLedger, PowerReport};
use crate::stack::{AppNote, UnicastStats};
use crate::time::SimTime;
use crate::NodeAddress;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketOutcome {
    Delivered,
    /// Decoded but dropped as a repeat of a recent (src, seqno).
    Duplicate,
    Collision,
    BelowSensitivity,
    SnrFloor,
    /// The addressee's radio was not in rx for the whole frame.
    NotListening,
}

impl PacketOutcome {
    pub fn label(self) -> &'static str {
        match self {
            PacketOutcome::Delivered => "delivered",
            PacketOutcome::Duplicate => "duplicate",
            PacketOutcome::Collision => "collision",
            PacketOutcome::BelowSensitivity => "below_sensitivity",
            PacketOutcome::SnrFloor => "snr_floor",
            PacketOutcome::NotListening => "not_listening",
        }
    }
}

/// One LoRa frame, as seen by its addressee.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PacketRecord {
    pub src: NodeAddress,
    pub dst: NodeAddress,
    pub seqno: u16,
    pub start: SimTime,
    pub end: SimTime,
    pub distance_m: f64,
    pub rssi_dbm: f64,
    pub snr_db: f64,
    pub outcome: PacketOutcome,
}

/// Per (src, dst) aggregate. RSSI and SNR are averaged over every frame
/// at the receiver antenna, decoded or not.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkStats {
    pub src: NodeAddress,
    pub dst: NodeAddress,
    pub distance_m: f64,
    pub sent: u64,
    pub delivered: u64,
    pub pdr: f64,
    pub rssi_dbm_mean: f64,
    pub snr_db_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WakeRecord {
    pub sender: NodeAddress,
    pub receiver: NodeAddress,
    pub start: SimTime,
    pub address: u8,
    pub rssi_dbm: f64,
    pub decoded: bool,
    pub interrupt: bool,
    /// Arrived while the receiver was still busy with an earlier frame.
    pub missed_busy: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ExchangeOutcome {
    Delivered { latency: Duration },
    /// Data went out but did not arrive.
    Lost,
    WakeTimeout,
    /// Cut off by the horizon.
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exchange {
    pub initiator: NodeAddress,
    pub target: NodeAddress,
    pub wub_start: SimTime,
    pub outcome: ExchangeOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "what")]
pub enum NoteKind {
    App(AppNote),
    BatteryDepleted,
    /// An event reached a node whose battery is gone.
    Ignored { event: &'static str },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoteRecord {
    pub time: SimTime,
    pub node: NodeAddress,
    pub note: NoteKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSummary {
    pub address: NodeAddress,
    pub ledger: EnergyLedger<f64>,
    pub report: PowerReport<f64>,
    pub unicast: UnicastStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TraceEntry {
    pub time: SimTime,
    pub seq: u64,
    pub node: Option<NodeAddress>,
    pub kind: &'static str,
}

#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub scenario_hash: String,
    pub seed: u64,
    pub horizon: SimTime,
    pub packets: Vec<PacketRecord>,
    pub links: Vec<LinkStats>,
    pub wakeups: Vec<WakeRecord>,
    pub exchanges: Vec<Exchange>,
    pub nodes: Vec<NodeSummary>,
    pub notes: Vec<NoteRecord>,
    pub event_count: u64,
    pub trace_hash: String,
    pub trace: Vec<TraceEntry>,
    /// Host time spent in the run. Never part of emitted output.
    pub wall_clock: Duration,
}

impl RunMetrics {
    pub fn node(&self, address: NodeAddress) -> Option<&NodeSummary> {
        self.nodes.iter().find(|n| n.address == address)
    }

    pub fn link(&self, src: NodeAddress, dst: NodeAddress) -> Option<&LinkStats> {
        self.links.iter().find(|l| l.src == src && l.dst == dst)
    }
}

pub(crate) fn link_stats(packets: &[PacketRecord]) -> Vec<LinkStats> {
    let mut acc: BTreeMap<(NodeAddress, NodeAddress), LinkStats> = BTreeMap::new();
    for p in packets {
        let l = acc.entry((p.src, p.dst)).or_insert(LinkStats {
            src: p.src,
            dst: p.dst,
            distance_m: p.distance_m,
            sent: 0,
            delivered: 0,
            pdr: 0.0,
            rssi_dbm_mean: 0.0,
            snr_db_mean: 0.0,
        });
        l.sent += 1;
        l.delivered += u64::from(p.outcome == PacketOutcome::Delivered);
        l.rssi_dbm_mean += p.rssi_dbm;
        l.snr_db_mean += p.snr_db;
    }
    acc.into_values()
        .map(|mut l| {
            let n = l.sent as f64;
            l.pdr = l.delivered as f64 / n;
            l.rssi_dbm_mean /= n;
            l.snr_db_mean /= n;
            l
        })
        .collect()
}

pub(crate) fn exchanges(notes: &[NoteRecord], packets: &[PacketRecord]) -> Vec<Exchange> {
    let mut out: Vec<Exchange> = Vec::new();
    let mut open: BTreeMap<NodeAddress, usize> = BTreeMap::new();
    for n in notes {
        let NoteKind::App(note) = n.note else { continue };
        match note {
            AppNote::WakeSent { target } => {
                open.insert(n.node, out.len());
                out.push(Exchange {
                    initiator: n.node,
                    target,
                    wub_start: n.time,
                    outcome: ExchangeOutcome::Incomplete,
                });
            }
            AppNote::WakeTimeout { .. } => {
                if let Some(i) = open.remove(&n.node) {
                    out[i].outcome = ExchangeOutcome::WakeTimeout;
                }
            }
            AppNote::DataSent { dst, seqno } => {
                if let Some(i) = open.remove(&n.node) {
                    let p = packets
                        .iter()
                        .find(|p| p.src == n.node && p.dst == dst && p.seqno == seqno && p.start >= n.time);
                    out[i].outcome = match p {
                        Some(p) if p.outcome == PacketOutcome::Delivered => {
                            ExchangeOutcome::Delivered {
                                latency: p.end.since(out[i].wub_start).unwrap_or_default(),
                            }
                        }
                        Some(_) => ExchangeOutcome::Lost,
                        None => ExchangeOutcome::Incomplete,
                    };
                }
            }
            AppNote::RxWindowExpired => {}
        }
    }
    out
}

/// Wilson score interval for `successes` out of `trials` at ~95 %.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}
