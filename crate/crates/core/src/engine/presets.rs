//! The two canned experiments: a coverage sweep over distance and a
//! power profile of one wake-up exchange cycle after another.

use rayon::prelude::*;

use super::metrics::{wilson_interval, RunMetrics};
use super::scenario::{AppSpec, NodeSpec, PeriodicSpec, Role, Scenario, SimSpec, WakeupExchangeSpec};
use super::{run, EngineError};
use crate::channel::ChannelParams;
use crate::phy::RadioConfig;
use crate::wurx::{WakeUpFrame, WurxConfig};
use crate::NodeAddress;

pub const DEFAULT_SWEEP_DISTANCES_M: [f64; 10] =
    [1.0, 100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 800.0, 1200.0, 2500.0];
/// One simulated hour at the 10 s reporting period.
pub const DEFAULT_SWEEP_PACKETS: u64 = 360;
pub const SINK: NodeAddress = NodeAddress(1);
pub const MOTE: NodeAddress = NodeAddress(2);
pub const POWER_PROFILE_TARGET: NodeAddress = NodeAddress(2);
pub const POWER_PROFILE_WAKE_ADDRESS: u8 = 0x2A;

const PERIOD_S: f64 = 10.0;
const PAYLOAD_LEN: usize = 16;
/// Lets the last frame finish before the horizon.
const DRAIN_S: f64 = 1.0;

/// Sink at the origin, one mote `distance_m` away sending `packets` frames.
pub fn coverage_scenario(distance_m: f64, packets: u64, seed: u64) -> Scenario {
    Scenario {
        sim: SimSpec {
            horizon_s: packets as f64 * PERIOD_S + DRAIN_S,
            seed,
        },
        radio: RadioConfig::default(),
        channel: ChannelParams::default(),
        app: AppSpec::Periodic(PeriodicSpec {
            senders: vec![MOTE],
            dst: SINK,
            period_s: PERIOD_S,
            payload_len: PAYLOAD_LEN,
            stagger_s: 0.0,
        }),
        nodes: vec![
            NodeSpec::new(SINK.0, 0.0, Role::Sink),
            NodeSpec::new(MOTE.0, distance_m, Role::Sensor),
        ],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub distance_m: f64,
    pub sent: u64,
    pub delivered: u64,
    pub pdr: f64,
    pub rssi_dbm_mean: f64,
    pub snr_db_mean: f64,
    /// Wilson 95 % interval on the PDR.
    pub pdr_interval: (f64, f64),
    pub seed: u64,
    pub scenario_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub packets: u64,
    pub seed: u64,
    /// The first point's scenario, for the output header.
    pub template: Scenario,
    pub points: Vec<SweepPoint>,
}

/// Runs one coverage scenario per distance, in parallel. Point `k` uses
/// seed `seed + k`.
pub fn range_sweep(distances_m: &[f64], packets: u64, seed: u64) -> Result<Sweep, EngineError> {
    let points = distances_m
        .par_iter()
        .enumerate()
        .map(|(k, &d)| {
            let point_seed = seed.wrapping_add(k as u64);
            let s = coverage_scenario(d, packets, point_seed);
            let m = run(&s)?;
            let link = m.link(MOTE, SINK);
            let (sent, delivered) = link.map_or((0, 0), |l| (l.sent, l.delivered));
            Ok(SweepPoint {
                distance_m: d,
                sent,
                delivered,
                pdr: link.map_or(0.0, |l| l.pdr),
                rssi_dbm_mean: link.map_or(f64::NAN, |l| l.rssi_dbm_mean),
                snr_db_mean: link.map_or(f64::NAN, |l| l.snr_db_mean),
                pdr_interval: wilson_interval(delivered, sent),
                seed: point_seed,
                scenario_hash: m.scenario_hash,
            })
        })
        .collect::<Result<Vec<_>, EngineError>>()?;
    Ok(Sweep {
        packets,
        seed,
        template: coverage_scenario(distances_m.first().copied().unwrap_or(1.0), packets, seed),
        points,
    })
}

/// An always-on initiator at the origin waking a sleeping mote 2 m away
/// every 10 s, starting at 1 s.
pub fn power_profile_scenario(cycles: u64, seed: u64) -> Scenario {
    let mut target = NodeSpec::new(POWER_PROFILE_TARGET.0, 2.0, Role::Sensor);
    target.wurx = Some(WurxConfig::with_address(POWER_PROFILE_WAKE_ADDRESS));
    Scenario {
        sim: SimSpec {
            horizon_s: (cycles.max(1)) as f64 * PERIOD_S,
            seed,
        },
        radio: RadioConfig::default(),
        channel: ChannelParams::default(),
        app: AppSpec::WakeupExchange(WakeupExchangeSpec {
            initiator: SINK,
            target: POWER_PROFILE_TARGET,
            wake_address: None,
            payload_len: PAYLOAD_LEN,
            period_s: PERIOD_S,
            first_at_s: 1.0,
            cycles,
            linger_s: 0.005,
            rx_window_s: 1.0,
            wake_frame: WakeUpFrame::default(),
        }),
        nodes: vec![NodeSpec::new(SINK.0, 0.0, Role::Sink), target],
    }
}

pub fn power_profile(cycles: u64, seed: u64) -> Result<(Scenario, RunMetrics), EngineError> {
    let s = power_profile_scenario(cycles, seed);
    let m = run(&s)?;
    Ok((s, m))
}
