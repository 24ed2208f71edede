//! Reference models the integration tests compare the simulator against.
//! They are written from the transceiver datasheet and the link-budget
//! formulas directly and share no code with the library.

#![allow(dead_code)]

use std::collections::BTreeSet;

use lpwan_sim::engine::{AppSpec, Scenario};
use lpwan_sim::NodeAddress;

/// Datasheet time-on-air formula. `cr` is the 1..=4 coding-rate index.
#[derive(Debug, Clone, Copy)]
pub struct AirtimeCase {
    pub sf: u32,
    pub bw_hz: u32,
    pub cr: u32,
    pub payload: u32,
    pub preamble: u32,
    pub implicit_header: bool,
    pub crc: bool,
    pub ldro: bool,
}

impl AirtimeCase {
    pub fn payload_symbols(&self) -> f64 {
        let num = 8.0 * f64::from(self.payload) - 4.0 * f64::from(self.sf) + 28.0
            + 16.0 * f64::from(u8::from(self.crc))
            - 20.0 * f64::from(u8::from(self.implicit_header));
        let den = 4.0 * (f64::from(self.sf) - 2.0 * f64::from(u8::from(self.ldro)));
        8.0 + ((num / den).ceil() * f64::from(self.cr + 4)).max(0.0)
    }

    pub fn total_symbols(&self) -> f64 {
        f64::from(self.preamble) + 4.25 + self.payload_symbols()
    }

    pub fn seconds(&self) -> f64 {
        self.total_symbols() * 2f64.powi(self.sf as i32) / f64::from(self.bw_hz)
    }
}

/// Log-distance received power with no shadowing.
pub fn rssi_dbm(tx_dbm: f64, pl0_db: f64, exponent: f64, d_m: f64) -> f64 {
    tx_dbm - pl0_db - 10.0 * exponent * d_m.log10()
}

pub fn noise_floor_dbm(bw_hz: u32, nf_db: f64) -> f64 {
    -174.0 + 10.0 * f64::from(bw_hz).log10() + nf_db
}

/// Receiver thresholds for the three configurations the generator uses.
pub fn thresholds(sf: u8, bw_hz: u32) -> (f64, f64) {
    match (sf, bw_hz) {
        (12, 500_000) => (-140.0, -20.0),
        (7, 125_000) => (-123.0, -7.5),
        (9, 250_000) => (-125.0, -12.5),
        _ => panic!("no reference threshold for SF{sf}/{bw_hz}"),
    }
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    src: u16,
    seqno: u16,
    start_ns: u64,
    end_ns: u64,
    rssi: f64,
}

/// Straight-line replay of a periodic scenario with no shadowing: lists
/// every frame each sender puts on air, then applies sensitivity, SNR and
/// pairwise capture at the destination.
pub fn replay_delivered(s: &Scenario) -> BTreeSet<(NodeAddress, u16)> {
    let AppSpec::Periodic(app) = &s.app else {
        panic!("replay covers periodic scenarios only");
    };
    assert_eq!(s.channel.shadowing_sigma_db, 0.0);
    let ns = |secs: f64| (secs * 1e9).round() as u64;
    let horizon = ns(s.sim.horizon_s);
    let period = ns(app.period_s);
    let stagger = ns(app.stagger_s);
    let r = &s.radio;
    let case = AirtimeCase {
        sf: u32::from(r.spreading_factor),
        bw_hz: r.bandwidth_hz,
        cr: u32::from(r.coding_rate) - 4,
        payload: (app.payload_len + 6) as u32,
        preamble: u32::from(r.preamble_symbols),
        implicit_header: !r.explicit_header,
        crc: r.crc_on,
        ldro: r.low_data_rate_optimize,
    };
    let airtime = (case.seconds() * 1e9).round() as u64;
    let sink = s.node(app.dst).expect("destination exists");

    let mut frames = Vec::new();
    for (k, &addr) in app.senders.iter().enumerate() {
        let n = s.node(addr).expect("sender exists");
        let lead = n.mcu.wakeup_latency_ns + n.radio_turn_on_ns;
        let dx = n.position.x - sink.position.x;
        let dy = n.position.y - sink.position.y;
        let dz = n.position.z - sink.position.z;
        let d = (dx * dx + dy * dy + dz * dz).sqrt();
        let rssi = rssi_dbm(
            f64::from(r.tx_power_dbm),
            s.channel.reference_loss_db,
            s.channel.path_loss_exponent,
            d,
        );
        let mut tick = period + k as u64 * stagger;
        let mut seqno = 0u16;
        while tick <= horizon {
            let start = tick + lead;
            if start <= horizon {
                frames.push(Frame {
                    src: addr.0,
                    seqno,
                    start_ns: start,
                    end_ns: start + airtime,
                    rssi,
                });
            }
            seqno += 1;
            tick += period;
        }
    }

    let (sens, floor) = thresholds(r.spreading_factor, r.bandwidth_hz);
    let noise = noise_floor_dbm(r.bandwidth_hz, s.channel.noise_figure_db);
    let mut delivered = BTreeSet::new();
    for f in &frames {
        if f.end_ns > horizon {
            continue;
        }
        let captured = frames
            .iter()
            .filter(|g| g.src != f.src || g.seqno != f.seqno)
            .filter(|g| g.start_ns < f.end_ns && f.start_ns < g.end_ns)
            .all(|g| f.rssi - g.rssi >= s.channel.capture_threshold_db);
        if captured && f.rssi >= sens && f.rssi - noise >= floor {
            delivered.insert((NodeAddress(f.src), f.seqno));
        }
    }
    delivered
}
