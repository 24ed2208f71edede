//! CSV and plain-text output. Column order is fixed; every file opens with
//! `#` header lines carrying the format version, scenario hash, seed and
//! the radio, channel and platform constants in force.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use super::metrics::{ExchangeOutcome, RunMetrics};
use super::presets::Sweep;
use super::scenario::{Role, Scenario};
use crate::node::PowerMode;
use crate::phy::SensitivityTable;
use crate::stack::{DEFAULT_MTU, HEADER_FORMAT};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn new(name: &str, contents: String) -> Self {
        Artifact {
            name: name.to_string(),
            contents,
        }
    }
}

pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for a in artifacts {
        std::fs::write(dir.join(&a.name), &a.contents)?;
    }
    Ok(())
}

fn header(s: &Scenario, hash: &str, seed: u64, per_node: bool) -> String {
    let r = &s.radio;
    let c = &s.channel;
    let table = SensitivityTable::<f64>::datasheet();
    let mut h = String::new();
    let _ = writeln!(h, "# lpwan-sim format_version={FORMAT_VERSION}");
    let _ = writeln!(
        h,
        "# scenario_hash={hash} seed={seed} horizon_s={}",
        s.sim.horizon_s
    );
    let _ = writeln!(
        h,
        "# radio carrier_hz={} sf={} bw_hz={} cr=4/{} tx_dbm={} preamble_symbols={} explicit_header={} crc={} ldro={}",
        r.carrier_frequency_hz,
        r.spreading_factor,
        r.bandwidth_hz,
        r.coding_rate,
        r.tx_power_dbm,
        r.preamble_symbols,
        r.explicit_header,
        r.crc_on,
        r.low_data_rate_optimize
    );
    let _ = writeln!(
        h,
        "# receiver sensitivity_dbm={} snr_floor_db={} table_version={}",
        table
            .sensitivity(r.spreading_factor, r.bandwidth_hz)
            .map_or(f64::NAN, |v| v),
        table.snr_floor(r.spreading_factor).map_or(f64::NAN, |v| v),
        SensitivityTable::<f64>::FORMAT_VERSION
    );
    let _ = writeln!(
        h,
        "# channel path_loss_exponent={} reference_loss_db={} shadowing_sigma_db={} noise_figure_db={} capture_threshold_db={}",
        c.path_loss_exponent,
        c.reference_loss_db,
        c.shadowing_sigma_db,
        c.noise_figure_db,
        c.capture_threshold_db
    );
    let _ = writeln!(
        h,
        "# stack header={HEADER_FORMAT} mtu={DEFAULT_MTU} acks=none retransmissions=none"
    );
    if per_node {
        let mut nodes: Vec<_> = s.nodes.iter().collect();
        nodes.sort_by_key(|n| n.address);
        for n in nodes {
            let p = &n.power;
            let _ = writeln!(
                h,
                "# node {} role={} x={} y={} z={} sleep_w={} wurx_decode_w={} mcu_active_w={} radio_standby_w={} lora_rx_w={} lora_tx_w={} supply_v={} mcu_sleep_a={} wakeup_latency_ns={} radio_turn_on_ns={} wurx={}",
                n.address,
                match n.role {
                    Role::Sink => "sink",
                    Role::Sensor => "sensor",
                },
                n.position.x,
                n.position.y,
                n.position.z,
                p.sleep_w,
                p.wurx_decode_w,
                p.mcu_active_w,
                p.radio_standby_w,
                p.lora_rx_w,
                p.lora_tx_w,
                n.mcu.supply_voltage_v,
                n.mcu.sleep_current_a,
                n.mcu.wakeup_latency_ns,
                n.radio_turn_on_ns,
                n.wurx
                    .map_or("none".to_string(), |w| format!("0x{:02x}", w.address)),
            );
        }
    }
    h
}

fn packets_csv(s: &Scenario, m: &RunMetrics) -> String {
    let mut out = header(s, &m.scenario_hash, m.seed, true);
    out.push_str("src,dst,seqno,start_ns,end_ns,distance_m,rssi_dbm,snr_db,outcome\n");
    for p in &m.packets {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            p.src,
            p.dst,
            p.seqno,
            p.start.as_nanos(),
            p.end.as_nanos(),
            p.distance_m,
            p.rssi_dbm,
            p.snr_db,
            p.outcome.label()
        );
    }
    out
}

fn links_csv(s: &Scenario, m: &RunMetrics) -> String {
    let mut out = header(s, &m.scenario_hash, m.seed, true);
    out.push_str("src,dst,distance_m,sent,delivered,pdr,rssi_dbm_mean,snr_db_mean\n");
    for l in &m.links {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            l.src, l.dst, l.distance_m, l.sent, l.delivered, l.pdr, l.rssi_dbm_mean, l.snr_db_mean
        );
    }
    out
}

fn energy_csv(s: &Scenario, m: &RunMetrics) -> String {
    let mut out = header(s, &m.scenario_hash, m.seed, true);
    out.push_str("node,mode,power_w,time_ns,energy_j,share_pct\n");
    for n in &m.nodes {
        for r in &n.report.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                n.address,
                r.mode.label(),
                r.power_w,
                r.time.as_nanos(),
                r.energy_j,
                r.share_pct
            );
        }
    }
    out
}

fn exchanges_csv(s: &Scenario, m: &RunMetrics) -> String {
    let mut out = header(s, &m.scenario_hash, m.seed, true);
    out.push_str("initiator,target,wub_start_ns,outcome,latency_ns\n");
    for e in &m.exchanges {
        let (label, latency) = match e.outcome {
            ExchangeOutcome::Delivered { latency } => ("delivered", latency.as_nanos().to_string()),
            ExchangeOutcome::Lost => ("lost", String::new()),
            ExchangeOutcome::WakeTimeout => ("wake_timeout", String::new()),
            ExchangeOutcome::Incomplete => ("incomplete", String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.initiator,
            e.target,
            e.wub_start.as_nanos(),
            label,
            latency
        );
    }
    out
}

fn si_power(w: f64) -> String {
    let a = w.abs();
    if a == 0.0 {
        "0 W".into()
    } else if a < 1e-3 {
        format!("{} uW", round_sig(w * 1e6))
    } else if a < 1.0 {
        format!("{} mW", round_sig(w * 1e3))
    } else {
        format!("{} W", round_sig(w))
    }
}

/// Trims float noise from unit-scaled values (1.83e-6 * 1e6 is not 1.83).
fn round_sig(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

fn energy_text(out: &mut String, m: &RunMetrics) {
    for n in &m.nodes {
        let _ = writeln!(out, "\nnode {} energy", n.address);
        let _ = writeln!(
            out,
            "  {:<14} {:>12} {:>18} {:>16} {:>8}",
            "mode", "power", "time_s", "energy_j", "share_%"
        );
        for r in &n.report.rows {
            if r.mode == PowerMode::Depleted && r.time.is_zero() {
                continue;
            }
            let _ = writeln!(
                out,
                "  {:<14} {:>12} {:>18.9} {:>16.9e} {:>8.3}",
                r.mode.label(),
                si_power(r.power_w),
                r.time.as_secs_f64(),
                r.energy_j,
                r.share_pct
            );
        }
        let _ = writeln!(
            out,
            "  {:<14} {:>12} {:>18.9} {:>16.9e}",
            "total",
            "",
            n.report.total_time.as_secs_f64(),
            n.report.total_energy_j
        );
        let l = &n.ledger;
        let _ = writeln!(
            out,
            "  battery {:.6} J -> {:.6} J, harvested {:.6} J, unicast sent={} delivered={} overheard={} duplicates={}",
            l.initial_battery_j(),
            l.battery_remaining_j(),
            l.harvested_j(),
            n.unicast.sent,
            n.unicast.delivered,
            n.unicast.overheard,
            n.unicast.duplicates
        );
    }
}

fn run_text(s: &Scenario, m: &RunMetrics) -> String {
    let mut out = header(s, &m.scenario_hash, m.seed, true);
    let _ = writeln!(
        out,
        "\nevents {}  trace_hash {}",
        m.event_count, m.trace_hash
    );
    if !m.links.is_empty() {
        let _ = writeln!(out, "\nlinks");
        let _ = writeln!(
            out,
            "  {:>5} {:>5} {:>10} {:>6} {:>9} {:>7} {:>17} {:>10} {:>9}",
            "src", "dst", "distance_m", "sent", "delivered", "pdr", "pdr_95ci", "rssi_dbm", "snr_db"
        );
        for l in &m.links {
            let (lo, hi) = super::metrics::wilson_interval(l.delivered, l.sent);
            let _ = writeln!(
                out,
                "  {:>5} {:>5} {:>10.1} {:>6} {:>9} {:>7.4} {:>17} {:>10.3} {:>9.3}",
                l.src,
                l.dst,
                l.distance_m,
                l.sent,
                l.delivered,
                l.pdr,
                format!("[{lo:.4}, {hi:.4}]"),
                l.rssi_dbm_mean,
                l.snr_db_mean
            );
        }
    }
    if !m.exchanges.is_empty() {
        let _ = writeln!(out, "\nwake-up exchanges");
        for e in &m.exchanges {
            let what = match e.outcome {
                ExchangeOutcome::Delivered { latency } => {
                    format!("delivered, latency {:.9} s", latency.as_secs_f64())
                }
                ExchangeOutcome::Lost => "data lost".into(),
                ExchangeOutcome::WakeTimeout => "wake-up timed out".into(),
                ExchangeOutcome::Incomplete => "cut off by the horizon".into(),
            };
            let _ = writeln!(
                out,
                "  {} -> {} at {}: {}",
                e.initiator, e.target, e.wub_start, what
            );
        }
    }
    energy_text(&mut out, m);
    out
}

pub fn emit_run(s: &Scenario, m: &RunMetrics, format: Format) -> Vec<Artifact> {
    match format {
        Format::Csv => vec![
            Artifact::new("packets.csv", packets_csv(s, m)),
            Artifact::new("links.csv", links_csv(s, m)),
            Artifact::new("energy.csv", energy_csv(s, m)),
            Artifact::new("exchanges.csv", exchanges_csv(s, m)),
        ],
        Format::Text => vec![Artifact::new("report.txt", run_text(s, m))],
    }
}

pub fn emit_power_profile(s: &Scenario, m: &RunMetrics, format: Format) -> Vec<Artifact> {
    match format {
        Format::Csv => vec![
            Artifact::new("energy.csv", energy_csv(s, m)),
            Artifact::new("exchanges.csv", exchanges_csv(s, m)),
        ],
        Format::Text => vec![Artifact::new("power_profile.txt", run_text(s, m))],
    }
}

pub fn emit_sweep(sweep: &Sweep, format: Format) -> Vec<Artifact> {
    let mut out = header(&sweep.template, &sweep.template.hash(), sweep.seed, false);
    let _ = writeln!(
        out,
        "# sweep packets_per_point={} point_seed=seed+index rssi_snr_means=all_frames_at_receiver",
        sweep.packets
    );
    match format {
        Format::Csv => {
            out.push_str("distance_m,sent,delivered,pdr,rssi_dbm_mean,snr_db_mean\n");
            for p in &sweep.points {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    p.distance_m, p.sent, p.delivered, p.pdr, p.rssi_dbm_mean, p.snr_db_mean
                );
            }
            vec![Artifact::new("sweep.csv", out)]
        }
        Format::Text => {
            let _ = writeln!(
                out,
                "\n{:>10} {:>6} {:>9} {:>7} {:>17} {:>10} {:>9}",
                "distance_m", "sent", "delivered", "pdr", "pdr_95ci", "rssi_dbm", "snr_db"
            );
            for p in &sweep.points {
                let (lo, hi) = p.pdr_interval;
                let _ = writeln!(
                    out,
                    "{:>10.1} {:>6} {:>9} {:>7.4} {:>17} {:>10.3} {:>9.3}",
                    p.distance_m,
                    p.sent,
                    p.delivered,
                    p.pdr,
                    format!("[{lo:.4}, {hi:.4}]"),
                    p.rssi_dbm_mean,
                    p.snr_db_mean
                );
            }
            vec![Artifact::new("sweep.txt", out)]
        }
    }
}
