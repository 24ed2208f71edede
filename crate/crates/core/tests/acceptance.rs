//! End-to-end acceptance checks. Runs without the libtest harness and
//! prints one PASS/FAIL line per criterion.

mod common;

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{replay_delivered, rssi_dbm, AirtimeCase};
use lpwan_sim::engine::{
    coverage_scenario, emit_power_profile, emit_run, power_profile, power_profile_scenario,
    range_sweep, run, AppSpec, Format, NodeSpec, PacketOutcome, PeriodicSpec, Role, RunMetrics,
    Scenario, SimSpec, DEFAULT_RADIO_TURN_ON_NS, DEFAULT_SWEEP_DISTANCES_M, POWER_PROFILE_TARGET,
};
use lpwan_sim::node::{McuParams, PowerMode};
use lpwan_sim::wurx::{wub_airtime, WakeUpFrame, WurxConfig, WurxMode, WurxState};
use lpwan_sim::{time_on_air, ChannelParams, NodeAddress, RadioConfig};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($fmt)+));
        }
    };
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn modal_powers() -> Verdict {
    let t0 = Instant::now();
    let (s, m) = power_profile(1, 0).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    let target = m.node(POWER_PROFILE_TARGET).ok_or("target missing")?;
    let initiator = m.node(NodeAddress(1)).ok_or("initiator missing")?;
    let power = |n: &lpwan_sim::engine::NodeSummary, mode: PowerMode| {
        let row = n.report.rows.iter().find(|r| r.mode == mode).expect("row per mode");
        (row.power_w, row.time)
    };
    for (who, node, mode, expected) in [
        ("target", target, PowerMode::Sleep, 1.83e-6),
        ("target", target, PowerMode::WurxDecode, 284e-6),
        ("target", target, PowerMode::LoraRx, 50e-3),
        ("initiator", initiator, PowerMode::LoraTx, 240e-3),
    ] {
        let (p, t) = power(node, mode);
        ensure!(p == expected, "{who} {} shows {p} W, expected {expected} W", mode.label());
        ensure!(!t.is_zero(), "{who} never entered {}", mode.label());
    }
    let mut worst = 0.0f64;
    for n in &m.nodes {
        for row in &n.report.rows {
            let analytic = row.power_w * row.time.as_secs_f64();
            worst = worst.max(rel_err(row.energy_j, analytic));
        }
    }
    ensure!(worst <= 1e-9, "energy differs from power x time by {worst:e} relative");
    let text = &emit_power_profile(&s, &m, Format::Text)[0].contents;
    for shown in ["1.83 uW", "284 uW", "240 mW", "50 mW"] {
        ensure!(text.contains(shown), "text report lacks {shown}");
    }
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("4 modal powers exact, worst p*t error {worst:.1e}, {elapsed:.2?}"))
}

fn coverage() -> Verdict {
    let t0 = Instant::now();
    let sweep = range_sweep(&DEFAULT_SWEEP_DISTANCES_M, 360, 0).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    ensure!(sweep.points.len() == 10, "{} points", sweep.points.len());
    let p600 = sweep
        .points
        .iter()
        .find(|p| p.distance_m == 600.0)
        .ok_or("no 600 m point")?;
    ensure!(p600.sent == 360, "600 m sent {}", p600.sent);
    ensure!(p600.pdr >= 0.95, "600 m PDR {}", p600.pdr);
    ensure!(
        (p600.rssi_dbm_mean + 120.0).abs() <= 1.0,
        "600 m mean RSSI {}",
        p600.rssi_dbm_mean
    );
    let mut dead = 0;
    for p in &sweep.points {
        if rssi_dbm(14.0, 31.2, 3.70, p.distance_m) < -140.0 {
            ensure!(p.pdr == 0.0, "{} m predicted below -140 dBm but PDR {}", p.distance_m, p.pdr);
            dead += 1;
        }
    }
    ensure!(dead > 0, "no sweep point predicted below -140 dBm");
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!(
        "600 m: PDR {:.3}, RSSI {:.2} dBm; {dead} point(s) below floor at PDR 0; {elapsed:.2?}",
        p600.pdr, p600.rssi_dbm_mean
    ))
}

fn airtime() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let n = 20_000;
    for _ in 0..n {
        let case = AirtimeCase {
            sf: rng.random_range(6..=12),
            bw_hz: [125_000, 250_000, 500_000][rng.random_range(0..3)],
            cr: rng.random_range(1..=4),
            payload: rng.random_range(0..=255),
            preamble: rng.random_range(6..=65),
            implicit_header: rng.random(),
            crc: rng.random(),
            ldro: rng.random(),
        };
        let cfg = RadioConfig {
            spreading_factor: case.sf as u8,
            bandwidth_hz: case.bw_hz,
            coding_rate: (case.cr + 4) as u8,
            preamble_symbols: case.preamble as u16,
            explicit_header: !case.implicit_header,
            crc_on: case.crc,
            low_data_rate_optimize: case.ldro,
            ..RadioConfig::default()
        };
        let sym = cfg.payload_symbols(case.payload as usize).map_err(|e| e.to_string())?;
        ensure!(sym as f64 == case.payload_symbols(), "{case:?}: {sym} payload symbols");
        let toa = time_on_air(&cfg, case.payload as usize).map_err(|e| e.to_string())?;
        let diff = (toa.as_nanos() as f64 - case.seconds() * 1e9).abs();
        ensure!(diff <= 1.0, "{case:?}: {toa:?} is {diff} ns off");
    }
    let reference = time_on_air(&RadioConfig::default(), 16).map_err(|e| e.to_string())?;
    ensure!(reference == Duration::from_nanos(313_344_000), "reference point {reference:?}");
    Ok(format!("{n} random tuples match; SF12/500k/CR4-6/16 B = {reference:?}"))
}

fn selective_wakeup() -> Verdict {
    let rssis = [-49.0, -50.0, -50.000_001, -51.0, -90.0, -20.0];
    let mut checked = 0u64;
    for configured in 0..=255u8 {
        for sent in 0..=255u8 {
            for &rssi in &rssis {
                let mut w = WurxState::new(WurxConfig::<f64>::with_address(configured));
                let out = w.begin(&WakeUpFrame::addressed(sent), rssi).map_err(|e| e.to_string())?;
                let fired = w.finish();
                let expected = configured == sent && rssi >= -50.0;
                ensure!(
                    fired == expected && out.interrupt == expected,
                    "configured {configured:#04x}, sent {sent:#04x} at {rssi} dBm: interrupt {fired}"
                );
                if rssi < -50.0 {
                    ensure!(
                        out.decode_energy_j == 0.0 && w.mode() == WurxMode::Listening,
                        "decode energy below sensitivity at {rssi} dBm"
                    );
                }
                checked += 1;
            }
        }
    }
    // End to end: a matching frame from 20 m (about -65 dBm) leaves the
    // target asleep with no decode energy on its ledger.
    let mut s = power_profile_scenario(1, 0);
    s.nodes[1].position.x = 20.0;
    let m = run(&s).map_err(|e| e.to_string())?;
    let t = m.node(POWER_PROFILE_TARGET).ok_or("target missing")?;
    ensure!(
        t.ledger.energy_in(PowerMode::WurxDecode) == 0.0,
        "decode energy charged below sensitivity"
    );
    ensure!(t.ledger.time_in(PowerMode::McuWake).is_zero(), "target woke at 20 m");
    Ok(format!("{checked} (address, address, RSSI) cases; none below -50 dBm decoded"))
}

fn wake_latency() -> Verdict {
    let (_, m) = power_profile(5, 0).map_err(|e| e.to_string())?;
    let expected = wub_airtime(&WakeUpFrame::default()).map_err(|e| e.to_string())?
        + McuParams::<f64>::default().wakeup_latency()
        + Duration::from_nanos(DEFAULT_RADIO_TURN_ON_NS)
        + time_on_air(&RadioConfig::default(), 16 + 6).map_err(|e| e.to_string())?;
    ensure!(expected == Duration::from_nanos(379_503_000), "component sum {expected:?}");
    ensure!(m.exchanges.len() == 5, "{} exchanges", m.exchanges.len());
    for x in &m.exchanges {
        let lpwan_sim::engine::ExchangeOutcome::Delivered { latency } = x.outcome else {
            return Err(format!("exchange at {} ended {:?}", x.wub_start, x.outcome));
        };
        let grain = latency.abs_diff(expected);
        ensure!(grain <= Duration::from_nanos(1), "latency {latency:?} vs {expected:?}");
    }
    Ok(format!("5 exchanges at {expected:?} = 16 ms + 7 us + 1 ms + 362.496 ms"))
}

/// Three senders sharing a sink, two in collision range, one on a
/// depleting battery with a harvester.
fn contention_scenario(seed: u64) -> Scenario {
    let mut nodes = vec![
        NodeSpec::new(1, 0.0, Role::Sink),
        NodeSpec::new(2, 300.0, Role::Sensor),
        NodeSpec::new(3, 320.0, Role::Sensor),
        NodeSpec::new(4, 150.0, Role::Sensor),
    ];
    nodes[3].battery_j = 0.4;
    nodes[3].harvest_w = 1e-4;
    Scenario {
        sim: SimSpec {
            horizon_s: 120.0,
            seed,
        },
        radio: RadioConfig::default(),
        channel: ChannelParams {
            shadowing_sigma_db: 3.0,
            ..ChannelParams::default()
        },
        app: AppSpec::Periodic(PeriodicSpec {
            senders: vec![NodeAddress(2), NodeAddress(3), NodeAddress(4)],
            dst: NodeAddress(1),
            period_s: 5.0,
            payload_len: 16,
            stagger_s: 0.1,
        }),
        nodes,
    }
}

fn check_books(m: &RunMetrics) -> Result<(), String> {
    let horizon = Duration::from_nanos(m.horizon.as_nanos());
    for n in &m.nodes {
        ensure!(
            n.ledger.total_time() == horizon,
            "node {} books {:?} of {horizon:?}",
            n.address,
            n.ledger.total_time()
        );
        let err = n.ledger.conservation_error();
        ensure!(err <= 1e-9, "node {} conservation error {err:e}", n.address);
    }
    Ok(())
}

fn determinism() -> Verdict {
    let mut shadowed = coverage_scenario(700.0, 40, 11);
    shadowed.channel.shadowing_sigma_db = 4.0;
    let scenarios = [shadowed, power_profile_scenario(4, 3), contention_scenario(9)];
    let mut depleted = false;
    for s in &scenarios {
        let mut outputs = Vec::new();
        for _ in 0..3 {
            let m = run(s).map_err(|e| e.to_string())?;
            check_books(&m)?;
            depleted |= m.nodes.iter().any(|n| n.ledger.is_depleted());
            let mut bytes = m.trace_hash.clone();
            for format in [Format::Csv, Format::Text] {
                for a in emit_run(s, &m, format) {
                    bytes.push_str(&a.name);
                    bytes.push_str(&a.contents);
                }
            }
            outputs.push(bytes);
        }
        ensure!(
            outputs.windows(2).all(|w| w[0] == w[1]),
            "scenario {} differs between runs",
            s.hash()
        );
    }
    ensure!(depleted, "no run exercised battery depletion");
    Ok("3 scenarios x 3 runs byte-identical; books close at the horizon".into())
}

/// A periodic scenario of at most three nodes and ten frames.
fn small_scenario(rng: &mut ChaCha8Rng) -> Scenario {
    let radio = match rng.random_range(0..3) {
        0 => RadioConfig::default(),
        1 => RadioConfig {
            spreading_factor: 7,
            bandwidth_hz: 125_000,
            coding_rate: 5,
            ..RadioConfig::default()
        },
        _ => RadioConfig {
            spreading_factor: 9,
            bandwidth_hz: 250_000,
            coding_rate: 8,
            ..RadioConfig::default()
        },
    };
    let radio = RadioConfig {
        tx_power_dbm: [2, 8, 14, 20][rng.random_range(0..4)],
        ..radio
    };
    let payload_len = rng.random_range(0..=40);
    let airtime = time_on_air(&radio, payload_len + 6).expect("valid radio").as_secs_f64();
    let node_count = rng.random_range(2..=3u16);
    let sender_count = rng.random_range(1..node_count);
    let mut nodes = vec![NodeSpec::new(1, 0.0, Role::Sink)];
    for a in 2..=node_count {
        let r = if rng.random_bool(0.5) {
            rng.random_range(1.0..200.0)
        } else {
            rng.random_range(200.0..1500.0)
        };
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let mut n = NodeSpec::new(a, r * theta.cos(), Role::Sensor);
        n.position.y = r * theta.sin();
        n.radio_turn_on_ns = rng.random_range(200_000..3_000_000);
        nodes.push(n);
    }
    let senders: Vec<_> = (2..2 + sender_count).map(NodeAddress).collect();
    let period_s = rng.random_range(airtime + 0.01..airtime + 8.0);
    let stagger_s = match rng.random_range(0..3) {
        0 => 0.0,
        1 => rng.random_range(0.0..airtime * 1.5),
        _ => rng.random_range(0.0..period_s),
    };
    let whole = rng.random_range(0..=4) as f64;
    Scenario {
        sim: SimSpec {
            horizon_s: period_s * (whole + rng.random_range(0.0..1.0)),
            seed: rng.random(),
        },
        radio,
        channel: ChannelParams::default(),
        app: AppSpec::Periodic(PeriodicSpec {
            senders,
            dst: NodeAddress(1),
            period_s,
            payload_len,
            stagger_s,
        }),
        nodes,
    }
}

fn replay_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let (mut scenarios, mut frames, mut delivered, mut lost, mut collided) = (0, 0, 0, 0, 0);
    while scenarios < 2_000 {
        let s = small_scenario(&mut rng);
        if s.validate().is_err() {
            continue;
        }
        let m = run(&s).map_err(|e| format!("{}: {e}", s.to_toml_string()))?;
        ensure!(m.packets.len() <= 10, "generated {} frames", m.packets.len());
        let engine: BTreeSet<_> = m
            .packets
            .iter()
            .filter(|p| p.outcome == PacketOutcome::Delivered)
            .map(|p| (p.src, p.seqno))
            .collect();
        let oracle = replay_delivered(&s);
        ensure!(
            engine == oracle,
            "engine {engine:?} vs oracle {oracle:?} for\n{}",
            s.to_toml_string()
        );
        scenarios += 1;
        frames += m.packets.len();
        delivered += engine.len();
        lost += m.packets.len() - engine.len();
        collided += m
            .packets
            .iter()
            .filter(|p| p.outcome == PacketOutcome::Collision)
            .count();
    }
    ensure!(
        collided > 0 && lost > collided && delivered > 0,
        "generator missed collisions, range losses or deliveries"
    );
    Ok(format!(
        "{scenarios} scenarios, {frames} frames: {delivered} delivered, {lost} lost ({collided} in collisions), all as replayed"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("modal powers and energy integration", modal_powers),
        ("coverage at 600 m and below the floor", coverage),
        ("time on air against the datasheet formula", airtime),
        ("selective wake-up over every address pair", selective_wakeup),
        ("wake-up latency chain", wake_latency),
        ("determinism and energy books", determinism),
        ("small-instance replay oracle", replay_oracle),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let verdict = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match verdict {
            Ok(detail) => println!("PASS {}. {name}: {detail}", k + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {}. {name}: {detail}", k + 1);
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
