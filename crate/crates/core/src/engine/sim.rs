use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use super::metrics::{
    exchanges, link_stats, NodeSummary, NoteKind, NoteRecord, PacketOutcome, PacketRecord,
    RunMetrics, TraceEntry, WakeRecord,
};
use super::radio::{HostCmd, HostShim, SimRadio};
use super::scenario::{secs, AppSpec, Role, Scenario, ScenarioError};
use super::EngineError;
use crate::channel::{resolve_concurrent, rssi_at, snr_of, Airing, Link, Position, RxCause, ShadowingStream};
use crate::node::{
    power_report, EnergyLedger, NodeEvent, NodeState, Notice, PowerMode, PowerTable, RadioMode,
    TimerId, Timing, TxKind, WakeCause,
};
use crate::phy::{time_on_air, SensitivityTable};
use crate::stack::{
    AppCtx, Application, DriverEvent, PeriodicSender, RecvVerdict, Sink, Sleeper, Unicast,
    UnicastMessage, WakeupInitiator, WakeupTarget,
};
use crate::time::SimTime;
use crate::wurx::{send_wub, WakeUpFrame, WurxMode, WurxState};
use crate::NodeAddress;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Boot(usize),
    Node(usize, NodeEvent),
    Timer { node: usize, id: TimerId, generation: u64 },
    AirEnd(u64),
    WubEnd(usize),
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: SimTime,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

struct NodeRt {
    address: NodeAddress,
    position: Position<f64>,
    power: PowerTable<f64>,
    timing: Timing,
    state: NodeState,
    wurx: Option<WurxState<f64>>,
    ledger: EnergyLedger<f64>,
    last_settle: SimTime,
    ook_duty: f64,
    radio: SimRadio,
    unicast: Unicast,
    app: Box<dyn Application>,
    timers: BTreeMap<TimerId, u64>,
    rx_since: Option<SimTime>,
    pending_frame: Option<Vec<u8>>,
    pending_wub: Option<u8>,
    depleted: bool,
}

struct OnAir {
    airing: Airing<f64>,
    sender: usize,
    frame: Vec<u8>,
}

struct WubRt {
    sender: usize,
    decoding: Vec<usize>,
}

/// One scenario run. Single-threaded; every source of order is explicit.
pub struct Simulator {
    horizon: SimTime,
    now: SimTime,
    seq: u64,
    last: Option<(SimTime, u64)>,
    queue: BinaryHeap<Reverse<Event>>,
    nodes: Vec<NodeRt>,
    index: BTreeMap<NodeAddress, usize>,
    table: SensitivityTable<f64>,
    channel: crate::channel::ChannelParams<f64>,
    shadowing: ShadowingStream,
    wake_format: WakeUpFrame,
    on_air: Vec<OnAir>,
    next_airing: u64,
    wubs: Vec<WubRt>,
    interrupts: BTreeMap<NodeAddress, SimTime>,
    packets: Vec<PacketRecord>,
    wakeups: Vec<WakeRecord>,
    notes: Vec<NoteRecord>,
    trace: Vec<TraceEntry>,
    hasher: Sha256,
    scenario_hash: String,
    seed: u64,
}

/// Builds the application each node runs under `scenario`.
pub fn default_apps(
    scenario: &Scenario,
) -> Result<BTreeMap<NodeAddress, Box<dyn Application>>, ScenarioError> {
    let radio = scenario.radio;
    let mut apps: BTreeMap<NodeAddress, Box<dyn Application>> = BTreeMap::new();
    match &scenario.app {
        AppSpec::Idle => {}
        AppSpec::Periodic(p) => {
            let period = secs("app.period_s", p.period_s)?;
            let stagger = secs("app.stagger_s", p.stagger_s)?;
            for (k, &s) in p.senders.iter().enumerate() {
                let offset = stagger
                    .checked_mul(k as u32)
                    .ok_or(ScenarioError::Seconds("app.stagger_s"))?;
                let first = SimTime::ZERO + period + offset;
                let app = PeriodicSender::new(radio, p.dst, period, p.payload_len, first)
                    .map_err(|e| ScenarioError::App(e.to_string()))?;
                apps.insert(s, Box::new(app));
            }
            apps.insert(p.dst, Box::new(Sink::new(radio)));
        }
        AppSpec::WakeupExchange(w) => {
            let target = scenario
                .node(w.target)
                .ok_or(ScenarioError::UnknownNode {
                    what: "app.target",
                    address: w.target,
                })?;
            let t = target.timing();
            let guard = t.wakeup_latency + t.radio_turn_on;
            let first = SimTime::ZERO + secs("app.first_at_s", w.first_at_s)?;
            apps.insert(
                w.initiator,
                Box::new(WakeupInitiator::new(
                    radio,
                    w.target,
                    scenario.wake_frame().address,
                    w.payload_len,
                    first,
                    secs("app.period_s", w.period_s)?,
                    w.cycles,
                    guard,
                )),
            );
            apps.insert(
                w.target,
                Box::new(WakeupTarget::new(
                    radio,
                    secs("app.rx_window_s", w.rx_window_s)?,
                    secs("app.linger_s", w.linger_s)?,
                )),
            );
        }
    }
    for n in &scenario.nodes {
        apps.entry(n.address).or_insert_with(|| match n.role {
            Role::Sink => Box::new(Sink::new(radio)),
            Role::Sensor => Box::new(Sleeper::new(radio)),
        });
    }
    Ok(apps)
}

/// Validates and runs `scenario` to its horizon.
pub fn run(scenario: &Scenario) -> Result<RunMetrics, EngineError> {
    let started = Instant::now();
    let mut sim = Simulator::new(scenario)?;
    sim.run_to_horizon()?;
    let mut m = sim.finish();
    m.wall_clock = started.elapsed();
    Ok(m)
}

impl Simulator {
    pub fn new(scenario: &Scenario) -> Result<Self, EngineError> {
        scenario.validate()?;
        let apps = default_apps(scenario)?;
        Self::with_apps(scenario, apps)
    }

    /// Runs `scenario` with caller-supplied applications; nodes without one
    /// get their role's idle policy.
    pub fn with_apps(
        scenario: &Scenario,
        mut apps: BTreeMap<NodeAddress, Box<dyn Application>>,
    ) -> Result<Self, EngineError> {
        scenario.validate()?;
        let horizon = scenario.horizon()?;
        let mut channel = scenario.channel;
        channel.rng_seed = scenario.sim.seed;
        let mut specs: Vec<_> = scenario.nodes.iter().collect();
        specs.sort_by_key(|n| n.address);
        let mut nodes = Vec::with_capacity(specs.len());
        for n in specs {
            let app = apps.remove(&n.address).unwrap_or_else(|| match n.role {
                Role::Sink => Box::new(Sink::new(scenario.radio)),
                Role::Sensor => Box::new(Sleeper::new(scenario.radio)),
            });
            nodes.push(NodeRt {
                address: n.address,
                position: n.position,
                power: n.power,
                timing: n.timing(),
                state: NodeState::default(),
                wurx: n.wurx.map(WurxState::new),
                ledger: EnergyLedger::new(n.battery_j, n.harvest_w, n.harvest_efficiency),
                last_settle: SimTime::ZERO,
                ook_duty: 0.0,
                radio: SimRadio::default(),
                unicast: Unicast::new(n.address),
                app,
                timers: BTreeMap::new(),
                rx_since: None,
                pending_frame: None,
                pending_wub: None,
                depleted: false,
            });
        }
        let index = nodes.iter().enumerate().map(|(i, n)| (n.address, i)).collect();
        let mut sim = Simulator {
            horizon,
            now: SimTime::ZERO,
            seq: 0,
            last: None,
            queue: BinaryHeap::new(),
            nodes,
            index,
            table: SensitivityTable::datasheet(),
            channel,
            shadowing: channel.shadowing_stream(),
            wake_format: scenario.wake_frame(),
            on_air: Vec::new(),
            next_airing: 0,
            wubs: Vec::new(),
            interrupts: BTreeMap::new(),
            packets: Vec::new(),
            wakeups: Vec::new(),
            notes: Vec::new(),
            trace: Vec::new(),
            hasher: Sha256::new(),
            scenario_hash: scenario.hash(),
            seed: scenario.sim.seed,
        };
        for i in 0..sim.nodes.len() {
            sim.schedule(SimTime::ZERO, EventKind::Boot(i))?;
        }
        Ok(sim)
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn horizon(&self) -> SimTime {
        self.horizon
    }

    fn schedule(&mut self, at: SimTime, kind: EventKind) -> Result<(), EngineError> {
        if at < self.now {
            return Err(EngineError::Causality {
                now: self.now,
                at,
            });
        }
        self.seq += 1;
        self.queue.push(Reverse(Event {
            time: at,
            seq: self.seq,
            kind,
        }));
        Ok(())
    }

    /// Dispatches the next event if it falls within the horizon. Returns
    /// whether one was dispatched.
    pub fn step(&mut self) -> Result<bool, EngineError> {
        let Some(Reverse(next)) = self.queue.peek() else {
            return Ok(false);
        };
        if next.time > self.horizon {
            return Ok(false);
        }
        let Reverse(ev) = self.queue.pop().expect("peeked");
        if let Some(last) = self.last {
            if (ev.time, ev.seq) <= last {
                return Err(EngineError::Causality {
                    now: last.0,
                    at: ev.time,
                });
            }
        }
        self.last = Some((ev.time, ev.seq));
        self.now = ev.time;
        self.record(&ev);
        self.dispatch(ev.kind)
            .map(|_| true)
            .map_err(|e| e.with_trace(&self.trace))
    }

    pub fn run_to_horizon(&mut self) -> Result<(), EngineError> {
        while self.step()? {}
        Ok(())
    }

    /// Closes every ledger at the horizon and assembles the metrics.
    pub fn finish(mut self) -> RunMetrics {
        self.now = self.horizon;
        for i in 0..self.nodes.len() {
            self.settle(i);
        }
        let nodes = self
            .nodes
            .iter()
            .map(|n| NodeSummary {
                address: n.address,
                report: power_report(&n.ledger, &n.power),
                ledger: n.ledger.clone(),
                unicast: *n.unicast.stats(),
            })
            .collect();
        let trace_hash = self
            .hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        RunMetrics {
            scenario_hash: self.scenario_hash,
            seed: self.seed,
            horizon: self.horizon,
            links: link_stats(&self.packets),
            exchanges: exchanges(&self.notes, &self.packets),
            packets: self.packets,
            wakeups: self.wakeups,
            nodes,
            notes: self.notes,
            event_count: self.trace.len() as u64,
            trace_hash,
            trace: self.trace,
            wall_clock: Duration::ZERO,
        }
    }

    fn record(&mut self, ev: &Event) {
        let (node, kind) = match ev.kind {
            EventKind::Boot(i) => (Some(i), "boot"),
            EventKind::Node(i, e) => (Some(i), e.name()),
            EventKind::Timer { node, .. } => (Some(node), "timer"),
            EventKind::AirEnd(_) => (None, "air_end"),
            EventKind::WubEnd(_) => (None, "wub_end"),
        };
        let node = node.map(|i| self.nodes[i].address);
        self.hasher.update(ev.time.as_nanos().to_le_bytes());
        self.hasher.update(ev.seq.to_le_bytes());
        self.hasher.update(node.map_or(u32::MAX, |a| u32::from(a.0)).to_le_bytes());
        self.hasher.update(kind.as_bytes());
        self.trace.push(TraceEntry {
            time: ev.time,
            seq: ev.seq,
            node,
            kind,
        });
    }

    fn dispatch(&mut self, kind: EventKind) -> Result<(), EngineError> {
        match kind {
            EventKind::Boot(i) => self.call_app(i, |app, cx| app.boot(cx)),
            EventKind::Node(i, e) => self.node_event(i, e),
            EventKind::Timer {
                node,
                id,
                generation,
            } => {
                if self.nodes[node].timers.get(&id) != Some(&generation) {
                    return Ok(());
                }
                self.nodes[node].timers.remove(&id);
                self.node_event(node, NodeEvent::Timer(id))
            }
            EventKind::AirEnd(id) => self.air_end(id),
            EventKind::WubEnd(k) => self.wub_end(k),
        }
    }

    /// Charges node `i` for the time since it was last settled.
    fn settle(&mut self, i: usize) {
        let now = self.now;
        let n = &mut self.nodes[i];
        let dt = now.since(n.last_settle).unwrap_or_default();
        n.last_settle = now;
        if dt.is_zero() {
            return;
        }
        if n.depleted {
            n.ledger.accrue(PowerMode::Depleted, 0.0, dt);
            return;
        }
        let decoding = n
            .wurx
            .as_ref()
            .is_some_and(|w| w.mode() != WurxMode::Listening);
        let mode = n.state.power_mode(decoding);
        n.ledger.accrue(mode, n.power.power_of(mode, n.ook_duty), dt);
        if n.ledger.is_depleted() {
            n.depleted = true;
            n.radio.core.power_lost();
            n.rx_since = None;
            n.timers.clear();
            let address = n.address;
            self.notes.push(NoteRecord {
                time: now,
                node: address,
                note: NoteKind::BatteryDepleted,
            });
        }
    }

    fn ignored(&mut self, i: usize, event: &'static str) {
        let node = self.nodes[i].address;
        self.notes.push(NoteRecord {
            time: self.now,
            node,
            note: NoteKind::Ignored { event },
        });
    }

    fn node_event(&mut self, i: usize, event: NodeEvent) -> Result<(), EngineError> {
        self.settle(i);
        if self.nodes[i].depleted {
            self.ignored(i, event.name());
            return Ok(());
        }
        let now = self.now;
        let n = &mut self.nodes[i];
        let tr = n.state.transition(event, &n.timing).map_err(|source| {
            EngineError::IllegalTransition {
                node: n.address,
                time: now,
                source,
                trace: Vec::new(),
            }
        })?;
        if n.state.radio == RadioMode::Rx {
            n.rx_since.get_or_insert(now);
        } else {
            n.rx_since = None;
        }
        for (dt, ev) in tr.follow_ups {
            let at = now
                .checked_add(dt)
                .ok_or(EngineError::Internal("virtual time overflow"))?;
            self.schedule(at, EventKind::Node(i, ev))?;
        }
        for notice in tr.notices {
            match notice {
                Notice::Deliver(WakeCause::Timer(id)) => {
                    self.call_app(i, |app, cx| app.on_timer(cx, id))?
                }
                Notice::Deliver(WakeCause::Interrupt) => {
                    if let Some(w) = &mut self.nodes[i].wurx {
                        w.acknowledge();
                    }
                    self.call_app(i, |app, cx| app.on_wakeup(cx))?
                }
                Notice::TxStarted(TxKind::Lora) => self.start_airing(i)?,
                Notice::TxStarted(TxKind::Ook) => self.start_wub(i)?,
            }
        }
        Ok(())
    }

    fn medium_busy(&self, i: usize) -> bool {
        let me = self.nodes[i].address;
        let Some(cfg) = self.nodes[i].radio.core.config() else {
            return false;
        };
        self.on_air.iter().any(|a| {
            a.airing.start <= self.now
                && self.now < a.airing.end
                && a.airing.carrier_frequency_hz == cfg.carrier_frequency_hz
                && a.airing.link_to(me).is_some_and(|l| {
                    self.table
                        .sensitivity(a.airing.spreading_factor, a.airing.bandwidth_hz)
                        .is_ok_and(|s| l.rssi_dbm >= s)
                })
        })
    }

    fn call_app<F>(&mut self, i: usize, f: F) -> Result<(), EngineError>
    where
        F: FnOnce(&mut dyn Application, &mut AppCtx<'_>) -> Result<(), crate::stack::StackError>,
    {
        if self.nodes[i].depleted {
            return Ok(());
        }
        let busy = self.medium_busy(i);
        let now = self.now;
        let interrupts = &self.interrupts;
        let n = &mut self.nodes[i];
        n.radio.medium_busy = busy;
        let address = n.address;
        let app_err = |source| EngineError::App {
            node: address,
            source,
        };
        {
            let mut shim = HostShim {
                now,
                radio: &mut n.radio,
                interrupts,
            };
            let mut cx = AppCtx {
                unicast: &mut n.unicast,
                host: &mut shim,
            };
            f(n.app.as_mut(), &mut cx).map_err(app_err)?;
            while let Some(msg) = cx.unicast.take_loopback() {
                n.app.on_receive(&mut cx, &msg).map_err(app_err)?;
            }
        }
        let cmds = std::mem::take(&mut n.radio.commands);
        for cmd in cmds {
            self.apply(i, cmd)?;
        }
        Ok(())
    }

    fn apply(&mut self, i: usize, cmd: HostCmd) -> Result<(), EngineError> {
        match cmd {
            HostCmd::Node(e) => self.node_event(i, e),
            HostCmd::Send(frame) => {
                self.nodes[i].pending_frame = Some(frame);
                self.node_event(i, NodeEvent::TxRequest(TxKind::Lora))
            }
            HostCmd::SendWakeup(address) => {
                self.nodes[i].pending_wub = Some(address);
                self.node_event(i, NodeEvent::TxRequest(TxKind::Ook))
            }
            HostCmd::SetTimer(id, at) => {
                let generation = self.seq + 1;
                self.nodes[i].timers.insert(id, generation);
                self.schedule(
                    at,
                    EventKind::Timer {
                        node: i,
                        id,
                        generation,
                    },
                )
            }
            HostCmd::CancelTimer(id) => {
                self.nodes[i].timers.remove(&id);
                Ok(())
            }
            HostCmd::Sleep => self.node_event(i, NodeEvent::SleepRequest),
            HostCmd::Note(note) => {
                let node = self.nodes[i].address;
                self.notes.push(NoteRecord {
                    time: self.now,
                    node,
                    note: NoteKind::App(note),
                });
                Ok(())
            }
        }
    }

    fn draw(&mut self) -> f64 {
        self.shadowing.next_draw::<f64>()
    }

    fn start_airing(&mut self, i: usize) -> Result<(), EngineError> {
        let frame = self.nodes[i]
            .pending_frame
            .take()
            .ok_or(EngineError::Internal("tx started without a frame"))?;
        let cfg = *self.nodes[i]
            .radio
            .core
            .config()
            .ok_or(EngineError::Internal("tx on an unconfigured radio"))?;
        let end = self.now + time_on_air(&cfg, frame.len())?;
        let mut links = Vec::with_capacity(self.nodes.len() - 1);
        for j in 0..self.nodes.len() {
            if j == i {
                continue;
            }
            let z = self.draw();
            let rssi = rssi_at(
                f64::from(cfg.tx_power_dbm),
                &self.nodes[i].position,
                &self.nodes[j].position,
                &self.channel,
                z,
            )?;
            links.push(Link {
                receiver: self.nodes[j].address,
                rssi_dbm: rssi,
                snr_db: snr_of(rssi, cfg.bandwidth_hz, self.channel.noise_figure_db),
            });
        }
        let id = self.next_airing;
        self.next_airing += 1;
        self.on_air.push(OnAir {
            airing: Airing {
                id,
                start: self.now,
                end,
                carrier_frequency_hz: cfg.carrier_frequency_hz,
                spreading_factor: cfg.spreading_factor,
                bandwidth_hz: cfg.bandwidth_hz,
                links,
            },
            sender: i,
            frame,
        });
        self.schedule(end, EventKind::AirEnd(id))
    }

    /// Whether node `j` heard all of `a` with a matching configuration.
    fn listening(&self, j: usize, a: &Airing<f64>) -> bool {
        let n = &self.nodes[j];
        let tuned = n.radio.core.config().is_some_and(|c| {
            c.carrier_frequency_hz == a.carrier_frequency_hz
                && c.spreading_factor == a.spreading_factor
                && c.bandwidth_hz == a.bandwidth_hz
        });
        !n.depleted && tuned && n.rx_since.is_some_and(|t| t <= a.start)
    }

    fn air_end(&mut self, id: u64) -> Result<(), EngineError> {
        let k = self
            .on_air
            .iter()
            .position(|a| a.airing.id == id)
            .ok_or(EngineError::Internal("unknown airing"))?;
        let sender = self.on_air[k].sender;
        let frame = self.on_air[k].frame.clone();
        let airing = self.on_air[k].airing.clone();

        let group: Vec<Airing<f64>> = self
            .on_air
            .iter()
            .filter(|a| a.airing.id == id || a.airing.overlaps(&airing))
            .map(|a| a.airing.clone())
            .collect();
        let outcomes: Vec<_> = resolve_concurrent(&group, &self.table, self.channel.capture_threshold_db)?
            .into_iter()
            .filter(|o| o.airing == id)
            .collect();

        self.node_event(sender, NodeEvent::TxDone)?;
        if !self.nodes[sender].depleted {
            self.nodes[sender].radio.core.tx_done();
            self.nodes[sender].radio.record(DriverEvent::TxDone);
        }

        let header = UnicastMessage::decode(&frame);
        for o in outcomes {
            let Some(&j) = self.index.get(&o.receiver) else {
                continue;
            };
            let listening = self.listening(j, &airing);
            let mut outcome = match o.cause {
                RxCause::Ok if listening => PacketOutcome::Delivered,
                RxCause::Ok => PacketOutcome::NotListening,
                RxCause::Collision => PacketOutcome::Collision,
                RxCause::BelowSensitivity => PacketOutcome::BelowSensitivity,
                RxCause::SnrFloor => PacketOutcome::SnrFloor,
            };
            if outcome == PacketOutcome::Delivered {
                self.node_event(j, NodeEvent::RxDone)?;
                self.nodes[j].radio.record(DriverEvent::RxDone {
                    bytes: frame.clone(),
                    rssi_dbm: o.rssi_dbm,
                    snr_db: o.snr_db,
                });
                match self.nodes[j].unicast.filter(&frame) {
                    RecvVerdict::Deliver(msg) => {
                        self.call_app(j, |app, cx| app.on_receive(cx, &msg))?;
                    }
                    RecvVerdict::Duplicate => outcome = PacketOutcome::Duplicate,
                    RecvVerdict::Overheard | RecvVerdict::Malformed => {}
                }
            }
            if let Some(h) = &header {
                if h.dst == o.receiver {
                    self.packets.push(PacketRecord {
                        src: h.src,
                        dst: h.dst,
                        seqno: h.seqno,
                        start: airing.start,
                        end: airing.end,
                        distance_m: self.nodes[sender].position.distance(&self.nodes[j].position),
                        rssi_dbm: o.rssi_dbm,
                        snr_db: o.snr_db,
                        outcome,
                    });
                }
            }
        }

        self.call_app(sender, |app, cx| app.on_tx_done(cx))?;
        self.prune_airings();
        Ok(())
    }

    /// Drops finished airings that nothing still on air overlaps.
    fn prune_airings(&mut self) {
        let now = self.now;
        let earliest_live = self
            .on_air
            .iter()
            .filter(|a| a.airing.end > now)
            .map(|a| a.airing.start)
            .min()
            .unwrap_or(SimTime::MAX);
        self.on_air
            .retain(|a| a.airing.end > now || a.airing.end > earliest_live);
    }

    fn start_wub(&mut self, i: usize) -> Result<(), EngineError> {
        let address = self.nodes[i]
            .pending_wub
            .take()
            .ok_or(EngineError::Internal("wake-up started without an address"))?;
        let cfg = *self.nodes[i]
            .radio
            .core
            .config()
            .ok_or(EngineError::Internal("wake-up on an unconfigured radio"))?;
        let tx = send_wub(&cfg, &self.wake_format, address, self.nodes[i].power.lora_tx_w)?;
        self.nodes[i].ook_duty = tx.duty;
        let mut decoding = Vec::new();
        for j in 0..self.nodes.len() {
            if j == i {
                continue;
            }
            let z = self.draw();
            if self.nodes[j].wurx.is_none() || self.nodes[j].depleted {
                continue;
            }
            let rssi = rssi_at(
                f64::from(cfg.tx_power_dbm),
                &self.nodes[i].position,
                &self.nodes[j].position,
                &self.channel,
                z,
            )?;
            self.settle(j);
            let w = self.nodes[j].wurx.as_mut().expect("checked above");
            let (decoded, missed_busy) = match w.begin(&tx.frame, rssi) {
                Ok(o) => (o.decoded, false),
                Err(crate::wurx::WurxError::Busy) => (false, true),
                Err(e) => return Err(e.into()),
            };
            if decoded {
                decoding.push(j);
            }
            self.wakeups.push(WakeRecord {
                sender: self.nodes[i].address,
                receiver: self.nodes[j].address,
                start: self.now,
                address,
                rssi_dbm: rssi,
                decoded,
                interrupt: false,
                missed_busy,
            });
        }
        let k = self.wubs.len();
        self.wubs.push(WubRt {
            sender: i,
            decoding,
        });
        let end = self.now + tx.airtime;
        self.schedule(end, EventKind::WubEnd(k))
    }

    fn wub_end(&mut self, k: usize) -> Result<(), EngineError> {
        let sender = self.wubs[k].sender;
        let decoding = std::mem::take(&mut self.wubs[k].decoding);
        self.node_event(sender, NodeEvent::TxDone)?;
        if !self.nodes[sender].depleted {
            self.nodes[sender].radio.core.tx_done();
            self.nodes[sender].radio.record(DriverEvent::TxDone);
        }
        let sender_addr = self.nodes[sender].address;
        for j in decoding {
            self.settle(j);
            let fired = self.nodes[j].wurx.as_mut().is_some_and(|w| w.finish());
            if !fired {
                continue;
            }
            let addr = self.nodes[j].address;
            self.interrupts.insert(addr, self.now);
            if let Some(r) = self
                .wakeups
                .iter_mut()
                .rev()
                .find(|r| r.sender == sender_addr && r.receiver == addr)
            {
                r.interrupt = true;
            }
            self.node_event(j, NodeEvent::WurxInterrupt)?;
        }
        self.call_app(sender, |app, cx| app.on_tx_done(cx))
    }

    /// Turns on raw driver-callback logging for node `address`.
    pub(crate) fn log_driver(&mut self, address: NodeAddress) {
        if let Some(&i) = self.index.get(&address) {
            self.nodes[i].radio.log = Some(Vec::new());
        }
    }

    pub(crate) fn take_driver_log(&mut self, address: NodeAddress) -> Vec<DriverEvent> {
        self.index
            .get(&address)
            .and_then(|&i| self.nodes[i].radio.log.as_mut())
            .map(std::mem::take)
            .unwrap_or_default()
    }

    /// Runs `f` against node `address`'s driver as if from an application
    /// handler, then applies what it asked for.
    pub(crate) fn with_driver<T>(
        &mut self,
        address: NodeAddress,
        f: impl FnOnce(&mut SimRadio) -> T,
    ) -> Result<T, EngineError> {
        let i = *self
            .index
            .get(&address)
            .ok_or(EngineError::Internal("unknown node"))?;
        let out = f(&mut self.nodes[i].radio);
        let cmds = std::mem::take(&mut self.nodes[i].radio.commands);
        for cmd in cmds {
            self.apply(i, cmd)?;
        }
        Ok(out)
    }

    pub(crate) fn driver(&self, address: NodeAddress) -> Option<&SimRadio> {
        self.index.get(&address).map(|&i| &self.nodes[i].radio)
    }

    /// State of node `address`, for inspection in tests and tools.
    pub fn node_state(&self, address: NodeAddress) -> Option<&NodeState> {
        self.index.get(&address).map(|&i| &self.nodes[i].state)
    }
}
