//! The engine's radio backend wrapped for the driver conformance kit.

use std::collections::BTreeMap;

use super::scenario::{AppSpec, NodeSpec, Role, Scenario, SimSpec};
use super::Simulator;
use crate::phy::RadioConfig;
use crate::stack::conformance::DriverHarness;
use crate::stack::{AppCtx, Application, DriverError, DriverEvent, RadioDriver, StackError};
use crate::NodeAddress;

const DUT: NodeAddress = NodeAddress(1);
const PEER: NodeAddress = NodeAddress(2);

/// Application that leaves the radio entirely to the bench.
struct Passive;

impl Application for Passive {
    fn boot(&mut self, _cx: &mut AppCtx<'_>) -> Result<(), StackError> {
        Ok(())
    }
}

/// A two-node simulation whose first node's driver is driven directly.
/// The second node, 100 m away, puts injected frames on air.
pub struct SimDriverBench {
    sim: Simulator,
    peer_ready: bool,
}

impl Default for SimDriverBench {
    fn default() -> Self {
        Self::new()
    }
}

impl SimDriverBench {
    pub fn new() -> Self {
        let scenario = Scenario {
            sim: SimSpec {
                horizon_s: 1e6,
                seed: 0,
            },
            radio: RadioConfig::default(),
            channel: Default::default(),
            app: AppSpec::Idle,
            nodes: vec![
                NodeSpec::new(DUT.0, 0.0, Role::Sensor),
                NodeSpec::new(PEER.0, 100.0, Role::Sensor),
            ],
        };
        let apps: BTreeMap<NodeAddress, Box<dyn Application>> =
            [(DUT, Box::new(Passive) as Box<dyn Application>), (PEER, Box::new(Passive))]
                .into_iter()
                .collect();
        let mut sim = Simulator::with_apps(&scenario, apps).expect("bench scenario is valid");
        sim.run_to_horizon().expect("boot");
        sim.log_driver(DUT);
        SimDriverBench {
            sim,
            peer_ready: false,
        }
    }

    fn drive<T>(&mut self, f: impl FnOnce(&mut super::SimRadio) -> T) -> T {
        self.sim.with_driver(DUT, f).expect("engine accepts driver request")
    }
}

impl RadioDriver for SimDriverBench {
    fn init(&mut self) -> Result<(), DriverError> {
        self.drive(|r| r.init())
    }
    fn configure(&mut self, cfg: &RadioConfig) -> Result<(), DriverError> {
        self.drive(|r| r.configure(cfg))
    }
    fn send(&mut self, frame: &[u8]) -> Result<(), DriverError> {
        self.drive(|r| r.send(frame))
    }
    fn send_wakeup(&mut self, address: u8) -> Result<(), DriverError> {
        self.drive(|r| r.send_wakeup(address))
    }
    fn start_rx(&mut self) -> Result<(), DriverError> {
        self.drive(|r| r.start_rx())
    }
    fn stop_rx(&mut self) -> Result<(), DriverError> {
        self.drive(|r| r.stop_rx())
    }
    fn channel_clear(&mut self) -> bool {
        self.drive(|r| r.channel_clear())
    }
    fn on(&mut self) -> Result<(), DriverError> {
        self.drive(|r| r.on())
    }
    fn off(&mut self) -> Result<(), DriverError> {
        self.drive(|r| r.off())
    }
    fn config(&self) -> Option<&RadioConfig> {
        self.sim.driver(DUT).and_then(|r| r.config())
    }
}

impl DriverHarness for SimDriverBench {
    fn settle(&mut self) -> Vec<DriverEvent> {
        self.sim.run_to_horizon().expect("engine run");
        self.sim.take_driver_log(DUT)
    }

    fn inject(&mut self, frame: Vec<u8>) {
        let first = !std::mem::replace(&mut self.peer_ready, true);
        self.sim
            .with_driver(PEER, |r| {
                if first {
                    r.init()?;
                    r.configure(&RadioConfig::default())?;
                }
                r.send(&frame)
            })
            .expect("engine accepts peer request")
            .expect("peer radio sends");
    }
}
