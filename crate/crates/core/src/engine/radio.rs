//! The simulated radio backend and the host services handed to
//! applications. Both only record what was asked; the simulator applies
//! the requests once the handler returns.

use std::collections::BTreeMap;

use crate::node::{NodeEvent, TimerId};
use crate::phy::RadioConfig;
use crate::stack::{AppNote, DriverCore, DriverError, DriverEvent, Host, RadioDriver};
use crate::time::SimTime;
use crate::NodeAddress;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum HostCmd {
    Node(NodeEvent),
    Send(Vec<u8>),
    SendWakeup(u8),
    SetTimer(TimerId, SimTime),
    CancelTimer(TimerId),
    Sleep,
    Note(AppNote),
}

#[derive(Debug, Default)]
pub struct SimRadio {
    pub(crate) core: DriverCore,
    pub(crate) commands: Vec<HostCmd>,
    pub(crate) medium_busy: bool,
    /// Raw driver callbacks, kept only when a test bench asks for them.
    pub(crate) log: Option<Vec<DriverEvent>>,
}

impl SimRadio {
    pub(crate) fn record(&mut self, ev: DriverEvent) {
        if let Some(log) = &mut self.log {
            log.push(ev);
        }
    }
}

impl RadioDriver for SimRadio {
    fn init(&mut self) -> Result<(), DriverError> {
        self.core.init()
    }

    fn configure(&mut self, cfg: &RadioConfig) -> Result<(), DriverError> {
        self.core.configure(cfg)
    }

    fn send(&mut self, frame: &[u8]) -> Result<(), DriverError> {
        if self.core.config().is_none() {
            return Err(DriverError::NotInitialized);
        }
        self.core.begin_tx()?;
        self.commands.push(HostCmd::Send(frame.to_vec()));
        Ok(())
    }

    fn send_wakeup(&mut self, address: u8) -> Result<(), DriverError> {
        if self.core.config().is_none() {
            return Err(DriverError::NotInitialized);
        }
        self.core.begin_tx()?;
        self.commands.push(HostCmd::SendWakeup(address));
        Ok(())
    }

    fn start_rx(&mut self) -> Result<(), DriverError> {
        if self.core.config().is_none() {
            return Err(DriverError::NotInitialized);
        }
        self.core.start_rx()?;
        self.commands.push(HostCmd::Node(NodeEvent::RxRequest));
        Ok(())
    }

    fn stop_rx(&mut self) -> Result<(), DriverError> {
        if self.core.stop_rx()? {
            self.commands.push(HostCmd::Node(NodeEvent::StopRx));
        }
        Ok(())
    }

    fn channel_clear(&mut self) -> bool {
        !self.medium_busy
    }

    fn on(&mut self) -> Result<(), DriverError> {
        if self.core.on()? {
            self.commands.push(HostCmd::Node(NodeEvent::RadioOn));
        }
        Ok(())
    }

    fn off(&mut self) -> Result<(), DriverError> {
        self.core.off()?;
        self.commands.push(HostCmd::Node(NodeEvent::RadioOff));
        Ok(())
    }

    fn config(&self) -> Option<&RadioConfig> {
        self.core.config()
    }
}

pub(crate) struct HostShim<'a> {
    pub now: SimTime,
    pub radio: &'a mut SimRadio,
    pub interrupts: &'a BTreeMap<NodeAddress, SimTime>,
}

impl Host for HostShim<'_> {
    fn now(&self) -> SimTime {
        self.now
    }

    fn radio(&mut self) -> &mut dyn RadioDriver {
        self.radio
    }

    fn set_timer(&mut self, id: TimerId, at: SimTime) {
        self.radio.commands.push(HostCmd::SetTimer(id, at));
    }

    fn cancel_timer(&mut self, id: TimerId) {
        self.radio.commands.push(HostCmd::CancelTimer(id));
    }

    fn sleep(&mut self) {
        self.radio.core.force_off();
        self.radio.commands.push(HostCmd::Sleep);
    }

    fn wake_observed(&self, target: NodeAddress, since: SimTime) -> bool {
        self.interrupts.get(&target).is_some_and(|&t| t >= since)
    }

    fn note(&mut self, note: AppNote) {
        self.radio.commands.push(HostCmd::Note(note));
    }
}
