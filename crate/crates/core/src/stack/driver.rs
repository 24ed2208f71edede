//! The radio abstraction contract every backend implements.
//!
//! Rules a conforming driver follows:
//! - nothing but `init` is accepted before `init`;
//! - `configure` is refused while transmitting or receiving;
//! - `send` is refused while a previous send is still on air, and every
//!   accepted send produces exactly one `TxDone`;
//! - `send` on a powered-down radio powers it up first.
//!
//! Drivers must not be re-entered from their own `TxDone` handling.

use std::collections::VecDeque;

use thiserror::Error;

use crate::phy::{time_on_air, PhyError, RadioConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DriverError {
    #[error("driver not initialized")]
    NotInitialized,
    #[error("radio busy")]
    Busy,
    #[error("radio has no power")]
    Unavailable,
    #[error(transparent)]
    Config(#[from] PhyError),
}

/// Raised asynchronously by a driver.
#[derive(Debug, Clone, PartialEq)]
pub enum DriverEvent {
    TxDone,
    RxDone { bytes: Vec<u8>, rssi_dbm: f64, snr_db: f64 },
}

pub trait RadioDriver {
    fn init(&mut self) -> Result<(), DriverError>;
    fn configure(&mut self, cfg: &RadioConfig) -> Result<(), DriverError>;
    fn send(&mut self, frame: &[u8]) -> Result<(), DriverError>;
    /// Keys an OOK wake-up frame for `address` on the main transceiver.
    fn send_wakeup(&mut self, address: u8) -> Result<(), DriverError>;
    fn start_rx(&mut self) -> Result<(), DriverError>;
    fn stop_rx(&mut self) -> Result<(), DriverError>;
    fn channel_clear(&mut self) -> bool;
    fn on(&mut self) -> Result<(), DriverError>;
    fn off(&mut self) -> Result<(), DriverError>;
    fn config(&self) -> Option<&RadioConfig>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriverMode {
    Off,
    Idle,
    Rx,
    Tx,
}

/// Contract bookkeeping shared by driver implementations: tracks the mode
/// the upper layers have asked for and enforces the rules above.
#[derive(Debug, Clone)]
pub struct DriverCore {
    initialized: bool,
    powered: bool,
    mode: DriverMode,
    /// Mode to return to after the current transmission.
    after_tx: DriverMode,
    config: Option<RadioConfig>,
}

impl Default for DriverCore {
    fn default() -> Self {
        DriverCore {
            initialized: false,
            powered: true,
            mode: DriverMode::Off,
            after_tx: DriverMode::Idle,
            config: None,
        }
    }
}

impl DriverCore {
    pub fn mode(&self) -> DriverMode {
        self.mode
    }

    pub fn config(&self) -> Option<&RadioConfig> {
        self.config.as_ref()
    }

    /// Marks the battery as gone; every later call fails.
    pub fn power_lost(&mut self) {
        self.powered = false;
        self.mode = DriverMode::Off;
    }

    fn ready(&self) -> Result<(), DriverError> {
        if !self.powered {
            Err(DriverError::Unavailable)
        } else if !self.initialized {
            Err(DriverError::NotInitialized)
        } else {
            Ok(())
        }
    }

    pub fn init(&mut self) -> Result<(), DriverError> {
        if !self.powered {
            return Err(DriverError::Unavailable);
        }
        self.initialized = true;
        Ok(())
    }

    pub fn configure(&mut self, cfg: &RadioConfig) -> Result<(), DriverError> {
        self.ready()?;
        if matches!(self.mode, DriverMode::Rx | DriverMode::Tx) {
            return Err(DriverError::Busy);
        }
        cfg.validate()?;
        self.config = Some(*cfg);
        Ok(())
    }

    pub fn begin_tx(&mut self) -> Result<(), DriverError> {
        self.ready()?;
        if self.mode == DriverMode::Tx {
            return Err(DriverError::Busy);
        }
        // the radio drops out of rx to transmit and comes back to standby
        self.after_tx = DriverMode::Idle;
        self.mode = DriverMode::Tx;
        Ok(())
    }

    /// Completes the transmission in flight. Returns false if there was none.
    pub fn tx_done(&mut self) -> bool {
        if self.mode != DriverMode::Tx {
            return false;
        }
        self.mode = self.after_tx;
        true
    }

    pub fn start_rx(&mut self) -> Result<(), DriverError> {
        self.ready()?;
        if self.mode == DriverMode::Tx {
            return Err(DriverError::Busy);
        }
        self.mode = DriverMode::Rx;
        Ok(())
    }

    /// Returns whether anything changed.
    pub fn stop_rx(&mut self) -> Result<bool, DriverError> {
        self.ready()?;
        if self.mode == DriverMode::Rx {
            self.mode = DriverMode::Idle;
            return Ok(true);
        }
        Ok(false)
    }

    pub fn on(&mut self) -> Result<bool, DriverError> {
        self.ready()?;
        if self.mode == DriverMode::Off {
            self.mode = DriverMode::Idle;
            return Ok(true);
        }
        Ok(false)
    }

    pub fn off(&mut self) -> Result<(), DriverError> {
        self.ready()?;
        if self.mode == DriverMode::Tx {
            return Err(DriverError::Busy);
        }
        self.mode = DriverMode::Off;
        Ok(())
    }

    /// The host put the whole mote to sleep, radio included.
    pub fn force_off(&mut self) {
        if self.mode != DriverMode::Tx {
            self.mode = DriverMode::Off;
        }
    }
}

/// In-memory reference driver: transmissions complete when the harness
/// settles, and frames can be injected as if heard on air. Used to check
/// the stack against the contract without an engine.
#[derive(Debug, Default)]
pub struct LoopbackRadio {
    core: DriverCore,
    in_flight: Option<Vec<u8>>,
    wakeup_in_flight: bool,
    inbox: VecDeque<Vec<u8>>,
    pub sent: Vec<Vec<u8>>,
    pub wakeups: Vec<u8>,
    pub busy_medium: bool,
    /// Cumulative airtime of completed transmissions, in nanoseconds.
    pub airtime_ns: u128,
}

impl LoopbackRadio {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mode(&self) -> DriverMode {
        self.core.mode()
    }

    /// Queues a frame that the radio will hand up on the next settle if it
    /// is listening then.
    pub fn inject(&mut self, bytes: Vec<u8>) {
        self.inbox.push_back(bytes);
    }

    /// Lets time pass until nothing is in flight.
    pub fn settle(&mut self) -> Vec<DriverEvent> {
        let mut events = Vec::new();
        if let Some(frame) = self.in_flight.take() {
            if let Some(cfg) = self.core.config() {
                if let Ok(t) = time_on_air(cfg, frame.len()) {
                    self.airtime_ns += t.as_nanos();
                }
            }
            self.sent.push(frame);
            if self.core.tx_done() {
                events.push(DriverEvent::TxDone);
            }
        } else if std::mem::take(&mut self.wakeup_in_flight) && self.core.tx_done() {
            events.push(DriverEvent::TxDone);
        }
        if self.core.mode() == DriverMode::Rx {
            events.extend(self.inbox.drain(..).map(|bytes| DriverEvent::RxDone {
                bytes,
                rssi_dbm: -80.0,
                snr_db: 10.0,
            }));
        } else {
            self.inbox.clear();
        }
        events
    }
}

impl RadioDriver for LoopbackRadio {
    fn init(&mut self) -> Result<(), DriverError> {
        self.core.init()
    }

    fn configure(&mut self, cfg: &RadioConfig) -> Result<(), DriverError> {
        self.core.configure(cfg)
    }

    fn send(&mut self, frame: &[u8]) -> Result<(), DriverError> {
        self.core.begin_tx()?;
        self.in_flight = Some(frame.to_vec());
        Ok(())
    }

    fn send_wakeup(&mut self, address: u8) -> Result<(), DriverError> {
        self.core.begin_tx()?;
        self.wakeups.push(address);
        self.wakeup_in_flight = true;
        Ok(())
    }

    fn start_rx(&mut self) -> Result<(), DriverError> {
        self.core.start_rx()
    }

    fn stop_rx(&mut self) -> Result<(), DriverError> {
        self.core.stop_rx().map(|_| ())
    }

    fn channel_clear(&mut self) -> bool {
        !self.busy_medium
    }

    fn on(&mut self) -> Result<(), DriverError> {
        self.core.on().map(|_| ())
    }

    fn off(&mut self) -> Result<(), DriverError> {
        self.core.off()
    }

    fn config(&self) -> Option<&RadioConfig> {
        self.core.config()
    }
}
