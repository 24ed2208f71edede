//! Event-driven applications. Handlers run to completion on the engine
//! thread and reach the outside world only through [`Host`].

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{RadioDriver, SendHandle, StackError, Unicast, UnicastMessage, HEADER_LEN};
use crate::node::TimerId;
use crate::phy::{time_on_air, RadioConfig};
use crate::time::SimTime;
use crate::NodeAddress;

/// Services the platform offers an application.
pub trait Host {
    fn now(&self) -> SimTime;
    fn radio(&mut self) -> &mut dyn RadioDriver;
    /// Re-arming an id replaces its pending expiry.
    fn set_timer(&mut self, id: TimerId, at: SimTime);
    fn cancel_timer(&mut self, id: TimerId);
    /// Radio off and MCU into LPM4 once the handler returns.
    fn sleep(&mut self);
    /// Whether `target` raised its wake-up interrupt at or after `since`.
    /// Stands in for the bench observation of the target's interrupt line.
    fn wake_observed(&self, target: NodeAddress, since: SimTime) -> bool;
    fn note(&mut self, note: AppNote);
}

/// Application-level happenings worth keeping in the run record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AppNote {
    WakeSent { target: NodeAddress },
    WakeTimeout { target: NodeAddress },
    RxWindowExpired,
    DataSent { dst: NodeAddress, seqno: u16 },
}

pub struct AppCtx<'a> {
    pub unicast: &'a mut Unicast,
    pub host: &'a mut dyn Host,
}

impl AppCtx<'_> {
    pub fn now(&self) -> SimTime {
        self.host.now()
    }

    pub fn radio(&mut self) -> &mut dyn RadioDriver {
        self.host.radio()
    }

    pub fn send(&mut self, dst: NodeAddress, payload: &[u8]) -> Result<SendHandle, StackError> {
        let h = self.unicast.send(self.host.radio(), dst, payload)?;
        self.host.note(AppNote::DataSent {
            dst,
            seqno: h.seqno,
        });
        Ok(h)
    }

    /// Brings the driver up with `cfg`.
    pub fn bring_up(&mut self, cfg: &RadioConfig) -> Result<(), StackError> {
        let radio = self.host.radio();
        radio.init().map_err(StackError::RadioUnavailable)?;
        radio.configure(cfg).map_err(StackError::RadioUnavailable)
    }
}

pub trait Application {
    fn boot(&mut self, cx: &mut AppCtx<'_>) -> Result<(), StackError>;

    fn on_timer(&mut self, _cx: &mut AppCtx<'_>, _id: TimerId) -> Result<(), StackError> {
        Ok(())
    }

    fn on_wakeup(&mut self, _cx: &mut AppCtx<'_>) -> Result<(), StackError> {
        Ok(())
    }

    fn on_tx_done(&mut self, _cx: &mut AppCtx<'_>) -> Result<(), StackError> {
        Ok(())
    }

    fn on_receive(&mut self, _cx: &mut AppCtx<'_>, _msg: &UnicastMessage) -> Result<(), StackError> {
        Ok(())
    }
}

fn rx(e: super::DriverError) -> StackError {
    StackError::RadioUnavailable(e)
}

fn payload(len: usize, seq: u64) -> Vec<u8> {
    (0..len).map(|i| (seq as usize).wrapping_add(i) as u8).collect()
}

const TICK: TimerId = TimerId(1);

/// Sends `payload_len` bytes to `dst` at `first_at + k * period`, k >= 0,
/// sleeping between frames.
#[derive(Debug, Clone)]
pub struct PeriodicSender {
    radio: RadioConfig,
    dst: NodeAddress,
    period: Duration,
    payload_len: usize,
    next: SimTime,
    count: u64,
}

impl PeriodicSender {
    /// Rejects a period that does not exceed one frame's airtime.
    pub fn new(
        radio: RadioConfig,
        dst: NodeAddress,
        period: Duration,
        payload_len: usize,
        first_at: SimTime,
    ) -> Result<Self, StackError> {
        let airtime = time_on_air(&radio, payload_len + HEADER_LEN)
            .map_err(|e| StackError::ConfigInvalid(e.to_string()))?;
        if period <= airtime {
            return Err(StackError::ConfigInvalid(format!(
                "period {period:?} must exceed the {airtime:?} frame airtime"
            )));
        }
        Ok(PeriodicSender {
            radio,
            dst,
            period,
            payload_len,
            next: first_at,
            count: 0,
        })
    }
}

impl Application for PeriodicSender {
    fn boot(&mut self, cx: &mut AppCtx<'_>) -> Result<(), StackError> {
        cx.bring_up(&self.radio)?;
        cx.host.set_timer(TICK, self.next);
        cx.host.sleep();
        Ok(())
    }

    fn on_timer(&mut self, cx: &mut AppCtx<'_>, id: TimerId) -> Result<(), StackError> {
        if id != TICK {
            return Ok(());
        }
        let body = payload(self.payload_len, self.count);
        self.count += 1;
        if let Some(next) = self.next.checked_add(self.period) {
            self.next = next;
            cx.host.set_timer(TICK, next);
        }
        cx.send(self.dst, &body)?;
        Ok(())
    }

    fn on_tx_done(&mut self, cx: &mut AppCtx<'_>) -> Result<(), StackError> {
        cx.host.sleep();
        Ok(())
    }
}

/// Always-on receiver.
#[derive(Debug, Clone)]
pub struct Sink {
    radio: RadioConfig,
}

impl Sink {
    pub fn new(radio: RadioConfig) -> Self {
        Sink { radio }
    }
}

impl Application for Sink {
    fn boot(&mut self, cx: &mut AppCtx<'_>) -> Result<(), StackError> {
        cx.bring_up(&self.radio)?;
        cx.radio().start_rx().map_err(rx)
    }
}

/// Does nothing but sleep.
#[derive(Debug, Clone)]
pub struct Sleeper {
    radio: RadioConfig,
}

impl Sleeper {
    pub fn new(radio: RadioConfig) -> Self {
        Sleeper { radio }
    }
}

impl Application for Sleeper {
    fn boot(&mut self, cx: &mut AppCtx<'_>) -> Result<(), StackError> {
        cx.bring_up(&self.radio)?;
        cx.host.sleep();
        Ok(())
    }
}

const CYCLE: TimerId = TimerId(1);
const DEADLINE: TimerId = TimerId(2);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum InitiatorPhase {
    Idle,
    Waking { since: SimTime },
    AwaitingWake { since: SimTime },
    Sending,
}

/// Wakes `target` with a wake-up frame, then unicasts a payload once the
/// target's interrupt has been seen. Keeps its own radio in standby.
#[derive(Debug, Clone)]
pub struct WakeupInitiator {
    radio: RadioConfig,
    target: NodeAddress,
    wake_address: u8,
    payload_len: usize,
    period: Duration,
    next: SimTime,
    cycles_left: u64,
    /// Time allowed after the wake-up frame ends before the data goes out.
    guard: Duration,
    phase: InitiatorPhase,
    count: u64,
}

impl WakeupInitiator {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        radio: RadioConfig,
        target: NodeAddress,
        wake_address: u8,
        payload_len: usize,
        first_at: SimTime,
        period: Duration,
        cycles: u64,
        guard: Duration,
    ) -> Self {
        WakeupInitiator {
            radio,
            target,
            wake_address,
            payload_len,
            period,
            next: first_at,
            cycles_left: cycles,
            guard,
            phase: InitiatorPhase::Idle,
            count: 0,
        }
    }
}

impl Application for WakeupInitiator {
    fn boot(&mut self, cx: &mut AppCtx<'_>) -> Result<(), StackError> {
        cx.bring_up(&self.radio)?;
        cx.radio().on().map_err(rx)?;
        if self.cycles_left > 0 {
            cx.host.set_timer(CYCLE, self.next);
        }
        Ok(())
    }

    fn on_timer(&mut self, cx: &mut AppCtx<'_>, id: TimerId) -> Result<(), StackError> {
        match id {
            CYCLE => {
                self.cycles_left -= 1;
                if self.cycles_left > 0 {
                    if let Some(next) = self.next.checked_add(self.period) {
                        self.next = next;
                        cx.host.set_timer(CYCLE, next);
                    }
                }
                if self.phase != InitiatorPhase::Idle {
                    // previous exchange still running
                    return Ok(());
                }
                let since = cx.now();
                cx.radio().send_wakeup(self.wake_address).map_err(rx)?;
                cx.host.note(AppNote::WakeSent {
                    target: self.target,
                });
                self.phase = InitiatorPhase::Waking { since };
            }
            DEADLINE => {
                let InitiatorPhase::AwaitingWake { since } = self.phase else {
                    return Ok(());
                };
                if cx.host.wake_observed(self.target, since) {
                    let body = payload(self.payload_len, self.count);
                    self.count += 1;
                    cx.send(self.target, &body)?;
                    self.phase = InitiatorPhase::Sending;
                } else {
                    cx.host.note(AppNote::WakeTimeout {
                        target: self.target,
                    });
                    self.phase = InitiatorPhase::Idle;
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn on_tx_done(&mut self, cx: &mut AppCtx<'_>) -> Result<(), StackError> {
        self.phase = match self.phase {
            InitiatorPhase::Waking { since } => {
                let deadline = cx.now().checked_add(self.guard).unwrap_or(SimTime::MAX);
                cx.host.set_timer(DEADLINE, deadline);
                InitiatorPhase::AwaitingWake { since }
            }
            _ => InitiatorPhase::Idle,
        };
        Ok(())
    }
}

const RX_WINDOW: TimerId = TimerId(1);
const LINGER: TimerId = TimerId(2);

/// Sleeps until its wake-up receiver fires, listens for data, and goes
/// back to sleep `linger` after the last frame or when the listen window
/// closes empty.
#[derive(Debug, Clone)]
pub struct WakeupTarget {
    radio: RadioConfig,
    rx_window: Duration,
    linger: Duration,
}

impl WakeupTarget {
    pub fn new(radio: RadioConfig, rx_window: Duration, linger: Duration) -> Self {
        WakeupTarget {
            radio,
            rx_window,
            linger,
        }
    }
}

impl Application for WakeupTarget {
    fn boot(&mut self, cx: &mut AppCtx<'_>) -> Result<(), StackError> {
        cx.bring_up(&self.radio)?;
        cx.host.sleep();
        Ok(())
    }

    fn on_wakeup(&mut self, cx: &mut AppCtx<'_>) -> Result<(), StackError> {
        cx.radio().start_rx().map_err(rx)?;
        let at = cx.now().checked_add(self.rx_window).unwrap_or(SimTime::MAX);
        cx.host.set_timer(RX_WINDOW, at);
        Ok(())
    }

    fn on_receive(&mut self, cx: &mut AppCtx<'_>, _msg: &UnicastMessage) -> Result<(), StackError> {
        cx.host.cancel_timer(RX_WINDOW);
        let at = cx.now().checked_add(self.linger).unwrap_or(SimTime::MAX);
        cx.host.set_timer(LINGER, at);
        Ok(())
    }

    fn on_timer(&mut self, cx: &mut AppCtx<'_>, id: TimerId) -> Result<(), StackError> {
        match id {
            RX_WINDOW => {
                cx.host.note(AppNote::RxWindowExpired);
                cx.host.sleep();
            }
            LINGER => cx.host.sleep(),
            _ => {}
        }
        Ok(())
    }
}
