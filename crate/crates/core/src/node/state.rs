//! Composite MCU x main-radio state machine.
//!
//! | event            | precondition                  | effect                                                 |
//! |------------------|-------------------------------|--------------------------------------------------------|
//! | `WurxInterrupt`  | MCU asleep                    | MCU waking, `McuReady` after the wake-up latency       |
//! |                  | MCU waking                    | cause queued for delivery on `McuReady`                |
//! |                  | MCU active                    | delivered immediately                                  |
//! | `Timer`          | same as `WurxInterrupt`       |                                                        |
//! | `McuReady`       | MCU waking                    | MCU active, queued causes delivered                    |
//! | `RadioOn`        | MCU active                    | off/sleep: starting, `RadioReady` after turn-on time    |
//! | `RadioReady`     | radio starting                | radio enters its goal (standby, rx, tx or sleep)       |
//! | `RxRequest`      | MCU active, radio not tx      | standby: rx; off/sleep: start with rx goal             |
//! | `StopRx`         | MCU active                    | rx: standby; starting-for-rx: goal becomes standby     |
//! | `TxRequest`      | MCU active, no tx in progress | standby/rx: tx now; off/sleep: start with tx goal      |
//! | `TxDone`         | radio in tx                   | standby                                                |
//! | `RxDone`         | radio in rx                   | stays in rx                                            |
//! | `RadioOff`       | MCU active, radio not tx      | radio sleep (deferred until a start-up completes)      |
//! | `SleepRequest`   | MCU active, radio not tx and not starting | radio off, MCU in LPM4                     |
//!
//! Anything else is an illegal transition. The MCU can only be non-active
//! while the radio is off or asleep.

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::PowerMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimerId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McuMode {
    Lpm4Sleep,
    Waking,
    Active,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxKind {
    Lora,
    Ook,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadioMode {
    Off,
    Sleep,
    /// Powering up towards [`RadioGoal`].
    Starting,
    Standby,
    Rx,
    Tx(TxKind),
}

/// Where a starting radio ends up once it is ready.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadioGoal {
    Standby,
    Rx,
    Tx(TxKind),
    Sleep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WakeCause {
    Timer(TimerId),
    Interrupt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeEvent {
    WurxInterrupt,
    Timer(TimerId),
    McuReady,
    RadioOn,
    RadioReady,
    RxRequest,
    StopRx,
    TxRequest(TxKind),
    TxDone,
    RxDone,
    RadioOff,
    SleepRequest,
}

impl NodeEvent {
    pub const fn name(&self) -> &'static str {
        match self {
            NodeEvent::WurxInterrupt => "wurx_interrupt",
            NodeEvent::Timer(_) => "timer",
            NodeEvent::McuReady => "mcu_ready",
            NodeEvent::RadioOn => "radio_on",
            NodeEvent::RadioReady => "radio_ready",
            NodeEvent::RxRequest => "rx_request",
            NodeEvent::StopRx => "stop_rx",
            NodeEvent::TxRequest(_) => "tx_request",
            NodeEvent::TxDone => "tx_done",
            NodeEvent::RxDone => "rx_done",
            NodeEvent::RadioOff => "radio_off",
            NodeEvent::SleepRequest => "sleep_request",
        }
    }
}

/// Something the node surfaces to the layers above.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Notice {
    /// Run the application handler for this cause; the MCU is active.
    Deliver(WakeCause),
    /// The radio has just keyed up; the engine puts the frame on air.
    TxStarted(TxKind),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transition {
    /// Events to schedule, relative to the current instant.
    pub follow_ups: Vec<(Duration, NodeEvent)>,
    pub notices: Vec<Notice>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timing {
    pub wakeup_latency: Duration,
    pub radio_turn_on: Duration,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            wakeup_latency: Duration::from_micros(7),
            radio_turn_on: Duration::from_millis(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("illegal transition: {event:?} in {state}")]
pub struct NodeError {
    pub state: NodeState,
    pub event: NodeEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeState {
    pub mcu: McuMode,
    pub radio: RadioMode,
    pub goal: RadioGoal,
    deferred: Vec<WakeCause>,
}

impl fmt::Display for NodeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mcu={:?} radio={:?}", self.mcu, self.radio)?;
        if self.radio == RadioMode::Starting {
            write!(f, " goal={:?}", self.goal)?;
        }
        Ok(())
    }
}

impl Default for NodeState {
    /// Freshly powered: MCU running, radio off.
    fn default() -> Self {
        NodeState {
            mcu: McuMode::Active,
            radio: RadioMode::Off,
            goal: RadioGoal::Standby,
            deferred: Vec::new(),
        }
    }
}

impl NodeState {
    pub fn asleep() -> Self {
        NodeState {
            mcu: McuMode::Lpm4Sleep,
            ..NodeState::default()
        }
    }

    pub fn deferred(&self) -> &[WakeCause] {
        &self.deferred
    }

    pub fn is_listening(&self) -> bool {
        self.radio == RadioMode::Rx
    }

    /// Mode the ledger charges for the current state.
    pub fn power_mode(&self, wurx_decoding: bool) -> PowerMode {
        match self.mcu {
            McuMode::Lpm4Sleep if wurx_decoding => PowerMode::WurxDecode,
            McuMode::Lpm4Sleep => PowerMode::Sleep,
            McuMode::Waking => PowerMode::McuWake,
            McuMode::Active => match self.radio {
                RadioMode::Off | RadioMode::Sleep => PowerMode::McuActive,
                RadioMode::Starting | RadioMode::Standby => PowerMode::RadioStandby,
                RadioMode::Rx => PowerMode::LoraRx,
                RadioMode::Tx(TxKind::Lora) => PowerMode::LoraTx,
                RadioMode::Tx(TxKind::Ook) => PowerMode::OokTx,
            },
        }
    }

    /// Applies `event`. On error the state is left untouched.
    pub fn transition(&mut self, event: NodeEvent, timing: &Timing) -> Result<Transition, NodeError> {
        let mut next = self.clone();
        let mut out = Transition::default();
        let legal = next.apply(event, timing, &mut out);
        if legal {
            *self = next;
            Ok(out)
        } else {
            Err(NodeError {
                state: self.clone(),
                event,
            })
        }
    }

    fn apply(&mut self, event: NodeEvent, timing: &Timing, out: &mut Transition) -> bool {
        use NodeEvent as E;
        let active = self.mcu == McuMode::Active;
        match event {
            E::WurxInterrupt | E::Timer(_) => {
                let cause = match event {
                    E::Timer(id) => WakeCause::Timer(id),
                    _ => WakeCause::Interrupt,
                };
                match self.mcu {
                    McuMode::Lpm4Sleep => {
                        self.mcu = McuMode::Waking;
                        self.deferred.push(cause);
                        out.follow_ups.push((timing.wakeup_latency, E::McuReady));
                    }
                    McuMode::Waking => self.deferred.push(cause),
                    McuMode::Active => out.notices.push(Notice::Deliver(cause)),
                }
                true
            }
            E::McuReady => {
                if self.mcu != McuMode::Waking {
                    return false;
                }
                self.mcu = McuMode::Active;
                out.notices
                    .extend(self.deferred.drain(..).map(Notice::Deliver));
                true
            }
            _ if !active => false,
            E::RadioOn => {
                match self.radio {
                    RadioMode::Off | RadioMode::Sleep => self.start_radio(RadioGoal::Standby, timing, out),
                    RadioMode::Starting if self.goal == RadioGoal::Sleep => self.goal = RadioGoal::Standby,
                    _ => {}
                }
                true
            }
            E::RadioReady => {
                if self.radio != RadioMode::Starting {
                    return false;
                }
                self.radio = match self.goal {
                    RadioGoal::Standby => RadioMode::Standby,
                    RadioGoal::Rx => RadioMode::Rx,
                    RadioGoal::Sleep => RadioMode::Sleep,
                    RadioGoal::Tx(kind) => {
                        out.notices.push(Notice::TxStarted(kind));
                        RadioMode::Tx(kind)
                    }
                };
                self.goal = RadioGoal::Standby;
                true
            }
            E::RxRequest => match self.radio {
                RadioMode::Off | RadioMode::Sleep => {
                    self.start_radio(RadioGoal::Rx, timing, out);
                    true
                }
                RadioMode::Starting => match self.goal {
                    RadioGoal::Tx(_) => false,
                    _ => {
                        self.goal = RadioGoal::Rx;
                        true
                    }
                },
                RadioMode::Standby | RadioMode::Rx => {
                    self.radio = RadioMode::Rx;
                    true
                }
                RadioMode::Tx(_) => false,
            },
            E::StopRx => {
                match self.radio {
                    RadioMode::Rx => self.radio = RadioMode::Standby,
                    RadioMode::Starting if self.goal == RadioGoal::Rx => self.goal = RadioGoal::Standby,
                    _ => {}
                }
                true
            }
            E::TxRequest(kind) => match self.radio {
                RadioMode::Off | RadioMode::Sleep => {
                    self.start_radio(RadioGoal::Tx(kind), timing, out);
                    true
                }
                RadioMode::Starting => match self.goal {
                    RadioGoal::Tx(_) => false,
                    _ => {
                        self.goal = RadioGoal::Tx(kind);
                        true
                    }
                },
                RadioMode::Standby | RadioMode::Rx => {
                    self.radio = RadioMode::Tx(kind);
                    out.notices.push(Notice::TxStarted(kind));
                    true
                }
                RadioMode::Tx(_) => false,
            },
            E::TxDone => {
                if !matches!(self.radio, RadioMode::Tx(_)) {
                    return false;
                }
                self.radio = RadioMode::Standby;
                true
            }
            E::RxDone => self.radio == RadioMode::Rx,
            E::RadioOff => match self.radio {
                RadioMode::Tx(_) => false,
                RadioMode::Starting => match self.goal {
                    RadioGoal::Tx(_) => false,
                    _ => {
                        self.goal = RadioGoal::Sleep;
                        true
                    }
                },
                _ => {
                    self.radio = RadioMode::Sleep;
                    true
                }
            },
            E::SleepRequest => match self.radio {
                RadioMode::Tx(_) | RadioMode::Starting => false,
                _ => {
                    self.radio = RadioMode::Off;
                    self.mcu = McuMode::Lpm4Sleep;
                    true
                }
            },
        }
    }

    fn start_radio(&mut self, goal: RadioGoal, timing: &Timing, out: &mut Transition) {
        self.radio = RadioMode::Starting;
        self.goal = goal;
        out.follow_ups.push((timing.radio_turn_on, NodeEvent::RadioReady));
    }

    /// Structural invariants every reachable state satisfies.
    pub fn check_invariants(&self) -> Result<(), &'static str> {
        if self.mcu != McuMode::Active && !matches!(self.radio, RadioMode::Off | RadioMode::Sleep) {
            return Err("radio powered while the MCU is not active");
        }
        if !self.deferred.is_empty() && self.mcu != McuMode::Waking {
            return Err("queued wake causes outside the waking state");
        }
        if self.mcu == McuMode::Waking && self.deferred.is_empty() {
            return Err("waking without a cause");
        }
        if self.radio != RadioMode::Starting && self.goal != RadioGoal::Standby {
            return Err("stale radio goal");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> Timing {
        Timing::default()
    }

    #[test]
    fn interrupt_wake_path_reaches_rx() {
        let mut s = NodeState::asleep();
        let tr = s.transition(NodeEvent::WurxInterrupt, &t()).unwrap();
        assert_eq!(s.mcu, McuMode::Waking);
        assert_eq!(tr.follow_ups, vec![(Duration::from_micros(7), NodeEvent::McuReady)]);
        assert_eq!(s.power_mode(false), PowerMode::McuWake);

        let tr = s.transition(NodeEvent::McuReady, &t()).unwrap();
        assert_eq!(tr.notices, vec![Notice::Deliver(WakeCause::Interrupt)]);
        assert_eq!(s.mcu, McuMode::Active);

        let tr = s.transition(NodeEvent::RxRequest, &t()).unwrap();
        assert_eq!(tr.follow_ups, vec![(Duration::from_millis(1), NodeEvent::RadioReady)]);
        assert_eq!(s.power_mode(false), PowerMode::RadioStandby);
        s.transition(NodeEvent::RadioReady, &t()).unwrap();
        assert_eq!(s.radio, RadioMode::Rx);
        assert_eq!(s.power_mode(false), PowerMode::LoraRx);
        s.check_invariants().unwrap();
    }

    #[test]
    fn sleep_request_from_active() {
        let mut s = NodeState::default();
        s.transition(NodeEvent::SleepRequest, &t()).unwrap();
        assert_eq!(s.mcu, McuMode::Lpm4Sleep);
        assert_eq!(s.power_mode(false), PowerMode::Sleep);
        assert_eq!(s.power_mode(true), PowerMode::WurxDecode);
    }

    #[test]
    fn double_tx_is_illegal() {
        let mut s = NodeState::default();
        s.transition(NodeEvent::RadioOn, &t()).unwrap();
        s.transition(NodeEvent::RadioReady, &t()).unwrap();
        let tr = s.transition(NodeEvent::TxRequest(TxKind::Lora), &t()).unwrap();
        assert_eq!(tr.notices, vec![Notice::TxStarted(TxKind::Lora)]);
        let before = s.clone();
        let err = s.transition(NodeEvent::TxRequest(TxKind::Lora), &t()).unwrap_err();
        assert_eq!(err.event, NodeEvent::TxRequest(TxKind::Lora));
        assert_eq!(s, before);
        assert!(s.transition(NodeEvent::SleepRequest, &t()).is_err());
    }

    #[test]
    fn tx_from_off_waits_for_turn_on() {
        let mut s = NodeState::default();
        let tr = s.transition(NodeEvent::TxRequest(TxKind::Lora), &t()).unwrap();
        assert!(tr.notices.is_empty());
        assert_eq!(s.radio, RadioMode::Starting);
        let tr = s.transition(NodeEvent::RadioReady, &t()).unwrap();
        assert_eq!(tr.notices, vec![Notice::TxStarted(TxKind::Lora)]);
        s.transition(NodeEvent::TxDone, &t()).unwrap();
        assert_eq!(s.radio, RadioMode::Standby);
    }

    #[test]
    fn timers_queue_while_waking() {
        let mut s = NodeState::asleep();
        s.transition(NodeEvent::Timer(TimerId(1)), &t()).unwrap();
        let tr = s.transition(NodeEvent::WurxInterrupt, &t()).unwrap();
        assert!(tr.follow_ups.is_empty());
        let tr = s.transition(NodeEvent::McuReady, &t()).unwrap();
        assert_eq!(
            tr.notices,
            vec![
                Notice::Deliver(WakeCause::Timer(TimerId(1))),
                Notice::Deliver(WakeCause::Interrupt)
            ]
        );
    }

    #[test]
    fn radio_requests_need_an_awake_mcu() {
        let mut s = NodeState::asleep();
        for e in [
            NodeEvent::RadioOn,
            NodeEvent::RxRequest,
            NodeEvent::TxRequest(TxKind::Ook),
            NodeEvent::SleepRequest,
            NodeEvent::McuReady,
            NodeEvent::RxDone,
            NodeEvent::TxDone,
        ] {
            assert!(s.transition(e, &t()).is_err(), "{e:?}");
        }
    }
}
