//! Layered networking stack: a radio-abstraction contract, a Rime-style
//! single-hop unicast primitive, and the applications built on them.
//!
//! Nothing in here touches the channel model or the energy ledger; the
//! only way out is the [`RadioDriver`] contract and the [`Host`] services.
//! There is no MAC duty cycling and no acknowledgement or retransmission:
//! unicast is fire-and-forget and sequence numbers exist only for
//! duplicate and delivery accounting.

mod apps;
pub mod conformance;
mod driver;
mod unicast;

pub use apps::{
    AppCtx, AppNote, Application, Host, PeriodicSender, Sink, Sleeper, WakeupInitiator,
    WakeupTarget,
};
pub use driver::{DriverCore, DriverError, DriverEvent, DriverMode, LoopbackRadio, RadioDriver};
pub use unicast::{
    RecvVerdict, SendHandle, Unicast, UnicastMessage, UnicastStats, DEFAULT_MTU, HEADER_FORMAT,
    HEADER_LEN,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StackError {
    #[error("payload of {len} B exceeds the {mtu} B MTU")]
    PayloadTooLarge { len: usize, mtu: usize },
    #[error("radio unavailable: {0}")]
    RadioUnavailable(DriverError),
    #[error("invalid application config: {0}")]
    ConfigInvalid(String),
}
