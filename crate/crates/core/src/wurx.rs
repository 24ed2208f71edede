//! OOK wake-up receiver and the matching wake-up transmitter model.
//!
//! A wake-up frame is an on-off keyed preamble followed by an address,
//! both sent MSB first. The receiver decodes every frame that arrives at or
//! above its sensitivity, burning decode power for the whole frame, and
//! raises its interrupt line only when the decoded address matches its
//! own. There is no bit-error model: decoding is all-or-nothing at the
//! sensitivity threshold.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Scalar;
use crate::phy::{PhyError, RadioConfig};

pub const MAX_BIT_RATE_BPS: u32 = 1_000;
pub const DEFAULT_SENSITIVITY_DBM: f64 = -50.0;
pub const DEFAULT_LISTEN_POWER_W: f64 = 1.8e-6;
pub const DEFAULT_DECODE_POWER_W: f64 = 284e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WurxError {
    #[error("wake-up bit rate must be non-zero")]
    ZeroBitRate,
    #[error("wake-up bit rate {0} bps exceeds the receiver's 1 kbps")]
    BitRateTooHigh(u32),
    #[error("frame format: {0}")]
    Format(&'static str),
    #[error("wake-up receiver busy decoding; frame missed")]
    Busy,
    #[error(transparent)]
    Phy(#[from] PhyError),
}

/// Wire format of a wake-up frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WakeUpFrame {
    pub preamble_bits: u8,
    /// Preamble bit values, right-aligned; only the low `preamble_bits`
    /// bits are sent.
    pub preamble_pattern: u32,
    pub address: u8,
    pub address_bits: u8,
    pub bit_rate_bps: u32,
    pub carrier_frequency_hz: u32,
}

impl Default for WakeUpFrame {
    fn default() -> Self {
        WakeUpFrame {
            preamble_bits: 8,
            preamble_pattern: 0xFF,
            address: 0,
            address_bits: 8,
            bit_rate_bps: MAX_BIT_RATE_BPS,
            carrier_frequency_hz: 868_100_000,
        }
    }
}

impl WakeUpFrame {
    pub fn addressed(address: u8) -> Self {
        WakeUpFrame {
            address,
            ..WakeUpFrame::default()
        }
    }

    pub fn validate(&self) -> Result<(), WurxError> {
        if self.bit_rate_bps == 0 {
            return Err(WurxError::ZeroBitRate);
        }
        if self.bit_rate_bps > MAX_BIT_RATE_BPS {
            return Err(WurxError::BitRateTooHigh(self.bit_rate_bps));
        }
        if self.preamble_bits > 32 {
            return Err(WurxError::Format("preamble longer than 32 bits"));
        }
        if self.address_bits > 8 {
            return Err(WurxError::Format("address longer than 8 bits"));
        }
        Ok(())
    }

    pub fn bit_len(&self) -> u32 {
        u32::from(self.preamble_bits) + u32::from(self.address_bits)
    }

    /// On-air bits, preamble then address, MSB first.
    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        let pre = (0..self.preamble_bits)
            .rev()
            .map(|i| (self.preamble_pattern >> i) & 1 == 1);
        let addr = (0..self.address_bits)
            .rev()
            .map(|i| (self.address >> i) & 1 == 1);
        pre.chain(addr)
    }

    pub fn ones(&self) -> u32 {
        self.bits().filter(|&b| b).count() as u32
    }

    /// Address as seen by a receiver that only decodes `address_bits`.
    fn masked_address(&self) -> u8 {
        match self.address_bits {
            8 => self.address,
            n => self.address & ((1u8 << n) - 1),
        }
    }
}

/// `(preamble_bits + address_bits) / bit_rate`, rounded to the nearest
/// nanosecond.
pub fn wub_airtime(frame: &WakeUpFrame) -> Result<Duration, WurxError> {
    frame.validate()?;
    let rate = u64::from(frame.bit_rate_bps);
    let ns = (u64::from(frame.bit_len()) * 1_000_000_000 + rate / 2) / rate;
    Ok(Duration::from_nanos(ns))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WurxMode {
    Listening,
    Decoding,
    AssertingInterrupt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WurxConfig<S> {
    pub address: u8,
    pub sensitivity_dbm: S,
    pub listen_power_w: S,
    pub decode_power_w: S,
}

impl<S: Scalar> Default for WurxConfig<S> {
    fn default() -> Self {
        WurxConfig {
            address: 0,
            sensitivity_dbm: S::lit(DEFAULT_SENSITIVITY_DBM),
            listen_power_w: S::lit(DEFAULT_LISTEN_POWER_W),
            decode_power_w: S::lit(DEFAULT_DECODE_POWER_W),
        }
    }
}

impl<S: Scalar> WurxConfig<S> {
    pub fn with_address(address: u8) -> Self {
        WurxConfig {
            address,
            ..WurxConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), WurxError> {
        if !self.sensitivity_dbm.is_finite() {
            return Err(WurxError::Format("sensitivity must be finite"));
        }
        if !(self.listen_power_w >= S::zero() && self.listen_power_w < self.decode_power_w)
            || !self.decode_power_w.is_finite()
        {
            return Err(WurxError::Format(
                "listening power must be below decoding power",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WurxState<S> {
    pub config: WurxConfig<S>,
    mode: WurxMode,
    pending_match: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WurxOutcome<S> {
    /// Whether the frame was strong enough to be decoded at all.
    pub decoded: bool,
    pub interrupt: bool,
    pub decode_time: Duration,
    pub decode_energy_j: S,
}

impl<S: Scalar> WurxState<S> {
    pub fn new(config: WurxConfig<S>) -> Self {
        WurxState {
            config,
            mode: WurxMode::Listening,
            pending_match: false,
        }
    }

    pub fn mode(&self) -> WurxMode {
        self.mode
    }

    pub fn power_w(&self) -> S {
        match self.mode {
            WurxMode::Listening => self.config.listen_power_w,
            WurxMode::Decoding | WurxMode::AssertingInterrupt => self.config.decode_power_w,
        }
    }

    /// Starts decoding a frame whose leading edge arrives now. Frames below
    /// sensitivity leave the receiver listening.
    pub fn begin(&mut self, frame: &WakeUpFrame, rssi_dbm: S) -> Result<WurxOutcome<S>, WurxError> {
        let outcome = receive_wub(self, frame, rssi_dbm)?;
        if outcome.decoded {
            self.mode = WurxMode::Decoding;
            self.pending_match = outcome.interrupt;
        }
        Ok(outcome)
    }

    /// Ends the current decode. Returns whether the interrupt line is now
    /// asserted; a mismatched address returns straight to listening.
    pub fn finish(&mut self) -> bool {
        if self.mode != WurxMode::Decoding {
            return false;
        }
        if std::mem::take(&mut self.pending_match) {
            self.mode = WurxMode::AssertingInterrupt;
            true
        } else {
            self.mode = WurxMode::Listening;
            false
        }
    }

    /// The host has taken the interrupt.
    pub fn acknowledge(&mut self) {
        if self.mode == WurxMode::AssertingInterrupt {
            self.mode = WurxMode::Listening;
        }
    }
}

/// Outcome of one wake-up frame arriving at a listening receiver, without
/// mutating it.
pub fn receive_wub<S: Scalar>(
    state: &WurxState<S>,
    frame: &WakeUpFrame,
    rssi_dbm: S,
) -> Result<WurxOutcome<S>, WurxError> {
    if state.mode != WurxMode::Listening {
        return Err(WurxError::Busy);
    }
    let airtime = wub_airtime(frame)?;
    if rssi_dbm < state.config.sensitivity_dbm {
        return Ok(WurxOutcome {
            decoded: false,
            interrupt: false,
            decode_time: Duration::ZERO,
            decode_energy_j: S::zero(),
        });
    }
    Ok(WurxOutcome {
        decoded: true,
        interrupt: frame.masked_address() == state.config.address,
        decode_time: airtime,
        decode_energy_j: state.config.decode_power_w * S::seconds(airtime),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WubTransmission<S> {
    pub frame: WakeUpFrame,
    pub airtime: Duration,
    /// Fraction of carrier-on bits; the transmitter is off for 0-bits.
    pub duty: S,
    pub energy_j: S,
}

/// Builds the wake-up frame for `target_address` on the main radio's
/// carrier and prices it: `tx_power_draw * airtime * duty`.
pub fn send_wub<S: Scalar>(
    cfg: &RadioConfig,
    format: &WakeUpFrame,
    target_address: u8,
    tx_power_draw_w: S,
) -> Result<WubTransmission<S>, WurxError> {
    cfg.validate()?;
    if !tx_power_draw_w.is_finite() || tx_power_draw_w < S::zero() {
        return Err(PhyError::PowerDraw.into());
    }
    let frame = WakeUpFrame {
        address: target_address,
        carrier_frequency_hz: cfg.carrier_frequency_hz,
        ..*format
    };
    let airtime = wub_airtime(&frame)?;
    let duty = match frame.bit_len() {
        0 => S::zero(),
        n => S::lit(f64::from(frame.ones())) / S::lit(f64::from(n)),
    };
    Ok(WubTransmission {
        frame,
        airtime,
        duty,
        energy_j: tx_power_draw_w * S::seconds(airtime) * duty,
    })
}
