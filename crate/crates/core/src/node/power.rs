use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::num::Scalar;

pub const DEFAULT_SUPPLY_VOLTAGE_V: f64 = 3.0;

/// Mote-level operating modes the ledger charges time to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    /// MCU in LPM4, radio off, wake-up receiver listening.
    Sleep,
    /// MCU asleep while the wake-up receiver decodes an address.
    WurxDecode,
    /// MCU leaving LPM4.
    McuWake,
    /// MCU running, main radio off.
    McuActive,
    /// MCU running, main radio starting up or idle in standby.
    RadioStandby,
    LoraRx,
    LoraTx,
    /// Main radio keying an OOK wake-up frame; power scales with the
    /// fraction of 1-bits.
    OokTx,
    /// Battery exhausted; the node no longer participates.
    Depleted,
}

impl PowerMode {
    pub const ALL: [PowerMode; 9] = [
        PowerMode::Sleep,
        PowerMode::WurxDecode,
        PowerMode::McuWake,
        PowerMode::McuActive,
        PowerMode::RadioStandby,
        PowerMode::LoraRx,
        PowerMode::LoraTx,
        PowerMode::OokTx,
        PowerMode::Depleted,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PowerMode::Sleep => "sleep",
            PowerMode::WurxDecode => "wurx_decode",
            PowerMode::McuWake => "mcu_wake",
            PowerMode::McuActive => "mcu_active",
            PowerMode::RadioStandby => "radio_standby",
            PowerMode::LoraRx => "lora_rx",
            PowerMode::LoraTx => "lora_tx",
            PowerMode::OokTx => "ook_tx",
            PowerMode::Depleted => "depleted",
        }
    }
}

/// Whole-mote power per mode, in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerTable<S> {
    /// Sleep with the wake-up receiver listening: 1.8 uW for the receiver
    /// plus 0.03 uW attributed to the MCU in LPM4 and leakage.
    pub sleep_w: S,
    pub wurx_decode_w: S,
    /// Also charged while the MCU wakes from LPM4.
    pub mcu_active_w: S,
    pub radio_standby_w: S,
    pub lora_rx_w: S,
    /// At +14 dBm.
    pub lora_tx_w: S,
}

impl<S: Scalar> Default for PowerTable<S> {
    fn default() -> Self {
        PowerTable {
            sleep_w: S::lit(1.83e-6),
            wurx_decode_w: S::lit(284e-6),
            // ~100 uA/MHz at 8 MHz from a 3.0 V supply
            mcu_active_w: S::lit(2.4e-3),
            // MCU active plus 1.6 mA radio standby at 3.0 V
            radio_standby_w: S::lit(7.2e-3),
            lora_rx_w: S::lit(0.050),
            lora_tx_w: S::lit(0.240),
        }
    }
}

impl<S: Scalar> PowerTable<S> {
    pub fn validate(&self) -> Result<(), &'static str> {
        let all = [
            self.sleep_w,
            self.wurx_decode_w,
            self.mcu_active_w,
            self.radio_standby_w,
            self.lora_rx_w,
            self.lora_tx_w,
        ];
        if all.iter().any(|p| !p.is_finite() || *p < S::zero()) {
            return Err("power draws must be finite and non-negative");
        }
        if self.sleep_w >= self.mcu_active_w {
            return Err("sleep power must be below MCU active power");
        }
        if self.sleep_w >= self.wurx_decode_w {
            return Err("sleep power must be below wake-up decode power");
        }
        let idle = self.sleep_w.max(self.radio_standby_w);
        if self.lora_rx_w <= idle || self.lora_tx_w <= idle {
            return Err("rx and tx power must exceed sleep and standby power");
        }
        Ok(())
    }

    /// Instantaneous power in `mode`; `ook_duty` scales the tx draw for
    /// wake-up frames.
    pub fn power_of(&self, mode: PowerMode, ook_duty: S) -> S {
        match mode {
            PowerMode::Sleep => self.sleep_w,
            PowerMode::WurxDecode => self.wurx_decode_w,
            PowerMode::McuWake | PowerMode::McuActive => self.mcu_active_w,
            PowerMode::RadioStandby => self.radio_standby_w,
            PowerMode::LoraRx => self.lora_rx_w,
            PowerMode::LoraTx => self.lora_tx_w,
            PowerMode::OokTx => self.lora_tx_w * ook_duty,
            PowerMode::Depleted => S::zero(),
        }
    }
}

/// Microcontroller parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McuParams<S> {
    pub supply_voltage_v: S,
    pub sleep_current_a: S,
    pub wakeup_latency_ns: u64,
}

impl<S: Scalar> Default for McuParams<S> {
    fn default() -> Self {
        McuParams {
            supply_voltage_v: S::lit(DEFAULT_SUPPLY_VOLTAGE_V),
            sleep_current_a: S::lit(0.3e-6),
            wakeup_latency_ns: 7_000,
        }
    }
}

impl<S: Scalar> McuParams<S> {
    /// LPM4 draw of the MCU alone. Informational: the ledger charges the
    /// mote-level sleep figure from [`PowerTable`].
    pub fn sleep_power_w(&self) -> S {
        self.supply_voltage_v * self.sleep_current_a
    }

    pub fn wakeup_latency(&self) -> Duration {
        Duration::from_nanos(self.wakeup_latency_ns)
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if self.wakeup_latency_ns == 0 {
            return Err("wake-up latency must be positive");
        }
        let powered = self.supply_voltage_v > S::zero();
        let drawing = self.sleep_current_a >= S::zero();
        if !powered || !drawing {
            return Err("supply voltage and sleep current must be positive");
        }
        Ok(())
    }
}
