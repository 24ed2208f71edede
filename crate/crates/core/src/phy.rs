//! LoRa physical-layer arithmetic: time on air, reception thresholds and
//! transmit energy for one configured transceiver.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Scalar;

/// Bandwidths the transceiver model accepts, in Hz.
pub const BANDWIDTHS_HZ: [u32; 3] = [125_000, 250_000, 500_000];

pub const MIN_TX_POWER_DBM: i8 = -4;
pub const MAX_TX_POWER_DBM: i8 = 20;

/// Sensitivity table shipped with the crate.
pub const DEFAULT_SENSITIVITY_TOML: &str = include_str!("../data/sensitivity.toml");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhyError {
    #[error("spreading factor {0} outside 6..=12")]
    SpreadingFactor(u8),
    #[error("bandwidth {0} Hz is not one of 125/250/500 kHz")]
    Bandwidth(u32),
    #[error("coding rate 4/{0} outside 4/5..=4/8")]
    CodingRate(u8),
    #[error("tx power {0} dBm outside -4..=+20 dBm")]
    TxPower(i8),
    #[error("no sensitivity entry for SF{sf} at {bandwidth_hz} Hz")]
    MissingTableEntry { sf: u8, bandwidth_hz: u32 },
    #[error("power draw must be non-negative and finite")]
    PowerDraw,
    #[error("sensitivity table: {0}")]
    Table(String),
}

/// LoRa PHY parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioConfig {
    pub carrier_frequency_hz: u32,
    pub spreading_factor: u8,
    pub bandwidth_hz: u32,
    /// Denominator of the coding rate: 5 means 4/5, 8 means 4/8.
    pub coding_rate: u8,
    pub tx_power_dbm: i8,
    pub preamble_symbols: u16,
    pub explicit_header: bool,
    pub crc_on: bool,
    pub low_data_rate_optimize: bool,
}

impl Default for RadioConfig {
    /// SF12, 500 kHz, CR 4/6 at +14 dBm in the 868 MHz band, with the
    /// transceiver's default framing (8-symbol preamble, explicit header,
    /// CRC on, LDRO off).
    fn default() -> Self {
        RadioConfig {
            carrier_frequency_hz: 868_100_000,
            spreading_factor: 12,
            bandwidth_hz: 500_000,
            coding_rate: 6,
            tx_power_dbm: 14,
            preamble_symbols: 8,
            explicit_header: true,
            crc_on: true,
            low_data_rate_optimize: false,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<(), PhyError> {
        if !(6..=12).contains(&self.spreading_factor) {
            return Err(PhyError::SpreadingFactor(self.spreading_factor));
        }
        if !BANDWIDTHS_HZ.contains(&self.bandwidth_hz) {
            return Err(PhyError::Bandwidth(self.bandwidth_hz));
        }
        if !(5..=8).contains(&self.coding_rate) {
            return Err(PhyError::CodingRate(self.coding_rate));
        }
        if !(MIN_TX_POWER_DBM..=MAX_TX_POWER_DBM).contains(&self.tx_power_dbm) {
            return Err(PhyError::TxPower(self.tx_power_dbm));
        }
        Ok(())
    }

    /// Symbol period `2^SF / BW`. Exact in nanoseconds for every accepted
    /// bandwidth.
    pub fn symbol_duration(&self) -> Result<Duration, PhyError> {
        self.validate()?;
        Ok(Duration::from_nanos(self.symbol_nanos()))
    }

    fn symbol_nanos(&self) -> u64 {
        (1u64 << self.spreading_factor) * (1_000_000_000 / u64::from(self.bandwidth_hz))
    }

    /// Number of symbols after the preamble: 8 header-carrying symbols plus
    /// whole coding blocks for the remaining payload bits.
    pub fn payload_symbols(&self, payload_len: usize) -> Result<u64, PhyError> {
        self.validate()?;
        let sf = i64::from(self.spreading_factor);
        let de = i64::from(self.low_data_rate_optimize);
        let implicit = i64::from(!self.explicit_header);
        let crc = i64::from(self.crc_on);
        let bits = 8 * payload_len as i64 - 4 * sf + 28 + 16 * crc - 20 * implicit;
        let per_block = 4 * (sf - 2 * de);
        let blocks = if bits > 0 {
            (bits + per_block - 1) / per_block
        } else {
            0
        };
        Ok(8 + (blocks * i64::from(self.coding_rate)) as u64)
    }
}

/// Airtime of one frame: `(preamble + 4.25) * T_sym + payload_symbols * T_sym`.
pub fn time_on_air(cfg: &RadioConfig, payload_len: usize) -> Result<Duration, PhyError> {
    let payload = cfg.payload_symbols(payload_len)?;
    let sym = cfg.symbol_nanos();
    // T_sym is a multiple of 4 ns for every legal (SF, BW), so the 4.25
    // symbol sync tail stays integral.
    let preamble = sym * (4 * u64::from(cfg.preamble_symbols) + 17) / 4;
    Ok(Duration::from_nanos(preamble + payload * sym))
}

/// Energy spent transmitting one frame at a constant draw.
pub fn tx_energy<S: Scalar>(
    cfg: &RadioConfig,
    payload_len: usize,
    tx_power_draw_w: S,
) -> Result<S, PhyError> {
    if !tx_power_draw_w.is_finite() || tx_power_draw_w < S::zero() {
        return Err(PhyError::PowerDraw);
    }
    let toa = time_on_air(cfg, payload_len)?;
    Ok(tx_power_draw_w * S::seconds(toa))
}

/// Why a frame was not demodulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    BelowSensitivity,
    SnrFloor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceptionDecision<S> {
    pub accepted: bool,
    /// `rssi - sensitivity`; negative means below sensitivity.
    pub rssi_margin_db: S,
    /// `snr - snr_floor`; negative means below the demodulation floor.
    pub snr_margin_db: S,
}

impl<S: Scalar> ReceptionDecision<S> {
    /// The reason for rejection, RSSI taking precedence over SNR.
    pub fn rejection(&self) -> Option<Rejection> {
        if self.accepted {
            None
        } else if self.rssi_margin_db < S::zero() {
            Some(Rejection::BelowSensitivity)
        } else {
            Some(Rejection::SnrFloor)
        }
    }
}

/// Per-(SF, BW) sensitivity and per-SF SNR demodulation floors.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTable<S> {
    sensitivity_dbm: BTreeMap<(u8, u32), S>,
    snr_floor_db: BTreeMap<u8, S>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    version: u32,
    sensitivity: Vec<SensitivityRow>,
    snr_floor: Vec<SnrRow>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SensitivityRow {
    spreading_factor: u8,
    bandwidth_hz: u32,
    dbm: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SnrRow {
    spreading_factor: u8,
    db: f64,
}

impl<S: Scalar> SensitivityTable<S> {
    pub const FORMAT_VERSION: u32 = 1;

    /// The shipped datasheet-derived table.
    pub fn datasheet() -> Self {
        Self::from_toml_str(DEFAULT_SENSITIVITY_TOML).expect("bundled sensitivity table is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PhyError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| PhyError::Table(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, PhyError> {
        let file: TableFile = toml::from_str(text).map_err(|e| PhyError::Table(e.to_string()))?;
        if file.version != Self::FORMAT_VERSION {
            return Err(PhyError::Table(format!(
                "unsupported version {} (expected {})",
                file.version,
                Self::FORMAT_VERSION
            )));
        }
        let mut table = SensitivityTable {
            sensitivity_dbm: BTreeMap::new(),
            snr_floor_db: BTreeMap::new(),
        };
        for row in file.sensitivity {
            if !row.dbm.is_finite() {
                return Err(PhyError::Table("non-finite sensitivity".into()));
            }
            let key = (row.spreading_factor, row.bandwidth_hz);
            if table.sensitivity_dbm.insert(key, S::lit(row.dbm)).is_some() {
                return Err(PhyError::Table(format!(
                    "duplicate sensitivity entry SF{} {} Hz",
                    key.0, key.1
                )));
            }
        }
        for row in file.snr_floor {
            if !row.db.is_finite() {
                return Err(PhyError::Table("non-finite snr floor".into()));
            }
            if table
                .snr_floor_db
                .insert(row.spreading_factor, S::lit(row.db))
                .is_some()
            {
                return Err(PhyError::Table(format!(
                    "duplicate snr floor for SF{}",
                    row.spreading_factor
                )));
            }
        }
        table.check_monotone()?;
        Ok(table)
    }

    fn check_monotone(&self) -> Result<(), PhyError> {
        let mut by_sf: BTreeMap<u8, Vec<(u32, S)>> = BTreeMap::new();
        for (&(sf, bw), &dbm) in &self.sensitivity_dbm {
            by_sf.entry(sf).or_default().push((bw, dbm));
        }
        for (sf, rows) in by_sf {
            // rows are sorted by bandwidth via the BTreeMap key order
            for pair in rows.windows(2) {
                if pair[1].1 <= pair[0].1 {
                    return Err(PhyError::Table(format!(
                        "SF{sf}: sensitivity must worsen as bandwidth grows"
                    )));
                }
            }
        }
        let floors: Vec<S> = self.snr_floor_db.values().copied().collect();
        if floors.windows(2).any(|p| p[1] >= p[0]) {
            return Err(PhyError::Table(
                "snr floor must drop as spreading factor grows".into(),
            ));
        }
        Ok(())
    }

    pub fn sensitivity(&self, sf: u8, bandwidth_hz: u32) -> Result<S, PhyError> {
        self.sensitivity_dbm
            .get(&(sf, bandwidth_hz))
            .copied()
            .ok_or(PhyError::MissingTableEntry { sf, bandwidth_hz })
    }

    pub fn snr_floor(&self, sf: u8) -> Result<S, PhyError> {
        self.snr_floor_db.get(&sf).copied().ok_or(PhyError::MissingTableEntry {
            sf,
            bandwidth_hz: 0,
        })
    }

    /// Accepts iff `rssi >= sensitivity` and `snr >= floor`; both
    /// boundaries are inclusive.
    pub fn decide(
        &self,
        sf: u8,
        bandwidth_hz: u32,
        rssi_dbm: S,
        snr_db: S,
    ) -> Result<ReceptionDecision<S>, PhyError> {
        let rssi_margin_db = rssi_dbm - self.sensitivity(sf, bandwidth_hz)?;
        let snr_margin_db = snr_db - self.snr_floor(sf)?;
        Ok(ReceptionDecision {
            accepted: rssi_margin_db >= S::zero() && snr_margin_db >= S::zero(),
            rssi_margin_db,
            snr_margin_db,
        })
    }

    pub fn iter_sensitivity(&self) -> impl Iterator<Item = ((u8, u32), S)> + '_ {
        self.sensitivity_dbm.iter().map(|(k, v)| (*k, *v))
    }
}

pub fn reception_margin<S: Scalar>(
    cfg: &RadioConfig,
    rssi_dbm: S,
    snr_db: S,
    table: &SensitivityTable<S>,
) -> Result<ReceptionDecision<S>, PhyError> {
    table.decide(cfg.spreading_factor, cfg.bandwidth_hz, rssi_dbm, snr_db)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Datasheet airtime formula evaluated in floating point, kept separate
    /// from the integer implementation above.
    fn oracle_symbols(sf: u8, cr: u8, pl: usize, crc: bool, explicit: bool, ldro: bool) -> f64 {
        let sf = sf as f64;
        let de = if ldro { 1.0 } else { 0.0 };
        let ih = if explicit { 0.0 } else { 1.0 };
        let crc = if crc { 1.0 } else { 0.0 };
        let num = 8.0 * pl as f64 - 4.0 * sf + 28.0 + 16.0 * crc - 20.0 * ih;
        let blocks = (num / (4.0 * (sf - 2.0 * de))).ceil();
        8.0 + (blocks * cr as f64).max(0.0)
    }

    fn cfg() -> RadioConfig {
        RadioConfig::default()
    }

    #[test]
    fn reference_frame_airtime() {
        // 16 B at SF12/500k/CR4-6: 26 payload symbols of 8.192 ms after a
        // 12.25-symbol preamble.
        let c = cfg();
        assert_eq!(oracle_symbols(12, 6, 16, true, true, false), 26.0);
        assert_eq!(c.payload_symbols(16).unwrap(), 26);
        assert_eq!(c.symbol_duration().unwrap(), Duration::from_micros(8192));
        assert_eq!(time_on_air(&c, 16).unwrap(), Duration::from_micros(313_344));
    }

    #[test]
    fn empty_payload_airtime() {
        let c = cfg();
        assert_eq!(oracle_symbols(12, 6, 0, true, true, false), 8.0);
        assert_eq!(time_on_air(&c, 0).unwrap(), Duration::from_micros(165_888));
    }

    #[test]
    fn airtime_grows_with_payload() {
        let c = cfg();
        assert!(time_on_air(&c, 32).unwrap() > time_on_air(&c, 16).unwrap());
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = cfg();
        c.spreading_factor = 13;
        assert_eq!(time_on_air(&c, 1), Err(PhyError::SpreadingFactor(13)));
        let mut c = cfg();
        c.bandwidth_hz = 62_500;
        assert_eq!(time_on_air(&c, 1), Err(PhyError::Bandwidth(62_500)));
        let mut c = cfg();
        c.coding_rate = 4;
        assert_eq!(c.validate(), Err(PhyError::CodingRate(4)));
        let mut c = cfg();
        c.tx_power_dbm = 21;
        assert_eq!(c.validate(), Err(PhyError::TxPower(21)));
    }

    #[test]
    fn margins_at_the_sf12_floor() {
        let t = SensitivityTable::<f64>::datasheet();
        let c = cfg();
        let ok = reception_margin(&c, -120.0, -9.0, &t).unwrap();
        assert!(ok.accepted);
        let low = reception_margin(&c, -141.0, 0.0, &t).unwrap();
        assert!(!low.accepted);
        assert_eq!(low.rssi_margin_db, -1.0);
        assert_eq!(low.rejection(), Some(Rejection::BelowSensitivity));
        let edge = reception_margin(&c, -140.0, -20.0, &t).unwrap();
        assert!(edge.accepted);
        assert_eq!(edge.rssi_margin_db, 0.0);
        assert_eq!(edge.snr_margin_db, 0.0);
        let noisy = reception_margin(&c, -130.0, -20.5, &t).unwrap();
        assert_eq!(noisy.rejection(), Some(Rejection::SnrFloor));
    }

    #[test]
    fn margins_work_in_f32() {
        let t = SensitivityTable::<f32>::datasheet();
        let d = reception_margin(&cfg(), -141.0f32, 0.0, &t).unwrap();
        assert_eq!(d.rssi_margin_db, -1.0f32);
    }

    #[test]
    fn missing_entry() {
        let t = SensitivityTable::<f64>::from_toml_str(
            "version = 1\n[[sensitivity]]\nspreading_factor = 7\nbandwidth_hz = 125000\ndbm = -123.0\n[[snr_floor]]\nspreading_factor = 7\ndb = -7.5\n",
        )
        .unwrap();
        assert_eq!(
            reception_margin(&cfg(), -100.0, 0.0, &t),
            Err(PhyError::MissingTableEntry { sf: 12, bandwidth_hz: 500_000 })
        );
    }

    #[test]
    fn table_rejects_non_monotone_and_unknown_keys() {
        let bad = "version = 1\n[[sensitivity]]\nspreading_factor = 7\nbandwidth_hz = 125000\ndbm = -110.0\n[[sensitivity]]\nspreading_factor = 7\nbandwidth_hz = 250000\ndbm = -120.0\nsnr_floor = []\n";
        assert!(matches!(
            SensitivityTable::<f64>::from_toml_str(bad),
            Err(PhyError::Table(_))
        ));
        let typo = "version = 1\nsensitivity = []\nsnr_floor = []\nsnr_flor = []\n";
        assert!(SensitivityTable::<f64>::from_toml_str(typo).is_err());
        let v2 = "version = 2\nsensitivity = []\nsnr_floor = []\n";
        assert!(SensitivityTable::<f64>::from_toml_str(v2).is_err());
    }

    #[test]
    fn bundled_table_invariants() {
        let t = SensitivityTable::<f64>::datasheet();
        for sf in 6..=12u8 {
            let s: Vec<f64> = BANDWIDTHS_HZ
                .iter()
                .map(|&bw| t.sensitivity(sf, bw).unwrap())
                .collect();
            assert!(s[0] < s[1] && s[1] < s[2], "SF{sf}: {s:?}");
        }
        for sf in 6..12u8 {
            assert!(t.snr_floor(sf + 1).unwrap() < t.snr_floor(sf).unwrap());
        }
        assert_eq!(t.snr_floor(12).unwrap(), -20.0);
        assert_eq!(t.sensitivity(12, 500_000).unwrap(), -140.0);
    }

    #[test]
    fn tx_energy_products() {
        let e = tx_energy(&cfg(), 16, 0.240f64).unwrap();
        assert!((e - 0.075_202_56).abs() < 1e-12);
        assert_eq!(tx_energy(&cfg(), 0, 0.0f64).unwrap(), 0.0);
        let double = tx_energy(&cfg(), 16, 0.480f64).unwrap();
        assert!((double - 2.0 * e).abs() < 1e-15);
        assert_eq!(tx_energy(&cfg(), 16, -1.0f64), Err(PhyError::PowerDraw));
    }
}
