//! Shared-medium propagation: log-distance path loss with optional
//! lognormal shadowing, thermal noise floor, and resolution of
//! overlapping transmissions at each receiver.
//!
//! Transmissions on different spreading factors are treated as orthogonal.
//! Capture is judged against the strongest single interferer rather than
//! the summed interference power, which is adequate for the handful of
//! nodes these scenarios use.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Scalar;
use crate::phy::{PhyError, Rejection, SensitivityTable};
use crate::time::SimTime;
use crate::NodeAddress;

/// Thermal noise density at room temperature, dBm/Hz.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// Exponent that puts a +14 dBm transmitter at about -120 dBm after 600 m
/// with a 31.2 dB reference loss: `(14 + 120 - 31.2) / (10 log10 600)`
/// evaluates to 3.7003; rounded down so the 600 m point sits just above
/// -120 dBm (-119.99).
pub const CALIBRATED_PATH_LOSS_EXPONENT: f64 = 3.70;
pub const DEFAULT_REFERENCE_LOSS_DB: f64 = 31.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("transmitter and receiver share a position")]
    ZeroDistance,
    #[error("non-finite coordinate")]
    NonFinitePosition,
    #[error("path loss exponent {0} outside 1.5..=6.0")]
    PathLossExponent(f64),
    #[error("channel parameter `{0}` must be finite and non-negative")]
    Parameter(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Position<S> {
    pub x: S,
    pub y: S,
    pub z: S,
}

impl<S: Scalar> Position<S> {
    pub fn new(x: S, y: S, z: S) -> Self {
        Position { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &Position<S>) -> S {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams<S> {
    pub path_loss_exponent: S,
    pub reference_loss_db: S,
    /// Standard deviation of the lognormal shadowing term; 0 disables it.
    pub shadowing_sigma_db: S,
    pub noise_figure_db: S,
    /// Margin the strongest frame needs over the strongest overlapping
    /// co-SF frame to be captured.
    pub capture_threshold_db: S,
    /// Seed of the shadowing stream. Filled from the scenario seed.
    #[serde(skip)]
    pub rng_seed: u64,
}

impl<S: Scalar> Default for ChannelParams<S> {
    fn default() -> Self {
        ChannelParams {
            path_loss_exponent: S::lit(CALIBRATED_PATH_LOSS_EXPONENT),
            reference_loss_db: S::lit(DEFAULT_REFERENCE_LOSS_DB),
            shadowing_sigma_db: S::zero(),
            noise_figure_db: S::lit(6.0),
            capture_threshold_db: S::lit(6.0),
            rng_seed: 0,
        }
    }
}

impl<S: Scalar> ChannelParams<S> {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let n = self.path_loss_exponent;
        if !(n >= S::lit(1.5) && n <= S::lit(6.0)) {
            return Err(ChannelError::PathLossExponent(n.to_f64_lossy()));
        }
        let non_negative = |v: S| v.is_finite() && v >= S::zero();
        if !non_negative(self.shadowing_sigma_db) {
            return Err(ChannelError::Parameter("shadowing_sigma_db"));
        }
        if !non_negative(self.capture_threshold_db) {
            return Err(ChannelError::Parameter("capture_threshold_db"));
        }
        if !self.reference_loss_db.is_finite() {
            return Err(ChannelError::Parameter("reference_loss_db"));
        }
        if !self.noise_figure_db.is_finite() {
            return Err(ChannelError::Parameter("noise_figure_db"));
        }
        Ok(())
    }

    /// Deterministic stream of standard-normal shadowing draws.
    pub fn shadowing_stream(&self) -> ShadowingStream {
        ShadowingStream {
            rng: ChaCha8Rng::seed_from_u64(self.rng_seed),
        }
    }

    pub fn path_loss_db(&self, distance_m: S) -> S {
        self.reference_loss_db + S::lit(10.0) * self.path_loss_exponent * distance_m.log10()
    }
}

pub struct ShadowingStream {
    rng: ChaCha8Rng,
}

impl ShadowingStream {
    /// Next `N(0, 1)` sample; scaled by sigma inside [`rssi_at`].
    pub fn next_draw<S: Scalar>(&mut self) -> S {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        S::lit(z)
    }
}

/// Received power: `tx - (PL(1 m) + 10 n log10(d)) - sigma * draw`.
pub fn rssi_at<S: Scalar>(
    tx_power_dbm: S,
    tx_pos: &Position<S>,
    rx_pos: &Position<S>,
    params: &ChannelParams<S>,
    standard_normal_draw: S,
) -> Result<S, ChannelError> {
    if !tx_pos.is_finite() || !rx_pos.is_finite() {
        return Err(ChannelError::NonFinitePosition);
    }
    let d = tx_pos.distance(rx_pos);
    if d <= S::zero() {
        return Err(ChannelError::ZeroDistance);
    }
    Ok(tx_power_dbm - params.path_loss_db(d) - params.shadowing_sigma_db * standard_normal_draw)
}

/// `-174 dBm/Hz + 10 log10(BW) + NF`.
pub fn noise_floor_dbm<S: Scalar>(bandwidth_hz: u32, noise_figure_db: S) -> S {
    S::lit(THERMAL_NOISE_DBM_PER_HZ)
        + S::lit(10.0) * S::lit(f64::from(bandwidth_hz)).log10()
        + noise_figure_db
}

pub fn snr_of<S: Scalar>(rssi_dbm: S, bandwidth_hz: u32, noise_figure_db: S) -> S {
    rssi_dbm - noise_floor_dbm(bandwidth_hz, noise_figure_db)
}

/// Received strength of one airing at one receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link<S> {
    pub receiver: NodeAddress,
    pub rssi_dbm: S,
    pub snr_db: S,
}

/// One LoRa frame occupying the medium over `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Airing<S> {
    pub id: u64,
    pub start: SimTime,
    pub end: SimTime,
    pub carrier_frequency_hz: u32,
    pub spreading_factor: u8,
    pub bandwidth_hz: u32,
    pub links: Vec<Link<S>>,
}

impl<S> Airing<S> {
    pub fn overlaps(&self, other: &Airing<S>) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Same carrier and spreading factor: the only case that can collide.
    pub fn shares_channel(&self, other: &Airing<S>) -> bool {
        self.carrier_frequency_hz == other.carrier_frequency_hz
            && self.spreading_factor == other.spreading_factor
    }

    pub fn link_to(&self, receiver: NodeAddress) -> Option<&Link<S>> {
        self.links.iter().find(|l| l.receiver == receiver)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RxCause {
    Ok,
    Collision,
    BelowSensitivity,
    SnrFloor,
}

impl RxCause {
    pub fn label(self) -> &'static str {
        match self {
            RxCause::Ok => "ok",
            RxCause::Collision => "collision",
            RxCause::BelowSensitivity => "below_sensitivity",
            RxCause::SnrFloor => "snr_floor",
        }
    }
}

impl From<Rejection> for RxCause {
    fn from(r: Rejection) -> Self {
        match r {
            Rejection::BelowSensitivity => RxCause::BelowSensitivity,
            Rejection::SnrFloor => RxCause::SnrFloor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RxOutcome<S> {
    pub receiver: NodeAddress,
    pub airing: u64,
    pub cause: RxCause,
    pub rssi_dbm: S,
    pub snr_db: S,
}

/// Decides, for every receiver and every airing it hears, whether the
/// frame is demodulated.
///
/// A frame with no time-overlapping co-channel frame at the receiver only
/// has to pass the sensitivity and SNR checks. Otherwise it survives iff
/// its RSSI beats the strongest overlapping co-channel frame by at least
/// `capture_threshold_db`, and then must still pass those checks. Two
/// frames that overlap each other can therefore never both be decoded.
///
/// Outcomes are ordered by receiver address, then by input order.
pub fn resolve_concurrent<S: Scalar>(
    airings: &[Airing<S>],
    table: &SensitivityTable<S>,
    capture_threshold_db: S,
) -> Result<Vec<RxOutcome<S>>, PhyError> {
    let receivers: BTreeSet<NodeAddress> = airings
        .iter()
        .flat_map(|a| a.links.iter().map(|l| l.receiver))
        .collect();
    let mut out = Vec::new();
    for rx in receivers {
        for (i, frame) in airings.iter().enumerate() {
            let Some(link) = frame.link_to(rx) else {
                continue;
            };
            let strongest_interferer = airings
                .iter()
                .enumerate()
                .filter(|&(j, other)| j != i && frame.overlaps(other) && frame.shares_channel(other))
                .filter_map(|(_, other)| other.link_to(rx).map(|l| l.rssi_dbm))
                .fold(None, |acc: Option<S>, r| Some(acc.map_or(r, |a| a.max(r))));
            let captured = match strongest_interferer {
                None => true,
                Some(i_dbm) => link.rssi_dbm - i_dbm >= capture_threshold_db,
            };
            let cause = if captured {
                let d = table.decide(
                    frame.spreading_factor,
                    frame.bandwidth_hz,
                    link.rssi_dbm,
                    link.snr_db,
                )?;
                d.rejection().map_or(RxCause::Ok, RxCause::from)
            } else {
                RxCause::Collision
            };
            out.push(RxOutcome {
                receiver: rx,
                airing: frame.id,
                cause,
                rssi_dbm: link.rssi_dbm,
                snr_db: link.snr_db,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: f64) -> ChannelParams<f64> {
        ChannelParams {
            path_loss_exponent: n,
            ..ChannelParams::default()
        }
    }

    #[test]
    fn calibration_point() {
        // solve 14 - (-120) = 31.2 + 10 n log10(600)
        let n_exact = (14.0 + 120.0 - 31.2) / (10.0 * 600f64.log10());
        assert!((n_exact - 3.7003).abs() < 1e-4);
        let o = Position::new(0.0, 0.0, 0.0);
        let r = rssi_at(14.0, &o, &Position::new(600.0, 0.0, 0.0), &params(3.70), 0.0).unwrap();
        assert!((r - (-120.0)).abs() < 0.05, "{r}");
        assert!(r >= -120.0);
    }

    #[test]
    fn reference_distance_and_zero_distance() {
        let p = params(3.0);
        let o = Position::new(1.0, 2.0, 3.0);
        let r = rssi_at(14.0, &o, &Position::new(2.0, 2.0, 3.0), &p, 0.0).unwrap();
        assert_eq!(r, 14.0 - 31.2);
        assert_eq!(rssi_at(14.0, &o, &o, &p, 0.0), Err(ChannelError::ZeroDistance));
    }

    #[test]
    fn shadowing_is_seeded() {
        let mut p = params(3.0);
        p.shadowing_sigma_db = 4.0;
        p.rng_seed = 7;
        let mut a = p.shadowing_stream();
        let mut b = p.shadowing_stream();
        for _ in 0..32 {
            assert_eq!(a.next_draw::<f64>(), b.next_draw::<f64>());
        }
        let o = Position::new(0.0, 0.0, 0.0);
        let x = Position::new(100.0, 0.0, 0.0);
        let with = rssi_at(14.0, &o, &x, &p, 1.5).unwrap();
        let without = rssi_at(14.0, &o, &x, &params(3.0), 0.0).unwrap();
        assert!((without - with - 6.0).abs() < 1e-12);
    }

    #[test]
    fn snr_arithmetic() {
        let floor = -174.0 + 10.0 * 500_000f64.log10() + 6.0;
        assert!((floor - (-111.0103)).abs() < 1e-3);
        assert!(snr_of(-111.0, 500_000, 6.0f64).abs() < 0.02);
        assert_eq!(snr_of(floor, 500_000, 6.0), 0.0);
        let a = snr_of(-100.0, 500_000, 6.0f64);
        let b = snr_of(-90.0, 500_000, 6.0f64);
        assert!((b - a - 10.0).abs() < 1e-12);
    }

    #[test]
    fn channel_validation() {
        assert!(params(1.4).validate().is_err());
        assert!(params(6.1).validate().is_err());
        assert!(params(3.7).validate().is_ok());
        let mut p = params(3.0);
        p.shadowing_sigma_db = -1.0;
        assert_eq!(p.validate(), Err(ChannelError::Parameter("shadowing_sigma_db")));
    }

    fn airing(id: u64, start: u64, end: u64, rssi: &[(u16, f64)]) -> Airing<f64> {
        Airing {
            id,
            start: SimTime::from_nanos(start),
            end: SimTime::from_nanos(end),
            carrier_frequency_hz: 868_100_000,
            spreading_factor: 12,
            bandwidth_hz: 500_000,
            links: rssi
                .iter()
                .map(|&(r, dbm)| Link {
                    receiver: NodeAddress(r),
                    rssi_dbm: dbm,
                    snr_db: snr_of(dbm, 500_000, 6.0),
                })
                .collect(),
        }
    }

    #[test]
    fn single_frame_ok() {
        let t = SensitivityTable::datasheet();
        let out = resolve_concurrent(&[airing(1, 0, 100, &[(9, -90.0)])], &t, 6.0).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].cause, RxCause::Ok);
    }

    #[test]
    fn equal_overlap_collides() {
        let t = SensitivityTable::datasheet();
        let out = resolve_concurrent(
            &[airing(1, 0, 100, &[(9, -95.0)]), airing(2, 50, 150, &[(9, -95.0)])],
            &t,
            6.0,
        )
        .unwrap();
        assert!(out.iter().all(|o| o.cause == RxCause::Collision));
    }

    #[test]
    fn strong_frame_captures() {
        let t = SensitivityTable::datasheet();
        let out = resolve_concurrent(
            &[airing(1, 0, 100, &[(9, -90.0)]), airing(2, 0, 100, &[(9, -100.0)])],
            &t,
            6.0,
        )
        .unwrap();
        assert_eq!(out[0].cause, RxCause::Ok);
        assert_eq!(out[1].cause, RxCause::Collision);
    }

    #[test]
    fn back_to_back_frames_do_not_overlap() {
        let t = SensitivityTable::datasheet();
        let out = resolve_concurrent(
            &[airing(1, 0, 100, &[(9, -95.0)]), airing(2, 100, 200, &[(9, -95.0)])],
            &t,
            6.0,
        )
        .unwrap();
        assert!(out.iter().all(|o| o.cause == RxCause::Ok));
    }

    #[test]
    fn different_sf_is_orthogonal() {
        let t = SensitivityTable::datasheet();
        let mut b = airing(2, 0, 100, &[(9, -95.0)]);
        b.spreading_factor = 11;
        let out = resolve_concurrent(&[airing(1, 0, 100, &[(9, -95.0)]), b], &t, 6.0).unwrap();
        assert!(out.iter().all(|o| o.cause == RxCause::Ok));
    }

    #[test]
    fn weak_capture_still_needs_sensitivity() {
        let t = SensitivityTable::datasheet();
        let out = resolve_concurrent(
            &[airing(1, 0, 100, &[(9, -141.0)]), airing(2, 0, 100, &[(9, -150.0)])],
            &t,
            6.0,
        )
        .unwrap();
        assert_eq!(out[0].cause, RxCause::BelowSensitivity);
        assert_eq!(out[1].cause, RxCause::Collision);
    }
}
