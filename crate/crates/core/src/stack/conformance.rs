//! Reusable conformance checks for [`RadioDriver`] implementations.
//!
//! A backend opts in by implementing [`DriverHarness`], which adds the two
//! test-only powers a driver lacks: letting virtual time run until the
//! radio is quiet, and putting a frame on air for it to hear.

use std::fmt;

use super::{DriverError, DriverEvent, RadioDriver};
use crate::phy::RadioConfig;

pub trait DriverHarness: RadioDriver {
    /// Runs until nothing is in flight and returns the callbacks raised.
    fn settle(&mut self) -> Vec<DriverEvent>;
    /// Makes `frame` arrive over the air.
    fn inject(&mut self, frame: Vec<u8>);
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.detail)
    }
}

impl std::error::Error for Violation {}

fn expect<T: fmt::Debug>(rule: &'static str, got: T, ok: bool) -> Result<(), Violation> {
    if ok {
        Ok(())
    } else {
        Err(Violation {
            rule,
            detail: format!("{got:?}"),
        })
    }
}

fn tx_dones(events: &[DriverEvent]) -> usize {
    events.iter().filter(|e| **e == DriverEvent::TxDone).count()
}

fn ready<H: DriverHarness>(make: &mut impl FnMut() -> H) -> Result<H, Violation> {
    let mut d = make();
    let r = d.init().and_then(|_| d.configure(&RadioConfig::default()));
    expect("init and configure succeed", &r, r.is_ok())?;
    Ok(d)
}

/// Runs every check against fresh drivers from `make`.
pub fn check_driver<H: DriverHarness>(mut make: impl FnMut() -> H) -> Result<(), Violation> {
    {
        let mut d = make();
        let r = d.send(&[1, 2, 3]);
        expect("send before init", &r, r == Err(DriverError::NotInitialized))?;
        let r = d.configure(&RadioConfig::default());
        expect("configure before init", &r, r == Err(DriverError::NotInitialized))?;
        let r = d.start_rx();
        expect("start_rx before init", &r, r == Err(DriverError::NotInitialized))?;
        let ev = d.settle();
        expect("no callbacks before init", &ev, ev.is_empty())?;
    }
    {
        let mut d = ready(&mut make)?;
        let bad = RadioConfig {
            spreading_factor: 13,
            ..RadioConfig::default()
        };
        let r = d.configure(&bad);
        expect("invalid config rejected", &r, matches!(r, Err(DriverError::Config(_))))?;
        expect("config kept", d.config(), d.config() == Some(&RadioConfig::default()))?;
    }
    {
        let mut d = ready(&mut make)?;
        let r = d.send(&[0xAA; 22]);
        expect("send accepted", &r, r.is_ok())?;
        let r = d.configure(&RadioConfig::default());
        expect("configure refused during tx", &r, r == Err(DriverError::Busy))?;
        let r = d.send(&[0xBB; 4]);
        expect("send refused during tx", &r, r == Err(DriverError::Busy))?;
        let ev = d.settle();
        expect("one tx_done per send", &ev, tx_dones(&ev) == 1)?;
        let ev = d.settle();
        expect("no spurious tx_done", &ev, tx_dones(&ev) == 0)?;
        let r = d.configure(&RadioConfig::default());
        expect("configure after tx", &r, r.is_ok())?;
    }
    {
        let mut d = ready(&mut make)?;
        let r = d.start_rx();
        expect("start_rx accepted", &r, r.is_ok())?;
        d.settle();
        let r = d.configure(&RadioConfig::default());
        expect("configure refused during rx", &r, r == Err(DriverError::Busy))?;
        let r = d.stop_rx();
        expect("stop_rx accepted", &r, r.is_ok())?;
        let r = d.configure(&RadioConfig::default());
        expect("configure after stop_rx", &r, r.is_ok())?;
    }
    {
        let mut d = ready(&mut make)?;
        let r = d.on().and_then(|_| d.off());
        expect("on then off", &r, r.is_ok())?;
        let r = d.send(&[7; 10]);
        expect("send wakes a powered-down radio", &r, r.is_ok())?;
        let ev = d.settle();
        expect("tx_done from powered-down send", &ev, tx_dones(&ev) == 1)?;
    }
    {
        let mut d = ready(&mut make)?;
        for i in 0..5u8 {
            let r = d.send(&[i; 8]);
            expect("back-to-back send", &r, r.is_ok())?;
            let ev = d.settle();
            expect("one tx_done per back-to-back send", &ev, tx_dones(&ev) == 1)?;
        }
    }
    {
        let mut d = ready(&mut make)?;
        let r = d.send_wakeup(0x2A);
        expect("wake-up accepted", &r, r.is_ok())?;
        let r = d.send(&[1]);
        expect("send refused during wake-up", &r, r == Err(DriverError::Busy))?;
        let ev = d.settle();
        expect("one tx_done per wake-up", &ev, tx_dones(&ev) == 1)?;
    }
    {
        let mut d = ready(&mut make)?;
        let r = d.start_rx();
        expect("start_rx accepted", &r, r.is_ok())?;
        d.settle();
        let frame = vec![3, 1, 4, 1, 5, 9, 2, 6];
        d.inject(frame.clone());
        let ev = d.settle();
        let heard = ev
            .iter()
            .filter(|e| matches!(e, DriverEvent::RxDone { bytes, .. } if *bytes == frame))
            .count();
        expect("rx_done for a frame heard in rx", &ev, heard == 1)?;
        expect("no tx_done while receiving", &ev, tx_dones(&ev) == 0)?;
    }
    {
        let mut d = ready(&mut make)?;
        d.inject(vec![9; 8]);
        let ev = d.settle();
        let heard = ev.iter().any(|e| matches!(e, DriverEvent::RxDone { .. }));
        expect("deaf outside rx", &ev, !heard)?;
    }
    Ok(())
}

impl DriverHarness for super::LoopbackRadio {
    fn settle(&mut self) -> Vec<DriverEvent> {
        super::LoopbackRadio::settle(self)
    }

    fn inject(&mut self, frame: Vec<u8>) {
        super::LoopbackRadio::inject(self, frame)
    }
}
