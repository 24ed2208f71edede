use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{RadioDriver, StackError};
use crate::NodeAddress;

/// Payload limit per message, the LoRa maximum frame payload.
pub const DEFAULT_MTU: usize = 255;
pub const HEADER_LEN: usize = 6;
/// Recorded in run output so traces can be decoded later.
pub const HEADER_FORMAT: &str = "rime-unicast-v1(src:u16le,dst:u16le,seqno:u16le)";

const DUPLICATE_WINDOW: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnicastMessage {
    pub src: NodeAddress,
    pub dst: NodeAddress,
    pub seqno: u16,
    pub payload: Vec<u8>,
}

impl UnicastMessage {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.src.0.to_le_bytes());
        out.extend_from_slice(&self.dst.0.to_le_bytes());
        out.extend_from_slice(&self.seqno.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        if bytes.len() < HEADER_LEN {
            return None;
        }
        let word = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        Some(UnicastMessage {
            src: NodeAddress(word(0)),
            dst: NodeAddress(word(2)),
            seqno: word(4),
            payload: bytes[HEADER_LEN..].to_vec(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SendHandle {
    pub dst: NodeAddress,
    pub seqno: u16,
    /// Addressed to ourselves and delivered without touching the radio.
    pub loopback: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecvVerdict {
    Deliver(UnicastMessage),
    /// Addressed to another node.
    Overheard,
    Duplicate,
    Malformed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnicastStats {
    pub sent: u64,
    pub loopback: u64,
    pub delivered: u64,
    pub overheard: u64,
    pub duplicates: u64,
    pub malformed: u64,
}

/// Single-hop best-effort unicast.
#[derive(Debug, Clone)]
pub struct Unicast {
    address: NodeAddress,
    mtu: usize,
    next_seqno: u16,
    recent: VecDeque<(NodeAddress, u16)>,
    loopback: VecDeque<UnicastMessage>,
    stats: UnicastStats,
}

impl Unicast {
    pub fn new(address: NodeAddress) -> Self {
        Self::with_mtu(address, DEFAULT_MTU)
    }

    pub fn with_mtu(address: NodeAddress, mtu: usize) -> Self {
        Unicast {
            address,
            mtu,
            next_seqno: 0,
            recent: VecDeque::with_capacity(DUPLICATE_WINDOW),
            loopback: VecDeque::new(),
            stats: UnicastStats::default(),
        }
    }

    pub fn address(&self) -> NodeAddress {
        self.address
    }

    pub fn mtu(&self) -> usize {
        self.mtu
    }

    pub fn stats(&self) -> &UnicastStats {
        &self.stats
    }

    pub fn send(
        &mut self,
        radio: &mut dyn RadioDriver,
        dst: NodeAddress,
        payload: &[u8],
    ) -> Result<SendHandle, StackError> {
        if payload.len() > self.mtu {
            return Err(StackError::PayloadTooLarge {
                len: payload.len(),
                mtu: self.mtu,
            });
        }
        let msg = UnicastMessage {
            src: self.address,
            dst,
            seqno: self.next_seqno,
            payload: payload.to_vec(),
        };
        let loopback = dst == self.address;
        if loopback {
            self.loopback.push_back(msg);
            self.stats.loopback += 1;
        } else {
            radio.send(&msg.encode()).map_err(StackError::RadioUnavailable)?;
            self.stats.sent += 1;
        }
        let seqno = self.next_seqno;
        self.next_seqno = self.next_seqno.wrapping_add(1);
        Ok(SendHandle {
            dst,
            seqno,
            loopback,
        })
    }

    /// Messages sent to our own address, in send order.
    pub fn take_loopback(&mut self) -> Option<UnicastMessage> {
        self.loopback.pop_front()
    }

    /// Address filter and duplicate suppression for a frame that passed
    /// PHY reception.
    pub fn filter(&mut self, frame: &[u8]) -> RecvVerdict {
        let Some(msg) = UnicastMessage::decode(frame) else {
            self.stats.malformed += 1;
            return RecvVerdict::Malformed;
        };
        if msg.dst != self.address {
            self.stats.overheard += 1;
            return RecvVerdict::Overheard;
        }
        let key = (msg.src, msg.seqno);
        if self.recent.contains(&key) {
            self.stats.duplicates += 1;
            return RecvVerdict::Duplicate;
        }
        if self.recent.len() == DUPLICATE_WINDOW {
            self.recent.pop_front();
        }
        self.recent.push_back(key);
        self.stats.delivered += 1;
        RecvVerdict::Deliver(msg)
    }
}
