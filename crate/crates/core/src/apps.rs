//! Endpoint applications: the file being fetched, the producer serving it and
//! the push source used by the one-Interest measurement rig.

use crate::tlv::{DataPacket, InterestPacket, Name};

pub const CHUNK_PAYLOAD: usize = 1460;
pub const MIB: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileSpec {
    pub prefix: Name,
    pub size_bytes: u64,
    pub chunk_payload: usize,
    pub n_chunks: u64,
}

impl FileSpec {
    pub fn new(prefix: Name, size_bytes: u64, chunk_payload: usize) -> Self {
        assert!(chunk_payload > 0, "chunk payload must be positive");
        let n_chunks = size_bytes.div_ceil(chunk_payload as u64).max(1);
        Self {
            prefix,
            size_bytes,
            chunk_payload,
            n_chunks,
        }
    }

    pub fn mebibytes(prefix: Name, mib: u64) -> Self {
        Self::new(prefix, mib * MIB, CHUNK_PAYLOAD)
    }

    /// Payload of chunk `seq`; the last one carries the remainder.
    pub fn chunk_len(&self, seq: u64) -> Option<usize> {
        if seq == 0 || seq > self.n_chunks {
            return None;
        }
        if seq < self.n_chunks || self.size_bytes == 0 {
            return Some(if self.size_bytes == 0 { 0 } else { self.chunk_payload });
        }
        let rem = self.size_bytes - (self.n_chunks - 1) * self.chunk_payload as u64;
        Some(rem as usize)
    }

    pub fn data(&self, seq: u64) -> Option<DataPacket> {
        self.chunk_len(seq)
            .map(|len| DataPacket::new(self.prefix.with_seq(seq), len))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProducerCounters {
    pub interests: u64,
    pub served: u64,
    pub out_of_range: u64,
}

/// Serves one Data per Interest under its prefix.
pub struct Producer {
    spec: FileSpec,
    counters: ProducerCounters,
}

impl Producer {
    pub fn new(spec: FileSpec) -> Self {
        Self {
            spec,
            counters: ProducerCounters::default(),
        }
    }

    pub fn counters(&self) -> ProducerCounters {
        self.counters
    }

    pub fn on_interest(&mut self, pkt: &InterestPacket) -> Option<DataPacket> {
        self.counters.interests += 1;
        let data = pkt
            .name
            .seq()
            .filter(|_| self.spec.prefix.is_prefix_of(&pkt.name))
            .and_then(|seq| self.spec.data(seq));
        match data {
            Some(d) => {
                self.counters.served += 1;
                Some(d)
            }
            None => {
                self.counters.out_of_range += 1;
                None
            }
        }
    }
}

/// Pushes every chunk of the file back-to-back after a single trigger.
/// This deliberately breaks one-Interest-one-Data and exists only to measure
/// the channel's upper bound.
pub struct PushSource {
    spec: FileSpec,
    next: u64,
    triggered: bool,
}

impl PushSource {
    pub fn new(spec: FileSpec) -> Self {
        Self {
            spec,
            next: 1,
            triggered: false,
        }
    }

    /// Returns true on the first trigger only.
    pub fn trigger(&mut self) -> bool {
        !std::mem::replace(&mut self.triggered, true)
    }

    pub fn next_chunk(&mut self) -> Option<DataPacket> {
        if !self.triggered {
            return None;
        }
        let d = self.spec.data(self.next)?;
        self.next += 1;
        Some(d)
    }

    pub fn pushed(&self) -> u64 {
        self.next - 1
    }
}
