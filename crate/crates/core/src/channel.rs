//! Half-duplex shared medium.
//!
//! One frame occupies the medium at a time. Frames submitted while it is
//! busy wait in a single FIFO shared by every attached NIC, so each NIC's
//! own frames leave in submission order. Contention and MAC-level
//! acknowledgement costs are folded into a per-frame fixed overhead.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const CONSUMER: NodeId = NodeId(0);
    pub const PRODUCER: NodeId = NodeId(1);
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NodeId::CONSUMER => f.write_str("consumer"),
            NodeId::PRODUCER => f.write_str("producer"),
            NodeId(n) => write!(f, "node{n}"),
        }
    }
}

impl FromStr for NodeId {
    type Err = LossScriptError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "consumer" => Ok(NodeId::CONSUMER),
            "producer" => Ok(NodeId::PRODUCER),
            other => other
                .parse::<u32>()
                .map(NodeId)
                .map_err(|_| LossScriptError::BadNode(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Interest,
    Data,
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrameKind::Interest => "interest",
            FrameKind::Data => "data",
        })
    }
}

impl FromStr for FrameKind {
    type Err = LossScriptError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "interest" => Ok(FrameKind::Interest),
            "data" => Ok(FrameKind::Data),
            other => Err(LossScriptError::BadKind(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProfileId {
    #[serde(rename = "80211b")]
    Ieee80211b,
    #[serde(rename = "80211n")]
    Ieee80211n,
}

impl ProfileId {
    pub fn label(self) -> &'static str {
        match self {
            ProfileId::Ieee80211b => "80211b",
            ProfileId::Ieee80211n => "80211n",
        }
    }
}

impl fmt::Display for ProfileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ProfileId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "80211b" => Ok(ProfileId::Ieee80211b),
            "80211n" => Ok(ProfileId::Ieee80211n),
            other => Err(format!("unknown profile {other:?} (expected 80211b or 80211n)")),
        }
    }
}

/// Medium parameters. `fixed_overhead_us` bundles preamble, PLCP header,
/// DIFS, SIFS, the MAC acknowledgement and the mean backoff into one
/// calibrated constant per frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelProfile {
    pub label: ProfileId,
    pub bit_rate_bps: u64,
    pub fixed_overhead_us: u64,
    pub mac_header_bytes: usize,
}

/// 802.11 data header (24) + FCS (4) + LLC/SNAP (8).
pub const DEFAULT_MAC_HEADER: usize = 36;

impl ChannelProfile {
    /// 802.11b at 11 Mbps. Overhead from `blend-sim calibrate`.
    pub fn ieee80211b() -> Self {
        Self {
            label: ProfileId::Ieee80211b,
            bit_rate_bps: 11_000_000,
            fixed_overhead_us: 560,
            mac_header_bytes: DEFAULT_MAC_HEADER,
        }
    }

    /// 802.11n at 24 Mbps. Overhead from `blend-sim calibrate`.
    pub fn ieee80211n() -> Self {
        Self {
            label: ProfileId::Ieee80211n,
            bit_rate_bps: 24_000_000,
            fixed_overhead_us: 256,
            mac_header_bytes: DEFAULT_MAC_HEADER,
        }
    }

    pub fn for_id(id: ProfileId) -> Self {
        match id {
            ProfileId::Ieee80211b => Self::ieee80211b(),
            ProfileId::Ieee80211n => Self::ieee80211n(),
        }
    }

    /// Medium occupancy for a frame of `wire_len` bytes (MAC header included).
    pub fn airtime(&self, wire_len: usize) -> SimTime {
        airtime(self, wire_len)
    }
}

pub fn airtime(profile: &ChannelProfile, wire_len: usize) -> SimTime {
    debug_assert!(wire_len > 0);
    let bits = wire_len as u128 * 8 * 1_000_000;
    let rate = profile.bit_rate_bps as u128;
    let tx_us = bits.div_ceil(rate) as u64;
    SimTime(profile.fixed_overhead_us + tx_us)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossScriptError {
    #[error("unknown loss rule {0:?} (expected `random:<p>[:<kind>]` or `nth:<kind>:<node>:<n>`)")]
    BadRule(String),
    #[error("loss probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("unknown frame kind {0:?}")]
    BadKind(String),
    #[error("unknown node {0:?}")]
    BadNode(String),
    #[error("frame ordinal must be >= 1, got {0:?}")]
    BadOrdinal(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LossRule {
    /// Drop the `n`-th (1-based) frame of `kind` sent by `src`.
    Nth { kind: FrameKind, src: NodeId, n: u64 },
    /// Drop each frame (optionally only of `kind`) with probability `p`.
    Random { p: f64, kind: Option<FrameKind> },
}

impl fmt::Display for LossRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossRule::Nth { kind, src, n } => write!(f, "nth:{kind}:{src}:{n}"),
            LossRule::Random { p, kind: None } => write!(f, "random:{p}"),
            LossRule::Random { p, kind: Some(k) } => write!(f, "random:{p}:{k}"),
        }
    }
}

impl FromStr for LossRule {
    type Err = LossScriptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["random", p, rest @ ..] if rest.len() <= 1 => {
                let p: f64 = p
                    .parse()
                    .map_err(|_| LossScriptError::BadRule(s.to_owned()))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(LossScriptError::BadProbability(p));
                }
                let kind = rest.first().map(|k| k.parse()).transpose()?;
                Ok(LossRule::Random { p, kind })
            }
            ["nth", kind, src, n] => {
                let n: u64 = n
                    .parse()
                    .ok()
                    .filter(|n| *n >= 1)
                    .ok_or_else(|| LossScriptError::BadOrdinal((*n).to_owned()))?;
                Ok(LossRule::Nth {
                    kind: kind.parse()?,
                    src: src.parse()?,
                    n,
                })
            }
            _ => Err(LossScriptError::BadRule(s.to_owned())),
        }
    }
}

/// Ordered loss rules. A frame is dropped if any rule matches. Empty = lossless.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossScript {
    pub rules: Vec<LossRule>,
}

impl LossScript {
    pub fn lossless() -> Self {
        Self::default()
    }

    pub fn new(rules: Vec<LossRule>) -> Self {
        Self { rules }
    }

    pub fn parse_list<S: AsRef<str>>(items: &[S]) -> Result<Self, LossScriptError> {
        let rules = items
            .iter()
            .flat_map(|s| s.as_ref().split(',').map(str::to_owned).collect::<Vec<_>>())
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.parse())
            .collect::<Result<_, _>>()?;
        Ok(Self { rules })
    }

    pub fn is_lossless(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.rules.iter().map(ToString::to_string).collect()
    }
}

/// Stateful evaluator of a [`LossScript`].
struct LossState {
    script: LossScript,
    rng: ChaCha8Rng,
    counts: Vec<(NodeId, FrameKind, u64)>,
}

impl LossState {
    fn should_drop(&mut self, src: NodeId, kind: FrameKind) -> bool {
        let ordinal = match self
            .counts
            .iter_mut()
            .find(|(s, k, _)| *s == src && *k == kind)
        {
            Some(entry) => {
                entry.2 += 1;
                entry.2
            }
            None => {
                self.counts.push((src, kind, 1));
                1
            }
        };
        let mut drop = false;
        for rule in &self.script.rules {
            match *rule {
                LossRule::Nth { kind: k, src: s, n } => {
                    drop |= k == kind && s == src && n == ordinal;
                }
                LossRule::Random { p, kind: k } => {
                    // Always draw so the stream position is independent of other rules.
                    let roll: f64 = self.rng.gen();
                    drop |= k.is_none_or(|k| k == kind) && roll < p;
                }
            }
        }
        drop
    }
}

#[derive(Debug, Clone)]
pub struct FrameTx<P> {
    pub src: NodeId,
    pub dst: NodeId,
    pub wire_len: usize,
    pub kind: FrameKind,
    pub enqueue_time: SimTime,
    pub payload: P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Delivered,
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelLogEntry {
    pub time: SimTime,
    pub src: NodeId,
    pub kind: FrameKind,
    pub wire_len: usize,
    pub queued_us: u64,
    pub outcome: Outcome,
}

impl fmt::Display for ChannelLogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {}",
            self.time,
            self.src,
            self.kind,
            self.wire_len,
            self.queued_us,
            match self.outcome {
                Outcome::Delivered => "delivered",
                Outcome::Dropped => "dropped",
            }
        )
    }
}

/// Per-sender counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NicStats {
    pub interest_tx: u64,
    pub data_tx: u64,
    pub delivered: u64,
    pub dropped: u64,
}

pub struct Channel<P> {
    profile: ChannelProfile,
    queue: VecDeque<FrameTx<P>>,
    on_air: Option<(FrameTx<P>, SimTime, SimTime)>,
    last_busy_end: SimTime,
    busy_total: SimTime,
    loss: LossState,
    stats: Vec<NicStats>,
    log: Option<Vec<ChannelLogEntry>>,
}

impl<P> Channel<P> {
    pub fn new(profile: ChannelProfile, script: LossScript, rng: ChaCha8Rng, nodes: usize) -> Self {
        Self {
            profile,
            queue: VecDeque::new(),
            on_air: None,
            last_busy_end: SimTime::ZERO,
            busy_total: SimTime::ZERO,
            loss: LossState {
                script,
                rng,
                counts: Vec::new(),
            },
            stats: vec![NicStats::default(); nodes],
            log: None,
        }
    }

    pub fn enable_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn take_log(&mut self) -> Vec<ChannelLogEntry> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn profile(&self) -> &ChannelProfile {
        &self.profile
    }

    pub fn stats(&self, node: NodeId) -> NicStats {
        self.stats[node.0 as usize]
    }

    /// Total time the medium has been occupied.
    pub fn busy_time(&self) -> SimTime {
        self.busy_total
    }

    pub fn is_busy(&self) -> bool {
        self.on_air.is_some()
    }

    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    /// Submits a frame. Returns the completion time if it went straight on air;
    /// the caller must then invoke [`Channel::complete`] at that time.
    pub fn transmit(&mut self, now: SimTime, frame: FrameTx<P>) -> Option<SimTime> {
        assert_ne!(frame.src, frame.dst, "frame addressed to its sender");
        let nic = &mut self.stats[frame.src.0 as usize];
        match frame.kind {
            FrameKind::Interest => nic.interest_tx += 1,
            FrameKind::Data => nic.data_tx += 1,
        }
        self.queue.push_back(frame);
        if self.on_air.is_none() {
            self.start_next(now)
        } else {
            None
        }
    }

    fn start_next(&mut self, now: SimTime) -> Option<SimTime> {
        let frame = self.queue.pop_front()?;
        assert!(now >= self.last_busy_end, "overlapping channel busy intervals");
        let end = now + self.profile.airtime(frame.wire_len);
        self.on_air = Some((frame, now, end));
        Some(end)
    }

    /// Finishes the frame on air. Returns it with its outcome and, if another
    /// frame started, that frame's completion time.
    pub fn complete(&mut self, now: SimTime) -> (FrameTx<P>, Outcome, Option<SimTime>) {
        let (frame, start, end) = self.on_air.take().expect("no frame on air");
        assert_eq!(now, end, "completion fired at the wrong time");
        self.last_busy_end = end;
        self.busy_total = self.busy_total + (end - start);
        let outcome = if self.loss.should_drop(frame.src, frame.kind) {
            Outcome::Dropped
        } else {
            Outcome::Delivered
        };
        let nic = &mut self.stats[frame.src.0 as usize];
        match outcome {
            Outcome::Delivered => nic.delivered += 1,
            Outcome::Dropped => nic.dropped += 1,
        }
        if let Some(log) = &mut self.log {
            log.push(ChannelLogEntry {
                time: now,
                src: frame.src,
                kind: frame.kind,
                wire_len: frame.wire_len,
                queued_us: (start - frame.enqueue_time).as_micros(),
                outcome,
            });
        }
        let next = self.start_next(now);
        (frame, outcome, next)
    }
}
