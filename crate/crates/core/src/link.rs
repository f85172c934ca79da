//! Link-adaptation service that bundles Interests on wireless faces.
//!
//! The sender-side [`Encoder`] turns a run of consecutive Interests for one
//! name prefix into a single Interest whose bundle tag carries the covered
//! range `[SS, ES]`, and suppresses the Interests that range already covers.
//! The receiver-side [`Decoder`] expands a bundled Interest back into one
//! Interest per sequence number before the forwarder sees it. A bundle that
//! arrives after a lost one also re-creates the missing sequence numbers,
//! because decoding always starts right after the last decoded sequence.
//!
//! Neither side touches the forwarder or transport: the forwarder forwards
//! tagged Interests untouched, and the transport only tags them.

use std::collections::HashMap;

use crate::kernel::SimTime;
use crate::tlv::{BundleTag, InterestPacket, Name};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceMedium {
    Wired,
    Wireless,
}

/// Encoding state for one name prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EitEntry {
    pub bi: u32,
    /// Start of the last bundle sent.
    pub lss: i64,
    /// End of the last bundle sent.
    pub les: i64,
    last_used: SimTime,
}

/// Decoding state for one name prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DitEntry {
    pub pss: u64,
    pub pes: u64,
    last_used: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeRange {
    pub dss: u64,
    pub des: u64,
}

impl DecodeRange {
    pub fn len(&self) -> u64 {
        self.des - self.dss + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncodeAction {
    /// A bundled Interest whose tag now holds `(SS, ES)`.
    Bundle(InterestPacket),
    /// Tag stripped, sent as a regular Interest.
    Plain(InterestPacket),
    /// Already covered by an earlier bundle.
    Suppress,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkCounters {
    pub bundles_sent: u64,
    pub plain_sent: u64,
    pub suppressed: u64,
    pub rtx_passthrough: u64,
    pub zero_cwnd_tags: u64,
    pub bundles_received: u64,
    pub decoded_interests: u64,
    pub rtx_decoded: u64,
    pub bundles_dropped_stale: u64,
    pub malformed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkConfig {
    pub medium: FaceMedium,
    pub bundling: bool,
    pub bi: u32,
    /// EIT/DIT entries untouched for this long are discarded.
    pub idle_timeout: SimTime,
}

impl LinkConfig {
    pub fn wireless(bi: u32, bundling: bool) -> Self {
        Self {
            medium: FaceMedium::Wireless,
            bundling,
            bi: bi.max(1),
            idle_timeout: SimTime::from_secs(8),
        }
    }
}

pub struct Encoder {
    bi: u32,
    eit: HashMap<Name, EitEntry>,
    idle_timeout: SimTime,
}

impl Encoder {
    pub fn new(bi: u32, idle_timeout: SimTime) -> Self {
        assert!(bi >= 1, "bundle interval must be at least 1");
        Self {
            bi,
            eit: HashMap::new(),
            idle_timeout,
        }
    }

    pub fn entry(&self, prefix: &Name) -> Option<&EitEntry> {
        self.eit.get(prefix)
    }

    pub fn len(&self) -> usize {
        self.eit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eit.is_empty()
    }

    pub fn sweep(&mut self, now: SimTime) {
        let timeout = self.idle_timeout;
        self.eit.retain(|_, e| now.saturating_sub(e.last_used) < timeout);
    }

    /// Encodes one outgoing Interest whose tag is in transport form `(RTx, cwnd)`.
    pub fn encode(
        &mut self,
        mut pkt: InterestPacket,
        now: SimTime,
        counters: &mut LinkCounters,
    ) -> EncodeAction {
        let (Some(tag), Some(seq)) = (pkt.btag, pkt.name.seq()) else {
            pkt.btag = None;
            counters.plain_sent += 1;
            return EncodeAction::Plain(pkt);
        };
        let Ok(seq32) = u32::try_from(seq) else {
            pkt.btag = None;
            counters.plain_sent += 1;
            return EncodeAction::Plain(pkt);
        };

        if tag.is_rtx() {
            pkt.btag = Some(BundleTag::bundle(seq32, seq32));
            counters.rtx_passthrough += 1;
            counters.bundles_sent += 1;
            if let Some(e) = self.eit.get_mut(&pkt.name.prefix_name()) {
                e.last_used = now;
            }
            return EncodeAction::Bundle(pkt);
        }

        let bi = self.bi;
        let prefix = pkt.name.prefix_name();
        let entry = self
            .eit
            .entry(prefix)
            .and_modify(|e| {
                if now.saturating_sub(e.last_used) >= self.idle_timeout {
                    *e = fresh_eit(bi, seq, now);
                }
            })
            .or_insert_with(|| fresh_eit(bi, seq, now));
        entry.last_used = now;

        // Next bundle starts right after the last one; equals LSS + BI after a full bundle.
        let next_start = entry.les + 1;
        let seq_i = seq as i64;
        if seq_i < next_start {
            counters.suppressed += 1;
            return EncodeAction::Suppress;
        }

        let mut cwnd = tag.cwnd();
        if cwnd == 0 {
            counters.zero_cwnd_tags += 1;
            cwnd = 1;
        }
        // A seq past the gate means the transport skipped numbers; start the bundle at it.
        let ss = next_start.max(seq_i);
        let size = cwnd.min(bi) as i64;
        let es = (ss + size - 1).min(u32::MAX as i64);
        entry.lss = ss;
        entry.les = es;

        pkt.name = pkt.name.with_seq(ss as u64);
        pkt.btag = Some(BundleTag::bundle(ss as u32, es as u32));
        counters.bundles_sent += 1;
        EncodeAction::Bundle(pkt)
    }
}

fn fresh_eit(bi: u32, first_seq: u64, now: SimTime) -> EitEntry {
    let lss = first_seq as i64 - bi as i64;
    EitEntry {
        bi,
        lss,
        les: lss + bi as i64 - 1,
        last_used: now,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeOutcome {
    /// No bundle tag: hand to the forwarder unchanged.
    Passthrough(InterestPacket),
    /// Single retransmitted sequence at or below the decoded frontier.
    Retransmission(InterestPacket),
    /// A range expanded into individual Interests.
    Expanded(DecodeRange, Vec<InterestPacket>),
    /// Every sequence the bundle covers was decoded before.
    Stale,
    /// Start after end.
    Malformed,
}

impl DecodeOutcome {
    pub fn into_interests(self) -> Vec<InterestPacket> {
        match self {
            DecodeOutcome::Passthrough(p) | DecodeOutcome::Retransmission(p) => vec![p],
            DecodeOutcome::Expanded(_, v) => v,
            DecodeOutcome::Stale | DecodeOutcome::Malformed => Vec::new(),
        }
    }
}

pub struct Decoder {
    dit: HashMap<Name, DitEntry>,
    idle_timeout: SimTime,
}

impl Decoder {
    pub fn new(idle_timeout: SimTime) -> Self {
        Self {
            dit: HashMap::new(),
            idle_timeout,
        }
    }

    pub fn entry(&self, prefix: &Name) -> Option<&DitEntry> {
        self.dit.get(prefix)
    }

    pub fn sweep(&mut self, now: SimTime) {
        let timeout = self.idle_timeout;
        self.dit.retain(|_, e| now.saturating_sub(e.last_used) < timeout);
    }

    pub fn decode(
        &mut self,
        mut pkt: InterestPacket,
        now: SimTime,
        counters: &mut LinkCounters,
    ) -> DecodeOutcome {
        let Some(tag) = pkt.btag else {
            return DecodeOutcome::Passthrough(pkt);
        };
        if pkt.name.seq().is_none() {
            pkt.btag = None;
            return DecodeOutcome::Passthrough(pkt);
        }
        counters.bundles_received += 1;
        let (ss, es) = (tag.start() as u64, tag.end() as u64);
        if ss > es {
            counters.malformed += 1;
            return DecodeOutcome::Malformed;
        }

        let timeout = self.idle_timeout;
        let entry = self
            .dit
            .entry(pkt.name.prefix_name())
            .and_modify(|e| {
                if now.saturating_sub(e.last_used) >= timeout {
                    *e = fresh_dit(now);
                }
            })
            .or_insert_with(|| fresh_dit(now));
        entry.last_used = now;

        let template = |seq: u64| InterestPacket {
            name: pkt.name.with_seq(seq),
            nonce: pkt.nonce,
            lifetime_ms: pkt.lifetime_ms,
            btag: None,
        };

        if es > entry.pes {
            // Resume right after the last decoded sequence; this refills any
            // range whose bundle was lost on the way.
            let range = DecodeRange {
                dss: entry.pes + 1,
                des: es,
            };
            entry.pss = ss;
            entry.pes = es;
            let out: Vec<_> = (range.dss..=range.des).map(template).collect();
            counters.decoded_interests += out.len() as u64;
            return DecodeOutcome::Expanded(range, out);
        }
        if ss == es {
            counters.rtx_decoded += 1;
            counters.decoded_interests += 1;
            return DecodeOutcome::Retransmission(template(ss));
        }
        counters.bundles_dropped_stale += 1;
        DecodeOutcome::Stale
    }
}

fn fresh_dit(now: SimTime) -> DitEntry {
    DitEntry {
        pss: 0,
        pes: 0,
        last_used: now,
    }
}

/// Per-face link service: encoder on the way out, decoder on the way in.
pub struct LinkService {
    config: LinkConfig,
    encoder: Encoder,
    decoder: Decoder,
    counters: LinkCounters,
}

impl LinkService {
    pub fn new(config: LinkConfig) -> Self {
        Self {
            config,
            encoder: Encoder::new(config.bi.max(1), config.idle_timeout),
            decoder: Decoder::new(config.idle_timeout),
            counters: LinkCounters::default(),
        }
    }

    pub fn config(&self) -> &LinkConfig {
        &self.config
    }

    pub fn counters(&self) -> LinkCounters {
        self.counters
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn decoder(&self) -> &Decoder {
        &self.decoder
    }

    pub fn encode_outgoing_interest(&mut self, mut pkt: InterestPacket, now: SimTime) -> EncodeAction {
        if self.config.medium == FaceMedium::Wired || !self.config.bundling {
            pkt.btag = None;
            self.counters.plain_sent += 1;
            return EncodeAction::Plain(pkt);
        }
        self.encoder.encode(pkt, now, &mut self.counters)
    }

    pub fn decode_incoming_interest(&mut self, pkt: InterestPacket, now: SimTime) -> Vec<InterestPacket> {
        self.decoder
            .decode(pkt, now, &mut self.counters)
            .into_interests()
    }

    pub fn sweep(&mut self, now: SimTime) {
        self.encoder.sweep(now);
        self.decoder.sweep(now);
    }
}
