//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use blend_core::kernel::SimTime;
use blend_core::link::{Decoder, EncodeAction, Encoder, LinkCounters};
use blend_core::tlv::{BundleTag, DataPacket, InterestPacket, Name};
use proptest::prelude::*;

pub const IDLE: SimTime = SimTime::from_secs(8);

/// What the sender's link puts on the air for one transport Interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sent {
    Bundle(u64, u64),
    Nothing,
}

pub struct NaiveEncoder {
    bi: u64,
    started: bool,
    lss: i64,
    les: i64,
}

impl NaiveEncoder {
    pub fn new(bi: u64) -> Self {
        Self {
            bi,
            started: false,
            lss: 0,
            les: 0,
        }
    }

    pub fn step(&mut self, seq: u64, rtx: bool, cwnd: u64) -> Sent {
        if rtx {
            return Sent::Bundle(seq, seq);
        }
        if !self.started {
            self.started = true;
            self.lss = seq as i64 - self.bi as i64;
            self.les = seq as i64 - 1;
        }
        let s = seq as i64;
        if s <= self.les {
            return Sent::Nothing;
        }
        let cwnd = if cwnd == 0 { 1 } else { cwnd };
        let ss = if s > self.les + 1 { s } else { self.les + 1 };
        let width = if cwnd < self.bi { cwnd } else { self.bi };
        let es = ss + width as i64 - 1;
        self.lss = ss;
        self.les = es;
        Sent::Bundle(ss as u64, es as u64)
    }
}

pub struct NaiveDecoder {
    pub pes: u64,
}

impl NaiveDecoder {
    pub fn step(&mut self, ss: u64, es: u64) -> Vec<u64> {
        let mut out = Vec::new();
        if ss > es {
            return out;
        }
        if es > self.pes {
            let mut s = self.pes + 1;
            while s <= es {
                out.push(s);
                s += 1;
            }
            self.pes = es;
        } else if ss == es {
            out.push(ss);
        }
        out
    }
}

pub fn interest(seq: u64, rtx: bool, cwnd: u32) -> InterestPacket {
    let name = Name::parse_prefix("/f").unwrap().with_seq(seq);
    InterestPacket::new(name, seq as u32, 4000).with_btag(BundleTag::transport(rtx, cwnd))
}

pub fn crate_encode(enc: &mut Encoder, seq: u64, rtx: bool, cwnd: u32, c: &mut LinkCounters) -> Sent {
    match enc.encode(interest(seq, rtx, cwnd), SimTime::ZERO, c) {
        EncodeAction::Bundle(p) => {
            let t = p.btag.unwrap();
            assert_eq!(p.name.seq(), Some(t.start() as u64), "bundle name carries SS");
            Sent::Bundle(t.start() as u64, t.end() as u64)
        }
        EncodeAction::Suppress => Sent::Nothing,
        EncodeAction::Plain(_) => panic!("tagged sequenced Interest left unbundled"),
    }
}

pub fn crate_decode(dec: &mut Decoder, ss: u64, es: u64, c: &mut LinkCounters) -> Vec<u64> {
    let name = Name::parse_prefix("/f").unwrap().with_seq(ss);
    let pkt = InterestPacket::new(name, 7, 4000).with_btag(BundleTag::bundle(ss as u32, es as u32));
    dec.decode(pkt, SimTime::ZERO, c)
        .into_interests()
        .iter()
        .map(|p| p.name.seq().unwrap())
        .collect()
}

/// Runs seqs 1..=n through both encoders; the transport tags each with the
/// scheduled cwnd, capped by the number of chunks left.
pub fn issue_all(n: u64, bi: u32, schedule: &[u32]) -> Vec<Sent> {
    let mut enc = Encoder::new(bi, IDLE);
    let mut naive = NaiveEncoder::new(bi as u64);
    let mut c = LinkCounters::default();
    let mut sent = Vec::new();
    for seq in 1..=n {
        let cwnd = schedule[(seq - 1) as usize % schedule.len()].min((n - seq + 1) as u32);
        let got = crate_encode(&mut enc, seq, false, cwnd, &mut c);
        let want = naive.step(seq, false, cwnd as u64);
        assert_eq!(got, want, "encoder diverged at seq {seq}");
        sent.push(got);
    }
    sent
}


/// Issues 1..=n with the cwnd schedule, drops bundle `drop` if given, and
/// returns the concatenated decoder output. Every step is compared with the
/// naive replay.
pub fn flow_balance_case(n: u64, bi: u32, schedule: &[u32], drop: Option<usize>) -> Result<Vec<u64>, String> {
    let bundles: Vec<(u64, u64)> = issue_all(n, bi, schedule)
        .into_iter()
        .filter_map(|s| match s {
            Sent::Bundle(a, b) => Some((a, b)),
            Sent::Nothing => None,
        })
        .collect();
    let mut dec = Decoder::new(IDLE);
    let mut naive = NaiveDecoder { pes: 0 };
    let mut c = LinkCounters::default();
    let mut out = Vec::new();
    for (i, &(ss, es)) in bundles.iter().enumerate() {
        if Some(i) == drop {
            continue;
        }
        let got = crate_decode(&mut dec, ss, es, &mut c);
        let want = naive.step(ss, es);
        if got != want {
            return Err(format!("decoder diverged on ({ss}, {es}): {got:?} vs {want:?}"));
        }
        out.extend(got);
    }
    Ok(out)
}

pub fn bundle_count(n: u64, bi: u32, schedule: &[u32]) -> usize {
    issue_all(n, bi, schedule).iter().filter(|s| **s != Sent::Nothing).count()
}

pub fn arb_name() -> impl Strategy<Value = Name> {
    (
        prop::collection::vec("[a-zA-Z0-9._-]{1,12}", 1..5),
        prop::option::of(any::<u64>()),
    )
        .prop_map(|(c, seq)| Name::new(c, seq).unwrap())
}

pub fn arb_interest() -> impl Strategy<Value = InterestPacket> {
    (
        arb_name(),
        any::<u32>(),
        prop_oneof![Just(4000u64), any::<u64>()],
        prop::option::of(any::<u64>()),
    )
        .prop_map(|(name, nonce, lifetime_ms, tag)| InterestPacket {
            name,
            nonce,
            lifetime_ms,
            btag: tag.map(BundleTag::from_raw),
        })
}

pub fn arb_data() -> impl Strategy<Value = DataPacket> {
    (arb_name(), 0usize..70_000).prop_map(|(name, len)| DataPacket::new(name, len))
}
