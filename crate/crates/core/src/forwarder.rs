//! Minimal NDN forwarder: content store, pending interest table and a static FIB.
//!
//! The forwarder treats the bundle tag as opaque; it never reads or rewrites it.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use crate::kernel::SimTime;
use crate::tlv::{DataPacket, InterestPacket, Name};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FaceId(pub u32);

impl FaceId {
    /// Local face to the application on every node.
    pub const APP: FaceId = FaceId(0);
    /// The node's wireless NIC.
    pub const WIRELESS: FaceId = FaceId(1);
}

pub const DEFAULT_CS_CAPACITY: usize = 4096;

#[derive(Debug, Clone)]
pub struct PitEntry {
    pub name: Name,
    pub nonces: Vec<u32>,
    pub in_faces: Vec<FaceId>,
    pub expiry: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FibEntry {
    pub prefix: Name,
    pub out_face: FaceId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsEntry {
    pub name: Name,
    pub data: DataPacket,
    pub insertion_time: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InterestAction {
    ReplyFromCs(DataPacket),
    Aggregate,
    Forward { face: FaceId, interest: InterestPacket },
    DropDuplicate,
    NoRoute,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataAction {
    Deliver { faces: Vec<FaceId>, data: DataPacket },
    DropUnsolicited,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ForwarderCounters {
    pub interests_in: u64,
    pub interests_out: u64,
    pub data_in: u64,
    pub data_out: u64,
    pub aggregations: u64,
    pub duplicates: u64,
    pub no_route: u64,
    pub unsolicited: u64,
    pub cs_hits: u64,
    pub pit_expired: u64,
}

pub struct ContentStore {
    capacity: usize,
    order: VecDeque<Name>,
    entries: HashMap<Name, CsEntry>,
}

impl ContentStore {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            order: VecDeque::new(),
            entries: HashMap::new(),
        }
    }

    pub fn get(&self, name: &Name) -> Option<&CsEntry> {
        self.entries.get(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, data: DataPacket, now: SimTime) {
        if self.capacity == 0 {
            return;
        }
        let name = data.name.clone();
        let entry = CsEntry {
            name: name.clone(),
            data,
            insertion_time: now,
        };
        if self.entries.insert(name.clone(), entry).is_some() {
            return;
        }
        self.order.push_back(name);
        while self.entries.len() > self.capacity {
            let oldest = self.order.pop_front().expect("order tracks entries");
            self.entries.remove(&oldest);
        }
    }
}

/// What to do with Data that matches no PIT entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnsolicitedPolicy {
    #[default]
    DropAll,
    /// Cache it so a later Interest for the name is answered locally.
    AdmitAll,
}

pub struct Forwarder {
    cs: ContentStore,
    unsolicited_policy: UnsolicitedPolicy,
    pit: HashMap<Name, PitEntry>,
    expiries: BinaryHeap<Reverse<(SimTime, Name)>>,
    fib: Vec<FibEntry>,
    counters: ForwarderCounters,
    out_data_per_face: HashMap<FaceId, u64>,
    in_interest_per_face: HashMap<FaceId, u64>,
    trace: Option<Vec<Name>>,
}

impl Forwarder {
    pub fn new(cs_capacity: usize) -> Self {
        Self {
            cs: ContentStore::new(cs_capacity),
            unsolicited_policy: UnsolicitedPolicy::DropAll,
            pit: HashMap::new(),
            expiries: BinaryHeap::new(),
            fib: Vec::new(),
            counters: ForwarderCounters::default(),
            out_data_per_face: HashMap::new(),
            in_interest_per_face: HashMap::new(),
            trace: None,
        }
    }

    pub fn set_unsolicited_policy(&mut self, policy: UnsolicitedPolicy) {
        self.unsolicited_policy = policy;
    }

    pub fn add_route(&mut self, prefix: Name, out_face: FaceId) {
        self.fib.retain(|e| e.prefix != prefix);
        self.fib.push(FibEntry { prefix, out_face });
    }

    /// Records the name of every incoming Interest, in processing order.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> &[Name] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn counters(&self) -> ForwarderCounters {
        self.counters
    }

    pub fn pit_len(&self) -> usize {
        self.pit.len()
    }

    pub fn pit_entry(&self, name: &Name) -> Option<&PitEntry> {
        self.pit.get(name)
    }

    pub fn cs(&self) -> &ContentStore {
        &self.cs
    }

    pub fn interests_received_on(&self, face: FaceId) -> u64 {
        self.in_interest_per_face.get(&face).copied().unwrap_or(0)
    }

    pub fn data_sent_on(&self, face: FaceId) -> u64 {
        self.out_data_per_face.get(&face).copied().unwrap_or(0)
    }

    fn lookup_fib(&self, name: &Name) -> Option<FaceId> {
        self.fib
            .iter()
            .filter(|e| e.prefix.is_prefix_of(name))
            .max_by_key(|e| e.prefix.components().len() + usize::from(e.prefix.seq().is_some()))
            .map(|e| e.out_face)
    }

    /// Removes PIT entries whose lifetime has passed.
    pub fn expire(&mut self, now: SimTime) {
        while let Some(Reverse((at, _))) = self.expiries.peek() {
            if *at > now {
                break;
            }
            let Reverse((at, name)) = self.expiries.pop().expect("peeked");
            if self.pit.get(&name).is_some_and(|e| e.expiry == at) {
                self.pit.remove(&name);
                self.counters.pit_expired += 1;
            }
        }
    }

    pub fn on_incoming_interest(
        &mut self,
        face: FaceId,
        pkt: InterestPacket,
        now: SimTime,
    ) -> InterestAction {
        self.expire(now);
        self.counters.interests_in += 1;
        *self.in_interest_per_face.entry(face).or_default() += 1;
        if let Some(trace) = &mut self.trace {
            trace.push(pkt.name.clone());
        }

        if let Some(hit) = self.cs.get(&pkt.name) {
            self.counters.cs_hits += 1;
            let data = hit.data.clone();
            self.count_data_out(face);
            return InterestAction::ReplyFromCs(data);
        }

        let expiry = now + SimTime::from_millis(pkt.lifetime_ms);
        if let Some(entry) = self.pit.get_mut(&pkt.name) {
            if entry.nonces.contains(&pkt.nonce) {
                self.counters.duplicates += 1;
                return InterestAction::DropDuplicate;
            }
            entry.nonces.push(pkt.nonce);
            if !entry.in_faces.contains(&face) {
                entry.in_faces.push(face);
                self.counters.aggregations += 1;
                return InterestAction::Aggregate;
            }
            // Same downstream asking again with a fresh nonce: a retransmission.
            entry.expiry = entry.expiry.max(expiry);
            let at = entry.expiry;
            self.expiries.push(Reverse((at, pkt.name.clone())));
        }

        let Some(out_face) = self.lookup_fib(&pkt.name) else {
            self.counters.no_route += 1;
            return InterestAction::NoRoute;
        };

        self.pit.entry(pkt.name.clone()).or_insert_with(|| {
            self.expiries.push(Reverse((expiry, pkt.name.clone())));
            PitEntry {
                name: pkt.name.clone(),
                nonces: vec![pkt.nonce],
                in_faces: vec![face],
                expiry,
            }
        });
        self.counters.interests_out += 1;
        InterestAction::Forward {
            face: out_face,
            interest: pkt,
        }
    }

    pub fn on_incoming_data(&mut self, _face: FaceId, pkt: DataPacket, now: SimTime) -> DataAction {
        self.expire(now);
        self.counters.data_in += 1;
        let Some(entry) = self.pit.remove(&pkt.name) else {
            self.counters.unsolicited += 1;
            if self.unsolicited_policy == UnsolicitedPolicy::AdmitAll {
                self.cs.insert(pkt, now);
            }
            return DataAction::DropUnsolicited;
        };
        self.cs.insert(pkt.clone(), now);
        for f in &entry.in_faces {
            self.count_data_out(*f);
        }
        DataAction::Deliver {
            faces: entry.in_faces,
            data: pkt,
        }
    }

    fn count_data_out(&mut self, face: FaceId) {
        self.counters.data_out += 1;
        *self.out_data_per_face.entry(face).or_default() += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn name(seq: u64) -> Name {
        Name::parse_prefix("/f").unwrap().with_seq(seq)
    }

    fn fwd() -> Forwarder {
        let mut f = Forwarder::new(DEFAULT_CS_CAPACITY);
        f.add_route(Name::parse_prefix("/f").unwrap(), FaceId(2));
        f
    }

    fn interest(seq: u64, nonce: u32) -> InterestPacket {
        InterestPacket::new(name(seq), nonce, 4000)
    }

    #[test]
    fn base_path_forwards_and_creates_pit() {
        let mut f = fwd();
        let act = f.on_incoming_interest(FaceId(0), interest(1, 7), SimTime::ZERO);
        assert!(matches!(act, InterestAction::Forward { face: FaceId(2), .. }));
        assert!(f.pit_entry(&name(1)).is_some());
    }

    #[test]
    fn second_nonce_from_other_face_aggregates() {
        let mut f = fwd();
        f.on_incoming_interest(FaceId(0), interest(1, 7), SimTime::ZERO);
        let act = f.on_incoming_interest(FaceId(3), interest(1, 8), SimTime(10));
        assert_eq!(act, InterestAction::Aggregate);
        assert_eq!(f.counters().interests_out, 1);
        assert_eq!(f.counters().aggregations, 1);
    }

    #[test]
    fn known_nonce_is_duplicate() {
        let mut f = fwd();
        f.on_incoming_interest(FaceId(0), interest(1, 7), SimTime::ZERO);
        let act = f.on_incoming_interest(FaceId(3), interest(1, 7), SimTime(10));
        assert_eq!(act, InterestAction::DropDuplicate);
    }

    #[test]
    fn same_nonce_different_seq_is_not_duplicate() {
        let mut f = fwd();
        for seq in 1..=3 {
            let act = f.on_incoming_interest(FaceId(1), interest(seq, 42), SimTime::ZERO);
            assert!(matches!(act, InterestAction::Forward { .. }));
        }
        assert_eq!(f.counters().duplicates, 0);
    }

    #[test]
    fn retransmission_from_same_face_is_forwarded() {
        let mut f = fwd();
        f.on_incoming_interest(FaceId(0), interest(1, 7), SimTime::ZERO);
        let act = f.on_incoming_interest(FaceId(0), interest(1, 9), SimTime(10));
        assert!(matches!(act, InterestAction::Forward { .. }));
        assert_eq!(f.pit_entry(&name(1)).unwrap().in_faces, vec![FaceId(0)]);
    }

    #[test]
    fn no_route_counts() {
        let mut f = fwd();
        let pkt = InterestPacket::new(Name::parse_prefix("/g").unwrap().with_seq(1), 1, 4000);
        assert_eq!(
            f.on_incoming_interest(FaceId(0), pkt, SimTime::ZERO),
            InterestAction::NoRoute
        );
        assert_eq!(f.counters().no_route, 1);
        assert_eq!(f.pit_len(), 0);
    }

    #[test]
    fn data_satisfies_pit_and_fills_cs() {
        let mut f = fwd();
        f.on_incoming_interest(FaceId(0), interest(1, 7), SimTime::ZERO);
        let act = f.on_incoming_data(FaceId(2), DataPacket::new(name(1), 1460), SimTime(5));
        assert_eq!(
            act,
            DataAction::Deliver {
                faces: vec![FaceId(0)],
                data: DataPacket::new(name(1), 1460)
            }
        );
        assert_eq!(f.pit_len(), 0);
        let hit = f.on_incoming_interest(FaceId(0), interest(1, 99), SimTime(6));
        assert!(matches!(hit, InterestAction::ReplyFromCs(_)));
    }

    #[test]
    fn unsolicited_data_dropped() {
        let mut f = fwd();
        let act = f.on_incoming_data(FaceId(2), DataPacket::new(name(9), 1460), SimTime::ZERO);
        assert_eq!(act, DataAction::DropUnsolicited);
        assert_eq!(f.counters().unsolicited, 1);
        assert!(f.cs().is_empty());
    }

    #[test]
    fn admitted_unsolicited_data_answers_later_interest() {
        let mut f = fwd();
        f.set_unsolicited_policy(UnsolicitedPolicy::AdmitAll);
        let act = f.on_incoming_data(FaceId(2), DataPacket::new(name(9), 1460), SimTime::ZERO);
        assert_eq!(act, DataAction::DropUnsolicited);
        let hit = f.on_incoming_interest(FaceId(0), interest(9, 5), SimTime(3));
        assert_eq!(hit, InterestAction::ReplyFromCs(DataPacket::new(name(9), 1460)));
        assert_eq!(f.pit_len(), 0);
    }

    #[test]
    fn aggregated_entry_delivers_to_every_face() {
        let mut f = fwd();
        f.on_incoming_interest(FaceId(0), interest(1, 1), SimTime::ZERO);
        f.on_incoming_interest(FaceId(3), interest(1, 2), SimTime::ZERO);
        match f.on_incoming_data(FaceId(2), DataPacket::new(name(1), 10), SimTime(1)) {
            DataAction::Deliver { faces, .. } => assert_eq!(faces, vec![FaceId(0), FaceId(3)]),
            other => panic!("{other:?}"),
        }
        assert_eq!(f.data_sent_on(FaceId(0)), 1);
        assert_eq!(f.data_sent_on(FaceId(3)), 1);
    }

    #[test]
    fn pit_entry_expires_after_lifetime() {
        let mut f = fwd();
        f.on_incoming_interest(FaceId(0), interest(1, 1), SimTime::ZERO);
        f.expire(SimTime::from_millis(3999));
        assert_eq!(f.pit_len(), 1);
        f.expire(SimTime::from_millis(4000));
        assert_eq!(f.pit_len(), 0);
        assert_eq!(f.counters().pit_expired, 1);
        let late = f.on_incoming_data(FaceId(2), DataPacket::new(name(1), 10), SimTime::from_secs(5));
        assert_eq!(late, DataAction::DropUnsolicited);
    }

    #[test]
    fn refreshed_entry_survives_original_expiry() {
        let mut f = fwd();
        f.on_incoming_interest(FaceId(0), interest(1, 1), SimTime::ZERO);
        f.on_incoming_interest(FaceId(0), interest(1, 2), SimTime::from_secs(2));
        f.expire(SimTime::from_millis(4500));
        assert_eq!(f.pit_len(), 1);
        f.expire(SimTime::from_secs(6));
        assert_eq!(f.pit_len(), 0);
    }

    #[test]
    fn cs_evicts_fifo() {
        let mut cs = ContentStore::new(2);
        for seq in 1..=3 {
            cs.insert(DataPacket::new(name(seq), 1), SimTime(seq));
        }
        assert!(cs.get(&name(1)).is_none());
        assert!(cs.get(&name(2)).is_some() && cs.get(&name(3)).is_some());
        assert_eq!(cs.len(), 2);
    }

    #[test]
    fn longest_prefix_wins() {
        let mut f = fwd();
        f.add_route(Name::parse_prefix("/f/special").unwrap(), FaceId(5));
        let pkt = InterestPacket::new(
            Name::parse_prefix("/f/special").unwrap().with_seq(1),
            1,
            4000,
        );
        assert!(matches!(
            f.on_incoming_interest(FaceId(0), pkt, SimTime::ZERO),
            InterestAction::Forward { face: FaceId(5), .. }
        ));
    }

    #[test]
    fn flow_balance_per_face() {
        let mut f = fwd();
        for seq in 1..=20 {
            f.on_incoming_interest(FaceId(0), interest(seq, seq as u32), SimTime::ZERO);
        }
        for seq in (1..=25).rev() {
            f.on_incoming_data(FaceId(2), DataPacket::new(name(seq), 1), SimTime(1));
        }
        assert_eq!(f.interests_received_on(FaceId(0)), 20);
        assert_eq!(f.data_sent_on(FaceId(0)), 20);
    }
}
