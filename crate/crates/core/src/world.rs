//! Two-node topology: a consumer and a producer sharing one wireless medium.
//!
//! Each node runs a forwarder with an application face and a wireless face.
//! The consumer's wireless face carries the bundling encoder, the producer's
//! the decoder. All processing is instantaneous; the medium is the only
//! source of delay.

use crate::apps::{FileSpec, Producer, PushSource};
use crate::channel::{Channel, ChannelLogEntry, ChannelProfile, FrameKind, FrameTx, LossScript, NodeId, Outcome};
use crate::forwarder::{DataAction, FaceId, Forwarder, ForwarderCounters, InterestAction, DEFAULT_CS_CAPACITY};
use crate::kernel::{Kernel, SimTime};
use crate::link::{EncodeAction, LinkConfig, LinkCounters, LinkService};
use crate::tlv::{DataPacket, InterestPacket, Name};
use crate::transport::{RttTraceEntry, Transport, TransportConfig, TransportCounters};

#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Interest(InterestPacket),
    Data(DataPacket),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Start,
    TxComplete,
    Timeout { seq: u64, generation: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorldMode {
    /// Regular fetch; `bundling` turns the consumer's encoder on.
    Fetch { bundling: bool, bi: u32 },
    /// One trigger Interest, then the producer pushes the whole file.
    Push,
}

#[derive(Debug, Clone)]
pub struct WorldConfig {
    pub profile: ChannelProfile,
    pub loss: LossScript,
    pub mode: WorldMode,
    pub file: FileSpec,
    pub transport: TransportConfig,
    pub seed: u64,
    pub deadline: SimTime,
    pub channel_log: bool,
    pub producer_trace: bool,
    pub cwnd_trace: bool,
}

/// Raw counters gathered at the end of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub completed: bool,
    pub completion_time: SimTime,
    pub end_time: SimTime,
    pub payload_bytes_delivered: u64,
    pub chunks_delivered: u64,
    pub consumer_interest_frames: u64,
    pub producer_data_frames: u64,
    pub consumer_data_frames_received: u64,
    pub frames_dropped: u64,
    pub channel_busy: SimTime,
    pub transport: TransportCounters,
    pub consumer_link: LinkCounters,
    pub producer_link: LinkCounters,
    pub consumer_fwd: ForwarderCounters,
    pub producer_fwd: ForwarderCounters,
    pub producer_served: u64,
    pub events: u64,
}

pub struct RunOutput {
    pub stats: RunStats,
    pub channel_log: Vec<ChannelLogEntry>,
    pub producer_trace: Vec<Name>,
    pub cwnd_trace: Vec<(SimTime, f64)>,
    pub rtt_trace: Vec<RttTraceEntry>,
}

struct World {
    mode: WorldMode,
    channel: Channel<Frame>,
    transport: Transport,
    consumer_fwd: Forwarder,
    consumer_link: LinkService,
    producer_fwd: Forwarder,
    producer_link: LinkService,
    producer: Producer,
    push: Option<PushSource>,
    file: FileSpec,
    completed_at: Option<SimTime>,
    last_push_done: SimTime,
    payload_bytes: u64,
    chunks: u64,
    c_rcv: u64,
}

impl World {
    fn send(&mut self, k: &mut Kernel<Event>, src: NodeId, frame: Frame) {
        let (kind, len) = match &frame {
            Frame::Interest(i) => (FrameKind::Interest, i.wire_len()),
            Frame::Data(d) => (FrameKind::Data, d.wire_len()),
        };
        let dst = if src == NodeId::CONSUMER { NodeId::PRODUCER } else { NodeId::CONSUMER };
        let wire_len = len + self.channel.profile().mac_header_bytes;
        let tx = FrameTx {
            src,
            dst,
            wire_len,
            kind,
            enqueue_time: k.now(),
            payload: frame,
        };
        if let Some(done) = self.channel.transmit(k.now(), tx) {
            k.schedule_at(done, Event::TxComplete);
        }
    }

    /// Lets the transport fill its window and pushes the Interests down the stack.
    fn pump(&mut self, k: &mut Kernel<Event>) {
        let now = k.now();
        for issued in self.transport.issue_ready(now) {
            k.schedule(issued.rto, Event::Timeout { seq: issued.seq, generation: issued.generation });
            match self.consumer_fwd.on_incoming_interest(FaceId::APP, issued.interest, now) {
                InterestAction::Forward { face, interest } => {
                    debug_assert_eq!(face, FaceId::WIRELESS);
                    match self.consumer_link.encode_outgoing_interest(interest, now) {
                        EncodeAction::Bundle(p) | EncodeAction::Plain(p) => {
                            self.send(k, NodeId::CONSUMER, Frame::Interest(p))
                        }
                        EncodeAction::Suppress => {}
                    }
                }
                InterestAction::ReplyFromCs(d) => self.deliver_to_consumer_app(d, now),
                InterestAction::Aggregate | InterestAction::DropDuplicate | InterestAction::NoRoute => {}
            }
        }
    }

    fn deliver_to_consumer_app(&mut self, d: DataPacket, now: SimTime) {
        let Some(seq) = d.name.seq() else { return };
        if self.transport.on_data(seq, now) == crate::transport::DataVerdict::New {
            self.payload_bytes += d.payload_len as u64;
            self.chunks += 1;
            if self.transport.is_complete() && self.completed_at.is_none() {
                self.completed_at = Some(now);
            }
        }
    }

    fn on_frame(&mut self, k: &mut Kernel<Event>, dst: NodeId, frame: Frame) {
        let now = k.now();
        match (dst, frame) {
            (NodeId::PRODUCER, Frame::Interest(pkt)) => {
                for interest in self.producer_link.decode_incoming_interest(pkt, now) {
                    self.producer_interest(k, interest);
                }
            }
            (NodeId::CONSUMER, Frame::Data(d)) => {
                self.c_rcv += 1;
                if matches!(self.mode, WorldMode::Push) {
                    self.payload_bytes += d.payload_len as u64;
                    self.chunks += 1;
                    return;
                }
                if let DataAction::Deliver { faces, data } =
                    self.consumer_fwd.on_incoming_data(FaceId::WIRELESS, d, now)
                {
                    if faces.contains(&FaceId::APP) {
                        self.deliver_to_consumer_app(data, now);
                    }
                }
                self.pump(k);
            }
            (node, f) => unreachable!("node {node} cannot receive {f:?}"),
        }
    }

    fn producer_interest(&mut self, k: &mut Kernel<Event>, interest: InterestPacket) {
        let now = k.now();
        match self.producer_fwd.on_incoming_interest(FaceId::WIRELESS, interest, now) {
            InterestAction::Forward { interest, .. } => {
                if let Some(push) = self.push.as_mut() {
                    if push.trigger() {
                        if let Some(d) = push.next_chunk() {
                            self.send(k, NodeId::PRODUCER, Frame::Data(d));
                        }
                    }
                    return;
                }
                if let Some(data) = self.producer.on_interest(&interest) {
                    if let DataAction::Deliver { data, .. } =
                        self.producer_fwd.on_incoming_data(FaceId::APP, data, now)
                    {
                        self.send(k, NodeId::PRODUCER, Frame::Data(data));
                    }
                }
            }
            InterestAction::ReplyFromCs(d) => self.send(k, NodeId::PRODUCER, Frame::Data(d)),
            InterestAction::Aggregate | InterestAction::DropDuplicate | InterestAction::NoRoute => {}
        }
    }

    fn push_done(&self) -> bool {
        self.push
            .as_ref()
            .is_some_and(|p| p.pushed() == self.file.n_chunks && !self.channel.is_busy() && self.channel.queued() == 0)
    }

    fn finished(&self) -> bool {
        match self.mode {
            WorldMode::Fetch { .. } => self.completed_at.is_some(),
            WorldMode::Push => self.push_done(),
        }
    }
}

impl crate::kernel::Handler<Event> for World {
    fn handle(&mut self, k: &mut Kernel<Event>, event: Event) {
        match event {
            Event::Start => match self.mode {
                WorldMode::Fetch { .. } => self.pump(k),
                WorldMode::Push => {
                    let trigger = InterestPacket::new(self.file.prefix.with_seq(1), 1, 4000);
                    if let InterestAction::Forward { interest, .. } =
                        self.consumer_fwd.on_incoming_interest(FaceId::APP, trigger, k.now())
                    {
                        self.send(k, NodeId::CONSUMER, Frame::Interest(interest));
                    }
                }
            },
            Event::TxComplete => {
                let (frame, outcome, next) = self.channel.complete(k.now());
                if let Some(t) = next {
                    k.schedule_at(t, Event::TxComplete);
                }
                let from_producer = frame.src == NodeId::PRODUCER;
                if outcome == Outcome::Delivered {
                    self.on_frame(k, frame.dst, frame.payload);
                }
                if from_producer && matches!(self.mode, WorldMode::Push) {
                    self.last_push_done = k.now();
                    if let Some(d) = self.push.as_mut().and_then(PushSource::next_chunk) {
                        self.send(k, NodeId::PRODUCER, Frame::Data(d));
                    }
                }
            }
            Event::Timeout { seq, generation } => {
                if self.completed_at.is_none() && self.transport.on_timeout(seq, generation, k.now()) {
                    self.pump(k);
                }
            }
        }
    }
}

pub fn run(cfg: &WorldConfig) -> RunOutput {
    let mut kernel: Kernel<Event> = Kernel::new(cfg.seed);
    let mut channel = Channel::new(cfg.profile.clone(), cfg.loss.clone(), kernel.rng_stream("channel-loss"), 2);
    if cfg.channel_log {
        channel.enable_log();
    }
    let mut transport = Transport::new(
        cfg.transport,
        cfg.file.prefix.clone(),
        cfg.file.n_chunks,
        kernel.rng_stream("consumer-nonce"),
    );
    if cfg.cwnd_trace {
        transport.enable_cwnd_trace();
        transport.enable_rtt_trace();
    }
    let (bundling, bi) = match cfg.mode {
        WorldMode::Fetch { bundling, bi } => (bundling, bi),
        WorldMode::Push => (false, 1),
    };
    let mut consumer_fwd = Forwarder::new(DEFAULT_CS_CAPACITY);
    consumer_fwd.add_route(cfg.file.prefix.clone(), FaceId::WIRELESS);
    let mut producer_fwd = Forwarder::new(DEFAULT_CS_CAPACITY);
    producer_fwd.add_route(cfg.file.prefix.clone(), FaceId::APP);
    if cfg.producer_trace {
        producer_fwd.enable_trace();
    }
    let mut world = World {
        mode: cfg.mode,
        channel,
        transport,
        consumer_fwd,
        consumer_link: LinkService::new(LinkConfig::wireless(bi, bundling)),
        producer_fwd,
        producer_link: LinkService::new(LinkConfig::wireless(bi, bundling)),
        producer: Producer::new(cfg.file.clone()),
        push: matches!(cfg.mode, WorldMode::Push).then(|| PushSource::new(cfg.file.clone())),
        file: cfg.file.clone(),
        completed_at: None,
        last_push_done: SimTime::ZERO,
        payload_bytes: 0,
        chunks: 0,
        c_rcv: 0,
    };
    kernel.schedule(SimTime::ZERO, Event::Start);
    kernel.run_while(cfg.deadline, &mut world, World::finished);

    let completed = world.finished();
    let completion_time = match cfg.mode {
        WorldMode::Fetch { .. } => world.completed_at.unwrap_or(kernel.now()),
        WorldMode::Push => world.last_push_done,
    };
    let consumer_nic = world.channel.stats(NodeId::CONSUMER);
    let producer_nic = world.channel.stats(NodeId::PRODUCER);
    let stats = RunStats {
        completed,
        completion_time,
        end_time: kernel.now(),
        payload_bytes_delivered: world.payload_bytes,
        chunks_delivered: world.chunks,
        consumer_interest_frames: consumer_nic.interest_tx,
        producer_data_frames: producer_nic.data_tx,
        consumer_data_frames_received: world.c_rcv,
        frames_dropped: consumer_nic.dropped + producer_nic.dropped,
        channel_busy: world.channel.busy_time(),
        transport: world.transport.counters(),
        consumer_link: world.consumer_link.counters(),
        producer_link: world.producer_link.counters(),
        consumer_fwd: world.consumer_fwd.counters(),
        producer_fwd: world.producer_fwd.counters(),
        producer_served: world.producer.counters().served,
        events: kernel.executed(),
    };
    RunOutput {
        stats,
        channel_log: world.channel.take_log(),
        producer_trace: world.producer_fwd.trace().to_vec(),
        cwnd_trace: world.transport.cwnd_trace().to_vec(),
        rtt_trace: world.transport.rtt_trace().to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::CcAlgo;

    fn cfg(mode: WorldMode, bytes: u64) -> WorldConfig {
        WorldConfig {
            profile: ChannelProfile::ieee80211b(),
            loss: LossScript::lossless(),
            mode,
            file: FileSpec::new(Name::parse_prefix("/file").unwrap(), bytes, 1460),
            transport: TransportConfig {
                algo: CcAlgo::Aimd,
                ..TransportConfig::default()
            },
            seed: 7,
            deadline: SimTime::from_secs(600),
            channel_log: true,
            producer_trace: true,
            cwnd_trace: false,
        }
    }

    fn interest_frames(log: &[ChannelLogEntry]) -> usize {
        log.iter().filter(|e| e.kind == FrameKind::Interest).count()
    }

    #[test]
    fn ten_chunks_without_bundling() {
        let out = run(&cfg(WorldMode::Fetch { bundling: false, bi: 15 }, 1460 * 10));
        assert!(out.stats.completed);
        assert_eq!(interest_frames(&out.channel_log), 10);
        assert_eq!(out.stats.producer_data_frames, 10);
        assert_eq!(out.stats.transport.rtx, 0);
    }

    #[test]
    fn ten_chunks_bi5_sends_two_frames() {
        let mut c = cfg(WorldMode::Fetch { bundling: true, bi: 5 }, 1460 * 10);
        c.transport.initial_cwnd = 10.0;
        let out = run(&c);
        assert!(out.stats.completed);
        assert_eq!(interest_frames(&out.channel_log), 2);
        assert_eq!(out.stats.producer_data_frames, 10);
    }

    #[test]
    fn push_mode_three_chunks() {
        let out = run(&cfg(WorldMode::Push, 1460 * 3));
        assert!(out.stats.completed);
        assert_eq!(interest_frames(&out.channel_log), 1);
        let data = out.channel_log.iter().filter(|e| e.kind == FrameKind::Data).count();
        assert_eq!(data, 3);
        assert_eq!(out.stats.payload_bytes_delivered, 1460 * 3);
    }

    #[test]
    fn bundled_fetch_completes_under_loss() {
        let mut c = cfg(WorldMode::Fetch { bundling: true, bi: 15 }, 1460 * 2000);
        c.loss = LossScript::parse_list(&["random:0.02"]).unwrap();
        let out = run(&c);
        assert!(out.stats.completed, "{:?}", out.stats);
        assert_eq!(out.stats.chunks_delivered, 2000);
        assert_eq!(out.stats.transport.app_sent, 2000 + out.stats.transport.rtx);
        assert!(out.stats.consumer_data_frames_received <= out.stats.producer_data_frames);
    }

    #[test]
    fn deadline_reports_partial() {
        let mut c = cfg(WorldMode::Fetch { bundling: false, bi: 1 }, 1460 * 5000);
        c.deadline = SimTime::from_millis(50);
        let out = run(&c);
        assert!(!out.stats.completed);
        assert!(out.stats.chunks_delivered > 0 && out.stats.chunks_delivered < 5000);
    }
}
