//! Consumer-side Interest scheduling: congestion window, RTT estimation,
//! retransmission timers and bundle-tag marking.
//!
//! The transport is clock-agnostic. It hands out Interests together with
//! the timeout to arm, and the caller feeds back Data arrivals and timer
//! expiries. Each (re)send of a sequence bumps a generation counter so a
//! stale timer can be recognised and ignored.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kernel::SimTime;
use crate::tlv::{BundleTag, InterestPacket, Name};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CcAlgo {
    Aimd,
    Cubic,
}

impl fmt::Display for CcAlgo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CcAlgo::Aimd => "aimd",
            CcAlgo::Cubic => "cubic",
        })
    }
}

impl FromStr for CcAlgo {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "aimd" => Ok(CcAlgo::Aimd),
            "cubic" => Ok(CcAlgo::Cubic),
            other => Err(format!("unknown congestion control {other:?} (expected aimd or cubic)")),
        }
    }
}

pub const CUBIC_C: f64 = 0.4;
pub const CUBIC_BETA: f64 = 0.7;
const AIMD_BETA: f64 = 0.5;
const MIN_SSTHRESH: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportConfig {
    pub algo: CcAlgo,
    pub gamma: f64,
    pub initial_cwnd: f64,
    pub rto_min: SimTime,
    pub rto_max: SimTime,
    pub initial_rto: SimTime,
    pub interest_lifetime_ms: u64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self {
            algo: CcAlgo::Aimd,
            gamma: 4.0,
            initial_cwnd: 1.0,
            rto_min: SimTime::from_millis(10),
            rto_max: SimTime::from_secs(60),
            initial_rto: SimTime::from_secs(1),
            interest_lifetime_ms: 4000,
        }
    }
}

/// Smoothed RTT and variance, values in microseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RttEstimator {
    pub srtt: f64,
    pub rttvar: f64,
    pub gamma: f64,
    pub rto_min: SimTime,
    pub rto_max: SimTime,
    pub initial_rto: SimTime,
    samples: u64,
}

impl RttEstimator {
    pub fn new(gamma: f64, rto_min: SimTime, rto_max: SimTime, initial_rto: SimTime) -> Self {
        Self {
            srtt: 0.0,
            rttvar: 0.0,
            gamma,
            rto_min,
            rto_max,
            initial_rto,
            samples: 0,
        }
    }

    pub fn from_config(cfg: &TransportConfig) -> Self {
        Self::new(cfg.gamma, cfg.rto_min, cfg.rto_max, cfg.initial_rto)
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn add_sample(&mut self, rtt: SimTime) {
        let r = rtt.as_micros() as f64;
        if self.samples == 0 {
            self.srtt = r;
            self.rttvar = r / 2.0;
        } else {
            self.rttvar = 0.75 * self.rttvar + 0.25 * (self.srtt - r).abs();
            self.srtt = 0.875 * self.srtt + 0.125 * r;
        }
        self.samples += 1;
    }

    pub fn rto(&self) -> SimTime {
        compute_rto(self)
    }

    pub fn srtt(&self) -> Option<SimTime> {
        (self.samples > 0).then(|| SimTime::from_micros(self.srtt.round() as u64))
    }
}

pub fn compute_rto(est: &RttEstimator) -> SimTime {
    if est.samples == 0 {
        return est.initial_rto;
    }
    let raw = (est.srtt + est.gamma * est.rttvar).round().max(0.0) as u64;
    SimTime::from_micros(raw.clamp(est.rto_min.as_micros(), est.rto_max.as_micros()))
}

/// Counts how many samples of `trace` would exceed the RTO in force just before
/// each one. Every sample is fed to the estimator regardless.
pub fn count_timeouts(trace: &[SimTime], gamma: f64, cfg: &TransportConfig) -> usize {
    let mut est = RttEstimator::new(gamma, cfg.rto_min, cfg.rto_max, cfg.initial_rto);
    let mut n = 0;
    for &r in trace {
        if r > est.rto() {
            n += 1;
        }
        est.add_sample(r);
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CongestionWindow {
    pub algo: CcAlgo,
    pub cwnd: f64,
    pub ssthresh: f64,
    pub w_max: f64,
    last_decrease: Option<SimTime>,
}

impl CongestionWindow {
    pub fn new(algo: CcAlgo, initial: f64) -> Self {
        Self {
            algo,
            cwnd: initial.max(1.0),
            ssthresh: f64::INFINITY,
            w_max: 0.0,
            last_decrease: None,
        }
    }

    /// Window used for tagging and issuing.
    pub fn window(&self) -> u32 {
        self.cwnd.floor().max(1.0) as u32
    }

    pub fn on_ack(&mut self, now: SimTime, srtt: Option<SimTime>) {
        if self.cwnd < self.ssthresh {
            self.cwnd += 1.0;
            return;
        }
        match self.algo {
            CcAlgo::Aimd => self.cwnd += 1.0 / self.cwnd,
            CcAlgo::Cubic => {
                let t = self
                    .last_decrease
                    .map_or(0.0, |d| now.saturating_sub(d).as_secs_f64());
                let rtt = srtt.map_or(0.1, |s| s.as_secs_f64().max(1e-6));
                let w_cubic = cubic_window(self.w_max, t);
                let w_est = self.w_max * CUBIC_BETA
                    + 3.0 * (1.0 - CUBIC_BETA) / (1.0 + CUBIC_BETA) * (t / rtt);
                let target = w_cubic.max(w_est);
                if target > self.cwnd {
                    self.cwnd += (target - self.cwnd) / self.cwnd;
                }
            }
        }
    }

    pub fn on_loss(&mut self, now: SimTime) {
        match self.algo {
            CcAlgo::Aimd => {
                self.ssthresh = (self.cwnd * AIMD_BETA).max(MIN_SSTHRESH);
                self.cwnd = 1.0;
            }
            CcAlgo::Cubic => {
                self.w_max = self.cwnd;
                self.ssthresh = (self.cwnd * CUBIC_BETA).max(MIN_SSTHRESH);
                self.cwnd = self.ssthresh;
            }
        }
        self.last_decrease = Some(now);
    }
}

/// Time (s) for the cubic curve to climb back to `w_max` after a decrease.
pub fn cubic_k(w_max: f64) -> f64 {
    (w_max * (1.0 - CUBIC_BETA) / CUBIC_C).cbrt()
}

pub fn cubic_window(w_max: f64, t: f64) -> f64 {
    CUBIC_C * (t - cubic_k(w_max)).powi(3) + w_max
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransportCounters {
    pub app_sent: u64,
    pub rtx: u64,
    pub timeouts: u64,
    pub decreases: u64,
    pub data_received: u64,
    pub duplicate_data: u64,
}

#[derive(Debug, Clone, Copy)]
struct Flight {
    sent_at: SimTime,
    retransmitted: bool,
    generation: u32,
}

/// An Interest ready for the forwarder plus the timer the caller must arm.
#[derive(Debug, Clone, PartialEq)]
pub struct Issued {
    pub seq: u64,
    pub generation: u32,
    pub rto: SimTime,
    pub interest: InterestPacket,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataVerdict {
    New,
    Duplicate,
    OutOfRange,
}

pub struct Transport {
    cfg: TransportConfig,
    prefix: Name,
    n_chunks: u64,
    next_seq: u64,
    cc: CongestionWindow,
    rtt: RttEstimator,
    in_flight: HashMap<u64, Flight>,
    generations: HashMap<u64, u32>,
    satisfied: Vec<bool>,
    satisfied_count: u64,
    rtx_queue: VecDeque<u64>,
    /// Highest seq issued when the window was last cut; later timeouts at or
    /// below it belong to the same loss event.
    recovery_point: u64,
    highest_issued: u64,
    nonce_rng: ChaCha8Rng,
    counters: TransportCounters,
    cwnd_trace: Option<Vec<(SimTime, f64)>>,
    rtt_trace: Option<Vec<RttTraceEntry>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RttTraceEntry {
    Sample { at: SimTime, seq: u64, rtt: SimTime, rto: SimTime },
    Timeout { at: SimTime, seq: u64, rto: SimTime },
}

impl Transport {
    pub fn new(cfg: TransportConfig, prefix: Name, n_chunks: u64, nonce_rng: ChaCha8Rng) -> Self {
        Self {
            cfg,
            prefix,
            n_chunks,
            next_seq: 1,
            cc: CongestionWindow::new(cfg.algo, cfg.initial_cwnd),
            rtt: RttEstimator::from_config(&cfg),
            in_flight: HashMap::new(),
            generations: HashMap::new(),
            satisfied: vec![false; n_chunks as usize + 1],
            satisfied_count: 0,
            rtx_queue: VecDeque::new(),
            recovery_point: 0,
            highest_issued: 0,
            nonce_rng,
            counters: TransportCounters::default(),
            cwnd_trace: None,
            rtt_trace: None,
        }
    }

    pub fn enable_cwnd_trace(&mut self) {
        self.cwnd_trace = Some(Vec::new());
    }

    pub fn enable_rtt_trace(&mut self) {
        self.rtt_trace = Some(Vec::new());
    }

    pub fn rtt_trace(&self) -> &[RttTraceEntry] {
        self.rtt_trace.as_deref().unwrap_or(&[])
    }

    pub fn cwnd_trace(&self) -> &[(SimTime, f64)] {
        self.cwnd_trace.as_deref().unwrap_or(&[])
    }

    pub fn counters(&self) -> TransportCounters {
        self.counters
    }

    pub fn cc(&self) -> &CongestionWindow {
        &self.cc
    }

    pub fn rtt(&self) -> &RttEstimator {
        &self.rtt
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    pub fn n_chunks(&self) -> u64 {
        self.n_chunks
    }

    pub fn is_complete(&self) -> bool {
        self.satisfied_count == self.n_chunks
    }

    pub fn satisfied_count(&self) -> u64 {
        self.satisfied_count
    }

    /// Builds the tagged Interest for `seq`. The tag carries the RTx flag and
    /// the window, shrunk to the number of chunks left at the end of the file.
    pub fn tag_and_issue(&mut self, seq: u64, is_rtx: bool) -> InterestPacket {
        let remaining = (self.n_chunks + 1).saturating_sub(seq).max(1);
        let cwnd = (self.cc.window() as u64).min(remaining) as u32;
        InterestPacket::new(self.prefix.with_seq(seq), self.nonce_rng.gen(), self.cfg.interest_lifetime_ms)
            .with_btag(BundleTag::transport(is_rtx, cwnd))
    }

    /// Everything the window currently allows, retransmissions first.
    pub fn issue_ready(&mut self, now: SimTime) -> Vec<Issued> {
        let mut out = Vec::new();
        while (self.in_flight.len() as u64) < self.cc.window() as u64 {
            let (seq, is_rtx) = if let Some(seq) = self.rtx_queue.pop_front() {
                if self.satisfied[seq as usize] || self.in_flight.contains_key(&seq) {
                    continue;
                }
                (seq, true)
            } else if self.next_seq <= self.n_chunks {
                let s = self.next_seq;
                self.next_seq += 1;
                (s, false)
            } else {
                break;
            };
            let interest = self.tag_and_issue(seq, is_rtx);
            let generation = {
                let g = self.generations.entry(seq).or_insert(0);
                *g += 1;
                *g
            };
            self.in_flight.insert(
                seq,
                Flight {
                    sent_at: now,
                    retransmitted: is_rtx,
                    generation,
                },
            );
            self.highest_issued = self.highest_issued.max(seq);
            self.counters.app_sent += 1;
            if is_rtx {
                self.counters.rtx += 1;
            }
            out.push(Issued {
                seq,
                generation,
                rto: self.rtt.rto(),
                interest,
            });
        }
        out
    }

    pub fn on_data(&mut self, seq: u64, now: SimTime) -> DataVerdict {
        self.counters.data_received += 1;
        if seq == 0 || seq > self.n_chunks {
            return DataVerdict::OutOfRange;
        }
        if self.satisfied[seq as usize] {
            self.counters.duplicate_data += 1;
            return DataVerdict::Duplicate;
        }
        self.satisfied[seq as usize] = true;
        self.satisfied_count += 1;
        // Data may answer an Interest whose timer already fired and is queued
        // for retransmission; the queue skips satisfied seqs.
        if let Some(f) = self.in_flight.remove(&seq) {
            if !f.retransmitted {
                let rtt = now.saturating_sub(f.sent_at);
                self.rtt.add_sample(rtt);
                if let Some(t) = self.rtt_trace.as_mut() {
                    t.push(RttTraceEntry::Sample { at: now, seq, rtt, rto: self.rtt.rto() });
                }
            }
        }
        self.generations.remove(&seq);
        self.cc.on_ack(now, self.rtt.srtt());
        self.trace(now);
        DataVerdict::New
    }

    /// Returns true when the timer was live and the seq was queued for retransmission.
    pub fn on_timeout(&mut self, seq: u64, generation: u32, now: SimTime) -> bool {
        match self.in_flight.get(&seq) {
            Some(f) if f.generation == generation => {}
            _ => return false,
        }
        self.in_flight.remove(&seq);
        self.counters.timeouts += 1;
        if let Some(t) = self.rtt_trace.as_mut() {
            t.push(RttTraceEntry::Timeout { at: now, seq, rto: self.rtt.rto() });
        }
        if seq > self.recovery_point {
            self.cc.on_loss(now);
            self.counters.decreases += 1;
            self.recovery_point = self.highest_issued;
            self.trace(now);
        }
        self.rtx_queue.push_back(seq);
        true
    }

    fn trace(&mut self, now: SimTime) {
        if let Some(t) = self.cwnd_trace.as_mut() {
            t.push((now, self.cc.cwnd));
        }
    }
}
