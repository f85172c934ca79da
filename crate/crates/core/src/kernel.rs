//! Deterministic discrete-event kernel.
//!
//! Virtual time is an integer count of microseconds. Events with the same
//! fire time run in the order they were scheduled.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::{Add, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Virtual time in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}

/// Opaque handle returned by [`Kernel::schedule`], usable with [`Kernel::cancel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

struct Scheduled<E> {
    fire_time: SimTime,
    seq_no: u64,
    action: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_time == other.fire_time && self.seq_no == other.seq_no
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    // Reversed: BinaryHeap is a max-heap and we pop the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_time
            .cmp(&self.fire_time)
            .then_with(|| other.seq_no.cmp(&self.seq_no))
    }
}

/// Receives events popped by [`Kernel::run_until`].
pub trait Handler<E> {
    fn handle(&mut self, kernel: &mut Kernel<E>, event: E);
}

impl<E, F> Handler<E> for F
where
    F: FnMut(&mut Kernel<E>, E),
{
    fn handle(&mut self, kernel: &mut Kernel<E>, event: E) {
        self(kernel, event)
    }
}

pub struct Kernel<E> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Scheduled<E>>,
    pending: HashSet<u64>,
    executed: u64,
    seed: u64,
}

impl<E> Kernel<E> {
    pub fn new(seed: u64) -> Self {
        Self {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            pending: HashSet::new(),
            executed: 0,
            seed,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Total events executed so far.
    pub fn executed(&self) -> u64 {
        self.executed
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn schedule(&mut self, delay: SimTime, action: E) -> EventHandle {
        self.schedule_at(self.now + delay, action)
    }

    /// Schedules at an absolute time; times in the past are clamped to `now`.
    pub fn schedule_at(&mut self, at: SimTime, action: E) -> EventHandle {
        let seq_no = self.next_seq;
        self.next_seq += 1;
        self.pending.insert(seq_no);
        self.queue.push(Scheduled {
            fire_time: at.max(self.now),
            seq_no,
            action,
        });
        EventHandle(seq_no)
    }

    /// Returns true if the event was still pending. Cancelled events never run.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.pending.remove(&handle.0)
    }

    pub fn is_pending(&self, handle: EventHandle) -> bool {
        self.pending.contains(&handle.0)
    }

    /// Time of the next live event, if any.
    pub fn peek_time(&mut self) -> Option<SimTime> {
        while let Some(top) = self.queue.peek() {
            if self.pending.contains(&top.seq_no) {
                return Some(top.fire_time);
            }
            self.queue.pop();
        }
        None
    }

    fn pop_due(&mut self, until: SimTime) -> Option<E> {
        let at = self.peek_time()?;
        if at > until {
            return None;
        }
        let ev = self.queue.pop().expect("peeked");
        self.pending.remove(&ev.seq_no);
        debug_assert!(ev.fire_time >= self.now);
        self.now = ev.fire_time;
        self.executed += 1;
        Some(ev.action)
    }

    /// Executes every event with `fire_time <= until` and returns how many ran.
    /// The clock is left at the last executed event (it does not jump to `until`).
    pub fn run_until<H: Handler<E>>(&mut self, until: SimTime, handler: &mut H) -> u64 {
        let start = self.executed;
        while let Some(ev) = self.pop_due(until) {
            handler.handle(self, ev);
        }
        self.executed - start
    }

    /// Runs until `stop` returns true after an event, the queue drains, or `until` passes.
    pub fn run_while<H, P>(&mut self, until: SimTime, handler: &mut H, mut stop: P) -> u64
    where
        H: Handler<E>,
        P: FnMut(&H) -> bool,
    {
        let start = self.executed;
        while let Some(ev) = self.pop_due(until) {
            handler.handle(self, ev);
            if stop(handler) {
                break;
            }
        }
        self.executed - start
    }

    /// A random stream that is a pure function of (kernel seed, label).
    pub fn rng_stream(&self, label: &str) -> ChaCha8Rng {
        rng_stream(self.seed, label)
    }
}

pub fn rng_stream(seed: u64, label: &str) -> ChaCha8Rng {
    // FNV-1a over the label, mixed with the seed through splitmix64.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn ties_run_in_schedule_order() {
        let mut k = Kernel::new(0);
        k.schedule(SimTime(5), "first-t5");
        k.schedule(SimTime(5), "second-t5");
        k.schedule(SimTime(2), "t2");
        let mut order = Vec::new();
        let n = k.run_until(SimTime(10), &mut |k: &mut Kernel<&str>, e| {
            order.push((k.now(), e))
        });
        assert_eq!(n, 3);
        assert_eq!(
            order,
            vec![
                (SimTime(2), "t2"),
                (SimTime(5), "first-t5"),
                (SimTime(5), "second-t5")
            ]
        );
    }

    #[test]
    fn cancelled_event_never_runs() {
        let mut k = Kernel::new(0);
        let a = k.schedule(SimTime(1), 1);
        k.schedule(SimTime(2), 2);
        assert!(k.cancel(a));
        assert!(!k.cancel(a));
        let mut seen = Vec::new();
        let n = k.run_until(SimTime(10), &mut |_: &mut Kernel<i32>, e| seen.push(e));
        assert_eq!(n, 1);
        assert_eq!(seen, vec![2]);
    }

    #[test]
    fn cancel_after_fire_is_false() {
        let mut k = Kernel::new(0);
        let a = k.schedule(SimTime(1), ());
        k.run_until(SimTime(1), &mut |_: &mut Kernel<()>, _| {});
        assert!(!k.cancel(a));
    }

    #[test]
    fn run_until_leaves_later_events() {
        let mut k = Kernel::new(0);
        k.schedule(SimTime(3), 'a');
        k.schedule(SimTime(30), 'b');
        assert_eq!(k.run_until(SimTime(10), &mut |_: &mut Kernel<char>, _| {}), 1);
        assert_eq!(k.now(), SimTime(3));
        assert_eq!(k.peek_time(), Some(SimTime(30)));
    }

    #[test]
    fn handlers_can_schedule_follow_ups() {
        let mut k = Kernel::new(0);
        k.schedule(SimTime(1), 3u32);
        let mut times = Vec::new();
        k.run_until(SimTime::MAX, &mut |k: &mut Kernel<u32>, left: u32| {
            times.push(k.now().0);
            if left > 0 {
                k.schedule(SimTime(left as u64), left - 1);
            }
        });
        assert_eq!(times, vec![1, 4, 6, 7]);
    }

    #[test]
    fn clock_is_monotone_under_random_schedules() {
        let mut rng = rng_stream(9, "sched");
        let mut k = Kernel::new(9);
        for _ in 0..500 {
            k.schedule(SimTime(rng.gen_range(0..1000)), ());
        }
        let mut last = SimTime::ZERO;
        k.run_until(SimTime::MAX, &mut |k: &mut Kernel<()>, _| {
            assert!(k.now() >= last);
            last = k.now();
        });
    }

    #[test]
    fn rng_stream_is_pure_in_seed_and_label() {
        let draw = |seed, label| {
            let mut r = rng_stream(seed, label);
            (0..8).map(|_| r.gen::<u32>()).collect::<Vec<_>>()
        };
        assert_eq!(draw(42, "loss"), draw(42, "loss"));
        assert_ne!(draw(42, "loss"), draw(42, "nonce"));
        assert_ne!(draw(42, "loss"), draw(43, "loss"));
    }
}
