use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Direction attached to a clock ring.
///
/// For particles `Left`/`Right` is the jump direction. In the height picture
/// `Left` raises a local minimum and `Right` lowers a local maximum, which is
/// the same transition seen through the height map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mark {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub label: usize,
    pub mark: Mark,
}

/// Superposition of `labels` independent pairs of rate-1 Poisson clocks
/// (one `Left`, one `Right` per label), generated from a seed.
///
/// Feeding the same stream to several processes drives them with literally
/// the same randomness.
#[derive(Clone, Debug)]
pub struct EventStream {
    seed: u64,
    labels: usize,
    rng: ChaCha8Rng,
    time: f64,
    log: Option<Vec<Event>>,
}

impl EventStream {
    pub fn new(seed: u64, labels: usize) -> Self {
        assert!(labels > 0, "event stream needs at least one clock");
        EventStream {
            seed,
            labels,
            rng: ChaCha8Rng::seed_from_u64(seed),
            time: 0.0,
            log: None,
        }
    }

    /// Keep every emitted event for later inspection or dumping.
    pub fn recording(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    /// A fresh stream with the same seed; it reproduces the same events.
    pub fn replay(&self) -> Self {
        let fresh = EventStream::new(self.seed, self.labels);
        if self.log.is_some() {
            fresh.recording()
        } else {
            fresh
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn total_rate(&self) -> f64 {
        2.0 * self.labels as f64
    }

    pub fn next_event(&mut self) -> Event {
        let u: f64 = self.rng.gen();
        self.time += -(1.0 - u).ln() / self.total_rate();
        let draw = self.rng.gen_range(0..2 * self.labels);
        let event = Event {
            time: self.time,
            label: draw / 2,
            mark: if draw % 2 == 0 { Mark::Left } else { Mark::Right },
        };
        if let Some(log) = self.log.as_mut() {
            log.push(event);
        }
        event
    }

    /// Next event if it happens no later than `t_end`. A later event is
    /// discarded and the clock is left at `t_end`.
    pub fn next_before(&mut self, t_end: f64) -> Option<Event> {
        let e = self.next_event();
        if e.time <= t_end {
            Some(e)
        } else {
            if let Some(log) = self.log.as_mut() {
                log.pop();
            }
            self.time = t_end;
            None
        }
    }

    pub fn log(&self) -> &[Event] {
        self.log.as_deref().unwrap_or(&[])
    }

    /// Dumps the recorded events as JSON lines.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for e in self.log() {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// A process that can consume clock rings from an [`EventStream`].
pub trait ClockDriven {
    /// Applies the ring of clock `(label, mark)`; returns whether the state changed.
    fn apply(&mut self, label: usize, mark: Mark) -> bool;
}

/// Feeds `stream` into `process` until `t_end`, returning the number of effective moves.
pub fn drive<P: ClockDriven + ?Sized>(process: &mut P, stream: &mut EventStream, t_end: f64) -> usize {
    let mut moves = 0;
    while let Some(e) = stream.next_before(t_end) {
        if process.apply(e.label, e.mark) {
            moves += 1;
        }
    }
    moves
}
