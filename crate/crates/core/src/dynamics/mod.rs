//! Continuous-time simulation of the FEP, the SSEP with its current, the
//! corner-flip dynamics and the coupled height-function constructions.
//!
//! Single processes are simulated event by event: the set of legal moves is
//! kept up to date after each jump, waiting times are exponential with rate
//! equal to the number of legal moves. Every process also accepts clock rings
//! from an external [`EventStream`] so that several of them can be driven by
//! the same randomness.

mod corner_flip;
mod coupling;
mod events;
mod fep;
mod merge;
mod ssep;

pub use corner_flip::{run_corner_flip, CornerFlipProcess};
pub use coupling::{run_monotone_coupled, CoupledTriple, GrandCoupling};
pub use events::{drive, ClockDriven, Event, EventStream, Mark};
pub use fep::{run_fep, run_fep_tagged, FepProcess, Jump, TaggedFepProcess};
pub use merge::{merge_window, run_merge_experiment, MergeReport, MergeSettings, MergeWindow};
pub use ssep::{run_ssep_with_current, SsepProcess, TaggedSsepState};

use rand::Rng;

/// Indexed set of small integers with O(1) insert, remove and uniform draw.
#[derive(Clone, Debug)]
pub(crate) struct ActiveSet {
    items: Vec<u32>,
    slot: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl ActiveSet {
    pub fn new(capacity: usize) -> Self {
        ActiveSet {
            items: Vec::with_capacity(capacity),
            slot: vec![ABSENT; capacity],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.items.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    #[cfg(test)]
    pub fn contains(&self, i: usize) -> bool {
        self.slot[i] != ABSENT
    }

    #[inline]
    pub fn set(&mut self, i: usize, present: bool) {
        if present {
            if self.slot[i] == ABSENT {
                self.slot[i] = self.items.len() as u32;
                self.items.push(i as u32);
            }
        } else if self.slot[i] != ABSENT {
            let at = self.slot[i] as usize;
            let last = *self.items.last().unwrap();
            self.items.swap_remove(at);
            if last as usize != i {
                self.slot[last as usize] = at as u32;
            }
            self.slot[i] = ABSENT;
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.items[rng.gen_range(0..self.items.len())] as usize
    }
}

#[inline]
pub(crate) fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn active_set_bookkeeping() {
        let mut s = ActiveSet::new(10);
        for i in [3, 7, 1, 9] {
            s.set(i, true);
        }
        s.set(3, true);
        assert_eq!(s.len(), 4);
        s.set(7, false);
        s.set(7, false);
        assert!(!s.contains(7) && s.contains(9) && s.contains(1));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            assert!([1, 3, 9].contains(&s.sample(&mut rng)));
        }
        s.set(9, false);
        s.set(1, false);
        s.set(3, false);
        assert!(s.is_empty());
    }
}
