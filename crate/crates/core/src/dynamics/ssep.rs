use rand::Rng;
use serde::{Deserialize, Serialize};

use super::events::{ClockDriven, Mark};
use super::{exponential, ActiveSet};
use crate::configurations::SsepConfiguration;

/// An SSEP configuration together with an integer position `Y` that moves
/// with the current through the edge `(K, 1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaggedSsepState {
    pub y: i64,
    pub sigma: SsepConfiguration,
}

/// SSEP on `K` sites with the current through the origin edge.
///
/// Edges are indexed by `c` in `0..K`: edge `c` joins the 0-based sites
/// `c - 1 (mod K)` and `c`, so edge 0 is the edge `(K, 1)`. An edge is active
/// when exactly one of its ends is occupied and then swaps at rate 1.
#[derive(Clone, Debug)]
pub struct SsepProcess {
    sigma: Vec<bool>,
    active: ActiveSet,
    current: i64,
    time: f64,
}

impl SsepProcess {
    pub fn new(sigma: &SsepConfiguration) -> Self {
        let k = sigma.size();
        let mut p = SsepProcess {
            sigma: sigma.to_bools(),
            active: ActiveSet::new(k),
            current: 0,
            time: 0.0,
        };
        for c in 0..k {
            p.refresh(c);
        }
        p
    }

    #[inline]
    fn k(&self) -> usize {
        self.sigma.len()
    }

    #[inline]
    fn left_of(&self, c: usize) -> usize {
        (c + self.k() - 1) % self.k()
    }

    #[inline]
    fn refresh(&mut self, c: usize) {
        let on = self.k() > 1 && self.sigma[self.left_of(c)] != self.sigma[c];
        self.active.set(c, on);
    }

    fn swap(&mut self, c: usize) {
        let l = self.left_of(c);
        if c == 0 {
            self.current += if self.sigma[l] { 1 } else { -1 };
        }
        self.sigma.swap(l, c);
        let k = self.k();
        self.refresh(l);
        self.refresh((c + 1) % k);
    }

    /// Signed number of crossings of edge `(K, 1)`, rightward counted positive.
    pub fn current(&self) -> i64 {
        self.current
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn configuration(&self) -> SsepConfiguration {
        SsepConfiguration::new(&self.sigma)
    }

    /// Occupation of the sites in 0-based order.
    pub fn occupation(&self) -> &[bool] {
        &self.sigma
    }

    pub fn active_edges(&self) -> usize {
        self.active.len()
    }

    /// One Gillespie step; returns the edge that swapped.
    pub fn step<R: Rng + ?Sized>(&mut self, t_end: f64, rng: &mut R) -> Option<usize> {
        if self.active.is_empty() {
            self.time = self.time.max(t_end);
            return None;
        }
        let dt = exponential(rng, self.active.len() as f64);
        if self.time + dt > t_end {
            self.time = t_end;
            return None;
        }
        self.time += dt;
        let c = self.active.sample(rng);
        self.swap(c);
        Some(c)
    }

    pub fn advance<R: Rng + ?Sized>(&mut self, t_end: f64, rng: &mut R) -> usize {
        let mut jumps = 0;
        while self.step(t_end, rng).is_some() {
            jumps += 1;
        }
        jumps
    }
}

/// `Left` on edge `c` moves a particle from `c` to `c - 1`, `Right` moves
/// one from `c - 1` to `c`.
impl ClockDriven for SsepProcess {
    fn apply(&mut self, c: usize, mark: Mark) -> bool {
        let l = self.left_of(c);
        let fires = match mark {
            Mark::Left => self.sigma[c] && !self.sigma[l],
            Mark::Right => self.sigma[l] && !self.sigma[c],
        };
        if fires {
            self.swap(c);
        }
        fires
    }
}

/// Evolves `(Y, σ)` to time `t_end`; `Y` gains the origin current.
pub fn run_ssep_with_current<R: Rng + ?Sized>(
    state: &TaggedSsepState,
    t_end: f64,
    rng: &mut R,
) -> TaggedSsepState {
    let mut p = SsepProcess::new(&state.sigma);
    p.advance(t_end, rng);
    TaggedSsepState {
        y: state.y + p.current(),
        sigma: p.configuration(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_sites_use_both_edges() {
        let mut p = SsepProcess::new(&"10".parse().unwrap());
        assert_eq!(p.active_edges(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = [false; 2];
        for _ in 0..200 {
            let before = p.current();
            let c = p.step(f64::INFINITY, &mut rng).unwrap();
            seen[c] = true;
            let d = p.current() - before;
            if c == 0 {
                assert_eq!(d.abs(), 1);
            } else {
                assert_eq!(d, 0);
            }
            assert_eq!(p.configuration().particle_count(), 1);
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn shared_clock_directions() {
        let mut p = SsepProcess::new(&"1000".parse().unwrap());
        assert!(!p.apply(0, Mark::Right));
        assert!(p.apply(1, Mark::Right));
        assert_eq!(p.configuration().to_string(), "0100");
        assert!(p.apply(1, Mark::Left));
        assert!(p.apply(0, Mark::Left));
        assert_eq!(p.configuration().to_string(), "0001");
        assert_eq!(p.current(), -1);
    }

    #[test]
    fn mean_current_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // mirror-symmetric about the origin edge, so the current is centred
        let start = TaggedSsepState { y: 3, sigma: "110011".parse().unwrap() };
        let runs = 20_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..runs {
            let end = run_ssep_with_current(&start, 2.0, &mut rng);
            let d = (end.y - 3) as f64;
            sum += d;
            sq += d * d;
        }
        let mean = sum / runs as f64;
        let sd = ((sq / runs as f64 - mean * mean) / runs as f64).sqrt();
        assert!(mean.abs() < 3.0 * sd + 1e-12, "mean {mean} sd {sd}");
    }
}
