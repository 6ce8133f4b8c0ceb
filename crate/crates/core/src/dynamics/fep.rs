use rand::Rng;

use super::events::{ClockDriven, Mark};
use super::{exponential, ActiveSet};
use crate::configurations::{FepConfiguration, TaggedFepState};

const NONE: u32 = u32::MAX;

/// A particle jump between neighbouring 1-based sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Jump {
    pub from: usize,
    pub to: usize,
}

/// Facilitated exclusion on a circle with its legal moves kept up to date.
///
/// A particle with exactly one occupied neighbour has exactly one legal
/// jump (away from that neighbour); no other particle can move. The total
/// rate is therefore the number of such particles. Particles are labelled in
/// clockwise order so that the labels survive jumps (they never overtake).
#[derive(Clone, Debug)]
pub struct FepProcess {
    occ: Vec<bool>,
    mobile: ActiveSet,
    id_at: Vec<u32>,
    pos: Vec<u32>,
    current: i64,
    time: f64,
}

impl FepProcess {
    pub fn new(eta: &FepConfiguration) -> Self {
        Self::labelled_from(eta, 0)
    }

    /// Labels particles clockwise starting with label 0 at 0-based index `first`
    /// (or the first particle after it).
    fn labelled_from(eta: &FepConfiguration, first: usize) -> Self {
        let occ = eta.to_bools();
        let n = occ.len();
        let mut id_at = vec![NONE; n];
        let mut pos = Vec::with_capacity(eta.particle_count());
        for j in 0..n {
            let i = (first + j) % n;
            if occ[i] {
                id_at[i] = pos.len() as u32;
                pos.push(i as u32);
            }
        }
        let mut p = FepProcess {
            occ,
            mobile: ActiveSet::new(n),
            id_at,
            pos,
            current: 0,
            time: 0.0,
        };
        for i in 0..n {
            p.refresh(i);
        }
        p
    }

    #[inline]
    fn n(&self) -> usize {
        self.occ.len()
    }

    /// The unique legal target of the particle at 0-based `i`, if any.
    #[inline]
    fn target(&self, i: usize) -> Option<usize> {
        let n = self.n();
        if !self.occ[i] {
            return None;
        }
        let left = (i + n - 1) % n;
        let right = (i + 1) % n;
        match (self.occ[left], self.occ[right]) {
            (true, false) => Some(right),
            (false, true) => Some(left),
            _ => None,
        }
    }

    #[inline]
    fn refresh(&mut self, i: usize) {
        let m = self.target(i).is_some();
        self.mobile.set(i, m);
    }

    fn perform(&mut self, from: usize, to: usize) {
        let n = self.n();
        debug_assert!(self.occ[from] && !self.occ[to]);
        self.occ[from] = false;
        self.occ[to] = true;
        // the hole left behind sits between the mover and its facilitator
        debug_assert!(self.occ[(from + n - 1) % n] && self.occ[(from + 1) % n]);
        let id = self.id_at[from];
        self.id_at[from] = NONE;
        self.id_at[to] = id;
        self.pos[id as usize] = to as u32;
        if from == n - 1 && to == 0 {
            self.current += 1;
        } else if from == 0 && to == n - 1 {
            self.current -= 1;
        }
        let lo = if to == (from + 1) % n { from } else { to };
        for d in 0..4 {
            self.refresh((lo + n - 1 + d) % n);
        }
    }

    /// Number of legal jumps, which is also the total jump rate.
    pub fn exit_rate(&self) -> usize {
        self.mobile.len()
    }

    pub fn legal_jumps(&self) -> Vec<Jump> {
        (0..self.n())
            .filter_map(|i| self.target(i).map(|t| Jump { from: i + 1, to: t + 1 }))
            .collect()
    }

    /// Signed number of jumps from site `n` to site `1` minus the reverse.
    pub fn current(&self) -> i64 {
        self.current
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn configuration(&self) -> FepConfiguration {
        FepConfiguration::new(&self.occ)
    }

    /// Occupation of the sites in 0-based order.
    pub fn occupation(&self) -> &[bool] {
        &self.occ
    }

    /// 1-based site of the particle with label `id`.
    pub fn particle_site(&self, id: usize) -> usize {
        self.pos[id] as usize + 1
    }

    /// Performs one Gillespie step if it happens before `t_end`.
    pub fn step<R: Rng + ?Sized>(&mut self, t_end: f64, rng: &mut R) -> Option<Jump> {
        if self.mobile.is_empty() {
            self.time = self.time.max(t_end);
            return None;
        }
        let dt = exponential(rng, self.mobile.len() as f64);
        if self.time + dt > t_end {
            self.time = t_end;
            return None;
        }
        self.time += dt;
        let from = self.mobile.sample(rng);
        let to = self.target(from).expect("mobile particle has a move");
        self.perform(from, to);
        Some(Jump { from: from + 1, to: to + 1 })
    }

    /// Runs until `t_end`, returning the number of jumps.
    pub fn advance<R: Rng + ?Sized>(&mut self, t_end: f64, rng: &mut R) -> usize {
        let mut jumps = 0;
        while self.step(t_end, rng).is_some() {
            jumps += 1;
        }
        jumps
    }

    /// Clock ring for the particle labelled `id`; it jumps if `mark` is its legal direction.
    fn ring_particle(&mut self, id: usize, mark: Mark) -> bool {
        let i = self.pos[id] as usize;
        let n = self.n();
        let wanted = match mark {
            Mark::Left => (i + n - 1) % n,
            Mark::Right => (i + 1) % n,
        };
        if self.target(i) == Some(wanted) {
            self.perform(i, wanted);
            true
        } else {
            false
        }
    }
}

/// Shared clocks are indexed by particle label.
impl ClockDriven for FepProcess {
    fn apply(&mut self, label: usize, mark: Mark) -> bool {
        self.ring_particle(label, mark)
    }
}

/// FEP with a distinguished particle.
///
/// Labels count clockwise from the tagged particle, which has label 0, so an
/// external clock with label `c` belongs to the `c`-th particle after the tag.
#[derive(Clone, Debug)]
pub struct TaggedFepProcess {
    inner: FepProcess,
}

impl TaggedFepProcess {
    pub fn new(state: &TaggedFepState) -> Self {
        TaggedFepProcess {
            inner: FepProcess::labelled_from(&state.config, state.position - 1),
        }
    }

    pub fn process(&self) -> &FepProcess {
        &self.inner
    }

    /// 1-based site of the tag.
    pub fn position(&self) -> usize {
        self.inner.particle_site(0)
    }

    pub fn current(&self) -> i64 {
        self.inner.current
    }

    pub fn time(&self) -> f64 {
        self.inner.time
    }

    /// Number of particles on `1..=X`.
    pub fn rank(&self) -> usize {
        let x = self.inner.pos[0] as usize;
        self.inner.occ[..=x].iter().filter(|&&b| b).count()
    }

    pub fn state(&self) -> TaggedFepState {
        TaggedFepState {
            position: self.position(),
            config: self.inner.configuration(),
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, t_end: f64, rng: &mut R) -> Option<Jump> {
        self.inner.step(t_end, rng)
    }

    pub fn advance<R: Rng + ?Sized>(&mut self, t_end: f64, rng: &mut R) -> usize {
        self.inner.advance(t_end, rng)
    }
}

impl ClockDriven for TaggedFepProcess {
    fn apply(&mut self, label: usize, mark: Mark) -> bool {
        self.inner.ring_particle(label, mark)
    }
}

/// State of the FEP at time `t_end` started from `eta`.
pub fn run_fep<R: Rng + ?Sized>(eta: &FepConfiguration, t_end: f64, rng: &mut R) -> FepConfiguration {
    let mut p = FepProcess::new(eta);
    p.advance(t_end, rng);
    p.configuration()
}

/// Joint state of the configuration and the tagged particle at `t_end`.
pub fn run_fep_tagged<R: Rng + ?Sized>(state: &TaggedFepState, t_end: f64, rng: &mut R) -> TaggedFepState {
    let mut p = TaggedFepProcess::new(state);
    p.advance(t_end, rng);
    p.state()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configurations::{enumerate, is_ergodic};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn fep(s: &str) -> FepConfiguration {
        s.parse().unwrap()
    }

    #[test]
    fn exit_rate_of_110110() {
        let p = FepProcess::new(&fep("110110"));
        assert_eq!(p.exit_rate(), 4);
        let mut jumps: Vec<_> = p.legal_jumps().iter().map(|j| (j.from, j.to)).collect();
        jumps.sort();
        assert_eq!(jumps, vec![(1, 6), (2, 3), (4, 3), (5, 6)]);
    }

    #[test]
    fn frozen_configuration_never_moves() {
        let eta = fep("1010100100");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(run_fep(&eta, 1e6, &mut rng), eta);
    }

    #[test]
    fn conserves_and_stays_ergodic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut p = FepProcess::new(&fep("111111101010101010"));
        for _ in 0..5000 {
            if p.step(f64::INFINITY, &mut rng).is_none() {
                break;
            }
            let c = p.configuration();
            assert_eq!(c.particle_count(), 12);
            assert!(is_ergodic(&c));
            assert_eq!(p.exit_rate(), p.legal_jumps().len());
        }
    }

    #[test]
    fn tag_follows_its_particle_and_rank_tracks_current() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let eta = fep("1101101110");
        let state = TaggedFepState::new(5, eta).unwrap();
        let k0 = state.rank() as i64;
        let mut p = TaggedFepProcess::new(&state);
        for _ in 0..3000 {
            let before = p.position();
            match p.step(f64::INFINITY, &mut rng) {
                Some(j) if j.from == before => assert_eq!(p.position(), j.to),
                Some(_) => assert_eq!(p.position(), before),
                None => break,
            }
            assert!(p.process().configuration().is_occupied(p.position()));
            assert_eq!((p.rank() as i64 - k0 - p.current()).rem_euclid(7), 0);
        }
    }

    #[test]
    fn long_run_law_is_uniform_on_ergodic_states() {
        let states = enumerate(6, 4, true).unwrap();
        let start = fep("111010");
        let runs = 30_000;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut counts: HashMap<FepConfiguration, usize> = HashMap::new();
        for _ in 0..runs {
            *counts.entry(run_fep(&start, 50.0, &mut rng)).or_default() += 1;
        }
        assert_eq!(counts.len(), states.len());
        let p = 1.0 / states.len() as f64;
        let sd = (p * (1.0 - p) / runs as f64).sqrt();
        for s in &states {
            let f = counts[s] as f64 / runs as f64;
            assert!((f - p).abs() < 4.0 * sd, "{s}: {f}");
        }
    }
}
