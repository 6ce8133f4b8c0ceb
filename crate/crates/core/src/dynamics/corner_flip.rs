use rand::Rng;

use super::events::{ClockDriven, Mark};
use super::{exponential, ActiveSet};
use crate::mappings::HeightFunction;

/// Corner-flip dynamics: every strict local extremum of the profile is
/// replaced by its mirror image at rate 1.
///
/// Driven by external clocks, label `c` is the height index `c` in `0..K`;
/// `Left` raises a local minimum there and `Right` lowers a local maximum.
/// Through the height map this is exactly [`super::SsepProcess`] driven by
/// the same clocks.
#[derive(Clone, Debug)]
pub struct CornerFlipProcess {
    zeta: HeightFunction,
    corners: ActiveSet,
    time: f64,
}

impl CornerFlipProcess {
    pub fn new(zeta: HeightFunction) -> Self {
        let k = zeta.k();
        let mut p = CornerFlipProcess {
            zeta,
            corners: ActiveSet::new(k),
            time: 0.0,
        };
        for j in 0..k {
            p.refresh(j);
        }
        p
    }

    #[inline]
    fn refresh(&mut self, j: usize) {
        let on = self.zeta.is_local_min(j) || self.zeta.is_local_max(j);
        self.corners.set(j, on);
    }

    fn flipped(&mut self, j: usize) {
        let k = self.zeta.k();
        self.refresh((j + k - 1) % k);
        self.refresh(j);
        self.refresh((j + 1) % k);
    }

    pub fn profile(&self) -> &HeightFunction {
        &self.zeta
    }

    pub fn into_profile(self) -> HeightFunction {
        self.zeta
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn corners(&self) -> usize {
        self.corners.len()
    }

    pub fn step<R: Rng + ?Sized>(&mut self, t_end: f64, rng: &mut R) -> Option<usize> {
        if self.corners.is_empty() {
            self.time = self.time.max(t_end);
            return None;
        }
        let dt = exponential(rng, self.corners.len() as f64);
        if self.time + dt > t_end {
            self.time = t_end;
            return None;
        }
        self.time += dt;
        let j = self.corners.sample(rng);
        self.zeta.flip(j);
        self.flipped(j);
        Some(j)
    }

    pub fn advance<R: Rng + ?Sized>(&mut self, t_end: f64, rng: &mut R) -> usize {
        let mut flips = 0;
        while self.step(t_end, rng).is_some() {
            flips += 1;
        }
        flips
    }
}

impl ClockDriven for CornerFlipProcess {
    fn apply(&mut self, j: usize, mark: Mark) -> bool {
        let done = match mark {
            Mark::Left => self.zeta.flip_up(j),
            Mark::Right => self.zeta.flip_down(j),
        };
        if done {
            self.flipped(j);
        }
        done
    }
}

/// Profile at time `t_end` under corner-flip dynamics.
pub fn run_corner_flip<R: Rng + ?Sized>(zeta: &HeightFunction, t_end: f64, rng: &mut R) -> HeightFunction {
    let mut p = CornerFlipProcess::new(zeta.clone());
    p.advance(t_end, rng);
    p.into_profile()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mappings::psi;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_profiles_are_frozen() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for word in ["0000", "1111"] {
            let z = psi(2, &word.parse().unwrap());
            assert_eq!(run_corner_flip(&z, 100.0, &mut rng), z);
        }
    }

    #[test]
    fn single_particle_has_two_corners() {
        // one particle: the only extrema are the peak after it and the valley before it
        let z = psi(0, &"0100".parse().unwrap());
        let p = CornerFlipProcess::new(z);
        assert_eq!(p.corners(), 2);
    }

    #[test]
    fn flips_stay_valid_and_move_by_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = CornerFlipProcess::new(psi(1, &"11010010".parse().unwrap()));
        for _ in 0..2000 {
            let before = p.profile().clone();
            let j = p.step(f64::INFINITY, &mut rng).unwrap();
            let after = p.profile();
            HeightFunction::from_heights(8, 4, after.heights().to_vec()).unwrap();
            assert_eq!((after.at(j) - before.at(j)).abs(), 8);
            let changed = (0..8).filter(|&i| after.at(i) != before.at(i)).count();
            assert_eq!(changed, 1);
        }
    }
}
