use rand::Rng;
use serde::{Deserialize, Serialize};

use super::corner_flip::CornerFlipProcess;
use super::events::{ClockDriven, Mark};
use super::exponential;
use crate::error::{Error, Result};
use crate::mappings::HeightFunction;

/// Joint corner-flip dynamics of several profiles on the same `(K, P)`.
///
/// Clocks are attached to pairs (site, height): at site `x` the `r`-th
/// smallest height currently occupied by some profile owns an "up" and a
/// "down" clock, and a ring moves every profile sitting at that height
/// (raising local minima or lowering local maxima). Each profile therefore
/// sees rate-1 flips at each of its corners, profiles that meet at a site
/// move together there, and pointwise order is never reversed.
///
/// With `m` profiles there are `K * m` labels `x * m + r`; labels whose rank
/// `r` exceeds the number of distinct heights at `x` are idle.
#[derive(Clone, Debug)]
pub struct GrandCoupling {
    profiles: Vec<HeightFunction>,
    mismatched: Vec<bool>,
    mismatches: usize,
    time: f64,
}

impl GrandCoupling {
    pub fn new(profiles: Vec<HeightFunction>) -> Result<Self> {
        let first = profiles
            .first()
            .ok_or_else(|| Error::Precondition("grand coupling needs at least one profile".into()))?;
        let (k, p) = (first.k(), first.p());
        if let Some(bad) = profiles.iter().find(|z| z.k() != k || z.p() != p) {
            return Err(Error::Precondition(format!(
                "profiles on (K,P)=({k},{p}) and ({},{}) cannot be coupled",
                bad.k(),
                bad.p()
            )));
        }
        let mut g = GrandCoupling {
            mismatched: vec![false; k],
            profiles,
            mismatches: 0,
            time: 0.0,
        };
        for x in 0..k {
            g.recount(x);
        }
        Ok(g)
    }

    fn recount(&mut self, x: usize) {
        let h0 = self.profiles[0].at(x);
        let now = self.profiles.iter().any(|z| z.at(x) != h0);
        if now != self.mismatched[x] {
            self.mismatched[x] = now;
            if now {
                self.mismatches += 1;
            } else {
                self.mismatches -= 1;
            }
        }
    }

    pub fn k(&self) -> usize {
        self.profiles[0].k()
    }

    pub fn labels(&self) -> usize {
        self.k() * self.profiles.len()
    }

    pub fn profiles(&self) -> &[HeightFunction] {
        &self.profiles
    }

    pub fn into_profiles(self) -> Vec<HeightFunction> {
        self.profiles
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Number of sites where not all profiles agree.
    pub fn mismatches(&self) -> usize {
        self.mismatches
    }

    pub fn merged(&self) -> bool {
        self.mismatches == 0
    }

    /// Height owning rank `r` at site `x`, if that many distinct heights exist.
    fn level(&self, x: usize, r: usize) -> Option<i64> {
        let mut levels: Vec<i64> = self.profiles.iter().map(|z| z.at(x)).collect();
        levels.sort_unstable();
        levels.dedup();
        levels.get(r).copied()
    }

    /// Draws the next ring of the uniformised clock system (total rate
    /// `2 K m`) and applies it. Returns the affected site, or `None` past `t_end`.
    pub fn step<R: Rng + ?Sized>(&mut self, t_end: f64, rng: &mut R) -> Option<usize> {
        let dt = exponential(rng, 2.0 * self.labels() as f64);
        if self.time + dt > t_end {
            self.time = t_end;
            return None;
        }
        self.time += dt;
        let label = rng.gen_range(0..self.labels());
        let mark = if rng.gen::<bool>() { Mark::Left } else { Mark::Right };
        self.apply(label, mark);
        Some(label / self.profiles.len())
    }
}

impl ClockDriven for GrandCoupling {
    fn apply(&mut self, label: usize, mark: Mark) -> bool {
        let m = self.profiles.len();
        let (x, r) = (label / m, label % m);
        let Some(v) = self.level(x, r) else {
            return false;
        };
        let mut moved = false;
        for z in self.profiles.iter_mut().filter(|z| z.at(x) == v) {
            moved |= match mark {
                Mark::Left => z.flip_up(x),
                Mark::Right => z.flip_down(x),
            };
        }
        if moved {
            self.recount(x);
        }
        moved
    }
}

/// Three ordered profiles `lower <= middle <= upper`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledTriple {
    pub lower: HeightFunction,
    pub middle: HeightFunction,
    pub upper: HeightFunction,
}

impl CoupledTriple {
    pub fn new(lower: HeightFunction, middle: HeightFunction, upper: HeightFunction) -> Result<Self> {
        let t = CoupledTriple { lower, middle, upper };
        t.check_order()?;
        Ok(t)
    }

    pub fn check_order(&self) -> Result<()> {
        if (self.lower.k(), self.lower.p()) != (self.middle.k(), self.middle.p())
            || (self.middle.k(), self.middle.p()) != (self.upper.k(), self.upper.p())
        {
            return Err(Error::Precondition("triple mixes different (K,P)".into()));
        }
        self.lower.dominated_by(&self.middle).map_err(Error::OrderViolation)?;
        self.middle.dominated_by(&self.upper).map_err(Error::OrderViolation)?;
        Ok(())
    }

    pub fn is_merged(&self) -> bool {
        self.lower == self.upper
    }
}

/// Runs the grand coupling of an ordered triple for a time `t_end`.
///
/// Returns the triple at `t_end` and the first time the outer profiles
/// coincide, if that happened. Order is checked at every ring.
pub fn run_monotone_coupled<R: Rng + ?Sized>(
    triple: &CoupledTriple,
    t_end: f64,
    rng: &mut R,
) -> Result<(CoupledTriple, Option<f64>)> {
    triple.check_order()?;
    if triple.is_merged() {
        return Ok((finish_merged(triple.middle.clone(), t_end, rng), Some(0.0)));
    }
    let mut g = GrandCoupling::new(vec![triple.lower.clone(), triple.middle.clone(), triple.upper.clone()])?;
    while let Some(x) = g.step(t_end, rng) {
        let [lo, mid, up] = [0, 1, 2].map(|i| g.profiles()[i].at(x));
        if lo > mid || mid > up {
            return Err(Error::OrderViolation(x));
        }
        if g.merged() {
            let t = g.time();
            let z = g.into_profiles().swap_remove(0);
            return Ok((finish_merged(z, t_end - t, rng), Some(t)));
        }
    }
    let [lower, middle, upper]: [HeightFunction; 3] = g.into_profiles().try_into().expect("three profiles");
    Ok((CoupledTriple { lower, middle, upper }, None))
}

/// Once merged the three profiles follow a single corner-flip trajectory.
fn finish_merged<R: Rng + ?Sized>(zeta: HeightFunction, remaining: f64, rng: &mut R) -> CoupledTriple {
    let mut p = CornerFlipProcess::new(zeta);
    p.advance(remaining.max(0.0), rng);
    let z = p.into_profile();
    CoupledTriple {
        lower: z.clone(),
        middle: z.clone(),
        upper: z,
    }
}
