//! The rank/position mapping between the ergodic FEP and the SSEP, and the
//! height-function encoding of an SSEP together with its current.
//!
//! For `n/2 < k <= n`, a pair `(rank, η)` with `η` ergodic maps to
//! `(x, σ)` where `x` is the site of the `rank`-th particle and `σ` is an
//! SSEP word on `k` sites with `2k - n` particles: `σ_l = 1` exactly when the
//! particle of rank `rank + l - 1` is immediately followed by another particle.

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::configurations::{
    check_supercritical, is_ergodic, rank_at, sample_uniform_ssep, FepConfiguration, SsepConfiguration,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MappedPair {
    /// 1-based FEP site of the ranked particle.
    pub position: usize,
    pub ssep: SsepConfiguration,
}

/// Maps `(rank, η)` to `(x_rank(η), σ)`.
pub fn phi(rank: usize, eta: &FepConfiguration) -> Result<MappedPair> {
    let n = eta.size();
    let k = eta.particle_count();
    check_supercritical(n, k)?;
    if rank == 0 || rank > k {
        return Err(Error::RankOutOfRange { rank, count: k });
    }
    if !is_ergodic(eta) {
        return Err(Error::NotErgodic);
    }
    let sites = eta.sites();
    // position of particle with (possibly wrapped) 0-based rank index j
    let pos = |j: usize| sites[j % k] + n * (j / k);
    let mut sigma = Vec::with_capacity(k);
    for l in 1..=k {
        let gap = pos(rank + l - 1) - pos(rank + l - 2);
        sigma.push(gap == 1);
    }
    Ok(MappedPair {
        position: sites[rank - 1],
        ssep: SsepConfiguration::new(&sigma),
    })
}

/// Inverse of [`phi`]: the FEP has `n` sites, particles at
/// `x + Σ_{j<=l} (2 - σ_j)` for `0 <= l < k`.
pub fn phi_inverse(x: usize, sigma: &SsepConfiguration, n: usize) -> Result<(usize, FepConfiguration)> {
    let k = sigma.size();
    if x == 0 || x > n {
        return Err(Error::SiteOutOfRange { site: x, size: n });
    }
    if 2 * k < n || k > n || sigma.particle_count() != 2 * k - n {
        return Err(Error::Precondition(format!(
            "σ must have 2k-n particles (k={k}, n={n}, found {})",
            sigma.particle_count()
        )));
    }
    let mut bits = vec![false; n];
    let mut offset = x - 1;
    bits[offset] = true;
    for l in 1..k {
        offset += if sigma.is_occupied(l) { 1 } else { 2 };
        bits[offset % n] = true;
    }
    let eta = FepConfiguration::new(&bits);
    let rank = rank_at(&eta, x)?;
    Ok((rank, eta))
}

/// |E_{n,k}| = (n/k) C(k, 2k-n), exactly.
pub fn ergodic_count(n: usize, k: usize) -> Result<BigUint> {
    if k > n || 2 * k <= n {
        return Err(Error::Infeasible { n, k, reason: "requires n/2 < k <= n" });
    }
    let p = 2 * k - n;
    let mut binom = BigUint::from(1u32);
    for i in 0..p.min(k - p) {
        binom = binom * BigUint::from(k - i) / BigUint::from(i + 1);
    }
    Ok(binom * BigUint::from(n) / BigUint::from(k))
}

/// Exact draw from the uniform law on ergodic configurations: push a uniform
/// `(x, σ)` through the inverse mapping and forget the rank.
pub fn sample_pi_fep<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<FepConfiguration> {
    if k > n || 2 * k <= n {
        return Err(Error::Infeasible { n, k, reason: "requires n/2 < k <= n" });
    }
    let x = rng.gen_range(1..=n);
    let sigma = sample_uniform_ssep(k, 2 * k - n, rng);
    Ok(phi_inverse(x, &sigma, n)?.1)
}

/// Height profile `h_j = k ζ_j` of a pair `(Y, σ)`, scaled by `k` so that
/// every step is an integer: an up-step `k - p` over a particle, a down-step
/// `-p` over a hole, with `h_0 = h_k = -k Y`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HeightFunction {
    k: usize,
    p: usize,
    heights: Vec<i64>,
}

impl std::fmt::Debug for HeightFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "HeightFunction(k={}, p={}, {:?})", self.k, self.p, self.heights)
    }
}

impl HeightFunction {
    /// Validates a raw profile of `k + 1` scaled heights.
    pub fn from_heights(k: usize, p: usize, heights: Vec<i64>) -> Result<Self> {
        if k == 0 || p > k {
            return Err(Error::InvalidHeight(format!("bad sizes k={k}, p={p}")));
        }
        if heights.len() != k + 1 {
            return Err(Error::InvalidHeight(format!("expected {} heights, got {}", k + 1, heights.len())));
        }
        if heights[0] != heights[k] {
            return Err(Error::InvalidHeight("h_0 != h_k".into()));
        }
        if heights[0].rem_euclid(k as i64) != 0 {
            return Err(Error::InvalidHeight("anchor is not a multiple of k".into()));
        }
        let (up, down) = ((k - p) as i64, -(p as i64));
        let mut ups = 0;
        for j in 1..=k {
            let d = heights[j] - heights[j - 1];
            if d == up {
                ups += 1;
            } else if d != down {
                return Err(Error::InvalidHeight(format!("step {d} at site {j}")));
            }
        }
        // when p == 0 or p == k both step sizes coincide with the one present
        if p != 0 && p != k && ups != p {
            return Err(Error::InvalidHeight(format!("{ups} up-steps, expected {p}")));
        }
        Ok(HeightFunction { k, p, heights })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    /// The `k + 1` scaled heights `h_0..=h_k`.
    #[inline]
    pub fn heights(&self) -> &[i64] {
        &self.heights
    }

    /// Scaled height at circular site `j` (site `0` is the anchor).
    #[inline]
    pub fn at(&self, j: usize) -> i64 {
        self.heights[j % self.k]
    }

    /// The integer `Y` with `h_0 = -k Y`.
    pub fn anchor(&self) -> i64 {
        -self.heights[0] / self.k as i64
    }

    #[inline]
    fn neighbours(&self, j: usize) -> (i64, i64) {
        let k = self.k;
        let left = self.heights[(j + k - 1) % k];
        let right = self.heights[(j + 1) % k];
        (left, right)
    }

    #[inline]
    pub fn is_local_min(&self, j: usize) -> bool {
        let (l, r) = self.neighbours(j);
        let h = self.at(j);
        self.p != 0 && self.p != self.k && l > h && r > h
    }

    #[inline]
    pub fn is_local_max(&self, j: usize) -> bool {
        let (l, r) = self.neighbours(j);
        let h = self.at(j);
        self.p != 0 && self.p != self.k && l < h && r < h
    }

    /// Replaces `h_j` by `h_{j-1} + h_{j+1} - h_j`; a no-op unless `j` is a
    /// strict local extremum.
    pub fn flip(&mut self, j: usize) -> bool {
        let j = j % self.k;
        if !(self.is_local_min(j) || self.is_local_max(j)) {
            return false;
        }
        let (l, r) = self.neighbours(j);
        let new = l + r - self.heights[j];
        self.heights[j] = new;
        if j == 0 {
            self.heights[self.k] = new;
        }
        true
    }

    /// Raises a local minimum at `j` by one unit (`k` scaled). Returns whether it flipped.
    #[inline]
    pub fn flip_up(&mut self, j: usize) -> bool {
        self.is_local_min(j % self.k) && self.flip(j)
    }

    /// Lowers a local maximum at `j` by one unit. Returns whether it flipped.
    #[inline]
    pub fn flip_down(&mut self, j: usize) -> bool {
        self.is_local_max(j % self.k) && self.flip(j)
    }

    /// Pointwise `self <= other`; `Err(site)` at the first violation.
    pub fn dominated_by(&self, other: &HeightFunction) -> std::result::Result<(), usize> {
        match self.heights.iter().zip(&other.heights).position(|(a, b)| a > b) {
            Some(j) => Err(j),
            None => Ok(()),
        }
    }

    /// Same profile up to a uniform vertical shift by a multiple of `n` units.
    pub fn congruent_mod(&self, other: &HeightFunction, n: usize) -> bool {
        let shift = other.heights[0] - self.heights[0];
        shift.rem_euclid((n * self.k) as i64) == 0
            && self.heights.iter().zip(&other.heights).all(|(a, b)| b - a == shift)
    }

    /// Largest minus smallest height, in unscaled units.
    pub fn range(&self) -> f64 {
        let max = self.heights.iter().max().unwrap();
        let min = self.heights.iter().min().unwrap();
        (max - min) as f64 / self.k as f64
    }
}

/// Height profile of `(y, σ)`.
pub fn psi(y: i64, sigma: &SsepConfiguration) -> HeightFunction {
    let k = sigma.size();
    let p = sigma.particle_count();
    let mut heights = Vec::with_capacity(k + 1);
    let mut h = -(k as i64) * y;
    heights.push(h);
    for j in 1..=k {
        h += if sigma.is_occupied(j) { (k - p) as i64 } else { -(p as i64) };
        heights.push(h);
    }
    debug_assert_eq!(heights[0], heights[k]);
    HeightFunction { k, p, heights }
}

/// Recovers `(y, σ)` from a height profile.
pub fn psi_inverse(zeta: &HeightFunction) -> (i64, SsepConfiguration) {
    let k = zeta.k;
    let up = (k - zeta.p) as i64;
    let bits: Vec<bool> = (1..=k)
        .map(|j| zeta.heights[j] - zeta.heights[j - 1] == up)
        .collect();
    (zeta.anchor(), SsepConfiguration::new(&bits))
}
