//! Exclusion configurations on a discrete circle.
//!
//! Sites are labelled `1..=n` in every public function (site `n` is followed
//! by site `1`). Internally occupancy is a packed bitset where bit `i` holds
//! site `i + 1`; for `n <= 64` that is a single word.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of configurations [`enumerate`] will materialise.
pub const MAX_ENUMERATION: u128 = 1 << 20;

/// Packed occupancy word on a circle of `len` sites.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Occupancy {
    len: usize,
    words: Vec<u64>,
    count: usize,
}

impl Occupancy {
    pub fn empty(len: usize) -> Self {
        Occupancy {
            len,
            words: vec![0; len.div_ceil(64).max(1)],
            count: 0,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut occ = Occupancy::empty(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                occ.set0(i, true);
            }
        }
        occ
    }

    /// Builds from the low `len` bits of `word` (bit `i` is site `i + 1`).
    pub fn from_u64(len: usize, word: u64) -> Self {
        assert!(len <= 64);
        let masked = if len == 64 { word } else { word & ((1u64 << len) - 1) };
        Occupancy {
            len,
            words: vec![masked],
            count: masked.count_ones() as usize,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    /// Occupancy of the 0-based index `i` (taken modulo the length).
    #[inline]
    pub fn get0(&self, i: usize) -> bool {
        let i = i % self.len;
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    fn set0(&mut self, i: usize, value: bool) {
        let (w, b) = (i / 64, i % 64);
        let old = (self.words[w] >> b) & 1 == 1;
        if old != value {
            self.words[w] ^= 1 << b;
            if value {
                self.count += 1;
            } else {
                self.count -= 1;
            }
        }
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get0(i)).collect()
    }

    /// 0-based indices of occupied sites, ascending.
    pub fn occupied_indices(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.get0(i)).collect()
    }

    pub fn complement(&self) -> Self {
        Occupancy::from_bools(&self.to_bools().iter().map(|b| !b).collect::<Vec<_>>())
    }
}

impl fmt::Display for Occupancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get0(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Occupancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

fn parse_bits(s: &str) -> Result<Vec<bool>> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty occupancy word".into()));
    }
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::Parse(format!("unexpected character {other:?} in occupancy word"))),
        })
        .collect()
}

macro_rules! occupancy_newtype {
    ($name:ident) => {
        impl $name {
            pub fn new(bits: &[bool]) -> Self {
                $name(Occupancy::from_bools(bits))
            }

            pub fn from_occupancy(occ: Occupancy) -> Self {
                $name(occ)
            }

            /// Configuration with particles exactly on the given 1-based sites.
            pub fn from_sites(size: usize, sites: &[usize]) -> Result<Self> {
                let mut bits = vec![false; size];
                for &x in sites {
                    if x == 0 || x > size {
                        return Err(Error::SiteOutOfRange { site: x, size });
                    }
                    bits[x - 1] = true;
                }
                Ok($name::new(&bits))
            }

            pub fn full(size: usize) -> Self {
                $name::new(&vec![true; size])
            }

            pub fn empty(size: usize) -> Self {
                $name(Occupancy::empty(size))
            }

            /// Number of sites on the circle.
            #[inline]
            pub fn size(&self) -> usize {
                self.0.len()
            }

            #[inline]
            pub fn particle_count(&self) -> usize {
                self.0.count()
            }

            /// Occupancy of the 1-based site `x` (any integer is reduced modulo the size).
            #[inline]
            pub fn is_occupied(&self, x: usize) -> bool {
                let n = self.0.len();
                self.0.get0((x + n - 1) % n)
            }

            #[inline]
            pub fn occupancy(&self) -> &Occupancy {
                &self.0
            }

            pub fn to_bools(&self) -> Vec<bool> {
                self.0.to_bools()
            }

            /// 1-based occupied sites in increasing order.
            pub fn sites(&self) -> Vec<usize> {
                self.0.occupied_indices().into_iter().map(|i| i + 1).collect()
            }

            /// Particle/hole swap.
            pub fn complement(&self) -> Self {
                $name(self.0.complement())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.0)
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                Ok($name::new(&parse_bits(s)?))
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_string())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

/// FEP configuration η on the circle of `n` sites.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FepConfiguration(Occupancy);

/// SSEP configuration σ on the circle of `k` sites.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SsepConfiguration(Occupancy);

occupancy_newtype!(FepConfiguration);
occupancy_newtype!(SsepConfiguration);

impl FepConfiguration {
    /// Initial state used for the lower bound: `2k - n` particles in a block
    /// followed by `n - k` particle/hole pairs.
    pub fn clustered_ergodic(n: usize, k: usize) -> Result<Self> {
        check_supercritical(n, k)?;
        let block = 2 * k - n;
        let mut bits = vec![true; block];
        for _ in 0..(n - k) {
            bits.push(true);
            bits.push(false);
        }
        Ok(FepConfiguration::new(&bits))
    }

    /// `k` particles packed on sites `1..=k`; transient whenever `n - k >= 2`.
    pub fn clustered_block(n: usize, k: usize) -> Result<Self> {
        if k > n {
            return Err(Error::Infeasible { n, k, reason: "more particles than sites" });
        }
        let bits: Vec<bool> = (0..n).map(|i| i < k).collect();
        Ok(FepConfiguration::new(&bits))
    }
}

/// A tagged FEP particle together with its configuration. The rank is derived.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaggedFepState {
    /// 1-based site of the tagged particle.
    pub position: usize,
    pub config: FepConfiguration,
}

impl TaggedFepState {
    pub fn new(position: usize, config: FepConfiguration) -> Result<Self> {
        if position == 0 || position > config.size() {
            return Err(Error::SiteOutOfRange { site: position, size: config.size() });
        }
        if !config.is_occupied(position) {
            return Err(Error::UnoccupiedSite(position));
        }
        Ok(TaggedFepState { position, config })
    }

    pub fn rank(&self) -> usize {
        rank_at(&self.config, self.position).expect("tagged site is occupied")
    }
}

/// Deviation of a clockwise segment from the mean density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentStatistic {
    pub start: usize,
    pub end: usize,
    pub deviation: f64,
}

impl SegmentStatistic {
    /// `|η_[start,end]| - density * |[start,end]|` on the clockwise segment
    /// `[start, end]` (1-based, wrapping when `end < start`), where `density`
    /// is the particle fraction of the whole circle.
    pub fn of_occupancy(occ: &Occupancy, start: usize, end: usize) -> Result<Self> {
        let n = occ.len();
        for x in [start, end] {
            if x == 0 || x > n {
                return Err(Error::SiteOutOfRange { site: x, size: n });
            }
        }
        let length = if end >= start { end - start + 1 } else { n - start + 1 + end };
        let count = (0..length).filter(|&j| occ.get0(start - 1 + j)).count();
        let deviation = count as f64 - occ.count() as f64 / n as f64 * length as f64;
        Ok(SegmentStatistic { start, end, deviation })
    }
}

pub(crate) fn check_supercritical(n: usize, k: usize) -> Result<()> {
    if k > n {
        return Err(Error::Infeasible { n, k, reason: "more particles than sites" });
    }
    if 2 * k <= n {
        return Err(Error::Infeasible { n, k, reason: "requires n/2 < k" });
    }
    Ok(())
}

/// True iff no two circularly adjacent sites are both empty.
pub fn is_ergodic(eta: &FepConfiguration) -> bool {
    let occ = eta.occupancy();
    let n = occ.len();
    (0..n).all(|i| occ.get0(i) || occ.get0(i + 1))
}

/// 1-based site of the `rank`-th particle counted clockwise from site 1.
pub fn particle_position(eta: &FepConfiguration, rank: usize) -> Result<usize> {
    let count = eta.particle_count();
    if rank == 0 || rank > count {
        return Err(Error::RankOutOfRange { rank, count });
    }
    let occ = eta.occupancy();
    let mut seen = 0;
    for i in 0..occ.len() {
        if occ.get0(i) {
            seen += 1;
            if seen == rank {
                return Ok(i + 1);
            }
        }
    }
    unreachable!("rank within particle count")
}

/// Number of particles on sites `1..=x`; requires site `x` to be occupied.
pub fn rank_at(eta: &FepConfiguration, x: usize) -> Result<usize> {
    let n = eta.size();
    if x == 0 || x > n {
        return Err(Error::SiteOutOfRange { site: x, size: n });
    }
    if !eta.is_occupied(x) {
        return Err(Error::UnoccupiedSite(x));
    }
    let occ = eta.occupancy();
    Ok((0..x).filter(|&i| occ.get0(i)).count())
}

/// Binomial coefficient, `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// All configurations of `n` sites with `k` particles (only the ergodic ones
/// when `ergodic_only`), in lexicographic order of the word read from site 1.
pub fn enumerate(n: usize, k: usize, ergodic_only: bool) -> Result<Vec<FepConfiguration>> {
    if k > n {
        return Err(Error::Infeasible { n, k, reason: "more particles than sites" });
    }
    let total = binomial(n, k).unwrap_or(u128::MAX);
    if n > 64 || total > MAX_ENUMERATION {
        return Err(Error::SizeGuard { states: total, limit: MAX_ENUMERATION });
    }
    Ok(lex_words(n, k)
        .map(FepConfiguration::from_occupancy)
        .filter(|eta| !ergodic_only || is_ergodic(eta))
        .collect())
}

/// Same as [`enumerate`] for SSEP words (no ergodicity filter).
pub fn enumerate_ssep(k: usize, p: usize) -> Result<Vec<SsepConfiguration>> {
    if p > k {
        return Err(Error::Infeasible { n: k, k: p, reason: "more particles than sites" });
    }
    let total = binomial(k, p).unwrap_or(u128::MAX);
    if k > 64 || total > MAX_ENUMERATION {
        return Err(Error::SizeGuard { states: total, limit: MAX_ENUMERATION });
    }
    Ok(lex_words(k, p).map(SsepConfiguration::from_occupancy).collect())
}

/// Words with `k` ones among `n` bits, lexicographic from site 1.
///
/// Iterates Gosper's hack on the integer whose most significant bit is
/// site 1, then reverses into storage order.
fn lex_words(n: usize, k: usize) -> impl Iterator<Item = Occupancy> {
    let limit: u128 = 1u128 << n;
    let mut next: Option<u128> = Some(if k == 0 { 0 } else { (1u128 << k) - 1 });
    std::iter::from_fn(move || {
        let v = next?;
        next = if k == 0 {
            None
        } else {
            let c = v & v.wrapping_neg();
            let r = v + c;
            let succ = (((r ^ v) >> 2) / c) | r;
            (succ < limit).then_some(succ)
        };
        let mut word = 0u64;
        for i in 0..n {
            if (v >> (n - 1 - i)) & 1 == 1 {
                word |= 1 << i;
            }
        }
        Some(Occupancy::from_u64(n, word))
    })
}

/// Uniform draw from the SSEP words with `p` particles on `k` sites.
pub fn sample_uniform_ssep<R: Rng + ?Sized>(k: usize, p: usize, rng: &mut R) -> SsepConfiguration {
    assert!(p <= k, "p={p} exceeds k={k}");
    let mut bits = vec![false; k];
    for i in rand::seq::index::sample(rng, k, p).iter() {
        bits[i] = true;
    }
    SsepConfiguration::new(&bits)
}
