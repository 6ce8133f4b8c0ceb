//! Exact computations on enumerable instances: sparse generators, time-`t`
//! laws by uniformization, total-variation distances and worst-case mixing
//! and transience times.

use std::collections::HashMap;
use std::fmt::Display;
use std::hash::Hash;
use std::io::Write;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::configurations::{binomial, enumerate, enumerate_ssep, is_ergodic, FepConfiguration, SsepConfiguration};
use crate::error::{Error, Result};
use crate::mappings::phi;

/// Largest state space the exact routines will build.
pub const MAX_EXACT_STATES: u128 = 20_000;

/// Poisson mass left out of a uniformization sum.
const TRUNCATION: f64 = 1e-13;

/// Relative tolerance of the worst-case time bisection.
pub const TIME_TOLERANCE: f64 = 1e-6;

/// Sparse continuous-time generator with integer rates on an enumerated
/// state space.
#[derive(Clone, Debug)]
pub struct RateModel<S> {
    states: Vec<S>,
    index: HashMap<S, usize>,
    row_start: Vec<usize>,
    targets: Vec<usize>,
    rates: Vec<u32>,
    exit: Vec<u32>,
    lambda: f64,
}

impl<S: Clone + Eq + Hash> RateModel<S> {
    /// Builds the generator from `states` and a function listing the jumps
    /// out of each state (repeated targets are added up, self-loops dropped).
    pub fn from_transitions<F>(states: Vec<S>, mut jumps: F) -> Result<Self>
    where
        F: FnMut(&S) -> Result<Vec<(S, u32)>>,
    {
        let index: HashMap<S, usize> = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        if index.len() != states.len() {
            return Err(Error::Precondition("duplicate states".into()));
        }
        let mut row_start = vec![0];
        let mut targets = Vec::new();
        let mut rates = Vec::new();
        let mut exit = Vec::with_capacity(states.len());
        for (i, s) in states.iter().enumerate() {
            let mut row: Vec<(usize, u32)> = Vec::new();
            for (t, r) in jumps(s)? {
                let j = *index
                    .get(&t)
                    .ok_or_else(|| Error::Precondition(format!("jump from state {i} leaves the state space")))?;
                if j != i && r > 0 {
                    row.push((j, r));
                }
            }
            row.sort_unstable();
            let mut merged: Vec<(usize, u32)> = Vec::with_capacity(row.len());
            for (j, r) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += r,
                    _ => merged.push((j, r)),
                }
            }
            exit.push(merged.iter().map(|&(_, r)| r).sum());
            for (j, r) in merged {
                targets.push(j);
                rates.push(r);
            }
            row_start.push(targets.len());
        }
        let lambda = exit.iter().copied().max().unwrap_or(0).max(1) as f64;
        Ok(RateModel { states, index, row_start, targets, rates, exit, lambda })
    }

    /// The same chain on the states satisfying `keep`; fails if some rate
    /// leads out of the kept set.
    pub fn restricted<F: Fn(&S) -> bool>(&self, keep: F) -> Result<Self> {
        let kept: Vec<S> = self.states.iter().filter(|s| keep(s)).cloned().collect();
        RateModel::from_transitions(kept, |s| {
            let i = self.index[s];
            let out = self.jumps(i).map(|(j, r)| (self.states[j].clone(), r)).collect::<Vec<_>>();
            if out.iter().any(|(t, _)| !keep(t)) {
                return Err(Error::Precondition("restriction is not closed under the dynamics".into()));
            }
            Ok(out)
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn index_of(&self, s: &S) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn exit_rate(&self, i: usize) -> u32 {
        self.exit[i]
    }

    /// Uniformization constant, the largest exit rate (at least 1).
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Off-diagonal jumps `(target, rate)` out of state `i`.
    pub fn jumps(&self, i: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        let range = self.row_start[i]..self.row_start[i + 1];
        self.targets[range.clone()].iter().copied().zip(self.rates[range].iter().copied())
    }

    /// Off-diagonal rate from `i` to `j` (zero on the diagonal).
    pub fn rate(&self, i: usize, j: usize) -> u32 {
        self.jumps(i).find(|&(t, _)| t == j).map_or(0, |(_, r)| r)
    }

    /// Number of nonzero off-diagonal entries.
    pub fn nonzeros(&self) -> usize {
        self.targets.len()
    }

    /// One step of the uniformized chain `v ↦ v (I + Q/Λ)`.
    fn uniform_step(&self, v: &[f64], out: &mut [f64]) {
        for (i, &vi) in v.iter().enumerate() {
            out[i] = vi * (1.0 - self.exit[i] as f64 / self.lambda);
        }
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            let scaled = vi / self.lambda;
            for (j, r) in self.jumps(i) {
                out[j] += scaled * r as f64;
            }
        }
    }

    fn propagate(&self, v: &mut [f64], t: f64) {
        let lt = self.lambda * t;
        if lt == 0.0 {
            return;
        }
        let mut acc = vec![0.0; v.len()];
        let mut cur = v.to_vec();
        let mut next = vec![0.0; v.len()];
        let (log_lt, cap) = (lt.ln(), (lt + 60.0 * lt.sqrt() + 200.0) as usize);
        let mut log_w = -lt;
        let mut mass = 0.0;
        for n in 0.. {
            let w = log_w.exp();
            if w > 0.0 {
                for (a, c) in acc.iter_mut().zip(&cur) {
                    *a += w * c;
                }
                mass += w;
            }
            if (n as f64 > lt && 1.0 - mass < TRUNCATION) || n >= cap {
                break;
            }
            self.uniform_step(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
            log_w += log_lt - ((n + 1) as f64).ln();
        }
        v.copy_from_slice(&acc);
    }
}

impl<S: Clone + Eq + Hash + Sync> RateModel<S> {
    /// Evolves each row of the row-major batch `rows` (rows of length
    /// `len()`) by time `t`, in parallel.
    fn propagate_rows(&self, rows: &mut [f64], t: f64) {
        rows.par_chunks_mut(self.len()).for_each(|row| self.propagate(row, t));
    }
}

/// A probability vector over the states of a [`RateModel`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistributionVector {
    probs: Vec<f64>,
}

impl DistributionVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Precondition("probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!("probabilities sum to {total}")));
        }
        Ok(DistributionVector { probs })
    }

    pub fn point_mass(len: usize, i: usize) -> Self {
        let mut probs = vec![0.0; len];
        probs[i] = 1.0;
        DistributionVector { probs }
    }

    /// Uniform law on the given indices.
    pub fn uniform_on(len: usize, support: &[usize]) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Precondition("empty support".into()));
        }
        let mut probs = vec![0.0; len];
        for &i in support {
            probs[i] = 1.0 / support.len() as f64;
        }
        Ok(DistributionVector { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Total mass on the given indices.
    pub fn mass_on(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.probs[i]).sum()
    }
}

/// `mu0 e^{tQ}` by uniformization, truncated once the Poisson tail is below `1e-13`.
pub fn distribution_at<S: Clone + Eq + Hash>(
    model: &RateModel<S>,
    mu0: &DistributionVector,
    t: f64,
) -> Result<DistributionVector> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::NonFinite(t));
    }
    if mu0.len() != model.len() {
        return Err(Error::MismatchedSupport(mu0.len(), model.len()));
    }
    let mut v = mu0.probs.clone();
    model.propagate(&mut v, t);
    Ok(DistributionVector { probs: v })
}

pub fn tv_distance(mu: &DistributionVector, nu: &DistributionVector) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::MismatchedSupport(mu.len(), nu.len()));
    }
    Ok(tv_slices(&mu.probs, &nu.probs))
}

fn tv_slices(a: &[f64], b: &[f64]) -> f64 {
    (0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()).min(1.0)
}

/// First time the worst row of the family `{δ_s e^{tQ} : s ∈ starts}` has
/// `score <= eps`, assuming the score is non-increasing in time for each
/// start. Doubles the horizon until the target is met, then bisects to a
/// relative tolerance of [`TIME_TOLERANCE`], returning the upper end.
pub fn worst_case_time<S, F>(model: &RateModel<S>, starts: &[usize], eps: f64, score: F) -> Result<f64>
where
    S: Clone + Eq + Hash + Sync,
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = model.len();
    let worst = |rows: &[f64]| rows.par_chunks(n).map(&score).reduce(|| 0.0, f64::max);
    let mut lo_rows = vec![0.0; starts.len() * n];
    for (r, &s) in starts.iter().enumerate() {
        lo_rows[r * n + s] = 1.0;
    }
    if worst(&lo_rows) <= eps {
        return Ok(0.0);
    }
    let mut t_lo = 0.0;
    let mut dt = 1.0 / model.lambda();
    let t_hi = loop {
        let mut rows = lo_rows.clone();
        model.propagate_rows(&mut rows, dt);
        if worst(&rows) <= eps {
            break t_lo + dt;
        }
        t_lo += dt;
        lo_rows = rows;
        dt *= 2.0;
        if t_lo > 1e9 {
            return Err(Error::Precondition(format!("score never falls below {eps}")));
        }
    };
    let mut t_hi = t_hi;
    while t_hi - t_lo > TIME_TOLERANCE * t_hi {
        let mid = 0.5 * (t_lo + t_hi);
        let mut rows = lo_rows.clone();
        model.propagate_rows(&mut rows, mid - t_lo);
        if worst(&rows) <= eps {
            t_hi = mid;
        } else {
            t_lo = mid;
            lo_rows = rows;
        }
    }
    Ok(t_hi)
}

/// `(t, worst score)` on a grid of times for the given starts.
pub fn worst_case_curve<S, F>(model: &RateModel<S>, starts: &[usize], times: &[f64], score: F) -> Result<Vec<f64>>
where
    S: Clone + Eq + Hash + Sync,
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = model.len();
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut rows = vec![0.0; starts.len() * n];
    for (r, &s) in starts.iter().enumerate() {
        rows[r * n + s] = 1.0;
    }
    let mut out = vec![0.0; times.len()];
    let mut now = 0.0;
    for i in order {
        let t = times[i];
        if !t.is_finite() || t < 0.0 {
            return Err(Error::NonFinite(t));
        }
        model.propagate_rows(&mut rows, t - now);
        now = t;
        out[i] = rows.par_chunks(n).map(&score).reduce(|| 0.0, f64::max);
    }
    Ok(out)
}

/// Jumps of the facilitated exclusion process out of `eta`, each at rate 1.
fn fep_jumps(eta: &FepConfiguration) -> Vec<(FepConfiguration, u32)> {
    let bits = eta.to_bools();
    let n = bits.len();
    let mut out = Vec::new();
    for x in 0..n {
        for (behind, ahead) in [((x + n - 1) % n, (x + 1) % n), ((x + 1) % n, (x + n - 1) % n)] {
            if bits[behind] && bits[x] && !bits[ahead] {
                let mut next = bits.clone();
                next[x] = false;
                next[ahead] = true;
                out.push((FepConfiguration::new(&next), 1));
            }
        }
    }
    out
}

fn guard(states: u128) -> Result<()> {
    if states > MAX_EXACT_STATES {
        return Err(Error::SizeGuard { states, limit: MAX_EXACT_STATES });
    }
    Ok(())
}

/// FEP generator on all configurations of `n` sites with `k` particles.
pub fn build_fep_generator(n: usize, k: usize) -> Result<RateModel<FepConfiguration>> {
    guard(binomial(n, k).unwrap_or(u128::MAX))?;
    RateModel::from_transitions(enumerate(n, k, false)?, |eta| Ok(fep_jumps(eta)))
}

/// FEP generator restricted to the ergodic configurations.
pub fn build_ergodic_fep_generator(n: usize, k: usize) -> Result<RateModel<FepConfiguration>> {
    guard(binomial(n, k).unwrap_or(u128::MAX))?;
    RateModel::from_transitions(enumerate(n, k, true)?, |eta| Ok(fep_jumps(eta)))
}

/// FEP on ergodic configurations together with the rank of a tagged
/// particle; the rank moves by ±1 (mod `k`) whenever a particle crosses the
/// edge from site `n` to site `1`.
pub fn build_tagged_fep_generator(n: usize, k: usize) -> Result<RateModel<(usize, FepConfiguration)>> {
    guard(binomial(n, k).unwrap_or(u128::MAX).saturating_mul(k as u128))?;
    let ergodic = enumerate(n, k, true)?;
    let states: Vec<(usize, FepConfiguration)> = ergodic
        .iter()
        .flat_map(|eta| (1..=k).map(move |r| (r, eta.clone())))
        .collect();
    RateModel::from_transitions(states, |(rank, eta)| {
        let first = eta.is_occupied(1);
        let last = eta.is_occupied(n);
        Ok(fep_jumps(eta)
            .into_iter()
            .map(|(next, r)| {
                let rank = if last && !next.is_occupied(n) && next.is_occupied(1) && !first {
                    rank % k + 1
                } else if first && !next.is_occupied(1) && next.is_occupied(n) && !last {
                    (rank + k - 2) % k + 1
                } else {
                    *rank
                };
                ((rank, next), r)
            })
            .collect())
    })
}

/// SSEP swaps of `sigma` with the signed particle crossing of edge `(K, 1)`.
fn ssep_jumps(sigma: &SsepConfiguration) -> Vec<(SsepConfiguration, i64)> {
    let bits = sigma.to_bools();
    let k = bits.len();
    let mut out = Vec::new();
    if k < 2 {
        return out;
    }
    for c in 0..k {
        let l = (c + k - 1) % k;
        if bits[l] != bits[c] {
            let mut next = bits.clone();
            next.swap(l, c);
            let crossing = if c == 0 { if bits[l] { 1 } else { -1 } } else { 0 };
            out.push((SsepConfiguration::new(&next), crossing));
        }
    }
    out
}

/// Plain SSEP generator on `k` sites with `p` particles.
pub fn build_ssep_generator(k: usize, p: usize) -> Result<RateModel<SsepConfiguration>> {
    guard(binomial(k, p).unwrap_or(u128::MAX))?;
    RateModel::from_transitions(enumerate_ssep(k, p)?, |s| {
        Ok(ssep_jumps(s).into_iter().map(|(t, _)| (t, 1)).collect())
    })
}

/// SSEP on `k` sites with `2k - n` particles together with a position
/// `x ∈ 1..=n` moved by the current through edge `(K, 1)`.
pub fn build_joint_generator(n: usize, k: usize) -> Result<RateModel<(usize, SsepConfiguration)>> {
    if !(2 * k > n && k <= n) {
        return Err(Error::Infeasible { n, k, reason: "requires n/2 < k <= n" });
    }
    let p = 2 * k - n;
    guard(binomial(k, p).unwrap_or(u128::MAX).saturating_mul(n as u128))?;
    let words = enumerate_ssep(k, p)?;
    let states: Vec<(usize, SsepConfiguration)> =
        (1..=n).flat_map(|x| words.iter().map(move |s| (x, s.clone()))).collect();
    RateModel::from_transitions(states, |(x, sigma)| {
        Ok(ssep_jumps(sigma)
            .into_iter()
            .map(|(next, d)| {
                let x = ((*x as i64 - 1 + d).rem_euclid(n as i64) + 1) as usize;
                ((x, next), 1)
            })
            .collect())
    })
}

/// Checks that `map` is a bijection between the state spaces carrying every
/// rate of `a` onto the same rate of `b`.
pub fn is_conjugate<A, B, F>(a: &RateModel<A>, b: &RateModel<B>, map: F) -> Result<bool>
where
    A: Clone + Eq + Hash,
    B: Clone + Eq + Hash,
    F: Fn(&A) -> Result<B>,
{
    if a.len() != b.len() || a.nonzeros() != b.nonzeros() {
        return Ok(false);
    }
    let mut image = Vec::with_capacity(a.len());
    let mut hit = vec![false; b.len()];
    for s in a.states() {
        let Some(j) = b.index_of(&map(s)?) else {
            return Ok(false);
        };
        if std::mem::replace(&mut hit[j], true) {
            return Ok(false);
        }
        image.push(j);
    }
    for i in 0..a.len() {
        if a.exit_rate(i) != b.exit_rate(image[i]) {
            return Ok(false);
        }
        for (j, r) in a.jumps(i) {
            if b.rate(image[i], image[j]) != r {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The rank-augmented FEP and the SSEP with position, related by the static mapping.
pub fn mapping_conjugates_generators(n: usize, k: usize) -> Result<bool> {
    let tagged = build_tagged_fep_generator(n, k)?;
    let joint = build_joint_generator(n, k)?;
    is_conjugate(&tagged, &joint, |(rank, eta)| {
        let m = phi(*rank, eta)?;
        Ok((m.position, m.ssep))
    })
}

/// Exact test of `ν Q = 0` in rational arithmetic.
pub fn is_stationary_exact<S: Clone + Eq + Hash>(model: &RateModel<S>, nu: &[Ratio<i64>]) -> Result<bool> {
    if nu.len() != model.len() {
        return Err(Error::MismatchedSupport(nu.len(), model.len()));
    }
    let mut flow: Vec<Ratio<i64>> = (0..model.len())
        .map(|i| -nu[i] * Ratio::from_integer(model.exit_rate(i) as i64))
        .collect();
    for (i, &w) in nu.iter().enumerate() {
        for (j, r) in model.jumps(i) {
            flow[j] += w * Ratio::from_integer(r as i64);
        }
    }
    Ok(flow.iter().all(|f| *f == Ratio::from_integer(0)))
}

/// Exact uniform weights on the indices where `keep` holds, zero elsewhere.
pub fn uniform_rational<S>(states: &[S], keep: impl Fn(&S) -> bool) -> Vec<Ratio<i64>> {
    let m = states.iter().filter(|s| keep(s)).count() as i64;
    states
        .iter()
        .map(|s| if keep(s) { Ratio::new(1, m) } else { Ratio::from_integer(0) })
        .collect()
}

fn check_exact_sizes(n: usize, k: usize) -> Result<()> {
    if !(2 * k > n && k < n) {
        return Err(Error::Infeasible { n, k, reason: "requires n/2 < k < n" });
    }
    Ok(())
}

/// Index sets of ergodic and transient states of a full FEP model.
fn split_ergodic(model: &RateModel<FepConfiguration>) -> (Vec<usize>, Vec<usize>) {
    (0..model.len()).partition(|&i| is_ergodic(&model.states()[i]))
}

/// Uniform law on the ergodic configurations, as a vector over `model`'s states.
pub fn pi_fep_vector(model: &RateModel<FepConfiguration>) -> Result<DistributionVector> {
    DistributionVector::uniform_on(model.len(), &split_ergodic(model).0)
}

fn tv_score(pi: Vec<f64>) -> impl Fn(&[f64]) -> f64 + Sync {
    move |row: &[f64]| tv_slices(row, &pi)
}

/// Worst-case `eps`-mixing time over all configurations of `n` sites with `k` particles.
pub fn mixing_time(n: usize, k: usize, eps: f64) -> Result<f64> {
    check_exact_sizes(n, k)?;
    let model = build_fep_generator(n, k)?;
    let pi = pi_fep_vector(&model)?;
    let starts: Vec<usize> = (0..model.len()).collect();
    worst_case_time(&model, &starts, eps, tv_score(pi.probs))
}

/// Worst-case `eps`-mixing time over ergodic starting configurations.
pub fn ergodic_mixing_time(n: usize, k: usize, eps: f64) -> Result<f64> {
    check_exact_sizes(n, k)?;
    let model = build_ergodic_fep_generator(n, k)?;
    let pi = DistributionVector::uniform_on(model.len(), &(0..model.len()).collect::<Vec<_>>())?;
    let starts: Vec<usize> = (0..model.len()).collect();
    worst_case_time(&model, &starts, eps, tv_score(pi.probs))
}

/// First time at which, from every start, the transient configurations carry mass at most `eps`.
pub fn transience_time(n: usize, k: usize, eps: f64) -> Result<f64> {
    check_exact_sizes(n, k)?;
    let model = build_fep_generator(n, k)?;
    let (_, transient) = split_ergodic(&model);
    let starts: Vec<usize> = (0..model.len()).collect();
    worst_case_time(&model, &starts, eps, move |row: &[f64]| transient.iter().map(|&i| row[i]).sum())
}

/// Exact TV distance to stationarity from `start` at each time in `times`.
pub fn tv_curve(start: &FepConfiguration, times: &[f64]) -> Result<Vec<f64>> {
    let (n, k) = (start.size(), start.particle_count());
    check_exact_sizes(n, k)?;
    let model = build_fep_generator(n, k)?;
    let pi = pi_fep_vector(&model)?;
    let s = model.index_of(start).expect("enumerated");
    worst_case_curve(&model, &[s], times, tv_score(pi.probs))
}

/// Writes `index,state` rows.
pub fn write_state_table<S: Display, W: Write>(model: &RateModel<S>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "state"])?;
    for (i, s) in model.states.iter().enumerate() {
        w.write_record([i.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
