use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::coupling::GrandCoupling;
use super::fep::TaggedFepProcess;
use crate::configurations::{is_ergodic, particle_position, sample_uniform_ssep, FepConfiguration, TaggedFepState};
use crate::error::{Error, Result};
use crate::mappings::{phi, psi};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeSettings {
    pub epsilon: f64,
    /// Fluctuation scale: heights spread less than `s √P` with high probability at `t1`.
    pub s: f64,
    /// Merge budget is `budget_constant · K²` after `t1`.
    pub budget_constant: f64,
    /// Absolute times (all at least `t1`) at which agreement of the upper
    /// profile with the true one, modulo `N`, is recorded.
    pub observation_times: Vec<f64>,
}

impl MergeSettings {
    pub fn new(epsilon: f64, s: f64) -> Self {
        MergeSettings {
            epsilon,
            s,
            budget_constant: 1.0,
            observation_times: Vec::new(),
        }
    }

    pub fn s_prime(&self) -> f64 {
        2.0 * self.s / self.epsilon
    }
}

/// Time scales and offset range of the merge construction for given sizes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeWindow {
    /// `min(2K - N, N - K)`, the scale of height fluctuations.
    pub p_eff: usize,
    pub t1: f64,
    pub t2: f64,
    pub u_min: i64,
    pub u_max: i64,
}

pub fn merge_window(n: usize, k: usize, settings: &MergeSettings) -> Result<MergeWindow> {
    if !(2 * k > n && k < n) {
        return Err(Error::Infeasible { n, k, reason: "merge construction needs n/2 < k < n" });
    }
    if !(settings.epsilon > 0.0 && settings.epsilon < 1.0) || settings.s <= 0.0 || settings.budget_constant < 0.0 {
        return Err(Error::Precondition(format!("bad merge settings {settings:?}")));
    }
    let p_eff = (2 * k - n).min(n - k);
    let kf = k as f64;
    let t1 = kf * kf * (p_eff as f64).ln() / (8.0 * PI * PI);
    let u_min = (settings.s_prime() * (p_eff as f64).sqrt()).ceil() as i64;
    Ok(MergeWindow {
        p_eff,
        t1,
        t2: settings.budget_constant * kf * kf,
        u_min,
        u_max: 2 * u_min,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeReport {
    pub merged: bool,
    /// Absolute time at which all three profiles coincided.
    pub merge_time: Option<f64>,
    pub t1: f64,
    pub t2: f64,
    pub u: i64,
    pub sandwich_held: bool,
    /// `(Y(t1) - U) mod N` as a site in `1..=N`.
    pub initial_height_mod_n: usize,
    /// Law of the upper profile's starting site given the configuration at
    /// `t1`, indexed by site minus one.
    pub initial_height_law: Vec<f64>,
    /// For each observation time, whether the upper profile equals the true
    /// one up to a vertical shift by a multiple of `N`.
    pub agreement: Vec<bool>,
}

/// One replicate of the coupling construction from an ergodic `eta`.
///
/// The tagged FEP runs to `t1` from a uniformly chosen tag; its image
/// `ζ = Ψ(Y, σ)` is bracketed by `Ψ(Y + U, σ') <= ζ <= Ψ(Y - U, σ')` (when
/// the bracket holds) with `σ'` stationary and `U` uniform on
/// `[u_min, u_max]`. The three profiles then run under [`GrandCoupling`].
pub fn run_merge_experiment<R: Rng + ?Sized>(
    eta: &FepConfiguration,
    settings: &MergeSettings,
    rng: &mut R,
) -> Result<MergeReport> {
    let (n, k) = (eta.size(), eta.particle_count());
    let w = merge_window(n, k, settings)?;
    if !is_ergodic(eta) {
        return Err(Error::NotErgodic);
    }
    if let Some(&bad) = settings.observation_times.iter().find(|&&t| !(t >= w.t1)) {
        return Err(Error::Precondition(format!("observation time {bad} precedes t1 = {}", w.t1)));
    }

    let start = particle_position(eta, rng.gen_range(1..=k))?;
    let mut tagged = TaggedFepProcess::new(&TaggedFepState::new(start, eta.clone())?);
    tagged.advance(w.t1, rng);
    let config = tagged.state().config;
    let mapped = phi(tagged.rank(), &config)?;
    let y = mapped.position as i64;

    let width = (w.u_max - w.u_min + 1) as f64;
    let occ = config.occupancy();
    let initial_height_law = (0..n)
        .map(|x| {
            let hits = (w.u_min..=w.u_max).filter(|&u| occ.get0(x + u as usize)).count();
            hits as f64 / (k as f64 * width)
        })
        .collect();

    let sigma_eq = sample_uniform_ssep(k, 2 * k - n, rng);
    let u = rng.gen_range(w.u_min..=w.u_max);
    let zeta = psi(y, &mapped.ssep);
    let upper = psi(y - u, &sigma_eq);
    let lower = psi(y + u, &sigma_eq);
    let sandwich_held = lower.dominated_by(&zeta).is_ok() && zeta.dominated_by(&upper).is_ok();
    let initial_height_mod_n = ((y - u - 1).rem_euclid(n as i64) + 1) as usize;

    let mut g = GrandCoupling::new(vec![lower, zeta, upper])?;
    let mut merge_time = g.merged().then_some(w.t1);
    let mut run_to = |g: &mut GrandCoupling, t_rel: f64, merge_time: &mut Option<f64>| {
        while merge_time.is_none() && g.step(t_rel, rng).is_some() {
            if g.merged() {
                *merge_time = Some(w.t1 + g.time());
            }
        }
    };

    let mut order: Vec<usize> = (0..settings.observation_times.len()).collect();
    order.sort_by(|&a, &b| settings.observation_times[a].total_cmp(&settings.observation_times[b]));
    let mut agreement = vec![false; order.len()];
    for i in order {
        run_to(&mut g, settings.observation_times[i] - w.t1, &mut merge_time);
        let p = g.profiles();
        agreement[i] = p[2].congruent_mod(&p[1], n);
    }
    run_to(&mut g, w.t2, &mut merge_time);

    Ok(MergeReport {
        merged: merge_time.is_some_and(|t| t <= w.t1 + w.t2),
        merge_time,
        t1: w.t1,
        t2: w.t2,
        u,
        sandwich_held,
        initial_height_mod_n,
        initial_height_law,
        agreement,
    })
}
