//! Monte Carlo experiments: fluctuation statistics, total-variation lower
//! and upper bound estimators, calibration of the thresholds, and cutoff
//! profiles with their CSV form.
//!
//! Every replicate draws from its own ChaCha8 stream derived from the
//! experiment seed, so results do not depend on how replicates are spread
//! over threads. `FEPLAB_THREADS` caps the worker pool.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configurations::{binomial, FepConfiguration, SsepConfiguration};
use crate::dynamics::{merge_window, run_merge_experiment, FepProcess, MergeSettings, SsepProcess};
use crate::error::{Error, Result};
use crate::exact::{build_fep_generator, pi_fep_vector, worst_case_curve, MAX_EXACT_STATES};
use crate::mappings::{phi, sample_pi_fep};
use crate::spectral::{epsilon_prime, expected_segment_occupancy, mu, solve_t_star};

const CALIBRATION_STREAMS: u64 = 1;
const STATIONARY_STREAMS: u64 = 2;
const TRAJECTORY_STREAMS: u64 = 3;
const MERGE_STREAMS: u64 = 4;
const SSEP_STREAMS: u64 = 5;
const TRANSIENT_STREAMS: u64 = 6;

/// Generator for replicate `index` of the stream family `space`.
pub fn replicate_rng(seed: u64, space: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((space << 40) | index);
    rng
}

/// Runs `f` on a pool of `FEPLAB_THREADS` workers when that variable is set.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let threads = std::env::var("FEPLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok());
    match threads.filter(|&t| t > 0) {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

fn replicate_map<T, F>(count: usize, seed: u64, space: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync + Send,
{
    with_pool(|| {
        (0..count)
            .into_par_iter()
            .map(|i| f(&mut replicate_rng(seed, space, i as u64)))
            .collect()
    })
}

/// Largest deviation `| |occupied in I| - density |I| |` over circular
/// segments `I`, i.e. the range of the centred partial-sum walk.
pub fn fluctuation_statistic(occ: &[bool]) -> f64 {
    let l = occ.len() as i64;
    if l == 0 {
        return 0.0;
    }
    let m = occ.iter().filter(|&&b| b).count() as i64;
    let (mut w, mut lo, mut hi) = (0i64, 0i64, 0i64);
    for &b in occ {
        w += if b { l - m } else { -m };
        lo = lo.min(w);
        hi = hi.max(w);
    }
    (hi - lo) as f64 / l as f64
}

/// Same maximum restricted to segments that start on a particle and end
/// just before one, which correspond to segments of the mapped SSEP word.
pub fn particle_anchored_statistic(eta: &FepConfiguration) -> f64 {
    let (n, k) = (eta.size() as i64, eta.particle_count() as i64);
    let sites = eta.sites();
    if sites.is_empty() {
        return 0.0;
    }
    let (mut w, mut lo, mut hi) = (0i64, 0i64, 0i64);
    for (i, &x) in sites.iter().enumerate() {
        let next = if i + 1 < sites.len() { sites[i + 1] } else { sites[0] + n as usize };
        w += n - k * (next - x) as i64;
        lo = lo.min(w);
        hi = hi.max(w);
    }
    (hi - lo) as f64 / n as f64
}

/// First Fourier coefficient `Σ_x (occ_x - ρ) e^{2πix/L}` as `(re, im)`.
pub fn first_mode(occ: &[bool]) -> (f64, f64) {
    let l = occ.len();
    if l == 0 {
        return (0.0, 0.0);
    }
    let rho = occ.iter().filter(|&&b| b).count() as f64 / l as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (j, &b) in occ.iter().enumerate() {
        let a = 2.0 * PI * j as f64 / l as f64;
        let d = f64::from(u8::from(b)) - rho;
        re += d * a.cos();
        im += d * a.sin();
    }
    (re, im)
}

/// Distinguishing statistic for the lower-bound estimator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    /// Largest segment density deviation of the FEP configuration.
    #[default]
    Fluctuation,
    /// First Fourier coefficient of the configuration projected on its
    /// direction at the starting configuration.
    FirstMode,
}

impl Statistic {
    /// The statistic as a function of the occupation, for trajectories
    /// started from `start`.
    pub fn evaluator(self, start: &[bool]) -> impl Fn(&[bool]) -> f64 + Send + Sync + Copy {
        let (re0, im0) = first_mode(start);
        let norm = re0.hypot(im0);
        let dir = if norm > 0.0 { (re0 / norm, im0 / norm) } else { (1.0, 0.0) };
        move |occ: &[bool]| match self {
            Statistic::Fluctuation => fluctuation_statistic(occ),
            Statistic::FirstMode => {
                let (re, im) = first_mode(occ);
                re * dir.0 + im * dir.1
            }
        }
    }

    /// Smallest threshold strictly above the sample value `v`.
    fn just_above(self, v: f64, n: usize) -> f64 {
        match self {
            Statistic::Fluctuation => v + 0.5 / n as f64,
            Statistic::FirstMode => v + 1e-9 * v.abs().max(1.0),
        }
    }
}

/// `min(2k - n, n - k)`: the SSEP-side particle count after the complement rule.
pub fn effective_p(n: usize, k: usize) -> usize {
    (2 * k - n).min(n - k)
}

/// SSEP word on which statistics are taken: `σ` itself, or `1 - σ` when
/// `2k - n > n - k`.
pub fn effective_ssep(n: usize, k: usize, sigma: &SsepConfiguration) -> (SsepConfiguration, usize) {
    if 2 * k - n > n - k {
        (sigma.complement(), n - k)
    } else {
        (sigma.clone(), 2 * k - n)
    }
}

/// SSEP word of an ergodic FEP configuration, seen from its first particle.
pub fn mapped_ssep(eta: &FepConfiguration) -> Result<SsepConfiguration> {
    Ok(phi(1, eta)?.ssep)
}

fn ergodic_slice(occ: &[bool]) -> bool {
    let n = occ.len();
    (0..n).all(|i| occ[i] || occ[(i + 1) % n])
}

/// Smallest sample value `v` with at most a fraction `q` of the sample above it.
pub fn upper_quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let above = ((q * n as f64).floor() as usize).min(n - 1);
    v[n - 1 - above]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    TvCurve,
    MergeUb,
    StatisticLb,
    Transience,
    SpectralLb,
    Map,
    Enumerate,
}

impl Mode {
    fn needs_supercritical(self) -> bool {
        !matches!(self, Mode::Map | Mode::Enumerate)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Fluctuation threshold; calibrated from stationary samples when absent.
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub s_prime: Option<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_path: Option<String>,
    pub mode: Mode,
    #[serde(default)]
    pub statistic: Statistic,
    /// Samples from the invariant law used for calibration and for the
    /// stationary side of the lower bound; defaults to `replicates`.
    #[serde(default)]
    pub stationary_replicates: Option<usize>,
}

fn default_epsilon() -> f64 {
    0.25
}

fn default_replicates() -> usize {
    1000
}

impl ExperimentConfig {
    pub fn new(n: usize, k: usize, mode: Mode) -> Self {
        ExperimentConfig {
            n,
            k,
            times: Vec::new(),
            epsilon: default_epsilon(),
            s: None,
            s_prime: None,
            replicates: default_replicates(),
            seed: 0,
            output_path: None,
            mode,
            stationary_replicates: None,
            statistic: Statistic::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Precondition("replicates must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Precondition(format!("epsilon {} outside (0, 1)", self.epsilon)));
        }
        if let Some(&t) = self.times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::NonFinite(t));
        }
        if self.mode.needs_supercritical() && !(2 * self.k > self.n && self.k < self.n) {
            return Err(Error::Infeasible { n: self.n, k: self.k, reason: "requires n/2 < k < n" });
        }
        Ok(())
    }

    fn stationary_count(&self) -> usize {
        self.stationary_replicates.unwrap_or(self.replicates).max(1)
    }

    fn sorted_times(&self) -> Vec<f64> {
        let mut t = self.times.clone();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }
}

/// Geometric grid of `count` times from a quarter to four times the
/// spectral time scale `(1/λ_1) log(K/√P)`.
pub fn default_time_grid(n: usize, k: usize, count: usize) -> Vec<f64> {
    let p = effective_p(n, k).max(1) as f64;
    let centre = ((k as f64 / p.sqrt()).ln() / mu(k, 1)).max(1.0);
    let count = count.max(2);
    (0..count)
        .map(|i| centre / 4.0 * 16f64.powf(i as f64 / (count - 1) as f64))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvBoundReport {
    pub time: f64,
    pub lower_bound: f64,
    pub lower_stderr: f64,
    pub upper_bound: f64,
    pub upper_stderr: f64,
    pub lower_replicates: usize,
    pub upper_replicates: usize,
    /// False when the lower bound is within three standard errors of zero.
    pub certified: bool,
}

impl TvBoundReport {
    fn trivial(time: f64) -> Self {
        TvBoundReport {
            time,
            lower_bound: 0.0,
            lower_stderr: 0.0,
            upper_bound: 1.0,
            upper_stderr: 0.0,
            lower_replicates: 0,
            upper_replicates: 0,
            certified: false,
        }
    }
}

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Threshold `s` with at most a fraction `q` of stationary FEP samples
/// reaching `statistic >= s √P`, the statistic oriented by the clustered
/// ergodic start.
pub fn calibrate_statistic_s(n: usize, k: usize, statistic: Statistic, q: f64, samples: usize, seed: u64) -> Result<f64> {
    if !(2 * k > n && k < n) {
        return Err(Error::Infeasible { n, k, reason: "requires n/2 < k < n" });
    }
    let eval = statistic.evaluator(&FepConfiguration::clustered_ergodic(n, k)?.to_bools());
    let stats = replicate_map(samples.max(1), seed, CALIBRATION_STREAMS, |rng| {
        sample_pi_fep(n, k, rng).map(|eta| eval(&eta.to_bools()))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let v = upper_quantile(&stats, q);
    Ok(statistic.just_above(v, n) / (effective_p(n, k) as f64).sqrt())
}

/// Merge fluctuation scale `s` with `P(stationary fluctuation >= s √P - 1) <= ε/4`.
pub fn calibrate_merge_s(n: usize, k: usize, eps: f64, samples: usize, seed: u64) -> Result<f64> {
    if !(2 * k > n && k < n) {
        return Err(Error::Infeasible { n, k, reason: "requires n/2 < k < n" });
    }
    let p = 2 * k - n;
    let stats = replicate_map(samples.max(1), seed, CALIBRATION_STREAMS, |rng| {
        fluctuation_statistic(&crate::configurations::sample_uniform_ssep(k, p, rng).to_bools())
    });
    let v = upper_quantile(&stats, eps / 4.0);
    Ok(((v + 1.0) / (effective_p(n, k) as f64).sqrt()).max(f64::MIN_POSITIVE))
}

/// Statistic lower bound on the TV distance from the clustered ergodic start.
///
/// The distinguishing event is "transient, or statistic at least `s √P`";
/// its frequency along trajectories minus its stationary frequency bounds
/// the distance from below.
pub fn estimate_tv_lower(config: &ExperimentConfig) -> Result<Vec<TvBoundReport>> {
    config.validate()?;
    let (n, k) = (config.n, config.k);
    let s = match config.s {
        Some(s) => s,
        None => calibrate_statistic_s(
            n,
            k,
            config.statistic,
            epsilon_prime(config.epsilon),
            config.stationary_count(),
            config.seed,
        )?,
    };
    let start = FepConfiguration::clustered_ergodic(n, k)?;
    let eval = config.statistic.evaluator(&start.to_bools());
    // never ask for more than the starting configuration already shows
    let threshold = (s * (effective_p(n, k) as f64).sqrt()).min(eval(&start.to_bools()));
    let event = move |occ: &[bool]| !ergodic_slice(occ) || eval(occ) >= threshold;

    let times = config.sorted_times();
    let hits = replicate_map(config.replicates, config.seed, TRAJECTORY_STREAMS, |rng| {
        let mut p = FepProcess::new(&start);
        times
            .iter()
            .map(|&t| {
                p.advance(t, rng);
                event(p.occupation())
            })
            .collect::<Vec<bool>>()
    });

    let m = config.stationary_count();
    let pi_hits = replicate_map(m, config.seed, STATIONARY_STREAMS, |rng| {
        sample_pi_fep(n, k, rng).map(|eta| event(&eta.to_bools()))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let p_pi = pi_hits.iter().filter(|&&b| b).count() as f64 / m as f64;

    let r = config.replicates;
    Ok(times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let p_t = hits.iter().filter(|h| h[i]).count() as f64 / r as f64;
            let se = (binomial_se(p_t, r).powi(2) + binomial_se(p_pi, m).powi(2)).sqrt();
            let lower = (p_t - p_pi).clamp(0.0, 1.0);
            TvBoundReport {
                lower_bound: lower,
                lower_stderr: se,
                lower_replicates: r,
                certified: lower > 3.0 * se,
                ..TvBoundReport::trivial(t)
            }
        })
        .collect())
}

/// Coupling upper bound on the TV distance from the clustered ergodic start.
///
/// At each time the bound is the frequency with which the upper profile of
/// the merge construction disagrees with the true one modulo `N`, plus the
/// distance of its starting site's law from uniform. The offset scale is
/// `config.s_prime` when given, otherwise `2s/ε`.
pub fn estimate_tv_upper(config: &ExperimentConfig) -> Result<Vec<TvBoundReport>> {
    config.validate()?;
    let (n, k) = (config.n, config.k);
    let times = config.sorted_times();
    let s = match (config.s_prime, config.s) {
        (Some(sp), _) => sp * config.epsilon / 2.0,
        (None, Some(s)) => s,
        (None, None) => calibrate_merge_s(n, k, config.epsilon, config.stationary_count(), config.seed)?,
    };
    let mut settings = MergeSettings::new(config.epsilon, s);
    let w = merge_window(n, k, &settings)?;
    if let Some(&t) = times.iter().find(|&&t| t < w.t1) {
        return Err(Error::Precondition(format!("time {t} precedes t1 = {}", w.t1)));
    }
    let t_max = times.last().copied().unwrap_or(w.t1);
    settings.budget_constant = (t_max - w.t1) / (k * k) as f64;
    settings.observation_times = times.clone();

    let start = FepConfiguration::clustered_ergodic(n, k)?;
    let reports = replicate_map(config.replicates, config.seed, MERGE_STREAMS, |rng| {
        run_merge_experiment(&start, &settings, rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let r = reports.len();
    let mut law = vec![0.0; n];
    for rep in &reports {
        for (acc, q) in law.iter_mut().zip(&rep.initial_height_law) {
            *acc += q / r as f64;
        }
    }
    let start_tv = 0.5 * law.iter().map(|q| (q - 1.0 / n as f64).abs()).sum::<f64>();
    Ok(times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let d = reports.iter().filter(|rep| !rep.agreement[i]).count() as f64 / r as f64;
            TvBoundReport {
                upper_bound: (d + start_tv).min(1.0),
                upper_stderr: binomial_se(d, r),
                upper_replicates: r,
                ..TvBoundReport::trivial(t)
            }
        })
        .collect())
}

/// Both estimators at once; the upper bound is trivial before `t1`.
pub fn estimate_tv_bracket(config: &ExperimentConfig) -> Result<Vec<TvBoundReport>> {
    let mut rows = estimate_tv_lower(config)?;
    let t1 = merge_window(config.n, config.k, &MergeSettings::new(config.epsilon, 1.0))?.t1;
    let mut late = config.clone();
    late.times = rows.iter().map(|r| r.time).filter(|&t| t >= t1).collect();
    if !late.times.is_empty() {
        let upper = estimate_tv_upper(&late)?;
        for (row, up) in rows.iter_mut().filter(|r| r.time >= t1).zip(upper) {
            row.upper_bound = up.upper_bound;
            row.upper_stderr = up.upper_stderr;
            row.upper_replicates = up.upper_replicates;
        }
    }
    Ok(rows)
}

/// Frequency of transient configurations along trajectories from the
/// packed block, with binomial standard errors.
pub fn estimate_transient_mass(config: &ExperimentConfig) -> Result<Vec<(f64, f64, f64)>> {
    config.validate()?;
    let times = config.sorted_times();
    let start = FepConfiguration::clustered_block(config.n, config.k)?;
    let hits = replicate_map(config.replicates, config.seed, TRANSIENT_STREAMS, |rng| {
        let mut p = FepProcess::new(&start);
        times
            .iter()
            .map(|&t| {
                p.advance(t, rng);
                !ergodic_slice(p.occupation())
            })
            .collect::<Vec<bool>>()
    });
    let r = config.replicates;
    Ok(times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let f = hits.iter().filter(|h| h[i]).count() as f64 / r as f64;
            (t, f, binomial_se(f, r))
        })
        .collect())
}

/// One row of a cutoff profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub t: f64,
    pub lower: f64,
    pub lower_se: f64,
    pub upper: f64,
    pub upper_se: f64,
}

/// Whether the full FEP state space of `(n, k)` is small enough for exact work.
pub fn exact_feasible(n: usize, k: usize) -> bool {
    binomial(n, k).is_some_and(|c| c <= MAX_EXACT_STATES)
}

/// Distance to stationarity along `config.times`: the exact worst-case TV
/// over all starts when the state space is small, otherwise the Monte Carlo
/// bracket from the clustered ergodic start.
pub fn cutoff_profile(config: &ExperimentConfig) -> Result<Vec<ProfileRow>> {
    config.validate()?;
    let times = config.sorted_times();
    if exact_feasible(config.n, config.k) {
        let model = build_fep_generator(config.n, config.k)?;
        let pi = pi_fep_vector(&model)?.probs().to_vec();
        let starts: Vec<usize> = (0..model.len()).collect();
        let tv = worst_case_curve(&model, &starts, &times, |row: &[f64]| {
            0.5 * row.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum::<f64>()
        })?;
        return Ok(times
            .iter()
            .zip(tv)
            .map(|(&t, d)| ProfileRow { t, lower: d, lower_se: 0.0, upper: d, upper_se: 0.0 })
            .collect());
    }
    Ok(estimate_tv_bracket(config)?
        .into_iter()
        .map(|r| ProfileRow {
            t: r.time,
            lower: r.lower_bound,
            lower_se: r.lower_stderr,
            upper: r.upper_bound,
            upper_se: r.upper_stderr,
        })
        .collect())
}

pub fn write_profile_csv<W: Write>(rows: &[ProfileRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_profile_csv<R: Read>(input: R) -> Result<Vec<ProfileRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// First time the piecewise-linear curve through `(t, d)` drops to `eps`.
pub fn crossing_time(curve: &[(f64, f64)], eps: f64) -> Option<f64> {
    let first = curve.first()?;
    if first.1 <= eps {
        return Some(first.0);
    }
    curve.windows(2).find(|w| w[1].1 <= eps).map(|w| {
        let ((t0, d0), (t1, d1)) = (w[0], w[1]);
        t0 + (d0 - eps) / (d0 - d1) * (t1 - t0)
    })
}

/// `(t(0.1) - t(0.9)) / t(0.25)`.
pub fn window_ratio(curve: &[(f64, f64)]) -> Option<f64> {
    let (a, b, c) = (crossing_time(curve, 0.1)?, crossing_time(curve, 0.9)?, crossing_time(curve, 0.25)?);
    (c > 0.0).then(|| (a - b) / c)
}

/// Reference slope `1/(8π²) + (1/π²) log(K/P) / log K` for `t(1/4) / (K² log K)`
/// with `P = p`.
pub fn reference_cutoff_slope(k: usize, p: usize) -> f64 {
    let kf = k as f64;
    1.0 / (8.0 * PI * PI) + (kf / p as f64).ln() / kf.ln() / (PI * PI)
}

/// Smallest `s` with `P(|σ_J| >= P²/K + s√P) < q` under the uniform SSEP law,
/// for a fixed block `J` of `p` sites (hypergeometric tail).
pub fn calibrate_segment_s(k: usize, p: usize, q: f64) -> Result<f64> {
    if p == 0 || p >= k {
        return Err(Error::Precondition(format!("need 1 <= p < k, got p={p}, k={k}")));
    }
    let ln_choose = |a: usize, b: usize| -> f64 { (0..b).map(|i| ((a - i) as f64 / (i + 1) as f64).ln()).sum() };
    let pmf: Vec<f64> = (0..=p)
        .map(|j| {
            if p - j > k - p {
                0.0
            } else {
                (ln_choose(p, j) + ln_choose(k - p, p - j) - ln_choose(k, p)).exp()
            }
        })
        .collect();
    let mean = (p * p) as f64 / k as f64;
    let tail = |m: usize| pmf[m.min(p + 1).min(pmf.len())..].iter().sum::<f64>();
    let m = (mean.floor() as usize + 1..=p + 1)
        .find(|&m| tail(m) < q)
        .ok_or_else(|| Error::Precondition(format!("no threshold has tail below {q}")))?;
    let floor = ((m - 1) as f64).max(mean);
    Ok((floor - mean) / (p as f64).sqrt() + 1e-9)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantelliReport {
    pub k: usize,
    pub p: usize,
    pub s: f64,
    pub s_prime: f64,
    pub t_star: f64,
    /// `E|σ_J(t*)| = P²/K + s'√P`.
    pub mean: f64,
    pub lambda: f64,
    pub bound: f64,
    pub frequency: f64,
    pub stderr: f64,
    pub empirical_mean: f64,
    pub empirical_mean_se: f64,
    pub replicates: usize,
}

/// Number of particles left in `J = [1, p]` at time `t` by SSEPs on `k` sites
/// started from `1_J`, one entry per replicate.
pub fn block_occupancy_samples(k: usize, p: usize, t: f64, replicates: usize, seed: u64) -> Vec<usize> {
    let start: Vec<bool> = (0..k).map(|i| i < p).collect();
    let start = SsepConfiguration::new(&start);
    replicate_map(replicates, seed, SSEP_STREAMS, |rng| {
        let mut proc = SsepProcess::new(&start);
        proc.advance(t, rng);
        proc.occupation()[..p].iter().filter(|&&b| b).count()
    })
}

/// Empirical check of the Cantelli step: frequency of `|σ_J(t*)| >= P²/K + s√P`
/// against `λ²/(λ² + E)` with `λ = (s - s')√P`.
pub fn cantelli_experiment(k: usize, p: usize, s: f64, s_prime: f64, replicates: usize, seed: u64) -> Result<CantelliReport> {
    let t_star = solve_t_star(k, p, s_prime)?;
    let mean = expected_segment_occupancy(k, p, t_star)?;
    let root_p = (p as f64).sqrt();
    let level = (p * p) as f64 / k as f64 + s * root_p;
    let lambda = level - mean;
    let bound = crate::spectral::cantelli_lower_bound(lambda, mean)?;
    let counts = block_occupancy_samples(k, p, t_star, replicates, seed);
    let r = counts.len() as f64;
    let frequency = counts.iter().filter(|&&c| c as f64 >= level).count() as f64 / r;
    let empirical_mean = counts.iter().sum::<usize>() as f64 / r;
    let var = counts.iter().map(|&c| (c as f64 - empirical_mean).powi(2)).sum::<f64>() / (r - 1.0).max(1.0);
    Ok(CantelliReport {
        k,
        p,
        s,
        s_prime,
        t_star,
        mean,
        lambda,
        bound,
        frequency,
        stderr: binomial_se(frequency, replicates),
        empirical_mean,
        empirical_mean_se: (var / r).sqrt(),
        replicates,
    })
}
