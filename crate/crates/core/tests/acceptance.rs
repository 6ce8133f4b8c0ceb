//! Acceptance checks, one report line per criterion.
//!
//! Run with `cargo test -p feplab --test acceptance`. Seeds are fixed, so
//! every Monte Carlo figure below is reproducible.

use std::time::Instant;

use feplab::configurations::{binomial, enumerate, enumerate_ssep, is_ergodic, sample_uniform_ssep};
use feplab::dynamics::{
    run_monotone_coupled, ClockDriven, CoupledTriple, EventStream, GrandCoupling, Mark,
    SsepProcess, TaggedFepProcess,
};
use feplab::exact::{
    build_fep_generator, ergodic_mixing_time, is_stationary_exact, mapping_conjugates_generators, mixing_time,
    transience_time, tv_curve, uniform_rational, TIME_TOLERANCE,
};
use feplab::experiments::{
    calibrate_segment_s, calibrate_statistic_s, cantelli_experiment, crossing_time, effective_p, estimate_tv_lower,
    estimate_tv_upper, replicate_rng, window_ratio, ExperimentConfig, Mode, Statistic,
};
use feplab::mappings::{ergodic_count, sample_pi_fep};
use feplab::spectral::{
    epsilon_prime, heat_solution, minimal_s_prime, mu, solve_t_star, t_star_bracket,
};
use feplab::{phi, phi_inverse, psi, FepConfiguration, HeightFunction, TaggedFepState};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn bijectivity() -> Outcome {
    let mut pairs = 0usize;
    for n in 2..=12 {
        for k in n / 2 + 1..=n {
            let eta_all = enumerate(n, k, true).expect("small");
            let expected = n as u128 * binomial(k, 2 * k - n).unwrap();
            if k as u128 * eta_all.len() as u128 != expected
                || ergodic_count(n, k).unwrap() != num_bigint::BigUint::from(eta_all.len())
            {
                return outcome(false, format!("counting identity fails at n={n}, k={k}"));
            }
            let mut images = std::collections::HashSet::new();
            for eta in &eta_all {
                for rank in 1..=k {
                    let m = phi(rank, eta).unwrap();
                    if phi_inverse(m.position, &m.ssep, n).unwrap() != (rank, eta.clone()) {
                        return outcome(false, format!("inverse fails at {eta} rank {rank}"));
                    }
                    images.insert((m.position, m.ssep.clone()));
                    pairs += 1;
                }
            }
            // every (x, σ) is hit, and the inverse maps back
            for x in 1..=n {
                for sigma in enumerate_ssep(k, 2 * k - n).unwrap() {
                    let (rank, eta) = phi_inverse(x, &sigma, n).unwrap();
                    let m = phi(rank, &eta).unwrap();
                    if (m.position, m.ssep) != (x, sigma) {
                        return outcome(false, format!("forward fails at x={x}"));
                    }
                }
            }
            if images.len() as u128 != expected {
                return outcome(false, format!("image size {} at n={n}, k={k}", images.len()));
            }
        }
    }
    outcome(true, format!("{pairs} (rank, configuration) pairs over n <= 12"))
}

fn shared_clock_coupling() -> Outcome {
    let mut events = 0u64;
    for (n, k) in [(12, 8), (24, 16)] {
        let mut rng = replicate_rng(2024, 0, n as u64);
        for trial in 0..5_000u64 {
            let eta = sample_pi_fep(n, k, &mut rng).unwrap();
            let rank0 = rng.gen_range(1..=k);
            let m0 = phi(rank0, &eta).unwrap();
            let mut fep = TaggedFepProcess::new(&TaggedFepState::new(m0.position, eta).unwrap());
            let mut ssep = SsepProcess::new(&m0.ssep);
            let mut clocks = EventStream::new(trial, k);
            while let Some(ev) = clocks.next_before(10.0) {
                let a = fep.apply(ev.label, ev.mark);
                let b = ssep.apply(ev.label, ev.mark);
                events += 1;
                let x = (m0.position as i64 - 1 + ssep.current()).rem_euclid(n as i64) as usize + 1;
                let m = phi(fep.rank(), &fep.process().configuration()).unwrap();
                let rank_ok = (rank0 as i64 - 1 + fep.current()).rem_euclid(k as i64) as usize + 1 == fep.rank();
                if a != b || m.position != x || m.position != fep.position() || m.ssep != ssep.configuration() || !rank_ok {
                    return outcome(false, format!("mismatch at (n,k)=({n},{k}), trial {trial}, t={}", ev.time));
                }
            }
        }
    }
    outcome(true, format!("10000 trajectories, {events} shared events, all identities exact"))
}

fn conjugation() -> Outcome {
    match mapping_conjugates_generators(8, 5) {
        Ok(true) => outcome(true, "rank-augmented FEP and SSEP-with-position generators agree entrywise on (8,5)"),
        Ok(false) => outcome(false, "rate mismatch on (8,5)"),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn stationarity_and_sandwich() -> Outcome {
    for n in 3..=10 {
        for k in n / 2 + 1..n {
            let model = build_fep_generator(n, k).unwrap();
            let nu = uniform_rational(model.states(), is_ergodic);
            if !is_stationary_exact(&model, &nu).unwrap() {
                return outcome(false, format!("uniform law on E not stationary at ({n},{k})"));
            }
        }
    }
    let mut worst_gap = f64::INFINITY;
    for (n, k) in [(8, 5), (10, 6)] {
        for eps in [0.1, 0.25, 0.5] {
            let tau = mixing_time(n, k, eps).unwrap();
            let theta = transience_time(n, k, eps).unwrap();
            let tau_e = ergodic_mixing_time(n, k, eps).unwrap();
            let upper = transience_time(n, k, eps / 2.0).unwrap() + ergodic_mixing_time(n, k, eps / 2.0).unwrap();
            let slack = 2.0 * TIME_TOLERANCE * tau.max(1.0);
            if theta.max(tau_e) > tau + slack || tau > upper + slack {
                return outcome(false, format!("sandwich fails at ({n},{k}), eps={eps}: {theta} {tau_e} {tau} {upper}"));
            }
            worst_gap = worst_gap.min(upper - tau);
        }
    }
    outcome(true, format!("exact νL = 0 for all n <= 10; sandwich holds, smallest upper margin {worst_gap:.4}"))
}

fn rk4_heat(u0: &[f64], t: f64, dt: f64) -> Vec<f64> {
    let k = u0.len();
    let lap = |u: &[f64]| -> Vec<f64> { (0..k).map(|i| u[(i + k - 1) % k] - 2.0 * u[i] + u[(i + 1) % k]).collect() };
    let steps = (t / dt).round() as usize;
    let h = t / steps as f64;
    let mut u = u0.to_vec();
    for _ in 0..steps {
        let k1 = lap(&u);
        let y: Vec<f64> = u.iter().zip(&k1).map(|(a, b)| a + h / 2.0 * b).collect();
        let k2 = lap(&y);
        let y: Vec<f64> = u.iter().zip(&k2).map(|(a, b)| a + h / 2.0 * b).collect();
        let k3 = lap(&y);
        let y: Vec<f64> = u.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
        let k4 = lap(&y);
        for i in 0..k {
            u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    u
}

fn spectral_oracle() -> Outcome {
    let mut ode_err: f64 = 0.0;
    let mut parseval_err: f64 = 0.0;
    for (k, p) in [(32, 8), (64, 16)] {
        let u0: Vec<f64> = (0..k).map(|i| if i < p { 1.0 } else { 0.0 }).collect();
        let h = heat_solution(k, &u0).unwrap();
        for t in [1.0, 10.0, 100.0] {
            let ode = rk4_heat(&u0, t, 0.01);
            ode_err = h.at(t).iter().zip(&ode).map(|(a, b)| (a - b).abs()).fold(ode_err, f64::max);
        }
        let sq: f64 = h.coefficients().iter().map(|c| c * c).sum();
        parseval_err = parseval_err.max((sq - p as f64 / k as f64).abs());
    }
    let mut grid = 0;
    for k in [16, 32, 64, 128] {
        for p in [k / 8, k / 4, k / 2] {
            for sp in [0.25, 0.5, 1.0, 2.0] {
                let Ok(t) = solve_t_star(k, p, sp) else { continue };
                let (lo, hi) = t_star_bracket(k, p, sp).unwrap();
                if !(lo <= t + 1e-9 && t <= hi + 1e-9) {
                    return outcome(false, format!("bracket fails at K={k}, P={p}, s'={sp}"));
                }
                grid += 1;
            }
        }
    }
    let pass = ode_err < 1e-8 && parseval_err < 1e-12;
    outcome(pass, format!("ODE max error {ode_err:.2e}, Parseval error {parseval_err:.1e}, bracket holds on {grid} grid points"))
}

fn cantelli_chain() -> Outcome {
    let (k, p, eps) = (32, 8, 0.1);
    let s = calibrate_segment_s(k, p, epsilon_prime(eps)).unwrap();
    let sp = minimal_s_prime(eps, s).unwrap();
    let r = cantelli_experiment(k, p, s, sp, 100_000, 6).unwrap();
    let pass = r.frequency > r.bound - 3.0 * r.stderr;
    outcome(
        pass,
        format!(
            "ε={eps}, s={s:.3}, s'={sp:.3}, t*={:.2}: frequency {:.4} ± {:.4} vs Cantelli bound {:.4} (100000 runs)",
            r.t_star, r.frequency, r.stderr, r.bound
        ),
    )
}

fn tv_bracket() -> Outcome {
    let (n, k) = (10, 6);
    let times = vec![0.5, 1.0, 2.0, 5.0, 10.0, 30.0, 100.0, 300.0];
    let exact = tv_curve(&FepConfiguration::clustered_ergodic(n, k).unwrap(), &times).unwrap();
    let mut c = ExperimentConfig::new(n, k, Mode::TvCurve);
    c.times = times.clone();
    c.replicates = 4000;
    c.seed = 17;
    let lower = estimate_tv_lower(&c).unwrap();
    c.s_prime = Some(0.3);
    let upper = estimate_tv_upper(&c).unwrap();
    let mut ok = true;
    let mut cells = Vec::new();
    for ((lo, up), ex) in lower.iter().zip(&upper).zip(&exact) {
        ok &= lo.lower_bound <= ex + 3.0 * lo.lower_stderr + 1e-12;
        ok &= up.upper_bound >= ex - 3.0 * up.upper_stderr - 1e-12;
        cells.push(format!("t={}: {:.3}<={:.3}<={:.3}", lo.time, lo.lower_bound, ex, up.upper_bound));
    }
    outcome(ok, cells.join(", "))
}

fn cutoff_window() -> Outcome {
    let mut ratios = Vec::new();
    let mut slopes_ok = true;
    let mut cells = Vec::new();
    for (i, n) in [64usize, 128, 256].into_iter().enumerate() {
        let k = 3 * n / 4;
        let kf = k as f64;
        let scale = (kf / (effective_p(n, k) as f64).sqrt()).ln() / mu(k, 1);
        let s = calibrate_statistic_s(n, k, Statistic::FirstMode, 0.02, 4000, 100 + i as u64).unwrap();
        let mut c = ExperimentConfig::new(n, k, Mode::StatisticLb);
        c.times = (0..=120).map(|j| 1.5 * scale * j as f64 / 120.0).collect();
        c.replicates = 1000;
        c.stationary_replicates = Some(4000);
        c.s = Some(s);
        c.seed = 3;
        c.statistic = Statistic::FirstMode;
        let rows = estimate_tv_lower(&c).unwrap();
        let curve: Vec<(f64, f64)> = rows.iter().map(|r| (r.time, r.lower_bound)).collect();
        let (Some(w), Some(t25)) = (window_ratio(&curve), crossing_time(&curve, 0.25)) else {
            return outcome(false, format!("curve at N={n} does not cross all levels"));
        };
        let slope = t25 / (kf * kf * kf.ln());
        let reference = feplab::experiments::reference_cutoff_slope(k, 2 * k - n);
        let alt = feplab::experiments::reference_cutoff_slope(k, effective_p(n, k));
        slopes_ok &= slope <= 3.0 * reference && slope >= reference / 3.0;
        cells.push(format!(
            "N={n}: ratio {w:.3}, t(0.25)/(K²logK) {slope:.4} (reference {reference:.4}; with P=N-K {alt:.4})"
        ));
        ratios.push(w);
    }
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    outcome(decreasing && slopes_ok, cells.join("; "))
}

fn ordered_triple<R: Rng>(k: usize, p: usize, rng: &mut R) -> CoupledTriple {
    let y: i64 = rng.gen_range(-3..=3);
    let u = (k / 2 + 1) as i64;
    let outer = sample_uniform_ssep(k, p, rng);
    let mid = sample_uniform_ssep(k, p, rng);
    CoupledTriple::new(psi(y + u, &outer), psi(y, &mid), psi(y - u, &outer)).expect("offset exceeds the height range")
}

fn all_profiles(k: usize, p: usize) -> Vec<HeightFunction> {
    let words = enumerate_ssep(k, p).unwrap();
    (-1..=1).flat_map(|y| words.iter().map(move |w| psi(y, w))).collect()
}

fn monotone_coupling() -> Outcome {
    let mut rng = replicate_rng(99, 0, 0);
    let mut trajectories = 0;
    for k in [8usize, 16, 32, 64] {
        for _ in 0..2500 {
            let p = rng.gen_range(1..k);
            let triple = ordered_triple(k, p, &mut rng);
            match run_monotone_coupled(&triple, 50.0, &mut rng) {
                Ok((end, _)) if end.check_order().is_ok() => trajectories += 1,
                Ok(_) => return outcome(false, format!("order lost at the end, K={k}")),
                Err(e) => return outcome(false, format!("K={k}: {e}")),
            }
        }
    }
    // marginal generators on K <= 5: each profile sees exactly one clock per corner flip
    let mut checked = 0u64;
    for k in 2..=5 {
        for p in 1..k {
            let profiles = all_profiles(k, p);
            for a in &profiles {
                for b in &profiles {
                    for c in &profiles {
                        let base = vec![a.clone(), b.clone(), c.clone()];
                        let ordered = a.dominated_by(b).is_ok() && b.dominated_by(c).is_ok();
                        let mut flips: Vec<std::collections::HashMap<HeightFunction, u32>> = vec![Default::default(); 3];
                        for label in 0..3 * k {
                            for mark in [Mark::Left, Mark::Right] {
                                let mut g = GrandCoupling::new(base.clone()).unwrap();
                                g.apply(label, mark);
                                let after = g.profiles();
                                if ordered && !(after[0].dominated_by(&after[1]).is_ok() && after[1].dominated_by(&after[2]).is_ok()) {
                                    return outcome(false, format!("order broken by one ring at K={k}"));
                                }
                                for i in 0..3 {
                                    if after[i] != base[i] {
                                        *flips[i].entry(after[i].clone()).or_default() += 1;
                                    }
                                }
                            }
                        }
                        for (i, z) in base.iter().enumerate() {
                            let mut expected = std::collections::HashMap::new();
                            for j in 0..k {
                                let mut w = z.clone();
                                if w.flip(j) {
                                    expected.insert(w, 1u32);
                                }
                            }
                            if flips[i] != expected {
                                return outcome(false, format!("marginal rates differ at K={k}, P={p}"));
                            }
                        }
                        checked += 1;
                    }
                }
            }
        }
    }
    outcome(true, format!("{trajectories} trajectories ordered at every ring; marginal rates exact on {checked} triples with K <= 5"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("mapping bijectivity and counting identity", bijectivity),
        ("shared-clock coupling of FEP and SSEP", shared_clock_coupling),
        ("generator conjugation on (8,5)", conjugation),
        ("exact stationarity and mixing sandwich", stationarity_and_sandwich),
        ("spectral oracle", spectral_oracle),
        ("Cantelli lower-bound chain", cantelli_chain),
        ("TV bracket on (10,6)", tv_bracket),
        ("qualitative cutoff at K = 3N/4", cutoff_window),
        ("monotone grand coupling", monotone_coupling),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} | {name} | {} | {:.1}s",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
