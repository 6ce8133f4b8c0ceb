//! Heat-equation analytics for the SSEP started from a block of particles:
//! Fourier basis of the discrete Laplacian on the circle, the mean
//! occupancy of the initial block, the time at which it reaches a given
//! level, and the Cantelli-type lower bound on the block count.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// Real Fourier basis of the Laplacian on `T_K`, orthonormal for
/// `<f, g> = (1/K) Σ f(i) g(i)`.
///
/// `χ_0 = 1`, then `χ_{2l-1}(i) = √2 cos(2π l i / K)` and
/// `χ_{2l}(i) = √2 sin(2π l i / K)` share the eigenvalue
/// `μ_l = 2 (1 - cos(2π l / K))`. For even `K` the last function is the
/// alternating mode `(-1)^i` (its sine partner vanishes).
#[derive(Clone, Debug, Serialize)]
pub struct EigenBasis {
    k: usize,
    functions: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
}

pub fn mu(k: usize, l: usize) -> f64 {
    2.0 * (1.0 - (2.0 * PI * l as f64 / k as f64).cos())
}

pub fn build_eigenbasis(k: usize) -> Result<EigenBasis> {
    if k < 2 {
        return Err(Error::Precondition(format!("eigenbasis needs k >= 2, got {k}")));
    }
    let kf = k as f64;
    let wave = |l: usize, f: fn(f64) -> f64, scale: f64| -> Vec<f64> {
        (0..k).map(|i| scale * f(2.0 * PI * (l * i) as f64 / kf)).collect()
    };
    let mut functions = vec![vec![1.0; k]];
    let mut eigenvalues = vec![0.0];
    for l in 1..=(k - 1) / 2 {
        functions.push(wave(l, f64::cos, 2f64.sqrt()));
        functions.push(wave(l, f64::sin, 2f64.sqrt()));
        eigenvalues.extend([mu(k, l); 2]);
    }
    if k % 2 == 0 {
        functions.push((0..k).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect());
        eigenvalues.push(4.0);
    }
    Ok(EigenBasis { k, functions, eigenvalues })
}

impl EigenBasis {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn function(&self, l: usize) -> &[f64] {
        &self.functions[l]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / self.k as f64
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.k {
            for b in a..self.k {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((self.inner(&self.functions[a], &self.functions[b]) - target).abs());
            }
        }
        worst
    }
}

/// Solution of `du/dt = Δu` expanded in the eigenbasis.
#[derive(Clone, Debug, Serialize)]
pub struct HeatSolution {
    basis: EigenBasis,
    coefficients: Vec<f64>,
}

pub fn heat_solution(k: usize, u0: &[f64]) -> Result<HeatSolution> {
    if u0.len() != k {
        return Err(Error::MismatchedSupport(u0.len(), k));
    }
    let basis = build_eigenbasis(k)?;
    let coefficients = basis.functions.iter().map(|chi| basis.inner(chi, u0)).collect();
    Ok(HeatSolution { basis, coefficients })
}

impl HeatSolution {
    /// `c_l = <χ_l, u(0)>`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn basis(&self) -> &EigenBasis {
        &self.basis
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        let mut u = vec![0.0; self.basis.k];
        for ((c, lambda), chi) in self.coefficients.iter().zip(&self.basis.eigenvalues).zip(&self.basis.functions) {
            let w = c * (-lambda * t).exp();
            for (ui, x) in u.iter_mut().zip(chi) {
                *ui += w * x;
            }
        }
        u
    }

    /// `K <u(t), u(0)> = K Σ c_l² e^{-λ_l t}`.
    pub fn overlap(&self, t: f64) -> f64 {
        let k = self.basis.k as f64;
        k * self
            .coefficients
            .iter()
            .zip(&self.basis.eigenvalues)
            .map(|(c, lambda)| c * c * (-lambda * t).exp())
            .sum::<f64>()
    }
}

fn block(k: usize, p: usize) -> Vec<f64> {
    (0..k).map(|i| if i < p { 1.0 } else { 0.0 }).collect()
}

fn block_solution(k: usize, p: usize) -> Result<HeatSolution> {
    if p == 0 || p >= k {
        return Err(Error::Precondition(format!("need 1 <= p < k, got p={p}, k={k}")));
    }
    heat_solution(k, &block(k, p))
}

/// Mean number of particles at time `t` in the block `J = [1, p]` of an SSEP
/// on `k` sites started with its `p` particles filling `J`.
pub fn expected_segment_occupancy(k: usize, p: usize, t: f64) -> Result<f64> {
    Ok(block_solution(k, p)?.overlap(t))
}

/// Root `t*` of `E|σ_J(t)| = p²/k + s'√p`.
pub fn solve_t_star(k: usize, p: usize, s_prime: f64) -> Result<f64> {
    let sol = block_solution(k, p)?;
    let (kf, pf) = (k as f64, p as f64);
    let excess = s_prime * pf.sqrt();
    let target = pf * pf / kf + excess;
    if !(excess > 0.0) || target > pf * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "level p²/k + s'√p = {target} must lie in (p²/k, p] = ({}, {pf}]",
            pf * pf / kf
        )));
    }
    if sol.overlap(0.0) <= target {
        return Ok(0.0);
    }
    let lambda1 = mu(k, 1);
    let mut lo = 0.0;
    let mut hi = ((pf / excess).ln() / lambda1).max(0.0);
    while sol.overlap(hi) > target {
        hi = 2.0 * hi + 1.0;
    }
    while hi - lo > 1e-9 * hi.max(1e-300) {
        let mid = 0.5 * (lo + hi);
        if sol.overlap(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Lower and upper brackets `(1/λ_1) log(K c_1² / (s'√p))` and
/// `(1/λ_1) log(p / (s'√p))` for `t*`.
pub fn t_star_bracket(k: usize, p: usize, s_prime: f64) -> Result<(f64, f64)> {
    let sol = block_solution(k, p)?;
    let (kf, pf) = (k as f64, p as f64);
    let lambda1 = mu(k, 1);
    let c1 = sol.coefficients[1];
    let excess = s_prime * pf.sqrt();
    Ok(((kf * c1 * c1 / excess).ln() / lambda1, (pf / excess).ln() / lambda1))
}

/// Cantelli bound `λ² / (λ² + mean)` for the lower deviation `λ < 0`.
pub fn cantelli_lower_bound(lambda: f64, mean: f64) -> Result<f64> {
    if !(lambda < 0.0) || !(mean >= 0.0) {
        return Err(Error::Precondition(format!("need lambda < 0 and mean >= 0, got {lambda}, {mean}")));
    }
    Ok(lambda * lambda / (lambda * lambda + mean))
}

/// `ε' = min(ε, (1 - ε)/2)`.
pub fn epsilon_prime(eps: f64) -> f64 {
    eps.min((1.0 - eps) / 2.0)
}

/// Whether `(s' - s)² > (ε + ε')/(1 - ε - ε') (1 + s')` with `s' >= s`.
pub fn cantelli_condition(eps: f64, s: f64, s_prime: f64) -> bool {
    let e2 = epsilon_prime(eps);
    eps > 0.0 && eps < 1.0 && s_prime >= s && (s_prime - s).powi(2) > (eps + e2) / (1.0 - eps - e2) * (1.0 + s_prime)
}

/// Smallest `s'` (up to a relative margin of `1e-9`) meeting [`cantelli_condition`].
pub fn minimal_s_prime(eps: f64, s: f64) -> Result<f64> {
    let e2 = epsilon_prime(eps);
    if !(eps > 0.0 && eps < 1.0) || s < 0.0 {
        return Err(Error::Precondition(format!("need 0 < ε < 1 and s >= 0, got {eps}, {s}")));
    }
    let c = (eps + e2) / (1.0 - eps - e2);
    let d = (c + (c * c + 4.0 * c * (1.0 + s)).sqrt()) / 2.0;
    Ok(s + d * (1.0 + 1e-9) + 1e-12)
}

/// Time before which the block statistic certifies a total-variation
/// distance above `ε` from the clustered start, `(1/λ_1) log(K c_1² / (s'√P))`
/// with `P = min(2k - n, n - k)`, floored at zero.
pub fn lb_time_estimate(n: usize, k: usize, eps: f64, s: f64, s_prime: f64) -> Result<f64> {
    if !(2 * k > n && k < n) {
        return Err(Error::Infeasible { n, k, reason: "requires n/2 < k < n" });
    }
    if !cantelli_condition(eps, s, s_prime) {
        return Err(Error::Precondition(format!(
            "(s' - s)² > (ε + ε')/(1 - ε - ε')(1 + s') fails for ε={eps}, s={s}, s'={s_prime}"
        )));
    }
    let p = (2 * k - n).min(n - k);
    Ok(t_star_bracket(k, p, s_prime)?.0.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_eigenvalues() {
        assert!((mu(4, 1) - 2.0).abs() < 1e-15);
        assert!((mu(6, 1) - 1.0).abs() < 1e-15);
        let b = build_eigenbasis(6).unwrap();
        assert_eq!(b.eigenvalues().len(), 6);
        assert!((b.eigenvalues()[1] - 1.0).abs() < 1e-15 && (b.eigenvalues()[2] - 1.0).abs() < 1e-15);
        assert!(build_eigenbasis(1).is_err());
    }

    #[test]
    fn gram_is_identity() {
        for k in [2, 3, 4, 7, 16, 33, 64, 101, 128] {
            assert!(build_eigenbasis(k).unwrap().orthonormality_defect() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn eigenfunctions_solve_laplacian() {
        let b = build_eigenbasis(9).unwrap();
        for l in 0..9 {
            let f = b.function(l);
            for i in 0..9 {
                let lap = f[(i + 8) % 9] - 2.0 * f[i] + f[(i + 1) % 9];
                assert!((lap + b.eigenvalues()[l] * f[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn heat_limits() {
        let h = heat_solution(5, &[0.3; 5]).unwrap();
        assert!(h.at(7.0).iter().all(|x| (x - 0.3).abs() < 1e-14));
        let u0 = block(12, 4);
        let h = heat_solution(12, &u0).unwrap();
        assert!(h.at(0.0).iter().zip(&u0).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(h.at(1e4).iter().all(|x| (x - 4.0 / 12.0).abs() < 1e-12));
    }

    fn rk4(u0: &[f64], t: f64, dt: f64) -> Vec<f64> {
        let k = u0.len();
        let lap = |u: &[f64]| -> Vec<f64> { (0..k).map(|i| u[(i + k - 1) % k] - 2.0 * u[i] + u[(i + 1) % k]).collect() };
        let axpy = |u: &[f64], d: &[f64], h: f64| -> Vec<f64> { u.iter().zip(d).map(|(a, b)| a + h * b).collect() };
        let steps = (t / dt).round() as usize;
        let h = t / steps as f64;
        let mut u = u0.to_vec();
        for _ in 0..steps {
            let k1 = lap(&u);
            let k2 = lap(&axpy(&u, &k1, h / 2.0));
            let k3 = lap(&axpy(&u, &k2, h / 2.0));
            let k4 = lap(&axpy(&u, &k3, h));
            for i in 0..k {
                u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        u
    }

    #[test]
    fn matches_direct_integration() {
        for (k, p) in [(32, 8), (64, 20)] {
            let u0 = block(k, p);
            let h = heat_solution(k, &u0).unwrap();
            for t in [1.0, 10.0, 100.0] {
                let ode = rk4(&u0, t, 0.01);
                let err = h.at(t).iter().zip(&ode).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err < 1e-8, "k={k} t={t} err={err}");
            }
        }
    }

    #[test]
    fn matches_single_particle_walk() {
        // u_i(t) is the chance that a lone SSEP particle started at i sits in J at time t
        use crate::exact::{build_ssep_generator, distribution_at, DistributionVector};
        let (k, p) = (12, 5);
        let model = build_ssep_generator(k, 1).unwrap();
        let h = heat_solution(k, &block(k, p)).unwrap();
        for t in [0.5, 3.0, 20.0] {
            let u = h.at(t);
            for i in 0..k {
                let start = model.states().iter().position(|s| s.is_occupied(i + 1)).unwrap();
                let law = distribution_at(&model, &DistributionVector::point_mass(k, start), t).unwrap();
                let in_j: f64 = model
                    .states()
                    .iter()
                    .zip(law.probs())
                    .filter(|(s, _)| (1..=p).any(|x| s.is_occupied(x)))
                    .map(|(_, q)| q)
                    .sum();
                assert!((u[i] - in_j).abs() < 1e-10, "i={i} t={t}");
            }
        }
    }

    #[test]
    fn parseval_and_range() {
        let h = heat_solution(20, &block(20, 7)).unwrap();
        let sq: f64 = h.coefficients().iter().map(|c| c * c).sum();
        assert!((sq - 7.0 / 20.0).abs() < 1e-12);
        for t in [0.0, 0.3, 4.0, 50.0] {
            assert!(h.at(t).iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
        }
    }

    #[test]
    fn t_star_inside_bracket() {
        for (k, p, sp) in [(32, 8, 0.5), (64, 16, 1.0), (128, 40, 2.0), (101, 33, 0.7)] {
            let t = solve_t_star(k, p, sp).unwrap();
            let (lo, hi) = t_star_bracket(k, p, sp).unwrap();
            assert!(lo <= t + 1e-9 && t <= hi + 1e-9, "{lo} {t} {hi}");
            let level = (p * p) as f64 / k as f64 + sp * (p as f64).sqrt();
            assert!((expected_segment_occupancy(k, p, t).unwrap() - level).abs() < 1e-6);
        }
    }

    #[test]
    fn occupancy_endpoints_and_decay() {
        assert!((expected_segment_occupancy(32, 8, 0.0).unwrap() - 8.0).abs() < 1e-12);
        assert!((expected_segment_occupancy(32, 8, 1e5).unwrap() - 2.0).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let v = expected_segment_occupancy(32, 8, i as f64 * 0.5).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn t_star_edge_cases() {
        // s'√P = P - P²/K puts the level at P itself
        let s_prime = (8.0 - 2.0) / 8f64.sqrt();
        assert_eq!(solve_t_star(32, 8, s_prime).unwrap(), 0.0);
        assert!(solve_t_star(32, 8, s_prime * 1.01).is_err());
        assert!(solve_t_star(32, 8, 0.0).is_err());
    }

    #[test]
    fn cantelli_arithmetic() {
        assert_eq!(cantelli_lower_bound(-2.0, 4.0).unwrap(), 0.5);
        assert_eq!(cantelli_lower_bound(-1.0, 0.0).unwrap(), 1.0);
        assert!(cantelli_lower_bound(1.0, 4.0).is_err());
        assert!(cantelli_lower_bound(-1.0, -4.0).is_err());
    }

    #[test]
    fn minimal_s_prime_is_tight() {
        for (eps, s) in [(0.1, 0.7), (0.25, 0.3), (0.6, 2.0)] {
            let sp = minimal_s_prime(eps, s).unwrap();
            assert!(cantelli_condition(eps, s, sp));
            assert!(!cantelli_condition(eps, s, sp - 1e-6));
        }
    }

    #[test]
    fn lb_time_needs_condition() {
        assert!(lb_time_estimate(64, 48, 0.25, 1.0, 1.1).is_err());
        let t = lb_time_estimate(64, 48, 0.25, 1.0, 8.0).unwrap();
        let t_star = solve_t_star(48, 16, 8.0 / 4.0 * 0.5);
        assert!(t >= 0.0 && t_star.is_ok());
    }
}
