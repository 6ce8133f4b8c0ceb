use feplab::configurations::{enumerate, is_ergodic, sample_uniform_ssep};
use feplab::dynamics::{run_fep, run_monotone_coupled, CoupledTriple};
use feplab::exact::{build_fep_generator, distribution_at, pi_fep_vector, tv_distance, DistributionVector};
use feplab::experiments::{effective_p, effective_ssep, fluctuation_statistic, replicate_rng};
use feplab::mappings::sample_pi_fep;
use feplab::{phi, phi_inverse, psi, psi_inverse, FepConfiguration, SsepConfiguration};
use proptest::prelude::*;

/// Sizes with `n/2 < k < n`.
fn sizes(max_n: usize) -> impl Strategy<Value = (usize, usize)> {
    (3..=max_n).prop_flat_map(|n| (Just(n), n / 2 + 1..n))
}

fn brute_fluctuation(occ: &[bool]) -> f64 {
    let l = occ.len();
    let m = occ.iter().filter(|&&b| b).count() as f64;
    let mut best: f64 = 0.0;
    for start in 0..l {
        let mut count = 0.0;
        for len in 1..=l {
            count += f64::from(u8::from(occ[(start + len - 1) % l]));
            best = best.max(count - m * len as f64 / l as f64);
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mapping_round_trip((n, k) in sizes(300), seed in any::<u64>(), r in any::<prop::sample::Index>()) {
        let mut rng = replicate_rng(seed, 0, 0);
        let eta = sample_pi_fep(n, k, &mut rng).unwrap();
        prop_assert!(is_ergodic(&eta));
        let rank = r.index(k) + 1;
        let m = phi(rank, &eta).unwrap();
        prop_assert_eq!(m.ssep.particle_count(), 2 * k - n);
        prop_assert!(eta.is_occupied(m.position));
        prop_assert_eq!(phi_inverse(m.position, &m.ssep, n).unwrap(), (rank, eta));
    }

    #[test]
    fn heights_round_trip_and_congruence(bits in prop::collection::vec(any::<bool>(), 2..200), y in -50i64..50) {
        let sigma = SsepConfiguration::new(&bits);
        let (k, p) = (bits.len() as i64, sigma.particle_count() as i64);
        let zeta = psi(y, &sigma);
        for (j, &h) in zeta.heights().iter().enumerate() {
            prop_assert_eq!((h + p * j as i64).rem_euclid(k), 0);
        }
        prop_assert!(zeta.range() <= (p * (k - p)) as f64 / k as f64 + 1e-12);
        prop_assert_eq!(psi_inverse(&zeta), (y, sigma));
    }

    #[test]
    fn fluctuation_is_range_of_segment_excess(bits in prop::collection::vec(any::<bool>(), 1..48), shift in 0usize..48) {
        let f = fluctuation_statistic(&bits);
        prop_assert!((f - brute_fluctuation(&bits)).abs() < 1e-9);
        let mut rotated = bits.clone();
        rotated.rotate_left(shift % bits.len());
        prop_assert!((fluctuation_statistic(&rotated) - f).abs() < 1e-9);
        let flipped: Vec<bool> = bits.iter().map(|b| !b).collect();
        prop_assert!((fluctuation_statistic(&flipped) - f).abs() < 1e-9);
    }

    #[test]
    fn complement_rule_reaches_effective_count((n, k) in sizes(200), seed in any::<u64>()) {
        let mut rng = replicate_rng(seed, 0, 1);
        let sigma = sample_uniform_ssep(k, 2 * k - n, &mut rng);
        let (eff, p) = effective_ssep(n, k, &sigma);
        prop_assert_eq!(p, effective_p(n, k));
        prop_assert_eq!(eff.particle_count(), p);
    }

    #[test]
    fn fep_keeps_ergodic_set((n, k) in sizes(60), seed in any::<u64>(), t in 0.0f64..20.0) {
        let mut rng = replicate_rng(seed, 0, 2);
        let eta = sample_pi_fep(n, k, &mut rng).unwrap();
        let later = run_fep(&eta, t, &mut rng);
        prop_assert_eq!(later.particle_count(), k);
        prop_assert!(is_ergodic(&later));
        let block = FepConfiguration::clustered_block(n, k).unwrap();
        prop_assert_eq!(run_fep(&block, t, &mut rng).particle_count(), k);
    }

    #[test]
    fn coupled_profiles_stay_ordered(k in 2usize..40, seed in any::<u64>(), t in 0.0f64..200.0) {
        let mut rng = replicate_rng(seed, 0, 3);
        let p = 1 + (seed as usize) % (k - 1);
        let u = (k / 2 + 1) as i64;
        let outer = sample_uniform_ssep(k, p, &mut rng);
        let mid = sample_uniform_ssep(k, p, &mut rng);
        let triple = CoupledTriple::new(psi(u, &outer), psi(0, &mid), psi(-u, &outer)).unwrap();
        let (end, merged_at) = run_monotone_coupled(&triple, t, &mut rng).unwrap();
        prop_assert!(end.check_order().is_ok());
        if merged_at.is_some() {
            prop_assert!(end.is_merged());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exact_tv_is_a_distance((n, k) in sizes(9), t in 0.0f64..30.0, pick in any::<prop::sample::Index>()) {
        let model = build_fep_generator(n, k).unwrap();
        let start = pick.index(model.len());
        let mu = distribution_at(&model, &DistributionVector::point_mass(model.len(), start), t).unwrap();
        let total: f64 = mu.probs().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        let d = tv_distance(&mu, &pi_fep_vector(&model).unwrap()).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&d));
        prop_assert_eq!(enumerate(n, k, false).unwrap().len(), model.len());
    }
}
