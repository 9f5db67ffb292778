use clusterd2d::model::{
    baseline_policy, sample_cache_realization, zipf_popularity, BaselineKind, CachingPolicy, ContentLibrary,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zipf_sums_to_one(n in 1usize..20_000, beta in 0.0f64..4.0) {
        let q = zipf_popularity(n, beta).unwrap();
        prop_assert_eq!(q.len(), n);
        let total: f64 = q.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        if beta > 0.0 {
            prop_assert!(q.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn baselines_are_valid_policies(n in 2usize..300, m_frac in 0.0f64..1.0, beta in 0.0f64..3.0) {
        let m = 1 + ((n - 2) as f64 * m_frac) as usize;
        let lib = ContentLibrary::zipf(n, beta, m, 5.0).unwrap();
        for kind in [BaselineKind::Cpf, BaselineKind::ZipfProportional] {
            let b = baseline_policy(kind, &lib);
            prop_assert!(b.probabilities().iter().all(|x| (0.0..=1.0).contains(x)));
            prop_assert!((b.total() - m as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn realization_has_m_distinct_files(seed in any::<u64>(), n in 3usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = 1 + rng.random_range(0..n - 1);
        let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let policy = CachingPolicy::proportional(&w, m).unwrap();
        let r = sample_cache_realization(&policy, rng.random::<f64>()).unwrap();
        prop_assert_eq!(r.cached.len(), m);
        prop_assert!(r.cached.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(r.cached.iter().all(|&i| i < n));
    }
}

#[test]
fn zipf_baseline_clip_redistributes() {
    let lib = ContentLibrary::zipf(3, 2.0, 2, 5.0).unwrap();
    let b = baseline_policy(BaselineKind::ZipfProportional, &lib);
    assert_eq!(b.probabilities()[0], 1.0);
    assert!((b.probabilities()[1] / b.probabilities()[2] - 9.0 / 4.0).abs() < 1e-12);
}

#[test]
fn placement_marginals_match_policy() {
    let b = vec![0.9, 0.7, 0.55, 0.35, 0.25, 0.15, 0.06, 0.04];
    let m = 3;
    let policy = CachingPolicy::new(b.clone(), m).unwrap();
    let draws = 100_000;
    let mut hits = vec![0u64; b.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..draws {
        for i in sample_cache_realization(&policy, rng.random::<f64>()).unwrap().cached {
            hits[i] += 1;
        }
    }
    let n = draws as f64;
    let mut chi2 = 0.0;
    for (i, &bi) in b.iter().enumerate() {
        let freq = hits[i] as f64 / n;
        let se = (bi * (1.0 - bi) / n).sqrt();
        assert!((freq - bi).abs() < 3.0 * se, "file {i}: {freq} vs {bi}");
        // Each file's inclusion is a Bernoulli(b_i) count.
        chi2 += (hits[i] as f64 - n * bi).powi(2) / (n * bi * (1.0 - bi));
    }
    // Every term is a squared standardised count, so the sum has mean len(b)
    // whatever the dependence induced by Σ = M.
    let critical = ChiSquared::new(b.len() as f64).unwrap().inverse_cdf(0.99);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
}
