use gpcm_design::criteria::DesignMeasure;
use gpcm_design::gpcm::{category_probabilities, fisher_information, score, Ability, ItemParams};
use gpcm_design::reproduce::random_instances;
use gpcm_design::sim::{cramer_rao_check, sample_response, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn category_frequencies_pass_chi_square() {
    const N: usize = 1_000_000;
    for (k, (theta, item)) in random_instances(50, 11).into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
        let p = category_probabilities(theta, &item);
        let mut counts = vec![0usize; p.len()];
        for _ in 0..N {
            counts[sample_response(&mut rng, theta, &item)] += 1;
        }
        // Pool sparse categories so every cell expects at least five draws.
        let mut cells: Vec<(f64, f64)> = Vec::new();
        let mut open = (0.0, 0.0);
        for (c, pj) in counts.iter().zip(p.as_slice()) {
            open.0 += *c as f64;
            open.1 += pj * N as f64;
            if open.1 >= 5.0 {
                cells.push(open);
                open = (0.0, 0.0);
            }
        }
        if let Some(last) = cells.last_mut() {
            last.0 += open.0;
            last.1 += open.1;
        }
        if cells.len() < 2 {
            continue;
        }
        let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
        let df = cells.len() - 1;
        let pval = 1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat);
        assert!(pval > 1e-3, "item {k}: chi2 = {stat} on {} df, p = {pval}", df);
    }
}

#[test]
fn score_variance_is_the_fisher_information() {
    let item = ItemParams::new(vec![-1.0, 0.3, 1.2], vec![0.8, 1.5, 1.1]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for t in [-1.5, 0.0, 0.7] {
        let theta = Ability::new(t).unwrap();
        let n = 400_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let s = score(theta, &item, sample_response(&mut rng, theta, &item)).unwrap();
            s1 += s;
            s2 += s * s;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        let m = fisher_information(theta, &item);
        assert!(mean.abs() < 5.0 * (m / n as f64).sqrt(), "mean score {mean}");
        assert!((var / m - 1.0).abs() < 0.01, "theta {t}: {var} vs {m}");
    }
}

#[test]
fn reports_are_seed_deterministic_and_thread_independent() {
    let item = ItemParams::new(vec![-1.0, 0.0, 1.0], vec![1.0; 3]).unwrap();
    let cfg = SimConfig::new(9, 60, 300, Ability::new(0.4).unwrap(), DesignMeasure::one_point(item)).unwrap();
    let a = cramer_rao_check(&cfg).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| cramer_rao_check(&cfg).unwrap());
    assert_eq!(a, b);
    assert!((a.mean_estimate - 0.4).abs() < 3.0 * (a.empirical_variance / a.n_converged as f64).sqrt() + 0.02);
}
