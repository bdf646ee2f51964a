//! Shapiro–Wilk p-values against a simulated null distribution of W.

use plotwise::diagnostics::shapiro_wilk;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

fn null_p(w_obs: f64, n: usize, sims: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut le = 0usize;
    let mut x = vec![0.0; n];
    for _ in 0..sims {
        for v in x.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        if shapiro_wilk(&x).unwrap().w <= w_obs {
            le += 1;
        }
    }
    le as f64 / sims as f64
}

#[test]
fn heavy_tailed_sample_matches_simulated_null() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let t3 = StudentT::new(3.0).unwrap();
    let x: Vec<f64> = (0..20).map(|_| t3.sample(&mut rng)).collect();
    let r = shapiro_wilk(&x).unwrap();
    let mc = null_p(r.w, 20, 200_000, 11);
    assert!((r.p - mc).abs() < 0.02, "p = {}, simulated {mc}", r.p);
}

#[test]
fn small_samples_match_simulated_null() {
    // exercises the small-n branch of the p-value transformation
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let exp = rand_distr::Exp::new(1.0).unwrap();
    for n in [5usize, 8, 11] {
        let x: Vec<f64> = (0..n).map(|_| exp.sample(&mut rng)).collect();
        let r = shapiro_wilk(&x).unwrap();
        let mc = null_p(r.w, n, 200_000, n as u64);
        assert!((r.p - mc).abs() < 0.02, "n={n}: p = {}, simulated {mc}", r.p);
    }
}
