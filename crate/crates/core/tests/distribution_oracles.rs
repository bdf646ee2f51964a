//! Special functions against brute-force numerical oracles.

use plotwise::dist::{f_sf, incomplete_beta, studentized_range_quantile, t_two_sided};
use plotwise::inference::{tukey_hsd, ComparisonInput};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

/// I_x(a, b) by composite Simpson's rule on the beta density (a ≥ 1).
fn simpson_beta(a: f64, b: f64, x: f64, panels: usize) -> f64 {
    let ln_b = statrs::function::beta::ln_beta(a, b);
    let dens = |t: f64| (t.powf(a - 1.0) * (1.0 - t).powf(b - 1.0)).max(0.0) * (-ln_b).exp();
    let h = x / panels as f64;
    let mut s = dens(0.0) + dens(x);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * dens(i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn f_tail_matches_simpson_oracle() {
    let mut points = 0;
    for d1 in [2.0, 3.0, 4.0, 6.0, 10.0] {
        for d2 in [4.0, 7.0, 12.0, 20.0, 30.0] {
            for f in [0.7, 3.2] {
                let x = d1 * f / (d1 * f + d2);
                let cdf = simpson_beta(d1 / 2.0, d2 / 2.0, x, 1_000_000);
                let sf = f_sf(f, d1, d2).unwrap();
                assert!((sf - (1.0 - cdf)).abs() < 1e-8, "F({d1},{d2}) at {f}: {sf} vs {}", 1.0 - cdf);
                let ib = incomplete_beta(d1 / 2.0, d2 / 2.0, x).unwrap();
                assert!((ib - cdf).abs() < 1e-8);
                points += 1;
            }
        }
    }
    assert_eq!(points, 50);
}

/// Studentized range quantiles against a 10^7-draw simulation per df: the
/// simulated exceedance rate must bracket α between q − 0.02 and q + 0.02.
#[test]
fn studentized_range_quantiles_match_monte_carlo() {
    const DRAWS: usize = 10_000_000;
    let dfs = [10usize, 16, 20];
    let handles: Vec<_> = dfs
        .iter()
        .map(|&df| {
            std::thread::spawn(move || {
                let q: Vec<f64> = (2..=6)
                    .map(|k| studentized_range_quantile(0.05, k, df as f64).unwrap())
                    .collect();
                let mut below = [0usize; 5];
                let mut above = [0usize; 5];
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + df as u64);
                let chi = ChiSquared::new(df as f64).unwrap();
                for _ in 0..DRAWS {
                    let s = (chi.sample(&mut rng) / df as f64).sqrt();
                    let z0: f64 = StandardNormal.sample(&mut rng);
                    let (mut lo, mut hi) = (z0, z0);
                    for k in 2..=6 {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        lo = lo.min(z);
                        hi = hi.max(z);
                        let stat = (hi - lo) / s;
                        let i = k - 2;
                        if stat > q[i] - 0.02 {
                            below[i] += 1;
                        }
                        if stat > q[i] + 0.02 {
                            above[i] += 1;
                        }
                    }
                }
                (df, q, below, above)
            })
        })
        .collect();
    for h in handles {
        let (df, q, below, above) = h.join().unwrap();
        for i in 0..5 {
            let lo = below[i] as f64 / DRAWS as f64;
            let hi = above[i] as f64 / DRAWS as f64;
            assert!(lo > 0.05 && hi < 0.05, "k={} df={df}: q={} tail rates {lo} / {hi}", i + 2, q[i]);
        }
    }
}

#[test]
fn tukey_with_two_means_is_the_t_test() {
    for df in [2usize, 5, 9, 16, 40, 120] {
        for alpha in [0.01, 0.05, 0.1] {
            let q = studentized_range_quantile(alpha, 2, df as f64).unwrap();
            let p = t_two_sided(q / 2f64.sqrt(), df as f64).unwrap();
            assert!((p - alpha).abs() < 1e-8, "df={df} alpha={alpha}: {p}");
            // decisions agree for differences on either side of the boundary
            let (mse, n) = (2.5, 4usize);
            let se = (2.0 * mse / n as f64).sqrt();
            for scale in [0.9, 0.999, 1.001, 1.1] {
                let t = scale * q / 2f64.sqrt();
                let set = tukey_hsd(
                    ComparisonInput {
                        factors: vec!["T".into()],
                        context: Vec::new(),
                        labels: vec!["a".into(), "b".into()],
                        means: vec![10.0 + t * se, 10.0],
                        n,
                        mse,
                        df_error: df,
                        stratum: "Residual".into(),
                        conservative: false,
                    },
                    alpha,
                )
                .unwrap();
                let t_rejects = t_two_sided(t, df as f64).unwrap() <= alpha;
                assert_eq!(set.pairs[0].significant, t_rejects, "df={df} alpha={alpha} scale={scale}");
            }
        }
    }
}

#[test]
fn studentized_range_reference_table() {
    let table: [(usize, [f64; 4]); 5] = [
        (2, [3.151064, 3.081307, 2.997999, 2.949998]),
        (3, [3.876777, 3.772929, 3.649139, 3.577935]),
        (4, [4.326582, 4.19866, 4.046093, 3.958294]),
        (5, [4.654293, 4.50771, 4.332688, 4.231857]),
        (6, [4.912016, 4.750231, 4.556809, 4.445237]),
    ];
    for (k, row) in table {
        for (df, want) in [10.0, 12.0, 16.0, 20.0].iter().zip(row) {
            let q = studentized_range_quantile(0.05, k, *df).unwrap();
            assert!((q - want).abs() < 2e-5, "k={k} df={df}: {q} vs {want}");
        }
    }
}
