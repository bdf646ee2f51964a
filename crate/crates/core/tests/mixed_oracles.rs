//! Variance components, BLUPs and heritability against independent
//! computations: a REML profile likelihood and direct algebra.

mod common;

use common::{generate, random_case};
use nalgebra::{DMatrix, DVector};
use plotwise::mixed::{blups, estimate_components, heritability, met_components, ComponentKind};
use plotwise::{anova, fit, validate_against_data, Dataset};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Restricted log-likelihood with σ² profiled out, as a function of
/// γ = σ²_B / σ²_e, for y = Xβ + Zu + e.
fn profile_reml(x: &DMatrix<f64>, z: &DMatrix<f64>, y: &DVector<f64>, gamma: f64) -> (f64, f64) {
    let n = y.len();
    let p = x.ncols();
    let h = DMatrix::identity(n, n) + z * z.transpose() * gamma;
    let chol = h.clone().cholesky().unwrap();
    let hinv = chol.inverse();
    let xthx = x.transpose() * &hinv * x;
    let xthx_inv = xthx.clone().try_inverse().unwrap();
    let pm = &hinv - &hinv * x * xthx_inv * x.transpose() * &hinv;
    let s2 = (y.transpose() * &pm * y)[(0, 0)] / (n - p) as f64;
    let ld_h = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let ld_x = xthx.determinant().ln();
    (-0.5 * ((n - p) as f64 * s2.ln() + ld_h + ld_x), s2)
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > 1e-10 {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = f(a);
        }
    }
    0.5 * (lo + hi)
}

fn indicators(data: &Dataset, col: &str, drop_first: bool) -> DMatrix<f64> {
    let levels = data.levels(col).unwrap();
    let raw = &data.column(col).unwrap().raw;
    let start = usize::from(drop_first);
    let mut m = DMatrix::zeros(raw.len(), levels.len() - start);
    for (r, v) in raw.iter().enumerate() {
        let j = levels.iter().position(|l| l == v).unwrap();
        if j >= start {
            m[(r, j - start)] = 1.0;
        }
    }
    m
}

#[test]
fn ems_components_equal_reml_under_balance() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut interior = 0;
    for _ in 0..40 {
        let data = generate(&[("A".into(), 3), ("Block".into(), 5)], 1, &mut rng);
        let spec = plotwise::parse_design(
            "kind = \"mixed\"\nresponse = \"Y\"\nblock = { name = \"Block\", role = \"random\" }\n[[factors]]\nname = \"A\"\nrole = \"fixed\"\n",
        )
        .unwrap();
        let design = validate_against_data(&spec, &data).unwrap();
        let table = anova(&design, &fit(&design, &data).unwrap()).unwrap();
        let vc = estimate_components(&table, &design).unwrap();
        let raw_block = vc.components.iter().find(|c| c.term == "Block").unwrap().raw;

        let n = data.n_rows();
        let a = indicators(&data, "A", true);
        let mut x = DMatrix::from_element(n, 1 + a.ncols(), 1.0);
        x.view_mut((0, 1), (n, a.ncols())).copy_from(&a);
        let z = indicators(&data, "Block", false);
        let y = DVector::from_vec(data.column("Y").unwrap().numeric.clone().unwrap());
        let t = golden_max(|t| profile_reml(&x, &z, &y, t.exp()).0, -25.0, 8.0);
        let gamma = t.exp();
        let (_, s2) = profile_reml(&x, &z, &y, gamma);
        let s2b = gamma * s2;
        if raw_block > 0.05 * vc.residual() {
            interior += 1;
            assert!((s2b - raw_block).abs() < 1e-5 * raw_block.max(1.0), "{s2b} vs {raw_block}");
            assert!((s2 - vc.residual()).abs() < 1e-5 * vc.residual().max(1.0), "{s2} vs {}", vc.residual());
        } else if raw_block < 0.0 {
            assert!(s2b < 1e-6 * s2.max(1.0), "boundary: {s2b}");
            assert_eq!(vc.get("Block"), Some(0.0));
            assert_eq!(vc.clamped, vec!["Block".to_string()]);
        }
    }
    assert!(interior >= 10, "only {interior} interior cases");
}

#[test]
fn published_mean_squares_give_published_heritability() {
    let vc = met_components(364.458, 42.458, 0.458, 0.5, 4, 4, 2);
    assert!((vc.of_kind(ComponentKind::Genotype).unwrap() - 45.5).abs() < 1e-9);
    assert_eq!(vc.of_kind(ComponentKind::Interaction), Some(0.0));
    assert!(vc.clamped.iter().any(|t| t.contains(':')));
    let h = heritability(&vc, 4, 2).unwrap();
    assert!((h.h2 - 45.5 / 45.5625).abs() < 1e-12);
    assert!((h.h2 - 0.9986).abs() < 5e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn met_blups_are_centred_ordered_and_shrunk(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let case = random_case("met", &mut rng);
        let design = validate_against_data(&case.spec, &case.data).unwrap();
        let model = fit(&design, &case.data).unwrap();
        let table = anova(&design, &model).unwrap();
        let vc = estimate_components(&table, &design).unwrap();
        let h = heritability(&vc, case.factors[1].1, case.reps).unwrap();
        prop_assert!((0.0..=1.0).contains(&h.h2));
        let Ok(b) = blups(&vc, &model, &design) else {
            // every component clamped to zero: no shrinkage target
            prop_assert_eq!(vc.of_kind(ComponentKind::Genotype), Some(0.0));
            return Ok(());
        };
        prop_assert!((0.0..=1.0).contains(&b.shrinkage));
        let sum: f64 = b.entries.iter().map(|e| e.effect).sum();
        prop_assert!(sum.abs() < 1e-9);
        for e in &b.entries {
            let raw = e.raw_mean - b.grand_mean;
            prop_assert!(e.effect.abs() <= raw.abs() + 1e-12);
            prop_assert!(e.effect * raw >= 0.0);
        }
        for w in b.entries.windows(2) {
            prop_assert!(w[0].predicted_mean >= w[1].predicted_mean);
            prop_assert!(w[0].raw_mean >= w[1].raw_mean - 1e-12);
        }
    }

    #[test]
    fn clamped_components_are_non_negative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for kind in ["mixed", "met", "split_plot"] {
            let mut case = random_case(kind, &mut rng);
            if kind == "split_plot" {
                case.spec.block_factor.as_mut().unwrap().role = plotwise::design::Role::Random;
            }
            let design = validate_against_data(&case.spec, &case.data).unwrap();
            let table = anova(&design, &fit(&design, &case.data).unwrap()).unwrap();
            let vc = estimate_components(&table, &design).unwrap();
            for c in &vc.components {
                prop_assert!(c.variance >= 0.0);
                prop_assert_eq!(c.variance, c.raw.max(0.0));
                prop_assert_eq!(vc.clamped.contains(&c.term), c.raw < 0.0);
            }
            let p: f64 = vc.proportions().iter().sum();
            prop_assert!((p - 1.0).abs() < 1e-12 || vc.total() == 0.0);
        }
    }
}
