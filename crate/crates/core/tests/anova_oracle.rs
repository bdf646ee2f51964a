//! Engine ANOVA against least-squares projections on random balanced data.

mod common;

use common::{close, random_case, Case, KINDS};
use nalgebra::{DMatrix, DVector};
use plotwise::{anova, fit, validate_against_data};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct OracleRow {
    label: String,
    df: usize,
    ss: f64,
}

/// Rank of X and residual sum of squares of y on the column space of X,
/// through the eigendecomposition of XᵀX.
fn rank_and_rss(x: &DMatrix<f64>, y: &DVector<f64>) -> (usize, f64) {
    let xtx = x.transpose() * x;
    let eig = xtx.symmetric_eigen();
    let tol = 1e-10 * eig.eigenvalues.max();
    let xty = x.transpose() * y;
    let mut beta = DVector::zeros(x.ncols());
    let mut rank = 0;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > tol {
            rank += 1;
            let v = eig.eigenvectors.column(k);
            beta += v * (v.dot(&xty) / lambda);
        }
    }
    let r = y - x * beta;
    (rank, r.norm_squared())
}

/// Sequential sums of squares from nested least-squares fits with full
/// indicator coding of every term.
fn oracle(case: &Case) -> (Vec<OracleRow>, usize, f64) {
    let data = &case.data;
    let n = data.n_rows();
    let y = DVector::from_vec(data.column("Y").unwrap().numeric.clone().unwrap());
    let mut terms = case.terms.clone();
    terms.sort_by_key(|(f, _)| f.len());
    let mut blocks: Vec<DMatrix<f64>> = vec![DMatrix::from_element(n, 1, 1.0)];
    let (mut prev_rank, mut prev_rss) = rank_and_rss(&blocks[0], &y);
    let mut out = Vec::new();
    for (factors, _) in &terms {
        let keys: Vec<String> = (0..n)
            .map(|r| {
                factors
                    .iter()
                    .map(|f| data.column(f).unwrap().raw[r].clone())
                    .collect::<Vec<_>>()
                    .join("|")
            })
            .collect();
        let mut distinct = keys.clone();
        distinct.sort();
        distinct.dedup();
        let mut z = DMatrix::zeros(n, distinct.len());
        for (r, k) in keys.iter().enumerate() {
            z[(r, distinct.binary_search(k).unwrap())] = 1.0;
        }
        blocks.push(z);
        let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
        let mut x = DMatrix::zeros(n, cols);
        let mut at = 0;
        for b in &blocks {
            x.view_mut((0, at), (n, b.ncols())).copy_from(b);
            at += b.ncols();
        }
        let (rank, rss) = rank_and_rss(&x, &y);
        out.push(OracleRow {
            label: factors.join(":"),
            df: rank - prev_rank,
            ss: prev_rss - rss,
        });
        prev_rank = rank;
        prev_rss = rss;
    }
    (out, n - prev_rank, prev_rss)
}

#[test]
fn engine_matches_projection_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut checked = 0;
    for i in 0..200 {
        let kind = KINDS[i % KINDS.len()];
        let case = random_case(kind, &mut rng);
        let design = validate_against_data(&case.spec, &case.data).unwrap();
        let model = fit(&design, &case.data).unwrap();
        let table = anova(&design, &model).unwrap();
        let (rows, res_df, res_ss) = oracle(&case);
        let total = table.total_ss;

        let res = table.residual();
        assert_eq!(res.df, res_df, "{kind} residual df");
        assert!(close(res.ss, res_ss, 1e-9, total * 1e-3), "{kind} residual ss {} vs {res_ss}", res.ss);
        let ms_of = |label: &str| -> f64 {
            if label == "Residual" {
                res_ss / res_df as f64
            } else {
                let r = rows.iter().find(|r| r.label == label).unwrap();
                r.ss / r.df as f64
            }
        };
        for ((factors, den), o) in case.terms.iter().zip(case.terms.iter().map(|(f, _)| {
            rows.iter().find(|r| r.label == f.join(":")).unwrap()
        })) {
            let label = factors.join(":");
            let row = table.row(&label).unwrap_or_else(|| panic!("{kind}: no row {label}"));
            assert_eq!(row.df, o.df, "{kind} {label} df");
            assert!(close(row.ss, o.ss, 1e-9, total * 1e-3), "{kind} {label} ss {} vs {}", row.ss, o.ss);
            let ms = o.ss / o.df as f64;
            assert!(close(row.ms, ms, 1e-9, total * 1e-3), "{kind} {label} ms");
            let f = ms / ms_of(den);
            let got = row.f.expect("F defined");
            assert!(close(got, f, 1e-9, 1e-6), "{kind} {label} F {got} vs {f}");
            let p_ref = statrs_sf(f, o.df as f64, ms_df(den, &rows, res_df));
            assert!((row.p.unwrap() - p_ref).abs() < 1e-8, "{kind} {label} p");
        }
        // every engine row is accounted for
        assert_eq!(table.rows.len(), case.terms.len() + 1, "{kind} row count");
        checked += 1;
    }
    assert_eq!(checked, 200);
}

fn ms_df(den: &str, rows: &[OracleRow], res_df: usize) -> f64 {
    if den == "Residual" {
        res_df as f64
    } else {
        rows.iter().find(|r| r.label == den).unwrap().df as f64
    }
}

fn statrs_sf(f: f64, d1: f64, d2: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, FisherSnedecor};
    FisherSnedecor::new(d1, d2).unwrap().sf(f)
}

#[test]
fn row_order_follows_design_conventions() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for kind in KINDS {
        let case = random_case(kind, &mut rng);
        let design = validate_against_data(&case.spec, &case.data).unwrap();
        let table = anova(&design, &fit(&design, &case.data).unwrap()).unwrap();
        let got: Vec<String> = table.rows.iter().map(|r| r.source.clone()).collect();
        let mut want: Vec<String> = case.terms.iter().map(|(f, _)| f.join(":")).collect();
        want.push("Residual".into());
        assert_eq!(got, want, "{kind}");
        for ((_, den), row) in case.terms.iter().zip(&table.rows) {
            assert_eq!(row.denominator.as_deref(), Some(den.as_str()), "{kind} {}", row.source);
        }
    }
}
