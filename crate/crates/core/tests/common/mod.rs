#![allow(dead_code)]

use plotwise::{parse_design, Dataset, DesignSpec};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const KINDS: [&str; 6] = ["crd", "rcbd", "factorial", "split_plot", "mixed", "met"];

/// A randomly generated balanced experiment plus the model terms an
/// independent oracle should find, with the error term of each.
pub struct Case {
    pub kind: &'static str,
    pub spec: DesignSpec,
    pub data: Dataset,
    /// (factors, denominator label)
    pub terms: Vec<(Vec<String>, String)>,
    /// Factor names with their level counts, in generation order.
    pub factors: Vec<(String, usize)>,
    pub reps: usize,
}

fn s(v: &[&str]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

fn toml(kind: &str, block: Option<&str>, factors: &[(&str, &str, Option<&str>)]) -> String {
    let mut t = format!("kind = \"{kind}\"\nresponse = \"Y\"\n");
    if let Some(b) = block {
        t.push_str(&format!("block = {b}\n"));
    }
    for (name, role, stratum) in factors {
        t.push_str(&format!("\n[[factors]]\nname = \"{name}\"\nrole = \"{role}\"\n"));
        if let Some(st) = stratum {
            t.push_str(&format!("stratum = \"{st}\"\n"));
        }
    }
    t
}

fn subsets_by_order(names: &[&str]) -> Vec<Vec<String>> {
    let m = names.len();
    let mut out: Vec<Vec<String>> = Vec::new();
    for order in 1..=m {
        for mask in 1u32..(1 << m) {
            if mask.count_ones() as usize == order {
                out.push((0..m).filter(|i| mask & (1 << i) != 0).map(|i| names[i].to_string()).collect());
            }
        }
    }
    out
}

pub fn random_case(kind: &'static str, rng: &mut ChaCha8Rng) -> Case {
    let lv = |rng: &mut ChaCha8Rng| rng.random_range(2..=4usize);
    let (text, factors, reps, terms): (String, Vec<(String, usize)>, usize, Vec<(Vec<String>, String)>) =
        match kind {
            "crd" => (
                toml("crd", None, &[("T", "fixed", None)]),
                vec![("T".into(), lv(rng))],
                rng.random_range(2..=4),
                vec![(s(&["T"]), "Residual".into())],
            ),
            "rcbd" => (
                toml("rcbd", Some("\"Block\""), &[("T", "fixed", None)]),
                vec![("T".into(), lv(rng)), ("Block".into(), lv(rng))],
                1,
                vec![(s(&["T"]), "Residual".into()), (s(&["Block"]), "Residual".into())],
            ),
            "factorial" => {
                let three = rng.random_bool(0.3);
                let names: Vec<&str> = if three { vec!["A", "B", "C"] } else { vec!["A", "B"] };
                let fs: Vec<(&str, &str, Option<&str>)> = names.iter().map(|n| (*n, "fixed", None)).collect();
                (
                    toml("factorial", None, &fs),
                    names.iter().map(|n| (n.to_string(), if three { rng.random_range(2..=3) } else { lv(rng) })).collect(),
                    rng.random_range(2..=if three { 3 } else { 4 }),
                    subsets_by_order(&names).into_iter().map(|t| (t, "Residual".into())).collect(),
                )
            }
            "split_plot" => (
                toml(
                    "split_plot",
                    Some("\"Block\""),
                    &[("A", "fixed", Some("whole_plot")), ("B", "fixed", Some("sub_plot"))],
                ),
                vec![("Block".into(), lv(rng)), ("A".into(), lv(rng)), ("B".into(), lv(rng))],
                1,
                vec![
                    (s(&["Block"]), "Block:A".into()),
                    (s(&["A"]), "Block:A".into()),
                    (s(&["B"]), "Residual".into()),
                    (s(&["Block", "A"]), "Residual".into()),
                    (s(&["A", "B"]), "Residual".into()),
                ],
            ),
            "mixed" => {
                let two = rng.random_bool(0.5);
                let names: Vec<&str> = if two { vec!["A", "B"] } else { vec!["A"] };
                let fs: Vec<(&str, &str, Option<&str>)> = names.iter().map(|n| (*n, "fixed", None)).collect();
                let mut terms: Vec<(Vec<String>, String)> =
                    subsets_by_order(&names).into_iter().map(|t| (t, "Residual".into())).collect();
                terms.push((s(&["Block"]), "Residual".into()));
                let mut factors: Vec<(String, usize)> = names.iter().map(|n| (n.to_string(), lv(rng))).collect();
                factors.push(("Block".into(), lv(rng)));
                (toml("mixed", Some("{ name = \"Block\", role = \"random\" }"), &fs), factors, 1, terms)
            }
            "met" => (
                toml("met", None, &[("G", "fixed", None), ("E", "random", None)]),
                vec![("G".into(), lv(rng)), ("E".into(), lv(rng))],
                rng.random_range(2..=4),
                vec![
                    (s(&["G"]), "Residual".into()),
                    (s(&["E"]), "Residual".into()),
                    (s(&["G", "E"]), "Residual".into()),
                ],
            ),
            _ => unreachable!(),
        };
    let spec = parse_design(&text).unwrap();
    let data = generate(&factors, reps, rng);
    Case {
        kind,
        spec,
        data,
        terms,
        factors,
        reps,
    }
}

/// Every cell of the crossed factors repeated `reps` times, effects drawn at
/// random, rows shuffled.
pub fn generate(factors: &[(String, usize)], reps: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let cells: usize = factors.iter().map(|(_, l)| l).product();
    let noise = Normal::new(0.0, 1.0).unwrap();
    let main: Vec<Vec<f64>> = factors
        .iter()
        .map(|(_, l)| (0..*l).map(|_| 3.0 * noise.sample(rng)).collect())
        .collect();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for c in 0..cells {
        let mut rem = c;
        let mut lv = vec![0; factors.len()];
        for j in (0..factors.len()).rev() {
            lv[j] = rem % factors[j].1;
            rem /= factors[j].1;
        }
        let cell_effect = noise.sample(rng);
        for _ in 0..reps {
            let mut y = 50.0 + cell_effect;
            for (j, &l) in lv.iter().enumerate() {
                y += main[j][l];
            }
            y += noise.sample(rng);
            let mut row: Vec<String> = lv.iter().enumerate().map(|(j, &l)| format!("{}{}", factors[j].0, l + 1)).collect();
            row.push(format!("{y}"));
            rows.push(row);
        }
    }
    rows.shuffle(rng);
    let mut cols: Vec<(String, Vec<String>)> = factors.iter().map(|(n, _)| (n.clone(), Vec::new())).collect();
    cols.push(("Y".into(), Vec::new()));
    for row in rows {
        for (c, v) in cols.iter_mut().zip(row) {
            c.1.push(v);
        }
    }
    Dataset::from_columns(cols).unwrap()
}

pub fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(floor)
}
