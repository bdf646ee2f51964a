//! Built-in tutorial datasets for the six canonical designs.
//!
//! The values are small synthetic trials chosen so that their ANOVA tables
//! come out at round, easily checked mean squares.

use crate::data::Dataset;
use crate::design::{parse_design, DesignSpec};
use crate::error::{Error, Result};

/// Names accepted by [`builtin_dataset`] and [`builtin_design`].
pub const BUILTIN_NAMES: [&str; 6] = ["crd", "rcbd", "factorial", "split_plot", "lmm", "gxe"];

struct Builder {
    names: Vec<&'static str>,
    cells: Vec<Vec<String>>,
}

impl Builder {
    fn new(names: &[&'static str]) -> Self {
        Builder {
            names: names.to_vec(),
            cells: vec![Vec::new(); names.len()],
        }
    }

    fn row(&mut self, values: &[String]) {
        for (c, v) in self.cells.iter_mut().zip(values) {
            c.push(v.clone());
        }
    }

    fn build(self) -> Dataset {
        Dataset::from_columns(
            self.names
                .into_iter()
                .map(str::to_string)
                .zip(self.cells)
                .collect(),
        )
        .expect("fixture tables are well formed")
    }
}

fn num(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.1}")
    }
}

fn crd() -> Dataset {
    let data: [(&str, [f64; 5]); 4] = [
        ("Control", [36.0, 39.0, 41.0, 41.0, 43.0]),
        ("Compost", [45.0, 46.0, 48.0, 48.0, 48.0]),
        ("NPK50", [52.0, 53.0, 53.0, 53.0, 54.0]),
        ("NPK100", [59.0, 60.0, 60.0, 60.0, 61.0]),
    ];
    let mut b = Builder::new(&["Treatment", "Yield"]);
    for (t, ys) in data {
        for y in ys {
            b.row(&[t.to_string(), num(y)]);
        }
    }
    b.build()
}

fn rcbd() -> Dataset {
    // rows are varieties, columns blocks
    let y = [
        [43.0, 46.0, 43.0, 46.0],
        [47.0, 50.0, 48.0, 49.0],
        [52.0, 53.0, 52.0, 53.0],
        [55.0, 58.0, 56.0, 57.0],
    ];
    let mut b = Builder::new(&["Block", "Variety", "Yield"]);
    for blk in 0..4 {
        for (v, row) in y.iter().enumerate() {
            b.row(&[format!("B{}", blk + 1), format!("V{}", v + 1), num(row[blk])]);
        }
    }
    b.build()
}

fn factorial() -> Dataset {
    let cells = [
        ("Low", "Narrow", 39.5),
        ("Low", "Wide", 43.5),
        ("Medium", "Narrow", 47.0),
        ("Medium", "Wide", 53.0),
        ("High", "Narrow", 56.0),
        ("High", "Wide", 61.0),
    ];
    let mut b = Builder::new(&["Nitrogen", "Spacing", "Yield"]);
    for (n, s, mean) in cells {
        for offset in [-1.0, 0.0, 1.0] {
            b.row(&[n.to_string(), s.to_string(), num(mean + offset)]);
        }
    }
    b.build()
}

fn split_plot() -> Dataset {
    // y[irrigation][block][variety]
    let y = [
        [[36.0, 41.0, 44.0], [38.0, 42.0, 45.0], [39.0, 43.0, 46.0]],
        [[47.0, 49.0, 53.0], [48.0, 50.0, 54.0], [49.0, 51.0, 54.0]],
        [[54.0, 58.0, 60.0], [55.0, 59.0, 61.0], [56.0, 59.0, 62.0]],
    ];
    let irrigation = ["Rainfed", "Deficit", "Full"];
    let mut b = Builder::new(&["Block", "Irrigation", "Variety", "Yield"]);
    for blk in 0..3 {
        for (i, name) in irrigation.iter().enumerate() {
            for v in 0..3 {
                b.row(&[
                    format!("B{}", blk + 1),
                    name.to_string(),
                    format!("V{}", v + 1),
                    num(y[i][blk][v]),
                ]);
            }
        }
    }
    b.build()
}

fn lmm() -> Dataset {
    let y = [
        ("T1", [40.0, 42.0, 43.0, 41.0]),
        ("T2", [48.0, 49.0, 50.0, 47.0]),
        ("T3", [54.0, 56.0, 55.0, 53.0]),
    ];
    let mut b = Builder::new(&["Block", "Treatment", "Yield"]);
    for blk in 0..4 {
        for (t, ys) in &y {
            b.row(&[format!("B{}", blk + 1), t.to_string(), num(ys[blk])]);
        }
    }
    b.build()
}

fn gxe() -> Dataset {
    // per genotype: E1 rep 1, E1 rep 2, E2 rep 1, ...
    let y = [
        [37.4, 38.6, 41.6, 43.4, 43.0, 44.0, 44.0, 44.0],
        [43.3, 44.7, 49.0, 49.0, 48.3, 49.7, 48.5, 49.5],
        [49.5, 49.5, 53.2, 53.8, 53.6, 54.4, 53.6, 54.4],
        [54.3, 55.7, 58.1, 58.9, 58.8, 59.2, 58.0, 59.0],
    ];
    let mut b = Builder::new(&["Environment", "Rep", "Genotype", "Yield"]);
    for e in 0..4 {
        for r in 0..2 {
            for (g, row) in y.iter().enumerate() {
                b.row(&[
                    format!("E{}", e + 1),
                    format!("R{}", r + 1),
                    format!("G{}", g + 1),
                    num(row[2 * e + r]),
                ]);
            }
        }
    }
    b.build()
}

/// The bundled dataset for one of [`BUILTIN_NAMES`].
pub fn builtin_dataset(name: &str) -> Result<Dataset> {
    match name {
        "crd" => Ok(crd()),
        "rcbd" => Ok(rcbd()),
        "factorial" => Ok(factorial()),
        "split_plot" => Ok(split_plot()),
        "lmm" => Ok(lmm()),
        "gxe" => Ok(gxe()),
        other => Err(Error::UnknownDataset(other.to_string())),
    }
}

/// TOML design document matching a built-in dataset.
pub fn builtin_design_text(name: &str) -> Result<&'static str> {
    Ok(match name {
        "crd" => {
            r#"kind = "crd"
response = "Yield"

[[factors]]
name = "Treatment"
role = "fixed"
"#
        }
        "rcbd" => {
            r#"kind = "rcbd"
response = "Yield"
block = "Block"

[[factors]]
name = "Variety"
role = "fixed"
"#
        }
        "factorial" => {
            r#"kind = "factorial"
response = "Yield"

[[factors]]
name = "Nitrogen"
role = "fixed"

[[factors]]
name = "Spacing"
role = "fixed"
"#
        }
        "split_plot" => {
            r#"kind = "split_plot"
response = "Yield"
block = "Block"

[[factors]]
name = "Irrigation"
role = "fixed"
stratum = "whole_plot"

[[factors]]
name = "Variety"
role = "fixed"
stratum = "sub_plot"
"#
        }
        "lmm" => {
            r#"kind = "mixed"
response = "Yield"
block = { name = "Block", role = "random" }

[[factors]]
name = "Treatment"
role = "fixed"
"#
        }
        "gxe" => {
            r#"kind = "met"
response = "Yield"

[[factors]]
name = "Genotype"
role = "fixed"

[[factors]]
name = "Environment"
role = "random"
"#
        }
        other => return Err(Error::UnknownDataset(other.to_string())),
    })
}

pub fn builtin_design(name: &str) -> Result<DesignSpec> {
    parse_design(builtin_design_text(name)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_dimensions() {
        let expect = [
            ("crd", 20),
            ("rcbd", 16),
            ("factorial", 18),
            ("split_plot", 27),
            ("lmm", 12),
            ("gxe", 32),
        ];
        for (name, rows) in expect {
            let d = builtin_dataset(name).unwrap();
            assert_eq!(d.n_rows(), rows, "{name}");
            let spec = builtin_design(name).unwrap();
            crate::design::validate_against_data(&spec, &d).unwrap();
        }
        assert_eq!(builtin_dataset("crd").unwrap().levels("Treatment").unwrap().len(), 4);
        assert_eq!(
            builtin_dataset("nonexistent"),
            Err(Error::UnknownDataset("nonexistent".into()))
        );
    }
}
