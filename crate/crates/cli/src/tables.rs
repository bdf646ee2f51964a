//! Comma-delimited tables of the report bundle. Numbers carry three
//! decimals and p-values below 0.001 print as `<0.001`.

use plotwise::diagnostics::format_p;
use plotwise::mixed::BlupTable;
use plotwise::stability::StabilityResult;
use plotwise::Analysis;

/// Three decimals, without a negative sign on zero.
pub(crate) fn num(x: f64) -> String {
    if !x.is_finite() {
        return "NA".into();
    }
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

pub(crate) fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub(crate) fn opt_p(p: Option<f64>) -> String {
    p.map(format_p).unwrap_or_default()
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 input")
}

pub(crate) fn anova_csv(a: &Analysis) -> String {
    let rows = a
        .anova
        .rows
        .iter()
        .map(|r| {
            vec![
                r.source.clone(),
                r.df.to_string(),
                num(r.ss),
                num(r.ms),
                opt_num(r.f),
                opt_p(r.p),
                r.denominator.clone().unwrap_or_default(),
            ]
        })
        .collect();
    csv_text(&["Source", "DF", "SS", "MS", "F", "p", "ErrorTerm"], rows)
}

pub(crate) fn comparisons_csv(a: &Analysis) -> String {
    let mut rows = Vec::new();
    for set in &a.comparisons {
        for (i, label) in set.labels.iter().enumerate() {
            rows.push(vec![
                set.name(),
                label.clone(),
                num(set.means[i]),
                set.n.to_string(),
                set.letters[i].clone(),
                set.stratum.clone(),
                num(set.mse),
                set.df_error.to_string(),
                num(set.q_critical),
                num(set.hsd),
                set.conservative.to_string(),
            ]);
        }
    }
    csv_text(
        &[
            "Comparison",
            "Level",
            "Mean",
            "N",
            "Group",
            "ErrorTerm",
            "MSE",
            "DF",
            "q",
            "HSD",
            "Conservative",
        ],
        rows,
    )
}

pub(crate) fn pairs_csv(a: &Analysis) -> String {
    let mut rows = Vec::new();
    for set in &a.comparisons {
        for p in &set.pairs {
            rows.push(vec![
                set.name(),
                p.a.clone(),
                p.b.clone(),
                num(p.difference),
                num(p.hsd),
                p.significant.to_string(),
            ]);
        }
    }
    csv_text(&["Comparison", "A", "B", "Difference", "HSD", "Significant"], rows)
}

pub(crate) fn variance_components_csv(a: &Analysis) -> Option<String> {
    let vc = a.variance_components.as_ref()?;
    let props = vc.proportions();
    let rows = vc
        .components
        .iter()
        .zip(props)
        .map(|(c, p)| {
            vec![
                c.term.clone(),
                c.kind.as_str().to_string(),
                num(c.raw),
                num(c.variance),
                num(p),
                (c.raw < 0.0).to_string(),
            ]
        })
        .collect();
    Some(csv_text(
        &["Term", "Kind", "Estimate", "Variance", "Proportion", "Clamped"],
        rows,
    ))
}

/// Every BLUP table of the analysis; the treatment table comes first.
pub(crate) fn blup_tables(a: &Analysis) -> Vec<&BlupTable> {
    let mut out: Vec<&BlupTable> = a.blups.iter().collect();
    for t in &a.random_blups {
        if !out.iter().any(|o| o.target == t.target) {
            out.push(t);
        }
    }
    out
}

pub(crate) fn blup_csv(a: &Analysis) -> Option<String> {
    let tables = blup_tables(a);
    if tables.is_empty() {
        return None;
    }
    let mut rows = Vec::new();
    for t in tables {
        for e in &t.entries {
            rows.push(vec![
                t.target.clone(),
                e.level.clone(),
                e.n.to_string(),
                num(e.raw_mean),
                num(e.effect),
                num(e.predicted_mean),
                num(t.shrinkage),
            ]);
        }
    }
    Some(csv_text(
        &["Term", "Level", "N", "RawMean", "BLUP", "PredictedMean", "Shrinkage"],
        rows,
    ))
}

/// `(file name, contents)` of each stability table.
pub(crate) fn stability_csvs(s: &StabilityResult) -> Vec<(&'static str, String)> {
    let m = &s.matrix;
    let mut header = vec!["Genotype".to_string()];
    header.extend(m.environments.iter().cloned());
    header.push("Mean".into());
    let gm = m.genotype_means();
    let means: Vec<Vec<String>> = (0..m.values.rows)
        .map(|i| {
            let mut r = vec![m.genotypes[i].clone()];
            r.extend(m.values.row(i).iter().map(|v| num(*v)));
            r.push(num(gm[i]));
            r
        })
        .collect();
    let hdr: Vec<&str> = header.iter().map(String::as_str).collect();
    let ge_means = csv_text(&hdr, means);

    let k = s.ammi.singular_values.len();
    let comps = (0..k)
        .map(|c| {
            let sv = s.ammi.singular_values[c];
            vec![
                format!("IPCA{}", c + 1),
                num(sv),
                num(sv * sv),
                num(s.ammi.variance_explained[c]),
            ]
        })
        .collect();
    let components = csv_text(&["Component", "SingularValue", "SS", "Proportion"], comps);

    let ipca: Vec<String> = (1..=k).map(|c| format!("IPCA{c}")).collect();
    let mut hdr = vec!["Type", "Level"];
    hdr.extend(ipca.iter().map(String::as_str));
    let mut rows = Vec::new();
    for (i, g) in m.genotypes.iter().enumerate() {
        let mut r = vec!["genotype".to_string(), g.clone()];
        r.extend((0..k).map(|c| num(s.ammi.genotype_scores.get(i, c))));
        rows.push(r);
    }
    for (j, e) in m.environments.iter().enumerate() {
        let mut r = vec!["environment".to_string(), e.clone()];
        r.extend((0..k).map(|c| num(s.ammi.environment_scores.get(j, c))));
        rows.push(r);
    }
    let scores = csv_text(&hdr, rows);

    let reg = s
        .er
        .iter()
        .map(|r| {
            vec![
                r.genotype.clone(),
                num(r.intercept),
                num(r.slope),
                opt_num(r.s2_di),
            ]
        })
        .collect();
    let regression = csv_text(&["Genotype", "Mean", "Slope", "DeviationVariance"], reg);

    let mut rows = Vec::new();
    for (i, g) in m.genotypes.iter().enumerate() {
        rows.push(vec![
            "genotype".into(),
            g.clone(),
            num(s.gge.genotype_coords.get(i, 0)),
            num(s.gge.genotype_coords.get(i, 1)),
        ]);
    }
    for (j, e) in m.environments.iter().enumerate() {
        rows.push(vec![
            "environment".into(),
            e.clone(),
            num(s.gge.environment_coords.get(j, 0)),
            num(s.gge.environment_coords.get(j, 1)),
        ]);
    }
    let gge = csv_text(&["Type", "Level", "PC1", "PC2"], rows);

    vec![
        ("ge_means.csv", ge_means),
        ("ammi_components.csv", components),
        ("ammi_scores.csv", scores),
        ("regression.csv", regression),
        ("gge.csv", gge),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(num(1.23456), "1.235");
        assert_eq!(num(-0.0001), "0.000");
        assert_eq!(num(f64::NAN), "NA");
        assert_eq!(opt_p(Some(0.0004)), "<0.001");
        assert_eq!(opt_p(Some(0.2621)), "0.262");
        assert_eq!(opt_p(None), "");
    }
}
