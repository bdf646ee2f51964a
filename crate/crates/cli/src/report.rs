//! Plain-text report, recommendation text and the `validate` summary.

use std::fmt::Write;

use plotwise::diagnostics::p_clause;
use plotwise::{Analysis, Recommendation, ValidatedDesign};

use crate::tables::{blup_tables, num, opt_num, opt_p};

/// Aligned text table: first column left-aligned, the rest right-aligned.
fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate() {
            width[i] = width[i].max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = width[i] - c.chars().count();
            if i == 0 {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    out.push_str(&line(width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

fn heading(out: &mut String, title: &str) {
    let _ = writeln!(out, "\n{title}\n{}", "-".repeat(title.chars().count()));
}

pub(crate) fn design_summary(d: &ValidatedDesign) -> String {
    let spec = &d.spec;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Design: {} (response {}, {} observations, {} per cell)",
        spec.kind.as_str(),
        spec.response,
        d.n,
        d.reps
    );
    for (name, levels) in &d.factors {
        let decl = spec
            .treatment_factors
            .iter()
            .chain(&spec.block_factor)
            .find(|f| &f.name == name);
        let role = decl.map_or("fixed", |f| f.role.as_str());
        let mut what = role.to_string();
        if spec.block_factor.as_ref().is_some_and(|b| &b.name == name) {
            what.push_str(" block");
        } else if let Some(f) = decl.filter(|f| f.stratum != plotwise::design::Stratum::Unit) {
            what = format!("{what}, {}", f.stratum.as_str());
        }
        let _ = writeln!(out, "  {name} ({what}): {} levels [{}]", levels.len(), levels.join(", "));
    }
    let rows: Vec<Vec<String>> = d
        .effects
        .effects
        .iter()
        .map(|e| {
            vec![
                e.label(),
                d.df(e).to_string(),
                e.role.as_str().to_string(),
                e.denominator.clone(),
            ]
        })
        .collect();
    out.push_str(&table(&["Effect", "DF", "Role", "Error term"], &rows));
    let _ = writeln!(out, "Residual df: {}", d.residual_df());
    out
}

pub(crate) fn recommendation_text(r: &Recommendation, response: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Recommendation for {response}");
    let _ = writeln!(out, "Scope: {}", r.scope.as_str());
    let _ = writeln!(out, "Ranking basis: {}", r.ranking_basis.as_str());
    let _ = writeln!(out, "Objective: {}", if r.minimize { "minimise" } else { "maximise" });
    if r.top_group.is_empty() {
        let _ = writeln!(out, "Top group: none");
    } else {
        let _ = writeln!(out, "Top group: {}", r.top_group.join(", "));
    }
    if !r.ranking.is_empty() {
        let _ = writeln!(out, "Ranking (best first):");
        let width = r.ranking.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0);
        for (i, (l, m)) in r.ranking.iter().enumerate() {
            let _ = writeln!(out, "  {:>2}. {l:<width$}  {:>10}", i + 1, num(*m));
        }
    }
    if !r.per_context.is_empty() {
        let _ = writeln!(out, "Best within each context:");
        for c in &r.per_context {
            let _ = writeln!(out, "  {}: {}", c.context, c.top_group.join(", "));
        }
    }
    if !r.validity_caveats.is_empty() {
        let _ = writeln!(out, "Caveats:");
        for c in &r.validity_caveats {
            let _ = writeln!(out, "  - {c}");
        }
    }
    let _ = writeln!(out, "\n{}", r.narrative);
    out
}

pub(crate) fn report_text(a: &Analysis) -> String {
    let spec = &a.design.spec;
    let mut out = String::new();
    let _ = writeln!(out, "Analysis of {}", spec.response);
    let _ = writeln!(out, "{}", "=".repeat(12 + spec.response.chars().count()));
    out.push('\n');
    out.push_str(&design_summary(&a.design));
    let _ = writeln!(
        out,
        "Significance level alpha = {}; assumption level alpha_v = {}",
        num(a.alpha()),
        num(a.alpha_v())
    );

    heading(&mut out, "Analysis of variance");
    let rows: Vec<Vec<String>> = a
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
    out.push_str(&table(&["Source", "DF", "SS", "MS", "F", "p", "Error term"], &rows));
    let _ = writeln!(out, "Total: DF {}, SS {}", a.anova.total_df, num(a.anova.total_ss));

    heading(&mut out, "Admissible effects");
    if a.domain.dominant.is_empty() {
        let _ = writeln!(out, "No treatment effect is significant; no comparisons are admissible.");
    } else {
        let names: Vec<String> = a.domain.dominant.iter().map(|e| e.label()).collect();
        let _ = writeln!(out, "Interpreted: {} ({})", names.join(", "), a.domain.mode.as_str());
    }
    for (e, why) in &a.domain.excluded {
        let _ = writeln!(out, "Not interpreted: {} ({})", e.label(), why.as_str());
    }

    if !a.comparisons.is_empty() {
        heading(&mut out, "Tukey HSD comparisons");
        for set in &a.comparisons {
            let _ = writeln!(
                out,
                "\n{}: error term {}{}, MSE = {}, df = {}, q = {}, HSD = {}",
                set.name(),
                set.stratum,
                if set.conservative { " (approximate, conservative)" } else { "" },
                num(set.mse),
                set.df_error,
                num(set.q_critical),
                num(set.hsd)
            );
            let mut order: Vec<usize> = (0..set.labels.len()).collect();
            order.sort_by(|&i, &j| set.means[j].total_cmp(&set.means[i]).then(i.cmp(&j)));
            let rows: Vec<Vec<String>> = order
                .iter()
                .map(|&i| vec![set.labels[i].clone(), num(set.means[i]), set.letters[i].clone()])
                .collect();
            out.push_str(&table(&["Level", "Mean", "Group"], &rows));
        }
    }

    heading(&mut out, "Assumption checks");
    for s in &a.diagnostics.strata {
        let mut parts = Vec::new();
        if let Some(sw) = s.shapiro {
            parts.push(format!(
                "Shapiro-Wilk W = {}, {}{}",
                num(sw.w),
                p_clause(sw.p),
                if s.normality_ok { "" } else { " (rejected)" }
            ));
        }
        if let Some(lv) = s.levene {
            parts.push(format!(
                "Brown-Forsythe F = {}, {}{}",
                num(lv.f),
                p_clause(lv.p),
                if s.homogeneity_ok { "" } else { " (rejected)" }
            ));
        }
        let _ = writeln!(out, "{} (df {}): {}", s.stratum, s.df, parts.join("; "));
        for n in &s.notes {
            let _ = writeln!(out, "  note: {n}");
        }
    }
    let _ = writeln!(
        out,
        "Model assumptions {} at alpha_v = {}.",
        if a.diagnostics.overall_valid { "hold" } else { "are questionable" },
        num(a.alpha_v())
    );

    if let Some(vc) = &a.variance_components {
        heading(&mut out, "Variance components");
        let rows: Vec<Vec<String>> = vc
            .components
            .iter()
            .zip(vc.proportions())
            .map(|(c, p)| {
                vec![
                    c.term.clone(),
                    num(c.variance),
                    format!("{:.1}%", 100.0 * p),
                    if c.raw < 0.0 { format!("clamped from {}", num(c.raw)) } else { String::new() },
                ]
            })
            .collect();
        out.push_str(&table(&["Term", "Variance", "Share", "Note"], &rows));
    }
    for t in blup_tables(a) {
        heading(&mut out, &format!("Predicted values: {}", t.target));
        let _ = writeln!(out, "Grand mean {}, shrinkage factor {}", num(t.grand_mean), num(t.shrinkage));
        let rows: Vec<Vec<String>> = t
            .entries
            .iter()
            .map(|e| vec![e.level.clone(), num(e.raw_mean), num(e.effect), num(e.predicted_mean)])
            .collect();
        out.push_str(&table(&["Level", "Mean", "BLUP", "Predicted"], &rows));
    }
    if let Some(h) = &a.heritability {
        heading(&mut out, "Heritability");
        let _ = writeln!(
            out,
            "H2 = {} (genotypic variance {}, interaction {}, residual {}; {} environments, {} replicates)",
            num(h.h2),
            num(h.genotypic_variance),
            num(h.interaction_variance),
            num(h.residual_variance),
            h.n_env,
            h.n_rep
        );
    }
    if let Some(s) = &a.stability {
        heading(&mut out, "Stability");
        let share: Vec<String> = s
            .ammi
            .variance_explained
            .iter()
            .enumerate()
            .map(|(i, v)| format!("IPCA{} {:.1}%", i + 1, 100.0 * v))
            .collect();
        let _ = writeln!(out, "AMMI interaction SS (cell means): {}; {}", num(s.ammi.interaction_ss()), share.join(", "));
        let rows: Vec<Vec<String>> = s
            .er
            .iter()
            .map(|r| vec![r.genotype.clone(), num(r.intercept), num(r.slope), opt_num(r.s2_di)])
            .collect();
        out.push_str(&table(&["Genotype", "Mean", "Slope", "S2d"], &rows));
        let _ = writeln!(
            out,
            "GGE: PC1 {:.1}%, PC2 {:.1}%",
            100.0 * s.gge.variance_explained[0],
            100.0 * s.gge.variance_explained[1]
        );
    }

    heading(&mut out, "Recommendation");
    out.push_str(&recommendation_text(&a.recommendation, &spec.response));
    if !a.notes.is_empty() {
        heading(&mut out, "Notes");
        for n in &a.notes {
            let _ = writeln!(out, "- {n}");
        }
    }
    out
}
