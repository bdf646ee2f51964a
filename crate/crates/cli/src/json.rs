//! Structured (JSON) documents: the full analysis, diagnostics and the
//! recommendation. Numbers keep full precision here.

use plotwise::decision::Recommendation;
use plotwise::diagnostics::DiagnosticReport;
use plotwise::mixed::BlupTable;
use plotwise::stability::StabilityResult;
use plotwise::svd::Matrix;
use plotwise::Analysis;
use serde_json::{json, Value};

fn ranking(r: &[(String, f64)]) -> Value {
    r.iter().map(|(l, m)| json!({ "level": l, "mean": m })).collect()
}

pub(crate) fn recommendation_json(r: &Recommendation) -> Value {
    json!({
        "scope": r.scope.as_str(),
        "top_group": r.top_group,
        "ranking_basis": r.ranking_basis.as_str(),
        "ranking": ranking(&r.ranking),
        "per_context": r.per_context.iter().map(|c| json!({
            "context": c.context,
            "top_group": c.top_group,
            "ranking": ranking(&c.ranking),
        })).collect::<Value>(),
        "validity_caveats": r.validity_caveats,
        "minimize": r.minimize,
        "narrative": r.narrative,
    })
}

pub(crate) fn diagnostics_json(d: &DiagnosticReport) -> Value {
    json!({
        "alpha_v": d.alpha_v,
        "overall_valid": d.overall_valid,
        "strata": d.strata.iter().map(|s| json!({
            "stratum": s.stratum,
            "df": s.df,
            "n": s.n,
            "grouping": s.grouping,
            "shapiro_wilk": s.shapiro.map(|t| json!({ "w": t.w, "p": t.p })),
            "levene": s.levene.map(|t| json!({ "f": t.f, "p": t.p, "df1": t.df1, "df2": t.df2 })),
            "normality_ok": s.normality_ok,
            "homogeneity_ok": s.homogeneity_ok,
            "notes": s.notes,
        })).collect::<Value>(),
        "caveats": d.caveats(),
    })
}

fn blup_json(t: &BlupTable) -> Value {
    json!({
        "term": t.target,
        "grand_mean": t.grand_mean,
        "shrinkage": t.shrinkage,
        "entries": t.entries.iter().map(|e| json!({
            "level": e.level,
            "n": e.n,
            "raw_mean": e.raw_mean,
            "blup": e.effect,
            "predicted_mean": e.predicted_mean,
        })).collect::<Value>(),
    })
}

fn matrix_json(m: &Matrix) -> Value {
    (0..m.rows).map(|i| m.row(i).to_vec()).collect()
}

fn stability_json(s: &StabilityResult) -> Value {
    json!({
        "genotypes": s.matrix.genotypes,
        "environments": s.matrix.environments,
        "cell_means": matrix_json(&s.matrix.values),
        "ammi": {
            "singular_values": s.ammi.singular_values,
            "interaction_ss": s.ammi.interaction_ss(),
            "variance_explained": s.ammi.variance_explained,
            "genotype_scores": matrix_json(&s.ammi.genotype_scores),
            "environment_scores": matrix_json(&s.ammi.environment_scores),
        },
        "regression": s.er.iter().map(|r| json!({
            "genotype": r.genotype,
            "mean": r.intercept,
            "slope": r.slope,
            "deviation_variance": r.s2_di,
        })).collect::<Value>(),
        "gge": {
            "singular_values": s.gge.singular_values,
            "variance_explained": s.gge.variance_explained,
            "genotype_coords": matrix_json(&s.gge.genotype_coords),
            "environment_coords": matrix_json(&s.gge.environment_coords),
        },
    })
}

pub(crate) fn analysis_json(a: &Analysis) -> Value {
    let spec = &a.design.spec;
    let factors: Value = a
        .design
        .factors
        .iter()
        .map(|(name, levels)| {
            let decl = spec
                .treatment_factors
                .iter()
                .chain(&spec.block_factor)
                .find(|f| &f.name == name);
            json!({
                "name": name,
                "role": decl.map(|f| f.role.as_str()),
                "stratum": decl.map(|f| f.stratum.as_str()),
                "block": spec.block_factor.as_ref().is_some_and(|b| &b.name == name),
                "levels": levels,
            })
        })
        .collect();
    json!({
        "design": {
            "kind": spec.kind.as_str(),
            "response": spec.response,
            "factors": factors,
            "reps": a.design.reps,
            "n": a.design.n,
            "alpha": a.alpha(),
            "alpha_v": a.alpha_v(),
        },
        "strata": a.design.effects.strata.iter().map(|s| json!({
            "label": s.label,
            "terms": s.terms,
        })).collect::<Value>(),
        "anova": a.anova.rows.iter().map(|r| json!({
            "source": r.source,
            "df": r.df,
            "ss": r.ss,
            "ms": r.ms,
            "f": r.f,
            "p": r.p,
            "error_term": r.denominator,
            "degenerate": r.degenerate,
        })).collect::<Value>(),
        "total": { "df": a.anova.total_df, "ss": a.anova.total_ss },
        "admissible_domain": {
            "mode": a.domain.mode.as_str(),
            "dominant": a.domain.dominant.iter().map(|e| e.label()).collect::<Vec<_>>(),
            "excluded": a.domain.excluded.iter().map(|(e, why)| json!({
                "effect": e.label(),
                "reason": why.as_str(),
            })).collect::<Value>(),
        },
        "comparisons": a.comparisons.iter().map(|s| json!({
            "name": s.name(),
            "factors": s.factors,
            "context": s.context.iter().map(|(f, l)| json!({ "factor": f, "level": l })).collect::<Value>(),
            "error_term": s.stratum,
            "mse": s.mse,
            "df": s.df_error,
            "n": s.n,
            "q_critical": s.q_critical,
            "hsd": s.hsd,
            "conservative": s.conservative,
            "levels": s.labels.iter().enumerate().map(|(i, l)| json!({
                "level": l,
                "mean": s.means[i],
                "group": s.letters[i],
            })).collect::<Value>(),
            "pairs": s.pairs.iter().map(|p| json!({
                "a": p.a,
                "b": p.b,
                "difference": p.difference,
                "significant": p.significant,
            })).collect::<Value>(),
        })).collect::<Value>(),
        "diagnostics": diagnostics_json(&a.diagnostics),
        "variance_components": a.variance_components.as_ref().map(|vc| {
            let props = vc.proportions();
            vc.components.iter().zip(props).map(|(c, p)| json!({
                "term": c.term,
                "kind": c.kind.as_str(),
                "estimate": c.raw,
                "variance": c.variance,
                "proportion": p,
            })).collect::<Value>()
        }),
        "blups": crate::tables::blup_tables(a).into_iter().map(blup_json).collect::<Value>(),
        "heritability": a.heritability.as_ref().map(|h| json!({
            "h2": h.h2,
            "genotypic_variance": h.genotypic_variance,
            "interaction_variance": h.interaction_variance,
            "residual_variance": h.residual_variance,
            "environments": h.n_env,
            "reps": h.n_rep,
        })),
        "stability": a.stability.as_ref().map(stability_json),
        "recommendation": recommendation_json(&a.recommendation),
        "notes": a.notes,
    })
}
