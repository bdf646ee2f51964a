//! Turns admissible comparisons, predictions and stability results into a
//! recommendation: a set of statistically equivalent best treatments.

use crate::diagnostics::DiagnosticReport;
use crate::inference::{AdmissibleDomain, ComparisonSet, DomainMode};
use crate::mixed::BlupTable;
use crate::stability::StabilityResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Global,
    PerEnvironment,
    PerCombination,
    None,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Global => "global",
            Scope::PerEnvironment => "per_environment",
            Scope::PerCombination => "per_combination",
            Scope::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankingBasis {
    MarginalMeans,
    CellMeans,
    PredictedMeans,
}

impl RankingBasis {
    pub fn as_str(self) -> &'static str {
        match self {
            RankingBasis::MarginalMeans => "marginal_means",
            RankingBasis::CellMeans => "cell_means",
            RankingBasis::PredictedMeans => "predicted_means",
        }
    }

    fn noun(self) -> &'static str {
        match self {
            RankingBasis::MarginalMeans => "marginal mean",
            RankingBasis::CellMeans => "cell mean",
            RankingBasis::PredictedMeans => "predicted mean",
        }
    }
}

/// Best group within one comparison family.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextGroup {
    /// Comparison family name, e.g. `Variety | Irrigation=Full`.
    pub context: String,
    pub top_group: Vec<String>,
    /// Levels with their means, best first.
    pub ranking: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub scope: Scope,
    /// Statistically equivalent best treatments, best first.
    pub top_group: Vec<String>,
    pub ranking_basis: RankingBasis,
    /// Ranking behind `top_group`, best first (empty when several effects combine).
    pub ranking: Vec<(String, f64)>,
    pub per_context: Vec<ContextGroup>,
    pub validity_caveats: Vec<String>,
    pub narrative: String,
    pub minimize: bool,
}

/// Summary of a multi-environment trial's interaction test.
#[derive(Debug, Clone, Copy)]
pub struct GxeSummary<'a> {
    pub genotype: &'a str,
    pub environment: &'a str,
    pub interaction_significant: bool,
    pub stability: Option<&'a StabilityResult>,
}

#[derive(Debug, Clone, Copy)]
pub struct DecisionInputs<'a> {
    pub response: &'a str,
    pub alpha: f64,
    pub domain: &'a AdmissibleDomain,
    pub comparisons: &'a [ComparisonSet],
    pub blups: Option<&'a BlupTable>,
    /// Ranks on predicted means (designs with random terms).
    pub predicted: bool,
    pub gxe: Option<GxeSummary<'a>>,
    pub diagnostics: &'a DiagnosticReport,
    pub minimize: bool,
}

fn better(a: f64, b: f64, minimize: bool) -> bool {
    if minimize {
        a < b
    } else {
        a > b
    }
}

fn best_index(means: &[f64], minimize: bool) -> usize {
    let mut best = 0;
    for (i, &m) in means.iter().enumerate() {
        if better(m, means[best], minimize) {
            best = i;
        }
    }
    best
}

fn ranking_of(labels: &[String], values: &[f64], minimize: bool) -> Vec<(String, f64)> {
    let mut r: Vec<(String, f64)> = labels.iter().cloned().zip(values.iter().copied()).collect();
    r.sort_by(|a, b| {
        let o = b.1.total_cmp(&a.1);
        if minimize {
            o.reverse()
        } else {
            o
        }
    });
    r
}

/// Members of the first letter group holding the best mean, best first.
pub fn top_group(set: &ComparisonSet, minimize: bool) -> Vec<String> {
    let best = best_index(&set.means, minimize);
    let group = set
        .groups
        .iter()
        .find(|g| g.contains(&best))
        .cloned()
        .unwrap_or_else(|| vec![best]);
    let labels: Vec<String> = group.iter().map(|&i| set.labels[i].clone()).collect();
    let means: Vec<f64> = group.iter().map(|&i| set.means[i]).collect();
    ranking_of(&labels, &means, minimize)
        .into_iter()
        .map(|(l, _)| l)
        .collect()
}

fn context_group(set: &ComparisonSet, minimize: bool) -> ContextGroup {
    ContextGroup {
        context: set.name(),
        top_group: top_group(set, minimize),
        ranking: ranking_of(&set.labels, &set.means, minimize),
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

fn cartesian(groups: &[Vec<String>]) -> Vec<String> {
    groups.iter().fold(vec![String::new()], |acc, g| {
        acc.iter()
            .flat_map(|prefix| {
                g.iter().map(move |l| {
                    if prefix.is_empty() {
                        l.clone()
                    } else {
                        format!("{prefix}:{l}")
                    }
                })
            })
            .collect()
    })
}

/// The decision function. Pure: identical inputs give an identical
/// recommendation, and the diagnostics only contribute caveats.
pub fn decide(inp: &DecisionInputs) -> Recommendation {
    let caveats = inp.diagnostics.caveats();
    let mut rec = Recommendation {
        scope: Scope::None,
        top_group: Vec::new(),
        ranking_basis: if inp.predicted {
            RankingBasis::PredictedMeans
        } else {
            RankingBasis::MarginalMeans
        },
        ranking: Vec::new(),
        per_context: Vec::new(),
        validity_caveats: caveats,
        narrative: String::new(),
        minimize: inp.minimize,
    };
    let extreme = if inp.minimize { "lowest" } else { "highest" };
    let mut text = String::new();

    if inp.domain.mode == DomainMode::None {
        text.push_str(&format!(
            "There are no significant treatment effects on {} at alpha = {}; the treatments cannot be distinguished and no treatment is recommended over the others.",
            inp.response,
            fmt(inp.alpha)
        ));
    } else if let Some(gxe) = inp.gxe {
        decide_met(inp, gxe, &mut rec, &mut text, extreme);
    } else {
        decide_fixed(inp, &mut rec, &mut text, extreme);
    }

    if rec.validity_caveats.is_empty() {
        text.push_str(&format!(
            " No model assumption was rejected at alpha_v = {}.",
            fmt(inp.diagnostics.alpha_v)
        ));
    } else {
        text.push_str(" These conclusions are conditional on the model assumptions: ");
        text.push_str(&rec.validity_caveats.join("; "));
        text.push('.');
    }
    rec.narrative = text;
    rec
}

fn primary_sets<'a>(inp: &DecisionInputs<'a>) -> Vec<&'a ComparisonSet> {
    inp.domain
        .dominant
        .iter()
        .filter_map(|e| {
            inp.comparisons
                .iter()
                .find(|c| c.context.is_empty() && c.factors == e.factors)
        })
        .collect()
}

fn decide_fixed(inp: &DecisionInputs, rec: &mut Recommendation, text: &mut String, extreme: &str) {
    let sets = primary_sets(inp);
    if sets.is_empty() {
        return;
    }
    let interaction = inp.domain.mode == DomainMode::InteractionCombinations;
    rec.scope = if interaction {
        Scope::PerCombination
    } else {
        Scope::Global
    };
    if interaction && !inp.predicted {
        rec.ranking_basis = RankingBasis::CellMeans;
    }
    let noun = rec.ranking_basis.noun();
    let groups: Vec<Vec<String>> = sets.iter().map(|s| top_group(s, inp.minimize)).collect();
    rec.top_group = cartesian(&groups);
    if sets.len() == 1 {
        let set = sets[0];
        rec.ranking = match (inp.predicted, inp.blups) {
            (true, Some(b)) if b.target == set.factors.join(":") => {
                let labels: Vec<String> = b.entries.iter().map(|e| e.level.clone()).collect();
                let vals: Vec<f64> = b.entries.iter().map(|e| e.predicted_mean).collect();
                ranking_of(&labels, &vals, inp.minimize)
            }
            _ => ranking_of(&set.labels, &set.means, inp.minimize),
        };
    }
    let lead = if interaction {
        let effects: Vec<String> = sets.iter().map(|s| s.factors.join(":")).collect();
        format!(
            "The {} interaction on {} is significant, so treatments are ranked within factor combinations rather than on marginal means.",
            effects.join(", "),
            inp.response
        )
    } else {
        let effects: Vec<String> = sets.iter().map(|s| s.factors.join(":")).collect();
        format!(
            "{} {} a significant effect on {} with no significant interaction, so treatments are ranked on {}s.",
            effects.join(" and "),
            if effects.len() == 1 { "has" } else { "have" },
            inp.response,
            noun
        )
    };
    text.push_str(&lead);
    for (set, group) in sets.iter().zip(&groups) {
        let best = &group[0];
        let v = set.means[set.index_of(best).expect("member")];
        text.push_str(&format!(
            " For {}, the statistically equivalent best group is {{{}}}; {} has the {} {} ({}).",
            set.factors.join(":"),
            group.join(", "),
            best,
            extreme,
            noun,
            fmt(v)
        ));
    }
    if sets.len() > 1 {
        text.push_str(&format!(
            " Combining the factors, the recommended set is {{{}}}.",
            rec.top_group.join(", ")
        ));
        rec.per_context = sets.iter().map(|s| context_group(s, inp.minimize)).collect();
    }
    if interaction {
        rec.per_context.extend(
            inp.comparisons
                .iter()
                .filter(|c| !c.context.is_empty())
                .map(|c| context_group(c, inp.minimize)),
        );
        let within: Vec<String> = rec
            .per_context
            .iter()
            .map(|c| format!("{}: {{{}}}", c.context, c.top_group.join(", ")))
            .collect();
        if !within.is_empty() {
            text.push_str(&format!(" Best within each context: {}.", within.join("; ")));
        }
    }
    text.push_str(&format!(
        " Levels sharing a letter do not differ significantly (Tukey HSD, alpha = {}).",
        fmt(inp.alpha)
    ));
}

fn decide_met(inp: &DecisionInputs, gxe: GxeSummary, rec: &mut Recommendation, text: &mut String, extreme: &str) {
    let geno = gxe.genotype.to_string();
    if gxe.interaction_significant {
        rec.scope = Scope::PerEnvironment;
        rec.ranking_basis = RankingBasis::CellMeans;
        let full = inp
            .comparisons
            .iter()
            .find(|c| c.context.is_empty() && c.factors.len() == 2 && c.factors.contains(&geno));
        if let Some(full) = full {
            rec.top_group = top_group(full, inp.minimize);
            rec.ranking = ranking_of(&full.labels, &full.means, inp.minimize);
        }
        rec.per_context = inp
            .comparisons
            .iter()
            .filter(|c| c.factors == [geno.clone()] && !c.context.is_empty())
            .map(|c| context_group(c, inp.minimize))
            .collect();
        if rec.top_group.is_empty() {
            rec.top_group = rec
                .per_context
                .iter()
                .filter_map(|c| c.top_group.first().cloned())
                .collect();
            rec.top_group.dedup();
        }
        text.push_str(&format!(
            "The {}-by-{} interaction on {} is significant, so genotype rankings change across environments and recommendations are environment-specific (specific adaptation).",
            gxe.genotype, gxe.environment, inp.response
        ));
        let within: Vec<String> = rec
            .per_context
            .iter()
            .map(|c| format!("{}: {{{}}}", c.context, c.top_group.join(", ")))
            .collect();
        if !within.is_empty() {
            text.push_str(&format!(" Best genotypes per environment: {}.", within.join("; ")));
        }
        text.push_str(&format!(
            " Genotypes sharing a letter within an environment do not differ significantly (Tukey HSD, alpha = {}).",
            fmt(inp.alpha)
        ));
        return;
    }

    rec.scope = Scope::Global;
    rec.ranking_basis = RankingBasis::PredictedMeans;
    let set = inp
        .comparisons
        .iter()
        .find(|c| c.context.is_empty() && c.factors == [geno.clone()]);
    let (labels, values) = match inp.blups {
        Some(b) => (
            b.entries.iter().map(|e| e.level.clone()).collect::<Vec<_>>(),
            b.entries.iter().map(|e| e.predicted_mean).collect::<Vec<_>>(),
        ),
        None => match set {
            Some(s) => (s.labels.clone(), s.means.clone()),
            None => (Vec::new(), Vec::new()),
        },
    };
    rec.ranking = ranking_of(&labels, &values, inp.minimize);
    text.push_str(&format!(
        "The {}-by-{} interaction on {} is not significant, so the genotype ranking on predicted means (BLUPs) holds across environments, consistent with wide adaptation.",
        gxe.genotype, gxe.environment, inp.response
    ));
    match set {
        Some(s) => {
            rec.top_group = top_group(s, inp.minimize);
            let best = &rec.top_group[0];
            let v = rec
                .ranking
                .iter()
                .find(|(l, _)| l == best)
                .map_or(s.means[s.index_of(best).expect("member")], |(_, v)| *v);
            text.push_str(&format!(
                " The statistically equivalent best group is {{{}}}; {} has the {} predicted mean ({}). Genotypes sharing a letter do not differ significantly (Tukey HSD, alpha = {}).",
                rec.top_group.join(", "),
                best,
                extreme,
                fmt(v),
                fmt(inp.alpha)
            ));
        }
        None => {
            rec.top_group = rec.ranking.iter().map(|(l, _)| l.clone()).collect();
            text.push_str(&format!(
                " Genotype differences are not significant, so all genotypes are statistically equivalent: {{{}}}.",
                rec.top_group.join(", ")
            ));
        }
    }
    if let Some(st) = gxe.stability {
        if let Some(first) = st.gge.variance_explained.first() {
            text.push_str(&format!(
                " The first GGE axis carries {:.1}% of the genotype plus interaction variation.",
                100.0 * first
            ));
        }
    }
}
