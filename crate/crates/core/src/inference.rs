//! Hierarchical interpretation: dominant effects, Tukey HSD and letter displays.

use crate::design::{DesignKind, Effect, Role, TermClass, ValidatedDesign, RESIDUAL};
use crate::dist;
use crate::engine::{AnovaTable, FittedModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EffectTest {
    pub effect: Effect,
    pub f: Option<f64>,
    pub p: Option<f64>,
    /// p ≤ α.
    pub significant: bool,
}

/// Tests of the interpretable (treatment) effects; blocks and error strata
/// are never candidates for interpretation.
pub fn effect_tests(design: &ValidatedDesign, anova: &AnovaTable, alpha: f64) -> Vec<EffectTest> {
    design
        .effects
        .effects
        .iter()
        .filter(|e| e.class == TermClass::Treatment)
        .filter_map(|e| {
            let row = anova.row(&e.label())?;
            Some(EffectTest {
                effect: e.clone(),
                f: row.f,
                p: row.p,
                significant: row.p.is_some_and(|p| p <= alpha),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExclusionReason {
    NotSignificant,
    /// Significant, but shares a factor with a dominant higher-order effect.
    SubsumedByInteraction,
    /// Significant, of lower order than the dominant set, and sharing no factor with it.
    BelowDominantOrder,
}

impl ExclusionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionReason::NotSignificant => "not_significant",
            ExclusionReason::SubsumedByInteraction => "subsumed_by_interaction",
            ExclusionReason::BelowDominantOrder => "below_dominant_order",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainMode {
    MainEffects,
    InteractionCombinations,
    None,
}

impl DomainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainMode::MainEffects => "main_effects",
            DomainMode::InteractionCombinations => "interaction_combinations",
            DomainMode::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleDomain {
    pub dominant: Vec<Effect>,
    pub excluded: Vec<(Effect, ExclusionReason)>,
    pub mode: DomainMode,
}

/// Dominant set: every significant effect whose order is the largest among
/// significant effects. All other effects are excluded with a reason.
pub fn dominant_effects(tests: &[EffectTest], alpha: f64) -> AdmissibleDomain {
    let sig = |t: &EffectTest| t.p.is_some_and(|p| p <= alpha);
    let max_order = tests
        .iter()
        .filter(|t| sig(t))
        .map(|t| t.effect.order())
        .max();
    let Some(max_order) = max_order else {
        return AdmissibleDomain {
            dominant: Vec::new(),
            excluded: tests
                .iter()
                .map(|t| (t.effect.clone(), ExclusionReason::NotSignificant))
                .collect(),
            mode: DomainMode::None,
        };
    };
    let dominant: Vec<Effect> = tests
        .iter()
        .filter(|t| sig(t) && t.effect.order() == max_order)
        .map(|t| t.effect.clone())
        .collect();
    let excluded = tests
        .iter()
        .filter(|t| !dominant.contains(&t.effect))
        .map(|t| {
            let reason = if !sig(t) {
                ExclusionReason::NotSignificant
            } else if dominant.iter().any(|d| d.shares_factor(&t.effect)) {
                ExclusionReason::SubsumedByInteraction
            } else {
                ExclusionReason::BelowDominantOrder
            };
            (t.effect.clone(), reason)
        })
        .collect();
    let mode = if max_order == 1 {
        DomainMode::MainEffects
    } else {
        DomainMode::InteractionCombinations
    };
    AdmissibleDomain {
        dominant,
        excluded,
        mode,
    }
}

/// Inputs of one family of pairwise comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonInput {
    /// Factors whose levels are being compared.
    pub factors: Vec<String>,
    /// Levels held fixed, for simple-effect comparisons.
    pub context: Vec<(String, String)>,
    pub labels: Vec<String>,
    pub means: Vec<f64>,
    /// Observations behind each mean.
    pub n: usize,
    pub mse: f64,
    pub df_error: usize,
    /// Error stratum supplying `mse`, or a description of the combination.
    pub stratum: String,
    /// Set when `mse` combines strata and `df_error` is approximate.
    pub conservative: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub a: String,
    pub b: String,
    /// mean(a) − mean(b).
    pub difference: f64,
    pub hsd: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSet {
    pub factors: Vec<String>,
    pub context: Vec<(String, String)>,
    pub labels: Vec<String>,
    pub means: Vec<f64>,
    pub n: usize,
    pub mse: f64,
    pub df_error: usize,
    pub stratum: String,
    pub conservative: bool,
    pub q_critical: f64,
    pub hsd: f64,
    pub pairs: Vec<Pair>,
    /// Letter string per label, aligned with `labels`.
    pub letters: Vec<String>,
    /// Members (indices into `labels`) of each letter group, in letter order.
    pub groups: Vec<Vec<usize>>,
}

impl ComparisonSet {
    /// Name such as `Nitrogen`, `Irrigation:Variety` or `Variety | Irrigation=Full`.
    pub fn name(&self) -> String {
        let base = self.factors.join(":");
        if self.context.is_empty() {
            base
        } else {
            let ctx: Vec<String> = self.context.iter().map(|(f, l)| format!("{f}={l}")).collect();
            format!("{base} | {}", ctx.join(","))
        }
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn significant(&self, a: usize, b: usize) -> bool {
        let (la, lb) = (&self.labels[a], &self.labels[b]);
        self.pairs
            .iter()
            .find(|p| (&p.a == la && &p.b == lb) || (&p.a == lb && &p.b == la))
            .is_some_and(|p| p.significant)
    }
}

/// Letter name of the i-th group: a–z, then A–Z, then numbered.
pub fn letter(i: usize) -> String {
    const LOWER: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
    const UPPER: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ";
    match i {
        0..=25 => (LOWER[i] as char).to_string(),
        26..=51 => (UPPER[i - 26] as char).to_string(),
        _ => format!("<{}>", i + 1),
    }
}

/// Compact letter display by insert-and-absorb.
///
/// `order` lists label indices from best to worst; `significant(i, j)` says
/// whether the pair differs. Returns the letter groups (as member lists) in
/// letter order: group "a" contains `order[0]`.
pub fn compact_letters<F: Fn(usize, usize) -> bool>(
    k: usize,
    order: &[usize],
    significant: F,
) -> Vec<Vec<usize>> {
    let mut columns: Vec<Vec<bool>> = vec![vec![true; k]];
    for (x, &i) in order.iter().enumerate() {
        for &j in &order[x + 1..] {
            if !significant(i, j) {
                continue;
            }
            let mut next = Vec::with_capacity(columns.len() + 1);
            for col in columns {
                if col[i] && col[j] {
                    let mut without_i = col.clone();
                    without_i[i] = false;
                    let mut without_j = col;
                    without_j[j] = false;
                    next.push(without_i);
                    next.push(without_j);
                } else {
                    next.push(col);
                }
            }
            columns = absorb(next);
        }
    }
    let rank: Vec<usize> = {
        let mut r = vec![0; k];
        for (pos, &i) in order.iter().enumerate() {
            r[i] = pos;
        }
        r
    };
    let mut groups: Vec<Vec<usize>> = columns
        .into_iter()
        .map(|c| {
            let mut members: Vec<usize> = (0..k).filter(|&i| c[i]).collect();
            members.sort_by_key(|&i| rank[i]);
            members
        })
        .collect();
    groups.sort_by(|a, b| {
        let ra: Vec<usize> = a.iter().map(|&i| rank[i]).collect();
        let rb: Vec<usize> = b.iter().map(|&i| rank[i]).collect();
        ra.cmp(&rb)
    });
    groups
}

/// Drops empty columns, duplicates and columns contained in another column.
fn absorb(columns: Vec<Vec<bool>>) -> Vec<Vec<bool>> {
    let subset = |a: &[bool], b: &[bool]| a.iter().zip(b).all(|(&x, &y)| !x || y);
    let mut keep: Vec<Vec<bool>> = Vec::new();
    for (idx, c) in columns.iter().enumerate() {
        if !c.iter().any(|&v| v) {
            continue;
        }
        let dominated = columns.iter().enumerate().any(|(o, other)| {
            o != idx && subset(c, other) && (c != other || o < idx)
        });
        if !dominated {
            keep.push(c.clone());
        }
    }
    keep
}

fn descending_order(means: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
    order
}

/// All-pairs Tukey HSD comparison with a compact letter display.
///
/// With mse = 0 the critical difference is 0, so every pair of distinct
/// means is significant.
pub fn tukey_hsd(input: ComparisonInput, alpha: f64) -> Result<ComparisonSet> {
    let k = input.labels.len();
    if k < 2 || input.means.len() != k {
        return Err(Error::InsufficientGroups(format!(
            "a comparison needs at least 2 means, got {k}"
        )));
    }
    if input.n == 0 || input.df_error == 0 {
        return Err(Error::Domain("comparison needs n > 0 and df > 0".into()));
    }
    let q_critical = dist::studentized_range_quantile(alpha, k, input.df_error as f64)?;
    let mse = input.mse.max(0.0);
    let hsd = q_critical * (mse / input.n as f64).sqrt();
    let scale = input.means.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tie = 1e-12 * scale.max(1.0);
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    let mut sig = vec![vec![false; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let difference = input.means[i] - input.means[j];
            let significant = difference.abs() > hsd && difference.abs() > tie;
            sig[i][j] = significant;
            sig[j][i] = significant;
            pairs.push(Pair {
                a: input.labels[i].clone(),
                b: input.labels[j].clone(),
                difference,
                hsd,
                significant,
            });
        }
    }
    let order = descending_order(&input.means);
    let groups = compact_letters(k, &order, |i, j| sig[i][j]);
    let letters = (0..k)
        .map(|i| {
            groups
                .iter()
                .enumerate()
                .filter(|(_, g)| g.contains(&i))
                .map(|(gi, _)| letter(gi))
                .collect::<String>()
        })
        .collect();
    Ok(ComparisonSet {
        factors: input.factors,
        context: input.context,
        labels: input.labels,
        means: input.means,
        n: input.n,
        mse: input.mse,
        df_error: input.df_error,
        stratum: input.stratum,
        conservative: input.conservative,
        q_critical,
        hsd,
        pairs,
        letters,
        groups,
    })
}

/// Satterthwaite combination ((b−1)·E_b + E_a)/b of the sub-plot and
/// whole-plot error mean squares, used for comparisons across whole plots.
pub fn combined_split_plot_error(e_a: f64, df_a: usize, e_b: f64, df_b: usize, b: usize) -> (f64, usize) {
    let bf = b as f64;
    let part_b = (bf - 1.0) * e_b;
    let mse = (part_b + e_a) / bf;
    let denom = part_b * part_b / df_b as f64 + e_a * e_a / df_a as f64;
    let df = if denom > 0.0 {
        ((part_b + e_a).powi(2) / denom).floor().max(1.0) as usize
    } else {
        df_b
    };
    (mse, df)
}

struct ErrorTerm {
    mse: f64,
    df: usize,
    stratum: String,
    conservative: bool,
}

fn error_for(
    design: &ValidatedDesign,
    anova: &AnovaTable,
    effect: &Effect,
    varying: &[String],
) -> Result<ErrorTerm> {
    if design.spec.kind == DesignKind::SplitPlot && effect.order() > 1 {
        let whole = &design.spec.whole_plot_factor().expect("checked").name;
        if varying.contains(whole) {
            let wp = &design.effects.strata[0].label;
            let (e_a, df_a) = anova.stratum_error(wp).expect("whole-plot stratum");
            let (e_b, df_b) = anova.stratum_error(RESIDUAL).expect("residual");
            let b = design.n_levels(&design.spec.sub_plot_factor().expect("checked").name);
            let (mse, df) = combined_split_plot_error(e_a, df_a, e_b, df_b, b);
            return Ok(ErrorTerm {
                mse,
                df,
                stratum: format!("combined({wp},{RESIDUAL})"),
                conservative: true,
            });
        }
    }
    let (mse, df) = anova
        .stratum_error(&effect.denominator)
        .ok_or_else(|| Error::Constraint(format!("no stratum `{}`", effect.denominator)))?;
    Ok(ErrorTerm {
        mse,
        df,
        stratum: effect.denominator.clone(),
        conservative: false,
    })
}

fn unflatten(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for j in (0..dims.len()).rev() {
        out[j] = index % dims[j];
        index /= dims[j];
    }
    out
}

/// Comparison families admitted by the dominant set.
///
/// Main-effect mode: one family per dominant main effect over its marginal
/// means. Interaction mode: per dominant interaction, the full set of cell
/// combinations followed by the simple effects of each constituent factor
/// within every level combination of the others. Families that would only
/// compare levels of random factors are not formed.
pub fn admissible_comparisons(
    domain: &AdmissibleDomain,
    model: &FittedModel,
    anova: &AnovaTable,
    design: &ValidatedDesign,
    alpha: f64,
) -> Result<Vec<ComparisonSet>> {
    let is_random = |f: &String| {
        design
            .spec
            .treatment_factors
            .iter()
            .any(|d| &d.name == f && d.role == Role::Random)
    };
    let mut out = Vec::new();
    for eff in &domain.dominant {
        let factors = eff.factors.clone();
        // levels of a random factor are a sample, not candidates to compare
        if factors.iter().all(is_random) {
            continue;
        }
        let labels = model.combination_labels(&factors)?;
        let means = model.marginal_means(&factors)?;
        let n = model.per_level_n(&factors)?;
        let err = error_for(design, anova, eff, &factors)?;
        out.push(tukey_hsd(
            ComparisonInput {
                factors: factors.clone(),
                context: Vec::new(),
                labels,
                means: means.clone(),
                n,
                mse: err.mse,
                df_error: err.df,
                stratum: err.stratum,
                conservative: err.conservative,
            },
            alpha,
        )?);
        if eff.order() < 2 {
            continue;
        }
        let dims: Vec<usize> = factors.iter().map(|f| design.n_levels(f)).collect();
        for (fi, f) in factors.iter().enumerate() {
            if is_random(f) {
                continue;
            }
            let others: Vec<usize> = (0..factors.len()).filter(|&j| j != fi).collect();
            let other_dims: Vec<usize> = others.iter().map(|&j| dims[j]).collect();
            let n_ctx: usize = other_dims.iter().product();
            let err = error_for(design, anova, eff, std::slice::from_ref(f))?;
            for c in 0..n_ctx {
                let ctx_levels = unflatten(c, &other_dims);
                let mut labels = Vec::new();
                let mut sub_means = Vec::new();
                for lf in 0..dims[fi] {
                    let mut full = vec![0; factors.len()];
                    full[fi] = lf;
                    for (o, &j) in others.iter().enumerate() {
                        full[j] = ctx_levels[o];
                    }
                    let flat = full.iter().zip(&dims).fold(0, |acc, (&l, &d)| acc * d + l);
                    labels.push(design.levels(f).expect("validated")[lf].clone());
                    sub_means.push(means[flat]);
                }
                let context = others
                    .iter()
                    .zip(&ctx_levels)
                    .map(|(&j, &l)| {
                        (
                            factors[j].clone(),
                            design.levels(&factors[j]).expect("validated")[l].clone(),
                        )
                    })
                    .collect();
                out.push(tukey_hsd(
                    ComparisonInput {
                        factors: vec![f.clone()],
                        context,
                        labels,
                        means: sub_means,
                        n,
                        mse: err.mse,
                        df_error: err.df,
                        stratum: err.stratum.clone(),
                        conservative: err.conservative,
                    },
                    alpha,
                )?);
            }
        }
    }
    Ok(out)
}
