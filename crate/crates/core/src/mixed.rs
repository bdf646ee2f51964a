//! Variance components by expected mean squares, BLUPs and heritability.
//!
//! For balanced data the ANOVA (EMS) estimators coincide with REML as long
//! as no estimate hits the boundary; negative raw estimates are clamped to
//! zero and reported.

use crate::design::{DesignKind, Role, TermClass, ValidatedDesign};
use crate::engine::{AnovaTable, FittedModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentKind {
    Genotype,
    Environment,
    Interaction,
    Block,
    WholePlotError,
    Random,
    Residual,
}

impl ComponentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ComponentKind::Genotype => "genotype",
            ComponentKind::Environment => "environment",
            ComponentKind::Interaction => "interaction",
            ComponentKind::Block => "block",
            ComponentKind::WholePlotError => "whole_plot_error",
            ComponentKind::Random => "random",
            ComponentKind::Residual => "residual",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceComponent {
    pub term: String,
    pub kind: ComponentKind,
    /// The unclamped EMS estimate.
    pub raw: f64,
    /// max(raw, 0).
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceComponents {
    pub components: Vec<VarianceComponent>,
    /// Terms whose raw estimate was negative.
    pub clamped: Vec<String>,
}

impl VarianceComponents {
    fn from_raw(items: Vec<(String, ComponentKind, f64)>) -> Self {
        let mut clamped = Vec::new();
        let components = items
            .into_iter()
            .map(|(term, kind, raw)| {
                if raw < 0.0 {
                    clamped.push(term.clone());
                }
                VarianceComponent {
                    term,
                    kind,
                    raw,
                    variance: raw.max(0.0),
                }
            })
            .collect();
        VarianceComponents {
            components,
            clamped,
        }
    }

    pub fn get(&self, term: &str) -> Option<f64> {
        self.components
            .iter()
            .find(|c| c.term == term)
            .map(|c| c.variance)
    }

    pub fn of_kind(&self, kind: ComponentKind) -> Option<f64> {
        self.components
            .iter()
            .find(|c| c.kind == kind)
            .map(|c| c.variance)
    }

    pub fn residual(&self) -> f64 {
        self.of_kind(ComponentKind::Residual).unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.components.iter().map(|c| c.variance).sum()
    }

    /// Share of the summed variance attributable to each component.
    pub fn proportions(&self) -> Vec<f64> {
        let t = self.total();
        self.components
            .iter()
            .map(|c| if t > 0.0 { c.variance / t } else { 0.0 })
            .collect()
    }
}

/// EMS estimate for an additive random term: (MS_term − MS_error) / obs per level.
pub fn random_term_variance(ms_term: f64, ms_error: f64, obs_per_level: f64) -> f64 {
    (ms_term - ms_error) / obs_per_level
}

/// Components of a genotype × environment trial with g genotypes, e
/// environments and r replicates, from the four mean squares.
pub fn met_components(
    ms_genotype: f64,
    ms_environment: f64,
    ms_interaction: f64,
    ms_residual: f64,
    g: usize,
    e: usize,
    r: usize,
) -> VarianceComponents {
    let (g, e, r) = (g as f64, e as f64, r as f64);
    VarianceComponents::from_raw(vec![
        (
            "Genotype".into(),
            ComponentKind::Genotype,
            (ms_genotype - ms_interaction) / (r * e),
        ),
        (
            "Environment".into(),
            ComponentKind::Environment,
            (ms_environment - ms_interaction) / (r * g),
        ),
        (
            "Genotype:Environment".into(),
            ComponentKind::Interaction,
            (ms_interaction - ms_residual) / r,
        ),
        ("Residual".into(), ComponentKind::Residual, ms_residual),
    ])
}

fn ms(anova: &AnovaTable, source: &str) -> Result<f64> {
    anova
        .row(source)
        .map(|r| r.ms)
        .ok_or_else(|| Error::Constraint(format!("ANOVA table has no `{source}` row")))
}

/// Estimates the random-effect variances of a design.
pub fn estimate_components(anova: &AnovaTable, design: &ValidatedDesign) -> Result<VarianceComponents> {
    if !design.spec.has_random() {
        return Err(Error::NotApplicable(
            "the design declares no random factors".into(),
        ));
    }
    let ms_e = anova.residual().ms;
    let n = design.n as f64;
    match design.spec.kind {
        DesignKind::Met => {
            let gname = &design.spec.treatment_factors[0].name;
            let ename = &design.spec.treatment_factors[1].name;
            let mut vc = met_components(
                ms(anova, gname)?,
                ms(anova, ename)?,
                ms(anova, &format!("{gname}:{ename}"))?,
                ms_e,
                design.n_levels(gname),
                design.n_levels(ename),
                design.reps,
            );
            vc.components[0].term = gname.clone();
            vc.components[1].term = ename.clone();
            vc.components[2].term = format!("{gname}:{ename}");
            vc.clamped = vc
                .components
                .iter()
                .filter(|c| c.raw < 0.0)
                .map(|c| c.term.clone())
                .collect();
            Ok(vc)
        }
        DesignKind::SplitPlot => {
            let blk = design.spec.block_factor.as_ref().expect("checked");
            let wp = design
                .effects
                .effects
                .iter()
                .find(|e| e.class == TermClass::WholePlotError)
                .expect("compiled");
            let wp_label = wp.label();
            let ms_wp = ms(anova, &wp_label)?;
            let per_plot = n / (design.n_levels(&blk.name) * design.n_levels(&wp.factors[1])) as f64;
            let per_block = n / design.n_levels(&blk.name) as f64;
            Ok(VarianceComponents::from_raw(vec![
                (
                    blk.name.clone(),
                    ComponentKind::Block,
                    random_term_variance(ms(anova, &blk.name)?, ms_wp, per_block),
                ),
                (
                    wp_label,
                    ComponentKind::WholePlotError,
                    random_term_variance(ms_wp, ms_e, per_plot),
                ),
                ("Residual".into(), ComponentKind::Residual, ms_e),
            ]))
        }
        _ => {
            let mut items = Vec::new();
            for eff in &design.effects.effects {
                if !matches!(eff.class, TermClass::Random | TermClass::Block) || eff.role != Role::Random {
                    continue;
                }
                let label = eff.label();
                let per_level = n / design.n_levels(&eff.factors[0]) as f64;
                let kind = if eff.class == TermClass::Block {
                    ComponentKind::Block
                } else {
                    ComponentKind::Random
                };
                items.push((label.clone(), kind, random_term_variance(ms(anova, &label)?, ms_e, per_level)));
            }
            items.push(("Residual".into(), ComponentKind::Residual, ms_e));
            Ok(VarianceComponents::from_raw(items))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlupEntry {
    pub level: String,
    pub n: usize,
    pub raw_mean: f64,
    /// Centered, shrunken effect û.
    pub effect: f64,
    /// Grand mean plus û.
    pub predicted_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlupTable {
    /// Effect label of the predicted term.
    pub target: String,
    pub grand_mean: f64,
    /// Common shrinkage factor λ in [0, 1].
    pub shrinkage: f64,
    /// Sorted by descending predicted mean.
    pub entries: Vec<BlupEntry>,
}

fn shrink(model: &FittedModel, factors: &[String], lambda: f64) -> Result<BlupTable> {
    let means = model.marginal_means(factors)?;
    let labels = model.combination_labels(factors)?;
    let n = model.per_level_n(factors)?;
    let mut entries: Vec<BlupEntry> = labels
        .into_iter()
        .zip(means)
        .map(|(level, m)| {
            let effect = lambda * (m - model.grand_mean);
            BlupEntry {
                level,
                n,
                raw_mean: m,
                effect,
                predicted_mean: model.grand_mean + effect,
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        b.predicted_mean
            .total_cmp(&a.predicted_mean)
            .then(b.raw_mean.total_cmp(&a.raw_mean))
    });
    Ok(BlupTable {
        target: factors.join(":"),
        grand_mean: model.grand_mean,
        shrinkage: lambda,
        entries,
    })
}

/// Shrinkage factor σ²_g / (σ²_g + error variance of a level mean).
pub fn shrinkage_factor(sigma2_target: f64, sigma2_mean_error: f64) -> Result<f64> {
    let total = sigma2_target + sigma2_mean_error;
    if total <= 0.0 {
        return Err(Error::DegenerateShrinkage);
    }
    Ok((sigma2_target / total).clamp(0.0, 1.0))
}

/// Predictions for the design's target term.
///
/// In a multi-environment trial the target is the genotype and its deviations
/// are shrunk by σ²_G / (σ²_G + σ²_GE/e + σ²_ε/(re)). In a mixed design the
/// target is the fixed treatment (combination); fixed effects are not shrunk,
/// so predicted means equal the adjusted treatment means.
pub fn blups(vc: &VarianceComponents, model: &FittedModel, design: &ValidatedDesign) -> Result<BlupTable> {
    match design.spec.kind {
        DesignKind::Met => {
            let gname = design.spec.treatment_factors[0].name.clone();
            let e = design.n_levels(&design.spec.treatment_factors[1].name) as f64;
            let r = design.reps as f64;
            let s2g = vc.of_kind(ComponentKind::Genotype).unwrap_or(0.0);
            let s2ge = vc.of_kind(ComponentKind::Interaction).unwrap_or(0.0);
            let lambda = shrinkage_factor(s2g, s2ge / e + vc.residual() / (r * e))?;
            shrink(model, &[gname], lambda)
        }
        DesignKind::Mixed => {
            let fixed: Vec<String> = design
                .spec
                .treatment_factors
                .iter()
                .filter(|f| f.role == Role::Fixed)
                .map(|f| f.name.clone())
                .collect();
            shrink(model, &fixed, 1.0)
        }
        _ => Err(Error::NotApplicable(format!(
            "BLUPs are produced for mixed and met designs, not {}",
            design.spec.kind
        ))),
    }
}

/// Shrunken predictions of every additive random term of a mixed design.
pub fn random_effect_blups(
    vc: &VarianceComponents,
    model: &FittedModel,
    design: &ValidatedDesign,
) -> Result<Vec<BlupTable>> {
    if design.spec.kind != DesignKind::Mixed {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for c in &vc.components {
        if !matches!(c.kind, ComponentKind::Block | ComponentKind::Random) {
            continue;
        }
        let per_level = model.per_level_n(std::slice::from_ref(&c.term))? as f64;
        let lambda = shrinkage_factor(c.variance, vc.residual() / per_level).unwrap_or(0.0);
        out.push(shrink(model, std::slice::from_ref(&c.term), lambda)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeritabilityEstimate {
    pub h2: f64,
    pub genotypic_variance: f64,
    pub interaction_variance: f64,
    pub residual_variance: f64,
    pub n_env: usize,
    pub n_rep: usize,
}

/// Broad-sense heritability on an entry-mean basis:
/// H² = σ²_G / (σ²_G + σ²_GE/e + σ²_ε/(r·e)); zero when every component is zero.
pub fn heritability(vc: &VarianceComponents, n_env: usize, n_rep: usize) -> Result<HeritabilityEstimate> {
    let g = vc.of_kind(ComponentKind::Genotype).ok_or_else(|| {
        Error::NotApplicable("heritability needs a genotypic variance component".into())
    })?;
    if n_env == 0 || n_rep == 0 {
        return Err(Error::Domain("n_env and n_rep must be positive".into()));
    }
    let ge = vc.of_kind(ComponentKind::Interaction).unwrap_or(0.0);
    let e = vc.residual();
    let denom = g + ge / n_env as f64 + e / (n_env * n_rep) as f64;
    let h2 = if denom > 0.0 { (g / denom).clamp(0.0, 1.0) } else { 0.0 };
    Ok(HeritabilityEstimate {
        h2,
        genotypic_variance: g,
        interaction_variance: ge,
        residual_variance: e,
        n_env,
        n_rep,
    })
}
