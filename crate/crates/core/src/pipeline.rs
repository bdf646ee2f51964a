//! End-to-end analysis: model construction, then admissible inference,
//! assumption checks and the recommendation.

use crate::data::{partition, Dataset};
use crate::decision::{decide, DecisionInputs, GxeSummary, Recommendation};
use crate::design::{validate_against_data, DesignKind, DesignSpec, ValidatedDesign};
use crate::diagnostics::{diagnose, DiagnosticReport};
use crate::engine::{anova, fit, AnovaTable, FittedModel};
use crate::error::{Error, Result};
use crate::inference::{
    admissible_comparisons, dominant_effects, effect_tests, AdmissibleDomain, ComparisonSet, DomainMode,
    EffectTest,
};
use crate::mixed::{
    blups, estimate_components, heritability, random_effect_blups, BlupTable, HeritabilityEstimate,
    VarianceComponents,
};
use crate::stability::{stability, GeMatrix, StabilityResult};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AnalysisOptions {
    /// Overrides the design's significance level.
    pub alpha: Option<f64>,
    /// Overrides the design's assumption-check level.
    pub alpha_v: Option<f64>,
    /// Smaller responses are better (e.g. disease severity).
    pub minimize: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub design: ValidatedDesign,
    pub model: FittedModel,
    pub anova: AnovaTable,
    pub tests: Vec<EffectTest>,
    pub domain: AdmissibleDomain,
    pub comparisons: Vec<ComparisonSet>,
    pub diagnostics: DiagnosticReport,
    pub variance_components: Option<VarianceComponents>,
    pub blups: Option<BlupTable>,
    pub random_blups: Vec<BlupTable>,
    pub heritability: Option<HeritabilityEstimate>,
    pub stability: Option<StabilityResult>,
    /// Parts of the analysis that were skipped, with the reason.
    pub notes: Vec<String>,
    pub recommendation: Recommendation,
}

impl Analysis {
    pub fn alpha(&self) -> f64 {
        self.design.spec.alpha
    }

    pub fn alpha_v(&self) -> f64 {
        self.design.spec.alpha_v
    }
}

fn check_level(name: &str, v: f64) -> Result<()> {
    if !(0.0..1.0).contains(&v) || v.is_nan() {
        return Err(Error::Domain(format!("{name} must lie in [0, 1), got {v}")));
    }
    Ok(())
}

/// Runs the whole analysis of one balanced dataset.
pub fn analyze(spec: &DesignSpec, data: &Dataset, options: &AnalysisOptions) -> Result<Analysis> {
    let mut spec = spec.clone();
    if let Some(a) = options.alpha {
        spec.alpha = a;
    }
    if let Some(a) = options.alpha_v {
        spec.alpha_v = a;
    }
    check_level("alpha", spec.alpha)?;
    check_level("alpha_v", spec.alpha_v)?;
    if spec.alpha <= 0.0 {
        return Err(Error::Domain("alpha must be positive".into()));
    }
    let design = validate_against_data(&spec, data)?;
    let model = fit(&design, data)?;
    let table = anova(&design, &model)?;
    let alpha = spec.alpha;

    let tests = effect_tests(&design, &table, alpha);
    let domain = dominant_effects(&tests, alpha);
    let comparisons = if domain.mode == DomainMode::None {
        Vec::new()
    } else {
        admissible_comparisons(&domain, &model, &table, &design, alpha)?
    };
    let diagnostics = diagnose(&model, &design, &domain, spec.alpha_v)?;

    let mut notes = Vec::new();
    let mut variance_components = None;
    let mut blup_table = None;
    let mut random_blups = Vec::new();
    let mut h2 = None;
    if spec.has_random() {
        let vc = estimate_components(&table, &design)?;
        if matches!(spec.kind, DesignKind::Mixed | DesignKind::Met) {
            match blups(&vc, &model, &design) {
                Ok(b) => blup_table = Some(b),
                Err(e) => notes.push(format!("BLUPs skipped: {e}")),
            }
        }
        random_blups = random_effect_blups(&vc, &model, &design)?;
        if spec.kind == DesignKind::Met {
            let e = design.n_levels(&spec.treatment_factors[1].name);
            match heritability(&vc, e, design.reps) {
                Ok(h) => h2 = Some(h),
                Err(err) => notes.push(format!("heritability skipped: {err}")),
            }
        }
        variance_components = Some(vc);
    }

    let mut stab = None;
    let mut gxe_significant = false;
    if spec.kind == DesignKind::Met {
        match GeMatrix::from_model(&model, &design).and_then(|m| stability(&m)) {
            Ok(s) => stab = Some(s),
            Err(e) => notes.push(format!("stability analysis skipped: {e}")),
        }
        gxe_significant = tests.iter().any(|t| t.effect.order() == 2 && t.significant);
    }
    let gxe = (spec.kind == DesignKind::Met).then(|| GxeSummary {
        genotype: &spec.treatment_factors[0].name,
        environment: &spec.treatment_factors[1].name,
        interaction_significant: gxe_significant,
        stability: stab.as_ref(),
    });
    let recommendation = decide(&DecisionInputs {
        response: &spec.response,
        alpha,
        domain: &domain,
        comparisons: &comparisons,
        blups: blup_table.as_ref(),
        predicted: matches!(spec.kind, DesignKind::Mixed | DesignKind::Met),
        gxe,
        diagnostics: &diagnostics,
        minimize: options.minimize,
    });

    Ok(Analysis {
        design,
        model,
        anova: table,
        tests,
        domain,
        comparisons,
        diagnostics,
        variance_components,
        blups: blup_table,
        random_blups,
        heritability: h2,
        stability: stab,
        notes,
        recommendation,
    })
}

/// One group's outcome in a grouped analysis.
#[derive(Debug)]
pub struct GroupResult {
    /// Label such as `Year=2021,Site=North`; empty when ungrouped.
    pub label: String,
    pub result: Result<Analysis>,
}

/// Analyses each subset defined by the design's group factors independently.
/// A failure in one group does not stop the others.
pub fn grouped_analyze(spec: &DesignSpec, data: &Dataset, options: &AnalysisOptions) -> Result<Vec<GroupResult>> {
    if spec.group_factors.is_empty() {
        return Ok(vec![GroupResult {
            label: String::new(),
            result: analyze(spec, data, options),
        }]);
    }
    let parts = partition(data, &spec.group_factors)?;
    Ok((0..parts.keys.len())
        .map(|i| GroupResult {
            label: parts.label(i),
            result: analyze(spec, &parts.subsets[i], options),
        })
        .collect())
}
