//! Declarative design specifications and their compilation into effect sets.

use std::collections::HashMap;
use std::fmt;

use serde::Deserialize;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Label of the single residual error stratum present in every model.
pub const RESIDUAL: &str = "Residual";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Fixed,
    Random,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Fixed => "fixed",
            Role::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    WholePlot,
    SubPlot,
    #[default]
    Unit,
}

impl Stratum {
    pub fn as_str(self) -> &'static str {
        match self {
            Stratum::WholePlot => "whole_plot",
            Stratum::SubPlot => "sub_plot",
            Stratum::Unit => "unit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Crd,
    Rcbd,
    Factorial,
    SplitPlot,
    Mixed,
    Met,
}

impl DesignKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DesignKind::Crd => "crd",
            DesignKind::Rcbd => "rcbd",
            DesignKind::Factorial => "factorial",
            DesignKind::SplitPlot => "split_plot",
            DesignKind::Mixed => "mixed",
            DesignKind::Met => "met",
        }
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub name: String,
    pub role: Role,
    #[serde(default)]
    pub stratum: Stratum,
}

impl FactorSpec {
    pub fn fixed(name: &str) -> Self {
        FactorSpec {
            name: name.to_string(),
            role: Role::Fixed,
            stratum: Stratum::Unit,
        }
    }

    pub fn random(name: &str) -> Self {
        FactorSpec {
            role: Role::Random,
            ..FactorSpec::fixed(name)
        }
    }

    pub fn in_stratum(mut self, stratum: Stratum) -> Self {
        self.stratum = stratum;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub response: String,
    pub treatment_factors: Vec<FactorSpec>,
    pub block_factor: Option<FactorSpec>,
    pub group_factors: Vec<String>,
    pub alpha: f64,
    pub alpha_v: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDesign {
    kind: DesignKind,
    response: String,
    factors: Vec<FactorSpec>,
    block: Option<RawBlock>,
    #[serde(default)]
    groups: Vec<String>,
    alpha: Option<f64>,
    alpha_v: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawBlock {
    Name(String),
    Spec(RawBlockSpec),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlockSpec {
    name: String,
    role: Role,
}

/// Parses a TOML design document and checks every structural invariant.
///
/// ```toml
/// kind = "split_plot"
/// response = "Yield"
/// block = "Block"
///
/// [[factors]]
/// name = "Irrigation"
/// role = "fixed"
/// stratum = "whole_plot"
///
/// [[factors]]
/// name = "Variety"
/// role = "fixed"
/// stratum = "sub_plot"
/// ```
pub fn parse_design(text: &str) -> Result<DesignSpec> {
    let raw: RawDesign = toml::from_str(text).map_err(|e| Error::Schema(e.message().to_string()))?;
    let block_factor = raw.block.map(|b| match b {
        RawBlock::Name(name) => FactorSpec::fixed(&name),
        RawBlock::Spec(s) => FactorSpec {
            name: s.name,
            role: s.role,
            stratum: Stratum::Unit,
        },
    });
    let block_factor = block_factor.map(|mut b| {
        // blocks are random by definition in the mixed kind
        if raw.kind == DesignKind::Mixed {
            b.role = Role::Random;
        }
        b
    });
    let spec = DesignSpec {
        kind: raw.kind,
        response: raw.response,
        treatment_factors: raw.factors,
        block_factor,
        group_factors: raw.groups,
        alpha: raw.alpha.unwrap_or(0.05),
        alpha_v: raw.alpha_v.unwrap_or(0.05),
    };
    spec.check()?;
    Ok(spec)
}

fn constraint<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Constraint(msg.into()))
}

fn valid_identifier(s: &str) -> bool {
    !s.trim().is_empty() && !s.contains(['\n', '\r', ':', '|', '='])
}

impl DesignSpec {
    /// Verifies the per-kind structural invariants.
    pub fn check(&self) -> Result<()> {
        let in_unit = |a: f64| a > 0.0 && a < 1.0;
        if !in_unit(self.alpha) {
            return constraint(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !in_unit(self.alpha_v) {
            return constraint(format!("alpha_v must lie in (0, 1), got {}", self.alpha_v));
        }
        if !valid_identifier(&self.response) {
            return constraint("response name is empty or contains reserved characters");
        }
        let mut names: Vec<&str> = vec![self.response.as_str()];
        for f in self.treatment_factors.iter().chain(&self.block_factor) {
            if !valid_identifier(&f.name) {
                return constraint(format!(
                    "factor name `{}` is empty or contains reserved characters (: | =)",
                    f.name
                ));
            }
            if names.contains(&f.name.as_str()) {
                return constraint(format!("name `{}` is used more than once", f.name));
            }
            names.push(&f.name);
        }
        for g in &self.group_factors {
            if names.contains(&g.as_str()) {
                return constraint(format!("group column `{g}` is also a model column"));
            }
        }
        if self.kind != DesignKind::SplitPlot {
            if let Some(f) = self.treatment_factors.iter().find(|f| f.stratum != Stratum::Unit) {
                return constraint(format!(
                    "factor `{}` declares stratum {}, only split_plot designs have strata",
                    f.name,
                    f.stratum.as_str()
                ));
            }
        }
        let n = self.treatment_factors.len();
        let random_treatments = self
            .treatment_factors
            .iter()
            .filter(|f| f.role == Role::Random)
            .count();
        if random_treatments > 0 && !matches!(self.kind, DesignKind::Mixed | DesignKind::Met) {
            return constraint(format!(
                "random treatment factors are only allowed in mixed or met designs, not {}",
                self.kind
            ));
        }
        match self.kind {
            DesignKind::Crd => {
                if n != 1 {
                    return constraint(format!("crd needs exactly 1 treatment factor, got {n}"));
                }
                if self.block_factor.is_some() {
                    return constraint("crd designs have no block; use rcbd");
                }
            }
            DesignKind::Rcbd => {
                if n != 1 {
                    return constraint(format!("rcbd needs exactly 1 treatment factor, got {n}"));
                }
                match &self.block_factor {
                    None => return constraint("rcbd requires a block factor"),
                    Some(b) if b.role == Role::Random => {
                        return constraint(
                            "rcbd blocks are fixed; declare kind = \"mixed\" for random blocks",
                        )
                    }
                    Some(_) => {}
                }
            }
            DesignKind::Factorial => {
                if n < 2 {
                    return constraint(format!(
                        "factorial needs at least 2 crossed treatment factors, got {n}"
                    ));
                }
                if self.block_factor.is_some() {
                    return constraint("factorial designs here are completely randomized; no block");
                }
            }
            DesignKind::SplitPlot => {
                let whole = self
                    .treatment_factors
                    .iter()
                    .filter(|f| f.stratum == Stratum::WholePlot)
                    .count();
                let sub = self
                    .treatment_factors
                    .iter()
                    .filter(|f| f.stratum == Stratum::SubPlot)
                    .count();
                if whole != 1 || sub != 1 || n != 2 {
                    return constraint(
                        "split_plot needs exactly one whole_plot and one sub_plot factor",
                    );
                }
                if self.block_factor.is_none() {
                    return constraint("split_plot requires a block factor");
                }
            }
            DesignKind::Mixed => {
                let fixed = n - random_treatments;
                if fixed == 0 {
                    return constraint("mixed needs at least one fixed treatment factor");
                }
                if random_treatments == 0 && self.block_factor.is_none() {
                    return constraint("mixed needs at least one random factor (or a block)");
                }
            }
            DesignKind::Met => {
                if n != 2 {
                    return constraint("met needs exactly two factors: genotype then environment");
                }
                if self.treatment_factors[1].role != Role::Random {
                    return constraint(format!(
                        "met environment factor `{}` must be random",
                        self.treatment_factors[1].name
                    ));
                }
                if self.block_factor.is_some() {
                    return constraint("met designs take replicates, not a block factor");
                }
            }
        }
        Ok(())
    }

    /// Factors entering the model, treatment factors first then the block.
    pub fn model_factors(&self) -> Vec<&FactorSpec> {
        self.treatment_factors.iter().chain(&self.block_factor).collect()
    }

    pub fn whole_plot_factor(&self) -> Option<&FactorSpec> {
        self.treatment_factors
            .iter()
            .find(|f| f.stratum == Stratum::WholePlot)
    }

    pub fn sub_plot_factor(&self) -> Option<&FactorSpec> {
        self.treatment_factors
            .iter()
            .find(|f| f.stratum == Stratum::SubPlot)
    }

    pub fn has_random(&self) -> bool {
        self.model_factors().iter().any(|f| f.role == Role::Random)
    }

    /// Canonical TOML rendering accepted by [`parse_design`].
    pub fn to_toml(&self) -> String {
        let q = |s: &str| format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""));
        let mut out = format!("kind = {}\nresponse = {}\n", q(self.kind.as_str()), q(&self.response));
        if let Some(b) = &self.block_factor {
            out.push_str(&format!(
                "block = {{ name = {}, role = {} }}\n",
                q(&b.name),
                q(b.role.as_str())
            ));
        }
        if !self.group_factors.is_empty() {
            let gs: Vec<String> = self.group_factors.iter().map(|g| q(g)).collect();
            out.push_str(&format!("groups = [{}]\n", gs.join(", ")));
        }
        out.push_str(&format!("alpha = {}\nalpha_v = {}\n", self.alpha, self.alpha_v));
        for f in &self.treatment_factors {
            out.push_str(&format!(
                "\n[[factors]]\nname = {}\nrole = {}\nstratum = {}\n",
                q(&f.name),
                q(f.role.as_str()),
                q(f.stratum.as_str())
            ));
        }
        out
    }
}

/// What kind of model term an effect is; decides whether it can be interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TermClass {
    /// A treatment (design) factor or interaction among them.
    Treatment,
    /// Blocking term, fixed or random.
    Block,
    /// Additive random factor of a mixed design.
    Random,
    /// Block × whole-plot factor, the whole-plot error of a split-plot.
    WholePlotError,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Effect {
    /// Factor names; their order fixes the layout of per-level tables.
    pub factors: Vec<String>,
    pub role: Role,
    pub class: TermClass,
    /// Label of the stratum whose mean square is the F denominator.
    pub denominator: String,
}

impl Effect {
    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn label(&self) -> String {
        self.factors.join(":")
    }

    pub fn shares_factor(&self, other: &Effect) -> bool {
        self.factors.iter().any(|f| other.factors.contains(f))
    }

    pub fn contains(&self, factor: &str) -> bool {
        self.factors.iter().any(|f| f == factor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratumDef {
    pub label: String,
    /// Factors whose interaction defines the stratum; empty for the residual.
    pub terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffectSet {
    pub effects: Vec<Effect>,
    pub strata: Vec<StratumDef>,
}

impl EffectSet {
    pub fn find(&self, label: &str) -> Option<&Effect> {
        self.effects.iter().find(|e| e.label() == label)
    }

    pub fn stratum(&self, label: &str) -> Option<&StratumDef> {
        self.strata.iter().find(|s| s.label == label)
    }
}

fn residual_stratum() -> StratumDef {
    StratumDef {
        label: RESIDUAL.to_string(),
        terms: Vec::new(),
    }
}

/// All non-empty subsets of `names`, by order then lexicographically by position.
fn crossed_terms(names: &[String]) -> Vec<Vec<String>> {
    let n = names.len();
    let mut subsets: Vec<Vec<usize>> = (1u32..(1 << n))
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    subsets
        .into_iter()
        .map(|s| s.into_iter().map(|i| names[i].clone()).collect())
        .collect()
}

fn effect(factors: Vec<String>, role: Role, class: TermClass, denominator: &str) -> Effect {
    Effect {
        factors,
        role,
        class,
        denominator: denominator.to_string(),
    }
}

/// Builds the canonical effect list and error strata for a design.
pub fn compile_effects(spec: &DesignSpec) -> EffectSet {
    let r = RESIDUAL;
    let tf = &spec.treatment_factors;
    let mut effects = Vec::new();
    let mut strata = Vec::new();
    match spec.kind {
        DesignKind::Crd | DesignKind::Rcbd | DesignKind::Factorial | DesignKind::Met => {
            let names: Vec<String> = tf.iter().map(|f| f.name.clone()).collect();
            for term in crossed_terms(&names) {
                let role = if term.iter().any(|n| tf.iter().any(|f| &f.name == n && f.role == Role::Random)) {
                    Role::Random
                } else {
                    Role::Fixed
                };
                effects.push(effect(term, role, TermClass::Treatment, r));
            }
            if let Some(b) = &spec.block_factor {
                effects.push(effect(vec![b.name.clone()], b.role, TermClass::Block, r));
            }
        }
        DesignKind::SplitPlot => {
            let a = spec.whole_plot_factor().expect("checked").name.clone();
            let b = spec.sub_plot_factor().expect("checked").name.clone();
            let blk = spec.block_factor.as_ref().expect("checked");
            let wp_terms = vec![blk.name.clone(), a.clone()];
            let wp = wp_terms.join(":");
            effects.push(effect(vec![blk.name.clone()], blk.role, TermClass::Block, &wp));
            effects.push(effect(vec![a.clone()], Role::Fixed, TermClass::Treatment, &wp));
            effects.push(effect(vec![b.clone()], Role::Fixed, TermClass::Treatment, r));
            effects.push(effect(wp_terms.clone(), blk.role, TermClass::WholePlotError, r));
            effects.push(effect(vec![a, b], Role::Fixed, TermClass::Treatment, r));
            strata.push(StratumDef {
                label: wp,
                terms: wp_terms,
            });
        }
        DesignKind::Mixed => {
            let fixed: Vec<String> = tf
                .iter()
                .filter(|f| f.role == Role::Fixed)
                .map(|f| f.name.clone())
                .collect();
            for term in crossed_terms(&fixed) {
                effects.push(effect(term, Role::Fixed, TermClass::Treatment, r));
            }
            for f in tf.iter().filter(|f| f.role == Role::Random) {
                effects.push(effect(vec![f.name.clone()], Role::Random, TermClass::Random, r));
            }
            if let Some(b) = &spec.block_factor {
                effects.push(effect(vec![b.name.clone()], Role::Random, TermClass::Block, r));
            }
        }
    }
    strata.push(residual_stratum());
    EffectSet { effects, strata }
}

/// A design checked against a concrete dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedDesign {
    pub spec: DesignSpec,
    pub effects: EffectSet,
    /// Model factors in model order, with their levels in first-appearance order.
    pub factors: Vec<(String, Vec<String>)>,
    /// Observations per cell of the full crossing of model factors.
    pub reps: usize,
    pub n: usize,
}

impl ValidatedDesign {
    pub fn factor_index(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|(n, _)| n == name)
    }

    pub fn levels(&self, name: &str) -> Option<&[String]> {
        self.factors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, l)| l.as_slice())
    }

    pub fn n_levels(&self, name: &str) -> usize {
        self.levels(name).map_or(0, <[String]>::len)
    }

    pub fn df(&self, effect: &Effect) -> usize {
        effect
            .factors
            .iter()
            .map(|f| self.n_levels(f) - 1)
            .product()
    }

    pub fn residual_df(&self) -> usize {
        let used: usize = self.effects.effects.iter().map(|e| self.df(e)).sum();
        (self.n - 1).saturating_sub(used)
    }
}

/// Checks columns, levels, numeric response and full balance.
pub fn validate_against_data(spec: &DesignSpec, data: &Dataset) -> Result<ValidatedDesign> {
    spec.check()?;
    let model = spec.model_factors();
    for f in &model {
        data.require(&f.name)?;
    }
    let response = data.require(&spec.response)?;
    let values = match &response.numeric {
        Some(v) => v,
        None => {
            let (row, value) = response
                .raw
                .iter()
                .enumerate()
                .find(|(_, v)| crate::data::parse_decimal(v).is_none())
                .map(|(i, v)| (i + 2, v.clone()))
                .unwrap_or((0, String::new()));
            return Err(Error::NonNumericResponse {
                column: spec.response.clone(),
                row,
                value,
            });
        }
    };
    debug_assert_eq!(values.len(), data.n_rows());

    let mut factors = Vec::new();
    for f in &model {
        let levels = data.levels(&f.name)?;
        if levels.len() < 2 {
            return Err(Error::InsufficientLevels {
                factor: f.name.clone(),
                found: levels.len(),
            });
        }
        factors.push((f.name.clone(), levels));
    }

    // count observations in every cell of the full crossing
    let dims: Vec<usize> = factors.iter().map(|(_, l)| l.len()).collect();
    let n_cells: usize = dims.iter().product();
    let lookup: Vec<HashMap<&str, usize>> = factors
        .iter()
        .map(|(_, l)| l.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect())
        .collect();
    let cols: Vec<&Vec<String>> = model
        .iter()
        .map(|f| &data.column(&f.name).expect("checked").raw)
        .collect();
    let mut counts = vec![0usize; n_cells];
    for r in 0..data.n_rows() {
        let mut cell = 0;
        for (j, col) in cols.iter().enumerate() {
            cell = cell * dims[j] + lookup[j][col[r].as_str()];
        }
        counts[cell] += 1;
    }
    let expected = *counts.iter().max().expect("at least one cell");
    if let Some(bad) = counts.iter().position(|&c| c != expected) {
        let mut rest = bad;
        let mut idx = vec![0; dims.len()];
        for j in (0..dims.len()).rev() {
            idx[j] = rest % dims[j];
            rest /= dims[j];
        }
        let cell = factors
            .iter()
            .zip(&idx)
            .map(|((name, levels), &i)| format!("{name}={}", levels[i]))
            .collect::<Vec<_>>()
            .join(",");
        return Err(Error::UnbalancedDesign {
            cell,
            expected,
            found: counts[bad],
        });
    }

    let v = ValidatedDesign {
        spec: spec.clone(),
        effects: compile_effects(spec),
        factors,
        reps: expected,
        n: data.n_rows(),
    };
    if v.residual_df() == 0 {
        return Err(Error::SaturatedModel);
    }
    Ok(v)
}
