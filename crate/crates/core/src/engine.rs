//! Closed-form fitting of balanced designs and the stratified ANOVA table.
//!
//! Every effect is estimated from marginal means: the deviation of an effect
//! S is its marginal mean minus the deviations of all proper sub-effects, so
//! deviations sum to zero over each index and the sums of squares of a
//! balanced layout are orthogonal.

use std::collections::HashMap;

use crate::data::Dataset;
use crate::design::{Effect, TermClass, ValidatedDesign, RESIDUAL};
use crate::dist;
use crate::error::{Error, Result};

/// Estimates of one model effect.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectEstimate {
    pub effect: Effect,
    /// Model-factor index of each factor of the effect, in the effect's order.
    pub factor_idx: Vec<usize>,
    /// Level count of each factor of the effect.
    pub dims: Vec<usize>,
    /// Sum-to-zero deviations, row-major over `dims`.
    pub deviations: Vec<f64>,
    /// Marginal means M(E), row-major over `dims`.
    pub marginal_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub response: String,
    /// Model factors and their levels (same as the validated design).
    pub factors: Vec<(String, Vec<String>)>,
    pub observed: Vec<f64>,
    /// Level index of every model factor, per row.
    pub row_levels: Vec<Vec<usize>>,
    pub reps: usize,
    pub grand_mean: f64,
    /// Means of the full crossing of model factors, row-major in model order.
    pub cell_means: Vec<f64>,
    pub effects: Vec<EffectEstimate>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
}

fn flat_index(levels: &[usize], dims: &[usize]) -> usize {
    levels
        .iter()
        .zip(dims)
        .fold(0, |acc, (&l, &d)| acc * d + l)
}

fn unflatten(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for j in (0..dims.len()).rev() {
        out[j] = index % dims[j];
        index /= dims[j];
    }
    out
}

impl FittedModel {
    pub fn n(&self) -> usize {
        self.observed.len()
    }

    fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|(_, l)| l.len()).collect()
    }

    pub fn factor_index(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|(n, _)| n == name)
    }

    fn indices(&self, names: &[String]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.factor_index(n)
                    .ok_or_else(|| Error::MissingColumn(n.clone()))
            })
            .collect()
    }

    /// Marginal means over the given model factors (any order), row-major in that order.
    pub fn marginal_means_of(&self, factor_idx: &[usize]) -> Vec<f64> {
        let dims = self.dims();
        let sub: Vec<usize> = factor_idx.iter().map(|&i| dims[i]).collect();
        let size: usize = sub.iter().product();
        let mut sum = vec![0.0; size];
        let mut count = vec![0usize; size];
        for (c, &m) in self.cell_means.iter().enumerate() {
            let lv = unflatten(c, &dims);
            let key: Vec<usize> = factor_idx.iter().map(|&i| lv[i]).collect();
            let k = flat_index(&key, &sub);
            sum[k] += m;
            count[k] += 1;
        }
        sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect()
    }

    /// Marginal means for named factors, e.g. `["Nitrogen", "Spacing"]`.
    pub fn marginal_means(&self, names: &[String]) -> Result<Vec<f64>> {
        Ok(self.marginal_means_of(&self.indices(names)?))
    }

    /// Level labels of a factor combination, joined with ':' and row-major.
    pub fn combination_labels(&self, names: &[String]) -> Result<Vec<String>> {
        let idx = self.indices(names)?;
        let sub: Vec<usize> = idx.iter().map(|&i| self.factors[i].1.len()).collect();
        let size: usize = sub.iter().product();
        Ok((0..size)
            .map(|k| {
                unflatten(k, &sub)
                    .iter()
                    .zip(&idx)
                    .map(|(&l, &i)| self.factors[i].1[l].as_str())
                    .collect::<Vec<_>>()
                    .join(":")
            })
            .collect())
    }

    pub fn estimate(&self, label: &str) -> Option<&EffectEstimate> {
        self.effects.iter().find(|e| e.effect.label() == label)
    }

    /// The deviation of `est` that applies to a given row.
    pub fn row_deviation(&self, est: &EffectEstimate, row: usize) -> f64 {
        let key: Vec<usize> = est
            .factor_idx
            .iter()
            .map(|&i| self.row_levels[row][i])
            .collect();
        est.deviations[flat_index(&key, &est.dims)]
    }

    /// Number of observations behind each level of the given factor combination.
    pub fn per_level_n(&self, names: &[String]) -> Result<usize> {
        let idx = self.indices(names)?;
        let levels: usize = idx.iter().map(|&i| self.factors[i].1.len()).product();
        Ok(self.n() / levels)
    }
}

/// Deviations by recursive sweep over sub-effects, memoised by factor mask.
struct Sweep<'a> {
    model: &'a FittedModel,
    memo: HashMap<u32, Vec<f64>>,
}

impl Sweep<'_> {
    fn factors_of(mask: u32, m: usize) -> Vec<usize> {
        (0..m).filter(|i| mask & (1 << i) != 0).collect()
    }

    /// Deviations of the effect with the given factor mask, row-major in model order.
    fn deviations(&mut self, mask: u32) -> Vec<f64> {
        if let Some(v) = self.memo.get(&mask) {
            return v.clone();
        }
        let m = self.model.factors.len();
        let dims = self.model.dims();
        let fs = Self::factors_of(mask, m);
        let sub: Vec<usize> = fs.iter().map(|&i| dims[i]).collect();
        let mut dev = self.model.marginal_means_of(&fs);
        // subtract every proper sub-effect, including the grand mean
        let mut t = mask;
        loop {
            t = t.wrapping_sub(1) & mask;
            if t == mask {
                break;
            }
            let sub_dev = if t == 0 {
                vec![self.model.grand_mean]
            } else {
                self.deviations(t)
            };
            let tf = Self::factors_of(t, m);
            let tdims: Vec<usize> = tf.iter().map(|&i| dims[i]).collect();
            for (k, d) in dev.iter_mut().enumerate() {
                let lv = unflatten(k, &sub);
                let key: Vec<usize> = tf
                    .iter()
                    .map(|i| lv[fs.iter().position(|x| x == i).expect("subset")])
                    .collect();
                *d -= sub_dev[flat_index(&key, &tdims)];
            }
            if t == 0 {
                break;
            }
        }
        self.memo.insert(mask, dev.clone());
        dev
    }
}

/// Fits the design's fixed-effect model by marginal-mean decomposition.
pub fn fit(design: &ValidatedDesign, data: &Dataset) -> Result<FittedModel> {
    let response = design.spec.response.clone();
    let observed = data
        .require(&response)?
        .numeric
        .clone()
        .ok_or_else(|| Error::NonNumericResponse {
            column: response.clone(),
            row: 0,
            value: String::new(),
        })?;
    let factors = design.factors.clone();
    let dims: Vec<usize> = factors.iter().map(|(_, l)| l.len()).collect();
    let mut row_levels = Vec::with_capacity(data.n_rows());
    let cols = factors
        .iter()
        .map(|(n, _)| data.require(n))
        .collect::<Result<Vec<_>>>()?;
    for r in 0..data.n_rows() {
        let mut lv = Vec::with_capacity(cols.len());
        for (j, col) in cols.iter().enumerate() {
            let label = &col.raw[r];
            let i = factors[j].1.iter().position(|l| l == label).ok_or_else(|| {
                Error::Constraint(format!("level `{label}` of `{}` was not validated", factors[j].0))
            })?;
            lv.push(i);
        }
        row_levels.push(lv);
    }

    let n_cells: usize = dims.iter().product();
    let mut sums = vec![0.0; n_cells];
    let mut counts = vec![0usize; n_cells];
    for (lv, y) in row_levels.iter().zip(&observed) {
        let c = flat_index(lv, &dims);
        sums[c] += y;
        counts[c] += 1;
    }
    let reps = counts[0];
    if let Some(bad) = counts.iter().position(|&c| c != reps || c == 0) {
        return Err(Error::UnbalancedDesign {
            cell: format!("#{bad}"),
            expected: reps,
            found: counts[bad],
        });
    }
    let cell_means: Vec<f64> = sums.iter().map(|s| s / reps as f64).collect();
    let grand_mean = cell_means.iter().sum::<f64>() / n_cells as f64;

    let mut model = FittedModel {
        response,
        factors,
        observed,
        row_levels,
        reps,
        grand_mean,
        cell_means,
        effects: Vec::new(),
        fitted: Vec::new(),
        residuals: Vec::new(),
    };

    let mut estimates = Vec::new();
    {
        let mut sweep = Sweep {
            model: &model,
            memo: HashMap::new(),
        };
        for eff in &design.effects.effects {
            let idx = eff
                .factors
                .iter()
                .map(|f| {
                    model
                        .factor_index(f)
                        .ok_or_else(|| Error::MissingColumn(f.clone()))
                })
                .collect::<Result<Vec<usize>>>()?;
            let mask = idx.iter().fold(0u32, |m, &i| m | (1 << i));
            let dev_model_order = sweep.deviations(mask);
            let sorted: Vec<usize> = Sweep::factors_of(mask, model.factors.len());
            let sorted_dims: Vec<usize> = sorted.iter().map(|&i| dims[i]).collect();
            let edims: Vec<usize> = idx.iter().map(|&i| dims[i]).collect();
            let size: usize = edims.iter().product();
            // permute from model order to the effect's own factor order
            let deviations = (0..size)
                .map(|k| {
                    let lv = unflatten(k, &edims);
                    let key: Vec<usize> = sorted
                        .iter()
                        .map(|s| lv[idx.iter().position(|x| x == s).expect("same set")])
                        .collect();
                    dev_model_order[flat_index(&key, &sorted_dims)]
                })
                .collect();
            estimates.push(EffectEstimate {
                effect: eff.clone(),
                marginal_means: model.marginal_means_of(&idx),
                factor_idx: idx,
                dims: edims,
                deviations,
            });
        }
    }
    model.effects = estimates;

    let fitted: Vec<f64> = (0..model.n())
        .map(|r| {
            model.grand_mean
                + model
                    .effects
                    .iter()
                    .map(|e| model.row_deviation(e, r))
                    .sum::<f64>()
        })
        .collect();
    model.residuals = model
        .observed
        .iter()
        .zip(&fitted)
        .map(|(y, f)| y - f)
        .collect();
    model.fitted = fitted;
    Ok(model)
}

/// Outcome of one F test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FTest {
    pub f: Option<f64>,
    pub p: Option<f64>,
    /// Set when the denominator mean square is zero.
    pub degenerate: bool,
}

/// F = ms / ms_den with its upper-tail p-value.
///
/// A zero denominator gives F = +inf and p = 0 when the numerator is
/// positive, and no statistic at all when both are zero.
pub fn f_test(ms: f64, df: usize, ms_den: f64, df_den: usize) -> Result<FTest> {
    if df == 0 || df_den == 0 {
        return Err(Error::Domain("F test needs positive degrees of freedom".into()));
    }
    if ms_den <= 0.0 {
        return Ok(if ms > 0.0 {
            FTest {
                f: Some(f64::INFINITY),
                p: Some(0.0),
                degenerate: true,
            }
        } else {
            FTest {
                f: None,
                p: None,
                degenerate: true,
            }
        });
    }
    let f = ms.max(0.0) / ms_den;
    Ok(FTest {
        f: Some(f),
        p: Some(dist::f_sf(f, df as f64, df_den as f64)?),
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnovaRow {
    pub source: String,
    /// `None` for the residual row.
    pub class: Option<TermClass>,
    pub df: usize,
    pub ss: f64,
    pub ms: f64,
    pub f: Option<f64>,
    pub p: Option<f64>,
    pub denominator: Option<String>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnovaTable {
    pub rows: Vec<AnovaRow>,
    pub total_ss: f64,
    pub total_df: usize,
}

impl AnovaTable {
    pub fn row(&self, source: &str) -> Option<&AnovaRow> {
        self.rows.iter().find(|r| r.source == source)
    }

    pub fn residual(&self) -> &AnovaRow {
        self.row(RESIDUAL).expect("every table has a residual row")
    }

    /// Mean square and df of an error stratum by label.
    pub fn stratum_error(&self, label: &str) -> Option<(f64, usize)> {
        self.row(label).map(|r| (r.ms, r.df))
    }
}

/// Mean squares below this fraction of the total mean square count as zero.
const ZERO_MS: f64 = 1e-12;

/// Assembles the ANOVA table with each effect tested against its stratum.
pub fn anova(design: &ValidatedDesign, model: &FittedModel) -> Result<AnovaTable> {
    let n = model.n();
    let total_ss: f64 = model
        .observed
        .iter()
        .map(|y| (y - model.grand_mean).powi(2))
        .sum();
    let total_df = n - 1;
    let scale = total_ss / total_df as f64;
    let snap = |ms: f64| if ms <= ZERO_MS * scale { 0.0 } else { ms };

    let mut rows: Vec<AnovaRow> = Vec::new();
    for est in &model.effects {
        let df = design.df(&est.effect);
        let level_n = n / est.dims.iter().product::<usize>();
        let ss = level_n as f64 * est.deviations.iter().map(|d| d * d).sum::<f64>();
        rows.push(AnovaRow {
            source: est.effect.label(),
            class: Some(est.effect.class),
            df,
            ss,
            ms: ss / df as f64,
            f: None,
            p: None,
            denominator: Some(est.effect.denominator.clone()),
            degenerate: false,
        });
    }
    let res_df = design.residual_df();
    if res_df == 0 {
        return Err(Error::SaturatedModel);
    }
    let res_ss: f64 = model.residuals.iter().map(|e| e * e).sum();
    rows.push(AnovaRow {
        source: RESIDUAL.to_string(),
        class: None,
        df: res_df,
        ss: res_ss,
        ms: res_ss / res_df as f64,
        f: None,
        p: None,
        denominator: None,
        degenerate: false,
    });

    let lookup: HashMap<String, (f64, usize)> = rows
        .iter()
        .map(|r| (r.source.clone(), (r.ms, r.df)))
        .collect();
    for row in rows.iter_mut() {
        if let Some(den) = &row.denominator {
            let &(ms_den, df_den) = lookup
                .get(den)
                .ok_or_else(|| Error::Constraint(format!("unknown error stratum `{den}`")))?;
            let t = f_test(snap(row.ms), row.df, snap(ms_den), df_den)?;
            row.f = t.f;
            row.p = t.p;
            row.degenerate = t.degenerate;
        }
    }
    Ok(AnovaTable {
        rows,
        total_ss,
        total_df,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_table;
    use crate::design::{validate_against_data, DesignKind, DesignSpec, FactorSpec};

    fn one_way(values: &[(&str, f64)]) -> (ValidatedDesign, FittedModel) {
        let mut text = String::from("T,Y\n");
        for (t, y) in values {
            text.push_str(&format!("{t},{y}\n"));
        }
        let d = load_table(text.as_bytes()).unwrap();
        let spec = DesignSpec {
            kind: DesignKind::Crd,
            response: "Y".into(),
            treatment_factors: vec![FactorSpec::fixed("T")],
            block_factor: None,
            group_factors: vec![],
            alpha: 0.05,
            alpha_v: 0.05,
        };
        let v = validate_against_data(&spec, &d).unwrap();
        let m = fit(&v, &d).unwrap();
        (v, m)
    }

    #[test]
    fn symmetric_two_groups() {
        let (_, m) = one_way(&[("a", 9.0), ("a", 11.0), ("b", 19.0), ("b", 21.0)]);
        assert_eq!(m.grand_mean, 15.0);
        assert_eq!(m.effects[0].deviations, vec![-5.0, 5.0]);
        assert_eq!(m.residuals, vec![-1.0, 1.0, -1.0, 1.0]);
    }

    #[test]
    fn constant_response_is_degenerate() {
        let (v, m) = one_way(&[("a", 3.0), ("a", 3.0), ("b", 3.0), ("b", 3.0)]);
        assert!(m.effects[0].deviations.iter().all(|d| *d == 0.0));
        assert!(m.residuals.iter().all(|e| *e == 0.0));
        let t = anova(&v, &m).unwrap();
        assert!(t.rows[0].degenerate);
        assert_eq!(t.rows[0].f, None);
    }

    #[test]
    fn noise_free_effect_gives_infinite_f() {
        let (v, m) = one_way(&[("a", 1.0), ("a", 1.0), ("b", 2.0), ("b", 2.0)]);
        let t = anova(&v, &m).unwrap();
        assert_eq!(t.rows[0].f, Some(f64::INFINITY));
        assert_eq!(t.rows[0].p, Some(0.0));
        assert!(t.rows[0].degenerate);
    }

    #[test]
    fn f_test_matches_table_arithmetic() {
        let t = f_test(363.333, 3, 2.5, 16).unwrap();
        assert!((t.f.unwrap() - 145.333).abs() < 1e-3);
        assert!(t.p.unwrap() < 0.001);
        let t = f_test(1.5, 2, 1.0, 12).unwrap();
        assert!((t.p.unwrap() - 0.262).abs() < 1e-3);
    }
}
