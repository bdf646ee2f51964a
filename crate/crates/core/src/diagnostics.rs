//! Assumption checks per error stratum: residual normality (Shapiro–Wilk),
//! homogeneity of spread (Brown–Forsythe), and the validity predicate.

use std::f64::consts::PI;

use crate::design::{DesignKind, TermClass, ValidatedDesign, RESIDUAL};
use crate::dist::{self, normal_quantile, normal_sf};
use crate::engine::{anova, FittedModel};
use crate::error::{Error, Result};
use crate::inference::AdmissibleDomain;
use crate::mixed::{estimate_components, shrinkage_factor, ComponentKind};

/// Residual-like values of one error stratum with the design coordinates of
/// the unit each value belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumResiduals {
    pub stratum: String,
    pub df: usize,
    pub values: Vec<f64>,
    /// Factors identifying the experimental unit of this stratum.
    pub key_factors: Vec<String>,
    /// Level indices of `key_factors`, one row per value.
    pub keys: Vec<Vec<usize>>,
}

impl StratumResiduals {
    /// Values grouped by the level combinations of `factors`, in first-seen order.
    pub fn grouped(&self, factors: &[String]) -> Option<Vec<Vec<f64>>> {
        let pos: Vec<usize> = factors
            .iter()
            .map(|f| self.key_factors.iter().position(|k| k == f))
            .collect::<Option<_>>()?;
        let mut seen: Vec<Vec<usize>> = Vec::new();
        let mut groups: Vec<Vec<f64>> = Vec::new();
        for (v, key) in self.values.iter().zip(&self.keys) {
            let sub: Vec<usize> = pos.iter().map(|&p| key[p]).collect();
            match seen.iter().position(|s| *s == sub) {
                Some(g) => groups[g].push(*v),
                None => {
                    seen.push(sub);
                    groups.push(vec![*v]);
                }
            }
        }
        Some(groups)
    }
}

/// Residuals of every error stratum.
///
/// Split-plot designs get a whole-plot stratum (the Block × whole-plot
/// deviations) next to the sub-plot residuals. Mixed designs use conditional
/// residuals: the random terms are removed only to the extent of their
/// shrunken predictions.
pub fn residuals_by_stratum(model: &FittedModel, design: &ValidatedDesign) -> Result<Vec<StratumResiduals>> {
    let names: Vec<String> = model.factors.iter().map(|(n, _)| n.clone()).collect();
    let mut out = Vec::new();
    if design.spec.kind == DesignKind::SplitPlot {
        let wp = &design.effects.strata[0];
        let est = model
            .estimate(&wp.label)
            .ok_or_else(|| Error::Constraint(format!("no estimate for `{}`", wp.label)))?;
        let effect = design.effects.find(&wp.label).expect("compiled");
        let keys = (0..est.deviations.len())
            .map(|k| {
                let mut rem = k;
                let mut key = vec![0; est.dims.len()];
                for j in (0..est.dims.len()).rev() {
                    key[j] = rem % est.dims[j];
                    rem /= est.dims[j];
                }
                key
            })
            .collect();
        out.push(StratumResiduals {
            stratum: wp.label.clone(),
            df: design.df(effect),
            values: est.deviations.clone(),
            key_factors: effect.factors.clone(),
            keys,
        });
    }
    let mut values = model.residuals.clone();
    if design.spec.kind == DesignKind::Mixed {
        let table = anova(design, model)?;
        let vc = estimate_components(&table, design)?;
        for c in &vc.components {
            if !matches!(c.kind, ComponentKind::Block | ComponentKind::Random) {
                continue;
            }
            let est = model.estimate(&c.term).expect("random term is fitted");
            let per_level = model.per_level_n(std::slice::from_ref(&c.term))? as f64;
            let lambda = shrinkage_factor(c.variance, vc.residual() / per_level).unwrap_or(0.0);
            for (row, v) in values.iter_mut().enumerate() {
                *v += (1.0 - lambda) * model.row_deviation(est, row);
            }
        }
    }
    out.push(StratumResiduals {
        stratum: RESIDUAL.to_string(),
        df: design.residual_df(),
        values,
        key_factors: names,
        keys: model.row_levels.clone(),
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapiroWilk {
    pub w: f64,
    pub p: f64,
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Shapiro–Wilk W test with Royston's approximations for the coefficients
/// and the normalising transformation of W (valid for 3 ≤ n ≤ 5000).
pub fn shapiro_wilk(x: &[f64]) -> Result<ShapiroWilk> {
    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
    const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
    const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
    const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
    const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
    const G: [f64; 2] = [-2.273, 0.459];

    let n = x.len();
    if n < 3 {
        return Err(Error::SampleTooSmall { required: 3, found: n });
    }
    if n > 5000 {
        return Err(Error::SampleTooLarge { limit: 5000, found: n });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("Shapiro-Wilk input must be finite".into()));
    }
    let mut xs = x.to_vec();
    xs.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let ss: f64 = xs.iter().map(|v| (v - mean).powi(2)).sum();
    let range = xs[n - 1] - xs[0];
    if range <= 0.0 || ss <= 0.0 {
        return Err(Error::ZeroVariance);
    }

    // coefficients for the upper half, a[0] belonging to the largest value
    let half = n / 2;
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let m: Vec<f64> = (1..=half)
            .map(|i| -normal_quantile((i as f64 - 0.375) / (nf + 0.25)))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / nf.sqrt();
        a[0] = poly(&C1, rsn) + m[0] / ssumm2;
        let (first, fac) = if n > 5 {
            a[1] = poly(&C2, rsn) + m[1] / ssumm2;
            let num = summ2 - 2.0 * (m[0] * m[0] + m[1] * m[1]);
            let den = 1.0 - 2.0 * (a[0] * a[0] + a[1] * a[1]);
            (2, (num / den).sqrt())
        } else {
            let num = summ2 - 2.0 * m[0] * m[0];
            let den = 1.0 - 2.0 * a[0] * a[0];
            (1, (num / den).sqrt())
        };
        for i in first..half {
            a[i] = m[i] / fac;
        }
    }
    let mut num = 0.0;
    for (i, ai) in a.iter().enumerate() {
        num += ai * (xs[n - 1 - i] - xs[i]);
    }
    let w = (num * num / ss).min(1.0);

    let p = if n == 3 {
        let wf = w.max(0.75);
        (6.0 / PI * (wf.sqrt().asin() - PI / 3.0)).clamp(0.0, 1.0)
    } else {
        let w1 = (1.0 - w).ln();
        if w1 == f64::NEG_INFINITY {
            1.0
        } else if n <= 11 {
            let gamma = poly(&G, nf);
            if w1 >= gamma {
                0.0
            } else {
                let y = -(gamma - w1).ln();
                let m = poly(&C3, nf);
                let s = poly(&C4, nf).exp();
                normal_sf((y - m) / s)
            }
        } else {
            let ln_n = nf.ln();
            let m = poly(&C5, ln_n);
            let s = poly(&C6, ln_n).exp();
            normal_sf((w1 - m) / s)
        }
    };
    Ok(ShapiroWilk { w, p })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeveneTest {
    pub f: f64,
    pub p: f64,
    pub df1: usize,
    pub df2: usize,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Brown–Forsythe test: one-way ANOVA on absolute deviations from group medians.
pub fn levene(groups: &[Vec<f64>]) -> Result<LeveneTest> {
    if groups.len() < 2 {
        return Err(Error::InsufficientGroups(format!(
            "homogeneity test needs at least 2 groups, got {}",
            groups.len()
        )));
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(Error::InsufficientGroups(format!(
            "every group needs at least 2 values, found a group of {}",
            g.len()
        )));
    }
    let z: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let med = median(g);
            g.iter().map(|v| (v - med).abs()).collect()
        })
        .collect();
    let k = z.len();
    let n: usize = z.iter().map(Vec::len).sum();
    let grand = z.iter().flatten().sum::<f64>() / n as f64;
    let mut between = 0.0;
    let mut within = 0.0;
    for g in &z {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        between += g.len() as f64 * (m - grand).powi(2);
        within += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let scale = z.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
    if within <= 1e-24 * scale * scale * n as f64 {
        return Err(Error::ZeroVariance);
    }
    let (df1, df2) = (k - 1, n - k);
    if df2 == 0 {
        return Err(Error::InsufficientGroups("no within-group degrees of freedom".into()));
    }
    let f = (between / df1 as f64) / (within / df2 as f64);
    let p = dist::f_sf(f, df1 as f64, df2 as f64)?;
    Ok(LeveneTest { f, p, df1, df2 })
}

/// Raw test outcomes for one stratum, before the validity decision.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumTests {
    pub stratum: String,
    pub df: usize,
    pub n: usize,
    /// Effect whose levels define the homogeneity groups.
    pub grouping: Option<String>,
    pub shapiro: std::result::Result<ShapiroWilk, Error>,
    pub levene: std::result::Result<LeveneTest, Error>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StratumDiagnostics {
    pub stratum: String,
    pub df: usize,
    pub n: usize,
    pub grouping: Option<String>,
    pub shapiro: Option<ShapiroWilk>,
    pub levene: Option<LeveneTest>,
    pub normality_ok: bool,
    pub homogeneity_ok: bool,
    /// Why a test could not be carried out.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticReport {
    pub alpha_v: f64,
    pub strata: Vec<StratumDiagnostics>,
    pub overall_valid: bool,
}

impl DiagnosticReport {
    /// Human-readable conditions attached to every conclusion.
    pub fn caveats(&self) -> Vec<String> {
        let mut out = Vec::new();
        for s in &self.strata {
            if let (false, Some(sw)) = (s.normality_ok, s.shapiro) {
                out.push(format!(
                    "residual normality rejected in stratum {} (Shapiro-Wilk W = {:.3}, {})",
                    s.stratum,
                    sw.w,
                    p_clause(sw.p)
                ));
            }
            if let (false, Some(lv)) = (s.homogeneity_ok, s.levene) {
                out.push(format!(
                    "homogeneity of variance rejected in stratum {} (Brown-Forsythe F = {:.3}, {})",
                    s.stratum,
                    lv.f,
                    p_clause(lv.p)
                ));
            }
            for note in &s.notes {
                out.push(format!("stratum {}: {note}", s.stratum));
            }
        }
        out
    }
}

/// p-value with three decimals, or "<0.001".
pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".to_string()
    } else {
        format!("{p:.3}")
    }
}

/// "p = 0.034" or "p < 0.001".
pub fn p_clause(p: f64) -> String {
    if p < 0.001 {
        "p < 0.001".to_string()
    } else {
        format!("p = {p:.3}")
    }
}

fn passes(p: f64, alpha_v: f64) -> bool {
    alpha_v <= 0.0 || p > alpha_v
}

/// Applies the validity predicate: a stratum passes when neither test rejects
/// at level `alpha_v`. Tests that could not be computed are noted and do not
/// count as rejections.
pub fn validity(tests: Vec<StratumTests>, alpha_v: f64) -> DiagnosticReport {
    let strata: Vec<StratumDiagnostics> = tests
        .into_iter()
        .map(|t| {
            let mut notes = Vec::new();
            let shapiro = match t.shapiro {
                Ok(s) => Some(s),
                Err(e) => {
                    notes.push(format!("normality not assessable ({e})"));
                    None
                }
            };
            let levene = match t.levene {
                Ok(l) => Some(l),
                Err(e) => {
                    notes.push(format!("homogeneity not assessable ({e})"));
                    None
                }
            };
            StratumDiagnostics {
                normality_ok: shapiro.is_none_or(|s| passes(s.p, alpha_v)),
                homogeneity_ok: levene.is_none_or(|l| passes(l.p, alpha_v)),
                stratum: t.stratum,
                df: t.df,
                n: t.n,
                grouping: t.grouping,
                shapiro,
                levene,
                notes,
            }
        })
        .collect();
    let overall_valid = strata.iter().all(|s| s.normality_ok && s.homogeneity_ok);
    DiagnosticReport {
        alpha_v,
        strata,
        overall_valid,
    }
}

/// Runs both tests on every stratum and applies the validity predicate.
///
/// Homogeneity groups are the levels of the first dominant effect tested in
/// the stratum, falling back to the first treatment effect tested there.
pub fn diagnose(
    model: &FittedModel,
    design: &ValidatedDesign,
    domain: &AdmissibleDomain,
    alpha_v: f64,
) -> Result<DiagnosticReport> {
    let strata = residuals_by_stratum(model, design)?;
    let tests = strata
        .iter()
        .map(|s| {
            let grouping = domain
                .dominant
                .iter()
                .find(|e| e.denominator == s.stratum)
                .or_else(|| {
                    design
                        .effects
                        .effects
                        .iter()
                        .find(|e| e.class == TermClass::Treatment && e.denominator == s.stratum)
                })
                .map(|e| e.factors.clone());
            let levene_result = match &grouping {
                Some(fs) => s
                    .grouped(fs)
                    .ok_or_else(|| Error::NotApplicable("grouping factor not in stratum".into()))
                    .and_then(|g| levene(&g)),
                None => Err(Error::NotApplicable("no treatment effect tested in this stratum".into())),
            };
            StratumTests {
                stratum: s.stratum.clone(),
                df: s.df,
                n: s.values.len(),
                grouping: grouping.map(|fs| fs.join(":")),
                shapiro: shapiro_wilk(&s.values),
                levene: levene_result,
            }
        })
        .collect();
    Ok(validity(tests, alpha_v))
}
