//! Genotype × environment stability: AMMI, Finlay–Wilkinson, Eberhart–Russell
//! and GGE biplot coordinates, all computed on the matrix of cell means.

use crate::design::{DesignKind, ValidatedDesign};
use crate::engine::FittedModel;
use crate::error::{Error, Result};
use crate::svd::{svd, Matrix};

/// Genotype × environment matrix of cell means.
#[derive(Debug, Clone, PartialEq)]
pub struct GeMatrix {
    pub genotypes: Vec<String>,
    pub environments: Vec<String>,
    pub values: Matrix,
}

impl GeMatrix {
    pub fn new(genotypes: Vec<String>, environments: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let values = Matrix::from_rows(rows)?;
        if values.rows != genotypes.len() || values.cols != environments.len() {
            return Err(Error::DegenerateMatrix(format!(
                "{}×{} values for {} genotypes and {} environments",
                values.rows,
                values.cols,
                genotypes.len(),
                environments.len()
            )));
        }
        Ok(GeMatrix {
            genotypes,
            environments,
            values,
        })
    }

    /// Cell means of a fitted multi-environment trial.
    pub fn from_model(model: &FittedModel, design: &ValidatedDesign) -> Result<Self> {
        if design.spec.kind != DesignKind::Met {
            return Err(Error::NotApplicable(
                "stability analysis needs a multi-environment design".into(),
            ));
        }
        let g = design.spec.treatment_factors[0].name.clone();
        let e = design.spec.treatment_factors[1].name.clone();
        let means = model.marginal_means(&[g.clone(), e.clone()])?;
        let genotypes = design.levels(&g).expect("validated").to_vec();
        let environments = design.levels(&e).expect("validated").to_vec();
        let rows: Vec<Vec<f64>> = means.chunks(environments.len()).map(<[f64]>::to_vec).collect();
        GeMatrix::new(genotypes, environments, &rows)
    }

    fn check(&self) -> Result<()> {
        if self.values.rows < 2 || self.values.cols < 2 {
            return Err(Error::DegenerateMatrix(format!(
                "need at least 2 genotypes and 2 environments, got {}×{}",
                self.values.rows, self.values.cols
            )));
        }
        Ok(())
    }

    pub fn genotype_means(&self) -> Vec<f64> {
        (0..self.values.rows)
            .map(|i| self.values.row(i).iter().sum::<f64>() / self.values.cols as f64)
            .collect()
    }

    pub fn environment_means(&self) -> Vec<f64> {
        (0..self.values.cols)
            .map(|j| (0..self.values.rows).map(|i| self.values.get(i, j)).sum::<f64>() / self.values.rows as f64)
            .collect()
    }

    pub fn grand_mean(&self) -> f64 {
        self.values.data.iter().sum::<f64>() / self.values.data.len() as f64
    }

    /// Interaction residuals y_ij − ȳ_i. − ȳ_.j + ȳ_..
    pub fn double_centered(&self) -> Matrix {
        let gm = self.genotype_means();
        let em = self.environment_means();
        let grand = self.grand_mean();
        let mut out = self.values.clone();
        for i in 0..out.rows {
            for j in 0..out.cols {
                out.set(i, j, self.values.get(i, j) - gm[i] - em[j] + grand);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ammi {
    pub singular_values: Vec<f64>,
    /// g × k, scaled by √σ.
    pub genotype_scores: Matrix,
    /// e × k, scaled by √σ.
    pub environment_scores: Matrix,
    /// σ²/Σσ² per component; all zero for an additive matrix.
    pub variance_explained: Vec<f64>,
}

impl Ammi {
    /// Σσ², the interaction sum of squares on the cell-mean scale.
    pub fn interaction_ss(&self) -> f64 {
        self.singular_values.iter().map(|s| s * s).sum()
    }
}

fn scaled(m: &Matrix, sigma: &[f64], k: usize) -> Matrix {
    let mut out = Matrix::zeros(m.rows, k);
    for c in 0..k {
        let root = sigma[c].sqrt();
        for i in 0..m.rows {
            out.set(i, c, m.get(i, c) * root);
        }
    }
    out
}

fn proportions(sigma: &[f64]) -> Vec<f64> {
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    sigma
        .iter()
        .map(|s| if total > 0.0 { s * s / total } else { 0.0 })
        .collect()
}

/// AMMI: SVD of the double-centred matrix, keeping min(g−1, e−1) components.
pub fn ammi(m: &GeMatrix) -> Result<Ammi> {
    m.check()?;
    let k = (m.values.rows - 1).min(m.values.cols - 1);
    let s = svd(&m.double_centered())?;
    let sigma: Vec<f64> = s.sigma[..k].to_vec();
    Ok(Ammi {
        genotype_scores: scaled(&s.u, &sigma, k),
        environment_scores: scaled(&s.v, &sigma, k),
        variance_explained: proportions(&sigma),
        singular_values: sigma,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regression {
    pub genotype: String,
    /// Genotype mean, the fitted value at a zero environment index.
    pub intercept: f64,
    pub slope: f64,
    /// Deviation-from-regression variance RSS/(e − 2); absent with two environments.
    pub s2_di: Option<f64>,
}

/// Environment index: environment mean minus grand mean.
pub fn environment_index(m: &GeMatrix) -> Vec<f64> {
    let grand = m.grand_mean();
    m.environment_means().into_iter().map(|v| v - grand).collect()
}

fn regressions(m: &GeMatrix) -> Result<Vec<Regression>> {
    m.check()?;
    let idx = environment_index(m);
    let sxx: f64 = idx.iter().map(|v| v * v).sum();
    let scale = m.values.data.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
    if sxx <= 1e-24 * scale * scale {
        return Err(Error::ConstantEnvironmentIndex);
    }
    let e = m.values.cols;
    let gm = m.genotype_means();
    Ok((0..m.values.rows)
        .map(|i| {
            let row = m.values.row(i);
            let slope = row.iter().zip(&idx).map(|(y, x)| (y - gm[i]) * x).sum::<f64>() / sxx;
            let rss: f64 = row
                .iter()
                .zip(&idx)
                .map(|(y, x)| (y - gm[i] - slope * x).powi(2))
                .sum();
            Regression {
                genotype: m.genotypes[i].clone(),
                intercept: gm[i],
                slope,
                s2_di: (e > 2).then(|| (rss / (e - 2) as f64).max(0.0)),
            }
        })
        .collect())
}

/// Finlay–Wilkinson regression of each genotype on the environment index.
/// The slopes average to exactly one.
pub fn finlay_wilkinson(m: &GeMatrix) -> Result<Vec<Regression>> {
    Ok(regressions(m)?
        .into_iter()
        .map(|r| Regression { s2_di: None, ..r })
        .collect())
}

/// Eberhart–Russell parameters: the Finlay–Wilkinson slope plus the
/// deviation-from-regression variance.
pub fn eberhart_russell(m: &GeMatrix) -> Result<Vec<Regression>> {
    regressions(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gge {
    /// g × 2, symmetric scaling.
    pub genotype_coords: Matrix,
    /// e × 2, symmetric scaling.
    pub environment_coords: Matrix,
    pub singular_values: Vec<f64>,
    /// Share of the environment-centred sum of squares on each of the two axes.
    pub variance_explained: Vec<f64>,
}

/// Environment-centred matrix y_ij − ȳ_.j (genotype main effect plus interaction).
pub fn environment_centered(m: &GeMatrix) -> Matrix {
    let em = m.environment_means();
    let mut out = m.values.clone();
    for i in 0..out.rows {
        for j in 0..out.cols {
            out.set(i, j, m.values.get(i, j) - em[j]);
        }
    }
    out
}

/// GGE biplot coordinates from the first two components. The first axis is
/// oriented so that environment scores sum to a non-negative value, which
/// puts genotypes with high responses on the positive side.
pub fn gge_coordinates(m: &GeMatrix) -> Result<Gge> {
    m.check()?;
    let s = svd(&environment_centered(m))?;
    let all = proportions(&s.sigma);
    let sigma = s.sigma[..2].to_vec();
    let mut genotype_coords = scaled(&s.u, &sigma, 2);
    let mut environment_coords = scaled(&s.v, &sigma, 2);
    let env_sum: f64 = (0..environment_coords.rows).map(|j| environment_coords.get(j, 0)).sum();
    if env_sum < 0.0 {
        for c in [&mut genotype_coords, &mut environment_coords] {
            for i in 0..c.rows {
                let v = c.get(i, 0);
                c.set(i, 0, -v);
            }
        }
    }
    Ok(Gge {
        genotype_coords,
        environment_coords,
        variance_explained: all[..2].to_vec(),
        singular_values: sigma,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityResult {
    pub matrix: GeMatrix,
    pub ammi: Ammi,
    pub er: Vec<Regression>,
    pub gge: Gge,
}

impl StabilityResult {
    /// Finlay–Wilkinson view of the regressions (no deviation variance).
    pub fn fw(&self) -> Vec<Regression> {
        self.er
            .iter()
            .map(|r| Regression { s2_di: None, ..r.clone() })
            .collect()
    }
}

pub fn stability(m: &GeMatrix) -> Result<StabilityResult> {
    Ok(StabilityResult {
        ammi: ammi(m)?,
        er: eberhart_russell(m)?,
        gge: gge_coordinates(m)?,
        matrix: m.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(p: &str, n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("{p}{i}")).collect()
    }

    fn additive() -> GeMatrix {
        let g = [1.0, 4.0, -2.0];
        let e = [10.0, 20.0, 5.0, 7.0];
        let rows: Vec<Vec<f64>> = g.iter().map(|gi| e.iter().map(|ej| gi + ej).collect()).collect();
        GeMatrix::new(labels("G", 3), labels("E", 4), &rows).unwrap()
    }

    #[test]
    fn additive_matrix() {
        let m = additive();
        let a = ammi(&m).unwrap();
        assert_eq!(a.singular_values.len(), 2);
        assert!(a.singular_values.iter().all(|&s| s < 1e-12));
        for r in eberhart_russell(&m).unwrap() {
            assert!((r.slope - 1.0).abs() < 1e-12);
            assert!(r.s2_di.unwrap() < 1e-20);
        }
    }

    #[test]
    fn constructed_slope_and_rank_one() {
        let m = additive();
        let idx = environment_index(&m);
        let mut rows: Vec<Vec<f64>> = (0..3).map(|i| m.values.row(i).to_vec()).collect();
        // genotype 1 responds twice as strongly to the environment
        for (j, x) in idx.iter().enumerate() {
            rows[0][j] += x;
        }
        let m2 = GeMatrix::new(m.genotypes.clone(), m.environments.clone(), &rows).unwrap();
        let fw = finlay_wilkinson(&m2).unwrap();
        let mean_slope = fw.iter().map(|r| r.slope).sum::<f64>() / 3.0;
        assert!((mean_slope - 1.0).abs() < 1e-12);
        let a = ammi(&m2).unwrap();
        assert!((a.variance_explained[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_environments_have_no_deviation_variance() {
        let m = GeMatrix::new(labels("G", 2), labels("E", 2), &[vec![1.0, 3.0], vec![2.0, 5.0]]).unwrap();
        assert!(eberhart_russell(&m).unwrap().iter().all(|r| r.s2_di.is_none()));
        let flat = GeMatrix::new(labels("G", 2), labels("E", 2), &[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(finlay_wilkinson(&flat), Err(Error::ConstantEnvironmentIndex));
    }
}
