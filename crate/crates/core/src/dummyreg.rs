//! Inter-solar-term regression: reference-term dummy OLS with collinearity
//! diagnostics (tolerance/VIF), the HC3 heteroskedasticity-consistent
//! covariance, and extreme-bounds robustness classification of the
//! reference-term coefficients.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{LabelMode, LabeledSeries};
use crate::prob::{normal_quantile, student_t_p_two_sided, student_t_quantile};

/// Relative tolerance below which a column is declared linearly dependent.
const RANK_TOL: f64 = 1e-10;

/// Ordinary least-squares fit with the diagnostics the robustness layer
/// needs: hat-matrix diagonal, OLS covariance, and labeled columns.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub design: DMatrix<f64>,
    pub design_columns: Vec<String>,
    pub coefficients: DVector<f64>,
    pub se_ols: DVector<f64>,
    pub t: DVector<f64>,
    pub p: DVector<f64>,
    pub ci95: Vec<(f64, f64)>,
    pub residuals: DVector<f64>,
    pub hat_diag: DVector<f64>,
    pub cov_ols: DMatrix<f64>,
    /// Residual degrees of freedom, n - k.
    pub df: usize,
}

/// Names the columns of `x` that are linear combinations of earlier ones
/// (or identically zero), via modified Gram-Schmidt.
fn dependent_columns(x: &DMatrix<f64>, columns: &[String]) -> Vec<String> {
    let (n, k) = x.shape();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut dependent = Vec::new();
    for j in 0..k {
        let mut v = DVector::from_iterator(n, x.column(j).iter().copied());
        let original = v.norm();
        for b in &basis {
            let c = b.dot(&v);
            v.axpy(-c, b, 1.0);
        }
        if v.norm() <= RANK_TOL * original.max(1.0) {
            dependent.push(columns[j].clone());
        } else {
            let norm = v.norm();
            v /= norm;
            basis.push(v);
        }
    }
    dependent
}

/// Least squares of `y` on `design`, which must include any intercept
/// column explicitly.
///
/// Rank deficiency is a hard error naming the dependent columns: passing
/// an intercept plus an exhaustive dummy set surfaces here.
pub fn ols(design: &DMatrix<f64>, y: &DVector<f64>, columns: &[String]) -> Result<OlsFit> {
    let (n, k) = design.shape();
    assert_eq!(columns.len(), k, "one label per design column");
    assert_eq!(y.len(), n, "response length must match design rows");
    if n <= k {
        return Err(Error::TooFewObservations { n, k });
    }
    let dependent = dependent_columns(design, columns);
    if !dependent.is_empty() {
        return Err(Error::RankDeficient(dependent));
    }

    let xtx = design.transpose() * design;
    let chol = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::RankDeficient(columns.to_vec()))?;
    let xtx_inv = chol.inverse();
    let coefficients = &xtx_inv * (design.transpose() * y);
    let fitted = design * &coefficients;
    let residuals = y - fitted;

    let mut hat_diag = DVector::zeros(n);
    for i in 0..n {
        let xi = design.row(i).transpose();
        hat_diag[i] = (&xtx_inv * &xi).dot(&xi);
    }

    let df = n - k;
    let s2 = residuals.norm_squared() / df as f64;
    let cov_ols = &xtx_inv * s2;
    let se_ols = DVector::from_iterator(k, (0..k).map(|j| cov_ols[(j, j)].sqrt()));
    let t = DVector::from_iterator(k, (0..k).map(|j| coefficients[j] / se_ols[j]));
    let p = DVector::from_iterator(k, (0..k).map(|j| student_t_p_two_sided(t[j], df as f64)));
    let t975 = student_t_quantile(0.975, df as f64);
    let ci95 = (0..k)
        .map(|j| {
            (
                coefficients[j] - t975 * se_ols[j],
                coefficients[j] + t975 * se_ols[j],
            )
        })
        .collect();

    Ok(OlsFit {
        design: design.clone(),
        design_columns: columns.to_vec(),
        coefficients,
        se_ols,
        t,
        p,
        ci95,
        residuals,
        hat_diag,
        cov_ols,
        df,
    })
}

/// HC3 sandwich covariance: (X'X)⁻¹ X'AX (X'X)⁻¹ with
/// A = diag(e_i²/(1-h_i)²).
pub fn hc3_cov(fit: &OlsFit) -> Result<DMatrix<f64>> {
    let (n, k) = fit.design.shape();
    let xtx_inv = (fit.design.transpose() * &fit.design)
        .cholesky()
        .ok_or_else(|| Error::RankDeficient(fit.design_columns.clone()))?
        .inverse();
    let mut meat = DMatrix::zeros(k, k);
    for i in 0..n {
        let h = fit.hat_diag[i];
        if h >= 1.0 - 1e-10 {
            return Err(Error::LeverageOne(i));
        }
        let w = (fit.residuals[i] / (1.0 - h)).powi(2);
        let xi = fit.design.row(i);
        for r in 0..k {
            for c in 0..k {
                meat[(r, c)] += w * xi[r] * xi[c];
            }
        }
    }
    Ok(&xtx_inv * meat * &xtx_inv)
}

/// Tolerance and variance-inflation factor for one design column.
#[derive(Debug, Clone, Serialize)]
pub struct VifEntry {
    pub column: String,
    pub tolerance: f64,
    pub vif: f64,
}

/// Collinearity diagnostics: column j of `x` (no intercept) is regressed
/// on the remaining columns plus an intercept; VIF_j = 1/(1-R²_j) and
/// tolerance is its reciprocal.
pub fn vif(x: &DMatrix<f64>, columns: &[String]) -> Result<Vec<VifEntry>> {
    let (n, k) = x.shape();
    assert_eq!(columns.len(), k);
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let target = DVector::from_iterator(n, x.column(j).iter().copied());
        let mut cols = Vec::with_capacity(k);
        let mut names = Vec::with_capacity(k);
        cols.push(DVector::from_element(n, 1.0));
        names.push("intercept".to_string());
        for other in 0..k {
            if other != j {
                cols.push(DVector::from_iterator(n, x.column(other).iter().copied()));
                names.push(columns[other].clone());
            }
        }
        let design = DMatrix::from_columns(&cols);
        let fit = ols(&design, &target, &names)?;
        let mean = target.sum() / n as f64;
        let sst: f64 = target.iter().map(|v| (v - mean) * (v - mean)).sum();
        if sst <= 0.0 {
            return Err(Error::PerfectCollinearity(columns[j].clone()));
        }
        let r2 = 1.0 - fit.residuals.norm_squared() / sst;
        let tolerance = 1.0 - r2;
        if tolerance <= 1e-10 {
            return Err(Error::PerfectCollinearity(columns[j].clone()));
        }
        out.push(VifEntry {
            column: columns[j].clone(),
            tolerance,
            vif: 1.0 / tolerance,
        });
    }
    Ok(out)
}

/// Reference-coded inter-term regression: intercept plus one dummy per
/// term present in the data, the reference term omitted.
#[derive(Debug, Clone)]
pub struct ReferenceFit {
    pub ref_order: u8,
    /// Term order of each dummy column, aligned with coefficients 1..
    pub orders: Vec<u8>,
    pub fit: OlsFit,
    pub n_obs: usize,
}

/// Runs the reference-term regression over the term-day rows of `labeled`.
///
/// In the saturated model the intercept estimates the reference term's mean
/// return exactly, and intercept + dummy i the mean of term i.
pub fn reference_regression(labeled: &LabeledSeries, ref_order: u8) -> Result<ReferenceFit> {
    if labeled.mode != LabelMode::TermDay {
        return Err(Error::NotTermDayMode);
    }
    let rows = labeled.labeled_rows();
    let counts = labeled.column_counts();
    if ref_order < 1 || ref_order > 24 {
        return Err(Error::BadTermOrder(ref_order));
    }
    if counts[(ref_order - 1) as usize] == 0 {
        return Err(Error::EmptyReference(ref_order));
    }
    let orders: Vec<u8> = (1..=24u8)
        .filter(|&o| o != ref_order && counts[(o - 1) as usize] > 0)
        .collect();

    let n = rows.len();
    let k = orders.len() + 1;
    let mut design = DMatrix::zeros(n, k);
    let mut y = DVector::zeros(n);
    for (i, &row) in rows.iter().enumerate() {
        design[(i, 0)] = 1.0;
        y[i] = labeled.returns.rows[row].1;
        for (j, &o) in orders.iter().enumerate() {
            design[(i, j + 1)] = f64::from(labeled.dummies[row][(o - 1) as usize]);
        }
    }
    let mut columns = vec!["mu".to_string()];
    columns.extend(orders.iter().map(|o| format!("st{o:02}")));
    let fit = ols(&design, &y, &columns)?;
    Ok(ReferenceFit {
        ref_order,
        orders,
        fit,
        n_obs: n,
    })
}

/// Robustness classification under extreme-bounds analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Robustness {
    Robust95,
    Robust90,
    Fragile,
}

impl Robustness {
    /// Robust at the 95% level.
    pub fn at_95(self) -> bool {
        self == Robustness::Robust95
    }

    /// Robust at the 90% level (implied by robustness at 95%).
    pub fn at_90(self) -> bool {
        self != Robustness::Fragile
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EbaEntry {
    pub label: String,
    pub estimate: f64,
    pub eba_se: f64,
    pub bounds95: (f64, f64),
    pub bounds90: (f64, f64),
    pub classification: Robustness,
}

#[derive(Debug, Clone, Serialize)]
pub struct EbaResult {
    pub entries: Vec<EbaEntry>,
}

/// Builds one EBA entry from a coefficient and its HC3 standard error.
/// The bound multipliers are the standard-normal two-sided quantiles
/// (1.95996 at 95%, 1.64485 at 90%); a coefficient is robust at a level
/// when both bounds share its sign.
pub fn eba_entry(label: &str, estimate: f64, eba_se: f64) -> EbaEntry {
    let u95 = normal_quantile(0.975);
    let u90 = normal_quantile(0.95);
    let bounds95 = (estimate - u95 * eba_se, estimate + u95 * eba_se);
    let bounds90 = (estimate - u90 * eba_se, estimate + u90 * eba_se);
    let robust = |b: (f64, f64)| estimate != 0.0 && b.0.signum() == b.1.signum();
    let classification = if robust(bounds95) {
        Robustness::Robust95
    } else if robust(bounds90) {
        Robustness::Robust90
    } else {
        Robustness::Fragile
    };
    EbaEntry {
        label: label.to_string(),
        estimate,
        eba_se,
        bounds95,
        bounds90,
        classification,
    }
}

/// EBA bounds for every coefficient of a fit, with errors taken from the
/// HC3 covariance diagonal.
pub fn eba_bounds(fit: &OlsFit) -> Result<EbaResult> {
    let cov = hc3_cov(fit)?;
    let entries = fit
        .design_columns
        .iter()
        .enumerate()
        .map(|(j, label)| eba_entry(label, fit.coefficients[j], cov[(j, j)].sqrt()))
        .collect();
    Ok(EbaResult { entries })
}

/// One reference-term panel: the fit, its collinearity diagnostics, and
/// the EBA classification of every coefficient.
#[derive(Debug, Clone)]
pub struct Panel {
    pub reference: ReferenceFit,
    pub vif: Vec<VifEntry>,
    pub eba: EbaResult,
}

impl Panel {
    /// Intercept p-value, the panel selection statistic.
    pub fn ref_p(&self) -> f64 {
        self.reference.fit.p[0]
    }

    /// Indices of dummy columns to display at threshold `display_p` (the
    /// reference row is always shown).
    pub fn displayed(&self, display_p: f64) -> Vec<usize> {
        (1..self.reference.fit.p.len())
            .filter(|&j| self.reference.fit.p[j] < display_p)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PanelThresholds {
    /// Intercept p-value below which a reference term earns a panel.
    pub ref_p: f64,
    /// Dummy p-value below which a relative term is displayed.
    pub display_p: f64,
    /// Near-miss intercept p-value bound for the watchlist.
    pub watchlist_p: f64,
}

impl Default for PanelThresholds {
    fn default() -> Self {
        PanelThresholds {
            ref_p: 0.10,
            display_p: 0.10,
            watchlist_p: 0.25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PanelSet {
    pub panels: Vec<Panel>,
    pub watchlist: Vec<Panel>,
    pub thresholds: PanelThresholds,
}

/// Fits a reference regression for every term present in the data and
/// keeps the panels whose reference coefficient is significant at
/// `thresholds.ref_p`; near misses below `watchlist_p` are reported
/// separately. Panels are ordered by term order.
pub fn significant_panels(
    labeled: &LabeledSeries,
    thresholds: PanelThresholds,
) -> Result<PanelSet> {
    let counts = labeled.column_counts();
    let mut panels = Vec::new();
    let mut watchlist = Vec::new();
    for order in 1..=24u8 {
        if counts[(order - 1) as usize] == 0 {
            continue;
        }
        let reference = reference_regression(labeled, order)?;
        let p = reference.fit.p[0];
        if p >= thresholds.watchlist_p {
            continue;
        }
        let dummy_design = reference
            .fit
            .design
            .columns(1, reference.orders.len())
            .into_owned();
        let dummy_labels: Vec<String> = reference.fit.design_columns[1..].to_vec();
        let vif = vif(&dummy_design, &dummy_labels)?;
        let eba = eba_bounds(&reference.fit)?;
        let panel = Panel {
            reference,
            vif,
            eba,
        };
        if p < thresholds.ref_p {
            panels.push(panel);
        } else {
            watchlist.push(panel);
        }
    }
    Ok(PanelSet {
        panels,
        watchlist,
        thresholds,
    })
}
