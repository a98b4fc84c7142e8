//! Full-sample estimation: the AR(1) mean equation with term dummies, the
//! ARCH-LM pretest, and the IGARCH(1,1) variance equation with term
//! dummies estimated by maximum likelihood under Normal, Student-t, or
//! GED errors, including backward pruning of insignificant dummies and
//! the turn-of-term window variants.

mod dist;
mod fit;
mod optim;

pub use dist::{dist_logpdf, ged_lambda, DistEval, ErrorDist};
pub use fit::{
    igarch_fit, igarch_fit_warm, prune_insignificant, pruned_igarch, turn_of_term_analysis,
    turn_of_term_fit, GarchFit, IgarchOptions, MeanSpec, PruneStep, PrunedFit, TurnSummary,
};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::collections::BTreeSet;

use crate::dummyreg::{ols, OlsFit};
use crate::error::{Error, Result};
use crate::ingest::LabeledSeries;
use crate::prob::chi_squared_sf;

/// Conditional least-squares fit of the mean equation: intercept, one
/// dummy per included term, and the lagged return.
#[derive(Debug, Clone)]
pub struct MeanFit {
    pub ols: OlsFit,
    /// Term order of dummy column j+1 of the design.
    pub orders: Vec<u8>,
    /// Terms requested but absent from the data, dropped with a warning.
    pub dropped: Vec<u8>,
    pub n_obs: usize,
}

impl MeanFit {
    pub fn mu(&self) -> f64 {
        self.ols.coefficients[0]
    }

    /// AR(1) coefficient (last design column).
    pub fn ar(&self) -> f64 {
        self.ols.coefficients[self.ols.coefficients.len() - 1]
    }

    pub fn ar_se(&self) -> f64 {
        self.ols.se_ols[self.ols.coefficients.len() - 1]
    }

    fn term_index(&self, order: u8) -> Option<usize> {
        self.orders.iter().position(|&o| o == order).map(|j| j + 1)
    }

    /// Dummy coefficient for `order`, absent when the term was dropped or
    /// not included.
    pub fn term_coef(&self, order: u8) -> Option<f64> {
        self.term_index(order).map(|j| self.ols.coefficients[j])
    }

    pub fn term_p(&self, order: u8) -> Option<f64> {
        self.term_index(order).map(|j| self.ols.p[j])
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.ols.residuals.iter().copied().collect()
    }
}

fn mean_fit_impl(labeled: &LabeledSeries, keep: Option<&BTreeSet<u8>>) -> Result<MeanFit> {
    let n = labeled.n();
    if n < 100 {
        return Err(Error::SeriesTooShort { need: 100, got: n });
    }
    let counts = labeled.column_counts();
    let requested: Vec<u8> = match keep {
        Some(set) => set.iter().copied().collect(),
        None => (1..=24u8).collect(),
    };
    let mut orders = Vec::new();
    let mut dropped = Vec::new();
    for o in requested {
        if counts[(o - 1) as usize] > 0 {
            orders.push(o);
        } else {
            dropped.push(o);
        }
    }

    // Rows 1..n: row t pairs R_t with R_{t-1}.
    let m = n - 1;
    let k = orders.len() + 2;
    let mut design = DMatrix::zeros(m, k);
    let mut y = DVector::zeros(m);
    for i in 0..m {
        let t = i + 1;
        design[(i, 0)] = 1.0;
        for (j, &o) in orders.iter().enumerate() {
            design[(i, j + 1)] = f64::from(labeled.dummies[t][(o - 1) as usize]);
        }
        design[(i, k - 1)] = labeled.returns.rows[t - 1].1;
        y[i] = labeled.returns.rows[t].1;
    }
    let mut columns = vec!["mu".to_string()];
    columns.extend(orders.iter().map(|o| format!("st{o:02}")));
    columns.push("r".to_string());
    let fit = ols(&design, &y, &columns)?;
    Ok(MeanFit {
        ols: fit,
        orders,
        dropped,
        n_obs: m,
    })
}

/// Mean-level fit with all 24 term dummies (normal days are the baseline,
/// so the full dummy set plus intercept is not collinear). Terms with zero
/// occurrences are dropped and reported in `dropped`.
pub fn ar1_dummy_fit(labeled: &LabeledSeries) -> Result<MeanFit> {
    mean_fit_impl(labeled, None)
}

/// Mean-level fit restricted to the `keep` dummy set; an empty set gives
/// the plain AR(1) fit.
pub fn refined_mean_fit(labeled: &LabeledSeries, keep: &BTreeSet<u8>) -> Result<MeanFit> {
    mean_fit_impl(labeled, Some(keep))
}

#[derive(Debug, Clone, Serialize)]
pub struct ArchLag {
    pub lag: usize,
    pub lm: f64,
    pub p: f64,
    pub reject_at_1pct: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArchTestResult {
    pub rows: Vec<ArchLag>,
}

/// Engle's LM test on `residuals`: for each lag q, the squared residuals
/// are regressed on their first q lags with an intercept and
/// LM = n_eff·R² is referred to χ²(q).
pub fn arch_lm_test(residuals: &[f64], lags: &[usize]) -> Result<ArchTestResult> {
    let sq: Vec<f64> = residuals.iter().map(|e| e * e).collect();
    if sq.len() > 1 && sample_variance(&sq) <= 0.0 {
        return Err(Error::ZeroVariance("ARCH-LM"));
    }
    let mut rows = Vec::with_capacity(lags.len());
    for &q in lags {
        if q == 0 || residuals.len() <= q + 1 {
            return Err(Error::SampleSize {
                got: residuals.len(),
                min: q + 2,
                max: usize::MAX,
            });
        }
        let m = sq.len() - q;
        let mut design = DMatrix::zeros(m, q + 1);
        let mut y = DVector::zeros(m);
        for i in 0..m {
            design[(i, 0)] = 1.0;
            for j in 0..q {
                design[(i, j + 1)] = sq[i + q - 1 - j];
            }
            y[i] = sq[i + q];
        }
        let columns: Vec<String> = std::iter::once("intercept".to_string())
            .chain((1..=q).map(|j| format!("lag{j}")))
            .collect();
        let fit = ols(&design, &y, &columns)?;
        let mean = y.sum() / m as f64;
        let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
        if sst <= 0.0 {
            return Err(Error::ZeroVariance("ARCH-LM"));
        }
        let r2 = 1.0 - fit.residuals.norm_squared() / sst;
        let lm = m as f64 * r2;
        let p = chi_squared_sf(lm.max(0.0), q as f64);
        rows.push(ArchLag {
            lag: q,
            lm: lm.max(0.0),
            p,
            reject_at_1pct: p < 0.01,
        });
    }
    Ok(ArchTestResult { rows })
}

pub(crate) fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
}
