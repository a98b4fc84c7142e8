//! Per-term descriptive statistics: sample moments, one-sample mean tests,
//! and the Shapiro-Wilk normality test, assembled into a per-term table.
//!
//! Kurtosis is reported non-excess (normal = 3) and skewness/kurtosis use
//! the biased moment estimators (central moments over n); the standard
//! deviation uses the n-1 denominator.

mod swilk;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{LabelMode, LabeledSeries};
use crate::jieqi::{SolarTerm, TERM_COUNT};
use crate::prob::student_t_p_two_sided;

pub use swilk::shapiro_wilk;

/// First four sample moments. Skewness and kurtosis are `None` when the
/// sample variance is zero (explicitly undefined, never silently 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

/// Computes mean, standard deviation (n-1), and moment-estimator skewness
/// m3/m2^(3/2) and non-excess kurtosis m4/m2².
pub fn moments(sample: &[f64]) -> Result<Moments> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::SampleSize {
            got: n,
            min: 2,
            max: usize::MAX,
        });
    }
    let nf = n as f64;
    let mean = sample.iter().sum::<f64>() / nf;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &x in sample {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let std = (m2 / (nf - 1.0)).sqrt();
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let (skewness, kurtosis) = if m2 > 0.0 && n >= 3 {
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2)))
    } else {
        (None, None)
    };
    Ok(Moments {
        mean,
        std,
        skewness,
        kurtosis,
    })
}

/// Two-sided one-sample t test of mean zero: t = mean/(std/√n), p from the
/// Student-t distribution with n-1 degrees of freedom.
pub fn t_test_mean(sample: &[f64]) -> Result<(f64, f64)> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::SampleSize {
            got: n,
            min: 2,
            max: usize::MAX,
        });
    }
    let m = moments(sample)?;
    if m.std <= 0.0 {
        return Err(Error::ZeroVariance("t statistic"));
    }
    let t = m.mean / (m.std / (n as f64).sqrt());
    Ok((t, student_t_p_two_sided(t, (n - 1) as f64)))
}

/// Full descriptive row for one sample. Test fields are `None` when the
/// corresponding statistic is undefined for the sample (zero variance or
/// out-of-range n), rather than dropping the row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    pub t_stat: Option<f64>,
    pub t_p: Option<f64>,
    pub sw_w: Option<f64>,
    pub sw_p: Option<f64>,
}

/// Assembles [`SampleStats`], tolerating undefined pieces.
pub fn sample_stats(sample: &[f64]) -> Result<SampleStats> {
    let m = moments(sample)?;
    let t = t_test_mean(sample).ok();
    let sw = shapiro_wilk(sample).ok();
    Ok(SampleStats {
        n: sample.len(),
        mean: m.mean,
        std: m.std,
        skewness: m.skewness,
        kurtosis: m.kurtosis,
        t_stat: t.map(|v| v.0),
        t_p: t.map(|v| v.1),
        sw_w: sw.map(|v| v.0),
        sw_p: sw.map(|v| v.1),
    })
}

/// One row of the per-term table.
#[derive(Debug, Clone, Serialize)]
pub struct TermStats {
    pub order: u8,
    pub name: &'static str,
    pub stats: SampleStats,
    /// Set when fewer than 3 observations fall on this term's days; the row
    /// is kept but its test columns are unreliable or undefined.
    pub small_sample: bool,
}

/// Per-term descriptive statistics over the term-day labeled rows, keyed by
/// term order 1..=24. Terms with no observations are omitted; terms with
/// fewer than 3 observations are flagged, not dropped.
pub fn per_term_stats(labeled: &LabeledSeries) -> Result<Vec<TermStats>> {
    if labeled.mode != LabelMode::TermDay {
        return Err(Error::NotTermDayMode);
    }
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); TERM_COUNT];
    for (t, row) in labeled.dummies.iter().enumerate() {
        if let Some(j) = row.iter().position(|&v| v == 1) {
            groups[j].push(labeled.returns.rows[t].1);
        }
    }
    let mut out = Vec::new();
    for (j, group) in groups.iter().enumerate() {
        if group.is_empty() {
            continue;
        }
        let order = (j + 1) as u8;
        let stats = if group.len() == 1 {
            SampleStats {
                n: 1,
                mean: group[0],
                std: 0.0,
                skewness: None,
                kurtosis: None,
                t_stat: None,
                t_p: None,
                sw_w: None,
                sw_p: None,
            }
        } else {
            sample_stats(group)?
        };
        out.push(TermStats {
            order,
            name: SolarTerm::new(order)?.name(),
            stats,
            small_sample: group.len() < 3,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{ReturnMethod, ReturnSeries};
    use crate::jieqi::{SolarTerm, TermEvent};
    use approx::assert_abs_diff_eq;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    #[test]
    fn moments_of_symmetric_triple() {
        // m2 = 2/3, m4 = 2/3 → kurtosis = 1.5; std over n-1 is 1.
        let m = moments(&[-1.0, 0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(m.mean, 0.0);
        assert_abs_diff_eq!(m.std, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.skewness.unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.kurtosis.unwrap(), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn constant_sample_has_undefined_shape() {
        let m = moments(&[3.25; 6]).unwrap();
        assert_eq!(m.mean, 3.25);
        assert_eq!(m.std, 0.0);
        assert_eq!(m.skewness, None);
        assert_eq!(m.kurtosis, None);
    }

    #[test]
    fn t_test_symmetry_and_reference_value() {
        let (t, p) = t_test_mean(&[1.0, -1.0]).unwrap();
        assert_eq!(t, 0.0);
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);
        // scipy.stats.ttest_1samp([0.01, 0.02, 0.03], 0):
        // t = 3.464101615137755, p = 0.07417990022744853 (df = 2)
        let (t, p) = t_test_mean(&[0.01, 0.02, 0.03]).unwrap();
        assert_abs_diff_eq!(t, 3.464101615137755, epsilon = 1e-12);
        assert_abs_diff_eq!(p, 0.0741799002274485, epsilon = 1e-10);
    }

    #[test]
    fn t_test_rejects_zero_variance() {
        assert!(matches!(
            t_test_mean(&[2.0, 2.0, 2.0]),
            Err(Error::ZeroVariance(_))
        ));
    }

    fn labeled_with_term3_days() -> LabeledSeries {
        let dates: Vec<NaiveDate> = (0..40)
            .map(|i| NaiveDate::from_ymd_opt(2000, 1, 3).unwrap() + chrono::Duration::days(i))
            .collect();
        let rows: Vec<(NaiveDate, f64)> = dates
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let on_term = i % 10 == 5;
                (d, if on_term { 0.01 } else { 0.001 * i as f64 })
            })
            .collect();
        let returns = ReturnSeries {
            rows,
            method: ReturnMethod::Log,
        };
        let events: Vec<TermEvent> = dates
            .iter()
            .enumerate()
            .filter(|(i, _)| i % 10 == 5)
            .map(|(_, &d)| TermEvent {
                term: SolarTerm::new(3).unwrap(),
                year: 2000,
                instant: d.and_hms_opt(10, 0, 0).unwrap(),
                trading_day: Some(d),
            })
            .collect();
        crate::ingest::build_labeled(&returns, &events).unwrap()
    }

    #[test]
    fn per_term_stats_recovers_constructed_group() {
        let labeled = labeled_with_term3_days();
        let table = per_term_stats(&labeled).unwrap();
        assert_eq!(table.len(), 1);
        let row = &table[0];
        assert_eq!(row.order, 3);
        assert_eq!(row.name, "Lichun");
        assert_eq!(row.stats.n, 4);
        assert_abs_diff_eq!(row.stats.mean, 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(row.stats.std, 0.0, epsilon = 1e-15);
        assert!(!row.small_sample);
    }

    #[test]
    fn per_term_stats_requires_term_day_mode() {
        let mut labeled = labeled_with_term3_days();
        labeled.mode = LabelMode::Window { radius: 1 };
        assert!(matches!(
            per_term_stats(&labeled),
            Err(Error::NotTermDayMode)
        ));
    }

    proptest! {
        // Affine equivariance: mean shifts and scales, std scales by |a|,
        // skewness flips sign with a < 0, kurtosis is invariant.
        #[test]
        fn moments_affine_equivariance(
            a in prop::sample::select(vec![-3.0f64, -0.5, 0.25, 2.0]),
            b in -5.0f64..5.0,
        ) {
            let x = [0.4, -1.3, 2.2, 0.05, -0.7, 1.1, 0.9];
            let y: Vec<f64> = x.iter().map(|&v| a * v + b).collect();
            let mx = moments(&x).unwrap();
            let my = moments(&y).unwrap();
            prop_assert!((my.mean - (a * mx.mean + b)).abs() < 1e-10);
            prop_assert!((my.std - a.abs() * mx.std).abs() < 1e-10);
            prop_assert!(
                (my.skewness.unwrap() - a.signum() * mx.skewness.unwrap()).abs() < 1e-9
            );
            prop_assert!((my.kurtosis.unwrap() - mx.kurtosis.unwrap()).abs() < 1e-9);
        }

        // t statistic is scale-invariant up to sign.
        #[test]
        fn t_scale_invariance(a in prop::sample::select(vec![-2.5f64, -1.0, 0.5, 4.0])) {
            let x = [0.01, 0.03, -0.005, 0.02, 0.015];
            let y: Vec<f64> = x.iter().map(|&v| a * v).collect();
            let (tx, px) = t_test_mean(&x).unwrap();
            let (ty, py) = t_test_mean(&y).unwrap();
            prop_assert!((ty - a.signum() * tx).abs() < 1e-10);
            prop_assert!((py - px).abs() < 1e-10);
        }

        // Shapiro-Wilk is location-scale invariant.
        #[test]
        fn swilk_location_scale_invariance(
            a in prop::sample::select(vec![-2.0f64, 0.1, 3.0]),
            b in -10.0f64..10.0,
        ) {
            let x = swilk::tests::lcg_uniforms(7, 25);
            let y: Vec<f64> = x.iter().map(|&v| a * v + b).collect();
            let (wx, px) = shapiro_wilk(&x).unwrap();
            let (wy, py) = shapiro_wilk(&y).unwrap();
            prop_assert!((wx - wy).abs() < 1e-6);
            prop_assert!((px - py).abs() < 1e-6);
        }
    }
}
