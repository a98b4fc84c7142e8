//! End-to-end orchestration: price CSV in, report bundle out. Analyses run
//! in dependency order (terms → describe → inter → full-mean → full-vol →
//! turn windows); every artifact is written in the selected formats and a
//! manifest records the configuration echo, an input fingerprint, and any
//! warnings. With identical input, configuration, and seed, the JSON
//! artifacts are byte-identical across reruns.

use std::collections::BTreeSet;
use std::path::PathBuf;

use chrono::Datelike;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::descstats::{per_term_stats, sample_stats};
use crate::dummyreg::{significant_panels, PanelThresholds};
use crate::error::{Error, Result};
use crate::igarch::{
    ar1_dummy_fit, arch_lm_test, pruned_igarch, refined_mean_fit, turn_of_term_analysis,
    ErrorDist, IgarchOptions, MeanSpec,
};
use crate::ingest::{
    build_labeled, build_labeled_windows, compute_returns, parse_price_csv, parse_returns_csv,
    CsvConfig, LabeledSeries, ReturnMethod, ReturnSeries,
};
use crate::jieqi::{align_terms, term_calendar, window_labels, TermEvent};
use crate::report::{
    garch_warnings, table1_artifact, table2_artifact, table3_artifact, table4_artifact,
    table5_artifact, table6_artifact, table7_artifact, table8_artifact, term_calendar_artifact,
    turn_artifact, Artifact, OutputFormat, OverallStats,
};

/// Dummy p-value below which a term is kept in the refined mean fit.
const MEAN_REFINE_P: f64 = 0.10;

/// ARCH-LM lag set reported by the full-mean analysis.
const ARCH_LAGS: [usize; 7] = [1, 2, 3, 4, 5, 10, 15];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    Terms,
    Describe,
    Inter,
    FullMean,
    FullVol,
    Turn1,
    Turn2,
}

impl Analysis {
    pub fn name(&self) -> &'static str {
        match self {
            Analysis::Terms => "terms",
            Analysis::Describe => "describe",
            Analysis::Inter => "inter",
            Analysis::FullMean => "full-mean",
            Analysis::FullVol => "full-vol",
            Analysis::Turn1 => "turn1",
            Analysis::Turn2 => "turn2",
        }
    }

    pub fn all() -> BTreeSet<Analysis> {
        [
            Analysis::Terms,
            Analysis::Describe,
            Analysis::Inter,
            Analysis::FullMean,
            Analysis::FullVol,
            Analysis::Turn1,
            Analysis::Turn2,
        ]
        .into_iter()
        .collect()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Thresholds {
    pub ref_p: f64,
    pub display_p: f64,
    pub watchlist_p: f64,
    pub prune_p: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            ref_p: 0.10,
            display_p: 0.10,
            watchlist_p: 0.25,
            prune_p: 0.10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub csv: CsvConfig,
    pub method: ReturnMethod,
    /// Year range for the term calendar; inferred from the data when absent.
    pub years: Option<(i32, i32)>,
    pub analyses: BTreeSet<Analysis>,
    pub thresholds: Thresholds,
    pub dists: Vec<ErrorDist>,
    pub seed: u64,
    #[serde(skip)]
    pub out_dir: PathBuf,
    pub formats: Vec<OutputFormat>,
    /// Estimate the variance level on fixed least-squares residuals
    /// instead of jointly with the mean.
    pub two_step: bool,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            input: input.into(),
            csv: CsvConfig::default(),
            method: ReturnMethod::Log,
            years: None,
            analyses: Analysis::all(),
            thresholds: Thresholds::default(),
            dists: vec![ErrorDist::Normal, ErrorDist::StudentT, ErrorDist::Ged],
            seed: 0,
            out_dir: out_dir.into(),
            formats: vec![OutputFormat::Csv, OutputFormat::Md, OutputFormat::Json],
            two_step: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.analyses.is_empty() {
            return Err(Error::Config("no analyses selected".into()));
        }
        if self.formats.is_empty() {
            return Err(Error::Config("no output formats selected".into()));
        }
        let t = &self.thresholds;
        for (name, v) in [
            ("ref-p", t.ref_p),
            ("display-p", t.display_p),
            ("watchlist-p", t.watchlist_p),
            ("prune-p", t.prune_p),
        ] {
            if !(0.0..1.0).contains(&v) || v == 0.0 {
                return Err(Error::Config(format!("threshold {name} must be in (0,1)")));
            }
        }
        if let Some((a, b)) = self.years {
            if a > b {
                return Err(Error::Config(format!("year range {a}:{b} is reversed")));
            }
            if a < crate::jieqi::YEAR_MIN || b > crate::jieqi::YEAR_MAX {
                return Err(Error::Config(format!(
                    "year range {a}:{b} outside supported 1900-2100"
                )));
            }
        }
        let needs_dists = self
            .analyses
            .iter()
            .any(|a| matches!(a, Analysis::FullVol | Analysis::Turn1 | Analysis::Turn2));
        if needs_dists && self.dists.is_empty() {
            return Err(Error::Config(
                "volatility analyses need at least one error distribution".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub config: RunConfig,
    pub input_sha256: String,
    pub n_input_rows: usize,
    pub n_returns: usize,
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
    pub incomplete: bool,
}

#[derive(Debug)]
pub struct ReportBundle {
    pub manifest: Manifest,
    pub artifacts: Vec<Artifact>,
    pub written: Vec<PathBuf>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

struct Stage<'c> {
    cfg: &'c RunConfig,
    returns: ReturnSeries,
    events: Vec<TermEvent>,
    aligned: Vec<TermEvent>,
    labeled: LabeledSeries,
    warnings: Vec<String>,
}

impl Stage<'_> {
    fn igarch_options(&self) -> IgarchOptions {
        IgarchOptions {
            mean_spec: if self.cfg.two_step {
                MeanSpec::TwoStep
            } else {
                MeanSpec::Joint
            },
            seed: self.cfg.seed,
            ..IgarchOptions::default()
        }
    }

    fn run(&mut self, analysis: Analysis) -> Result<Vec<Artifact>> {
        match analysis {
            Analysis::Terms => Ok(vec![term_calendar_artifact(&self.aligned)?]),
            Analysis::Describe => {
                let table = per_term_stats(&self.labeled)?;
                let values = self.returns.values();
                let overall = OverallStats {
                    n: values.len(),
                    return_method: self.returns.method,
                    stats: sample_stats(&values)?,
                };
                Ok(vec![table1_artifact(&table)?, table4_artifact(&overall)?])
            }
            Analysis::Inter => {
                let thresholds = PanelThresholds {
                    ref_p: self.cfg.thresholds.ref_p,
                    display_p: self.cfg.thresholds.display_p,
                    watchlist_p: self.cfg.thresholds.watchlist_p,
                };
                let set = significant_panels(&self.labeled, thresholds)?;
                Ok(vec![table2_artifact(&set)?, table3_artifact(&set)?])
            }
            Analysis::FullMean => {
                let full = ar1_dummy_fit(&self.labeled)?;
                let keep: BTreeSet<u8> = full
                    .orders
                    .iter()
                    .copied()
                    .filter(|&o| full.term_p(o).is_some_and(|p| p < MEAN_REFINE_P))
                    .collect();
                let refined = refined_mean_fit(&self.labeled, &keep)?;
                let arch = arch_lm_test(&full.residuals(), &ARCH_LAGS)?;
                Ok(vec![
                    table5_artifact(&full)?,
                    table6_artifact(&refined)?,
                    table7_artifact(&arch)?,
                ])
            }
            Analysis::FullVol => {
                let opts = self.igarch_options();
                let fits: Vec<_> = self
                    .cfg
                    .dists
                    .par_iter()
                    .map(|&dist| {
                        pruned_igarch(&self.labeled, dist, &opts, self.cfg.thresholds.prune_p)
                            .map(|pf| (dist, pf))
                    })
                    .collect::<Result<_>>()?;
                for (dist, pf) in &fits {
                    self.warnings.extend(garch_warnings(*dist, &pf.fit));
                }
                Ok(vec![table8_artifact(&fits)?])
            }
            Analysis::Turn1 | Analysis::Turn2 => {
                let radius = if analysis == Analysis::Turn1 { 1 } else { 2 };
                let trading = self.returns.trading_days();
                let windows = window_labels(&self.events, &trading, radius)?;
                let labeled = build_labeled_windows(&self.returns, &windows)?;
                let opts = self.igarch_options();
                let summary = turn_of_term_analysis(
                    &labeled,
                    &self.cfg.dists,
                    &opts,
                    self.cfg.thresholds.prune_p,
                )?;
                for (dist, pf) in &summary.fits {
                    self.warnings.extend(garch_warnings(*dist, &pf.fit));
                }
                Ok(vec![turn_artifact(&summary)?])
            }
        }
    }
}

/// Runs the configured analyses and writes the report bundle.
///
/// On an analysis failure the bundle written so far is kept, the manifest
/// is written with `incomplete: true`, and the error is returned.
pub fn run_pipeline(cfg: &RunConfig) -> Result<ReportBundle> {
    cfg.validate()?;
    let bytes = std::fs::read(&cfg.input)?;
    let input_sha256 = sha256_hex(&bytes);

    let (returns, n_input_rows) = if cfg.csv.returns_col.is_some() {
        let r = parse_returns_csv(&bytes, &cfg.csv)?;
        let n = r.rows.len();
        (r, n)
    } else {
        let prices = parse_price_csv(&bytes, &cfg.csv, &cfg.input.to_string_lossy())?;
        let n = prices.rows.len();
        (compute_returns(&prices, cfg.method)?, n)
    };

    let trading = returns.trading_days();
    let (start_year, end_year) = match cfg.years {
        Some(pair) => pair,
        None => {
            let first = returns.rows.first().expect("non-empty returns").0.year();
            let last = returns.rows.last().expect("non-empty returns").0.year();
            (first, last)
        }
    };
    let events = term_calendar(start_year, end_year)?;
    let aligned = align_terms(&events, &trading);
    let labeled = build_labeled(&returns, &aligned)?;

    let mut warnings: Vec<String> = aligned
        .iter()
        .filter(|e| e.near_midnight() && e.trading_day.is_some())
        .map(|e| {
            format!(
                "term {} of {} falls within one hour of midnight ({}); \
                 the ignored historical DST could shift its date",
                e.term.order,
                e.year,
                e.instant.format("%Y-%m-%dT%H:%M:%S")
            )
        })
        .collect();
    warnings.push(format!(
        "return definition: {} returns; the published analyses do not state \
         which definition the source used",
        returns.method.name()
    ));

    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut stage = Stage {
        cfg,
        returns,
        events,
        aligned,
        labeled,
        warnings,
    };

    let mut artifacts: Vec<Artifact> = Vec::new();
    let mut written: Vec<PathBuf> = Vec::new();
    let mut failure: Option<Error> = None;
    for &analysis in cfg.analyses.iter() {
        match stage.run(analysis) {
            Ok(new) => {
                for artifact in new {
                    written.extend(artifact.write(&cfg.out_dir, &cfg.formats)?);
                    artifacts.push(artifact);
                }
            }
            Err(e) => {
                failure = Some(e.in_analysis(analysis.name()));
                break;
            }
        }
    }

    let manifest = Manifest {
        version: crate::VERSION,
        config: cfg.clone(),
        input_sha256,
        n_input_rows,
        n_returns: stage.returns.rows.len(),
        artifacts: artifacts.iter().map(|a| a.name.to_string()).collect(),
        warnings: stage.warnings.clone(),
        incomplete: failure.is_some(),
    };
    let manifest_json = format!("{}\n", serde_json::to_string_pretty(&manifest)?);
    let manifest_path = cfg.out_dir.join("manifest.json");
    std::fs::write(&manifest_path, &manifest_json)?;
    written.push(manifest_path);

    match failure {
        Some(e) => Err(e),
        None => Ok(ReportBundle {
            manifest,
            artifacts,
            written,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation_rejects_bad_inputs() {
        let mut cfg = RunConfig::new("in.csv", "out");
        cfg.analyses.clear();
        assert!(matches!(run_pipeline(&cfg), Err(Error::Config(_))));

        let mut cfg = RunConfig::new("in.csv", "out");
        cfg.thresholds.prune_p = 1.5;
        assert!(matches!(run_pipeline(&cfg), Err(Error::Config(_))));

        let mut cfg = RunConfig::new("in.csv", "out");
        cfg.years = Some((2010, 2001));
        assert!(matches!(run_pipeline(&cfg), Err(Error::Config(_))));

        let mut cfg = RunConfig::new("in.csv", "out");
        cfg.dists.clear();
        assert!(matches!(run_pipeline(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn missing_input_is_a_data_error() {
        let cfg = RunConfig::new("/nonexistent/prices.csv", "/tmp/solterm-nope");
        let err = run_pipeline(&cfg).unwrap_err();
        assert_eq!(err.category(), crate::ErrorCategory::Data);
    }
}
