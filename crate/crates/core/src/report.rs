//! Report artifacts: every analysis result rendered three ways — CSV for
//! machines, Markdown for humans (with the 10/5/1% significance-star
//! convention), and JSON at full precision for byte-reproducible reruns.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::descstats::{SampleStats, TermStats};
use crate::dummyreg::{PanelSet, Robustness};
use crate::error::Result;
use crate::igarch::{ArchTestResult, ErrorDist, GarchFit, MeanFit, PruneStep, PrunedFit, TurnSummary};
use crate::ingest::ReturnMethod;
use crate::jieqi::TermEvent;
use crate::prob::stars;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Md,
    Json,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Md => "md",
            OutputFormat::Json => "json",
        }
    }
}

/// One analysis output in all three renderings.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: &'static str,
    pub csv: String,
    pub md: String,
    pub json: String,
}

impl Artifact {
    pub fn content(&self, format: OutputFormat) -> &str {
        match format {
            OutputFormat::Csv => &self.csv,
            OutputFormat::Md => &self.md,
            OutputFormat::Json => &self.json,
        }
    }

    /// Writes the selected formats into `dir`, returning the paths.
    pub fn write(&self, dir: &Path, formats: &[OutputFormat]) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for &f in formats {
            let path = dir.join(format!("{}.{}", self.name, f.extension()));
            std::fs::write(&path, self.content(f))?;
            out.push(path);
        }
        Ok(out)
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(format!("{}\n", serde_json::to_string_pretty(value)?))
}

/// Full-precision cell for CSV (shortest round-trip decimal).
fn csv_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(csv_num).unwrap_or_default()
}

/// Human-scale cell for Markdown: four decimals, scientific for tiny
/// magnitudes (variance-level coefficients).
fn md_num(v: f64) -> String {
    if v.is_nan() {
        "n/a".into()
    } else if v == 0.0 {
        "0".into()
    } else if v.abs() < 5e-4 {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

fn md_opt(v: Option<f64>) -> String {
    v.map(md_num).unwrap_or_else(|| "n/a".into())
}

/// `estimate (se)` with significance stars from `p`.
fn md_coef(estimate: f64, se: f64, p: f64) -> String {
    let star = if p.is_nan() { "" } else { stars(p) };
    format!("{}{} ({})", md_num(estimate), star, md_num(se))
}

// ---------------------------------------------------------------- terms

pub fn term_calendar_artifact(events: &[TermEvent]) -> Result<Artifact> {
    #[derive(Serialize)]
    struct Row {
        year: i32,
        order: u8,
        name: &'static str,
        instant_utc8: String,
        trading_day: Option<String>,
    }
    let rows: Vec<Row> = events
        .iter()
        .map(|e| Row {
            year: e.year,
            order: e.term.order,
            name: e.term.name(),
            instant_utc8: format!("{}+08:00", e.instant.format("%Y-%m-%dT%H:%M:%S")),
            trading_day: e.trading_day.map(|d| d.format("%Y-%m-%d").to_string()),
        })
        .collect();

    let csv = crate::jieqi::calendar_csv(events);
    let mut md = String::from("| year | order | name | instant (UTC+8) | trading day |\n");
    md.push_str("| --- | --- | --- | --- | --- |\n");
    for r in &rows {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} |",
            r.year,
            r.order,
            r.name,
            r.instant_utc8,
            r.trading_day.as_deref().unwrap_or("-")
        );
    }
    Ok(Artifact {
        name: "term_calendar",
        csv,
        md,
        json: to_json(&rows)?,
    })
}

// ------------------------------------------------------------- describe

pub fn table1_artifact(table: &[TermStats]) -> Result<Artifact> {
    let mut csv = String::from(
        "order,name,n,mean,std,skewness,kurtosis,t_stat,t_p,sw_w,sw_p,small_sample\n",
    );
    for row in table {
        let s = &row.stats;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            row.order,
            row.name,
            s.n,
            csv_num(s.mean),
            csv_num(s.std),
            csv_opt(s.skewness),
            csv_opt(s.kurtosis),
            csv_opt(s.t_stat),
            csv_opt(s.t_p),
            csv_opt(s.sw_w),
            csv_opt(s.sw_p),
            row.small_sample,
        );
    }
    let mut md = String::from(
        "| order | name | n | mean | t (p) | std | skew | kurt | W (p) |\n\
         | --- | --- | --- | --- | --- | --- | --- | --- | --- |\n",
    );
    for row in table {
        let s = &row.stats;
        let mean_star = s.t_p.map(stars).unwrap_or("");
        let t_cell = match (s.t_stat, s.t_p) {
            (Some(t), Some(p)) => format!("{} ({})", md_num(t), md_num(p)),
            _ => "n/a".into(),
        };
        let w_cell = match (s.sw_w, s.sw_p) {
            (Some(w), Some(p)) => format!("{}{} ({})", md_num(w), stars(p), md_num(p)),
            _ => "n/a".into(),
        };
        let flag = if row.small_sample { " (small n)" } else { "" };
        let _ = writeln!(
            md,
            "| {} | {}{} | {} | {}{} | {} | {} | {} | {} | {} |",
            row.order,
            row.name,
            flag,
            s.n,
            md_num(s.mean),
            mean_star,
            t_cell,
            md_num(s.std),
            md_opt(s.skewness),
            md_opt(s.kurtosis),
            w_cell,
        );
    }
    md.push_str("\nNote: * p<0.10, ** p<0.05, *** p<0.01. Mean test: true mean differs from 0; normality test: distribution is not normal. Kurtosis is non-excess (normal = 3); shape estimators are the biased moment ratios.\n");
    Ok(Artifact {
        name: "table1_per_term_stats",
        csv,
        md,
        json: to_json(&table)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OverallStats {
    pub n: usize,
    pub return_method: ReturnMethod,
    pub stats: SampleStats,
}

pub fn table4_artifact(overall: &OverallStats) -> Result<Artifact> {
    let s = &overall.stats;
    let mut csv = String::from("statistic,value\n");
    let _ = writeln!(csv, "n,{}", s.n);
    let _ = writeln!(csv, "mean,{}", csv_num(s.mean));
    let _ = writeln!(csv, "std,{}", csv_num(s.std));
    let _ = writeln!(csv, "skewness,{}", csv_opt(s.skewness));
    let _ = writeln!(csv, "kurtosis,{}", csv_opt(s.kurtosis));
    let md = format!(
        "| statistic | value |\n| --- | --- |\n| n | {} |\n| mean | {} |\n| std | {} |\n| skewness | {} |\n| kurtosis | {} |\n\nReturns are {} returns in raw fractional units.\n",
        s.n,
        md_num(s.mean),
        md_num(s.std),
        md_opt(s.skewness),
        md_opt(s.kurtosis),
        overall.return_method.name(),
    );
    Ok(Artifact {
        name: "table4_overall_stats",
        csv,
        md,
        json: to_json(overall)?,
    })
}

// ---------------------------------------------------------------- inter

#[derive(Debug, Clone, Serialize)]
struct PanelRow {
    order: u8,
    is_reference: bool,
    coefficient: f64,
    se: f64,
    p: f64,
    ci95_lower: f64,
    ci95_upper: f64,
    tolerance: Option<f64>,
    vif: Option<f64>,
    displayed: bool,
}

#[derive(Debug, Clone, Serialize)]
struct PanelReport {
    ref_order: u8,
    ref_p: f64,
    watchlist: bool,
    n_obs: usize,
    rows: Vec<PanelRow>,
}

fn panel_reports(set: &PanelSet) -> Vec<PanelReport> {
    let display_p = set.thresholds.display_p;
    let mut out = Vec::new();
    for (watchlist, panel) in set
        .panels
        .iter()
        .map(|p| (false, p))
        .chain(set.watchlist.iter().map(|p| (true, p)))
    {
        let fit = &panel.reference.fit;
        let mut rows = vec![PanelRow {
            order: panel.reference.ref_order,
            is_reference: true,
            coefficient: fit.coefficients[0],
            se: fit.se_ols[0],
            p: fit.p[0],
            ci95_lower: fit.ci95[0].0,
            ci95_upper: fit.ci95[0].1,
            tolerance: None,
            vif: None,
            displayed: true,
        }];
        for (j, &order) in panel.reference.orders.iter().enumerate() {
            let col = j + 1;
            let v = &panel.vif[j];
            rows.push(PanelRow {
                order,
                is_reference: false,
                coefficient: fit.coefficients[col],
                se: fit.se_ols[col],
                p: fit.p[col],
                ci95_lower: fit.ci95[col].0,
                ci95_upper: fit.ci95[col].1,
                tolerance: Some(v.tolerance),
                vif: Some(v.vif),
                displayed: fit.p[col] < display_p,
            });
        }
        out.push(PanelReport {
            ref_order: panel.reference.ref_order,
            ref_p: fit.p[0],
            watchlist,
            n_obs: panel.reference.n_obs,
            rows,
        });
    }
    out
}

pub fn table2_artifact(set: &PanelSet) -> Result<Artifact> {
    let reports = panel_reports(set);
    let mut csv = String::from(
        "panel_ref,watchlist,order,is_reference,coefficient,se,p,ci95_lower,ci95_upper,tolerance,vif,displayed\n",
    );
    for rep in &reports {
        for r in &rep.rows {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                rep.ref_order,
                rep.watchlist,
                r.order,
                r.is_reference,
                csv_num(r.coefficient),
                csv_num(r.se),
                csv_num(r.p),
                csv_num(r.ci95_lower),
                csv_num(r.ci95_upper),
                csv_opt(r.tolerance),
                csv_opt(r.vif),
                r.displayed,
            );
        }
    }
    let mut md = String::new();
    for rep in &reports {
        let tag = if rep.watchlist { " — watchlist (near-miss reference)" } else { "" };
        let _ = writeln!(md, "### Panel: reference term {}{}\n", rep.ref_order, tag);
        md.push_str(
            "| term | coefficient (se) | 95% lower | 95% upper | tolerance | VIF |\n\
             | --- | --- | --- | --- | --- | --- |\n",
        );
        for r in rep.rows.iter().filter(|r| r.displayed) {
            let name = if r.is_reference {
                format!("No.{} (reference)", r.order)
            } else {
                format!("No.{}", r.order)
            };
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {} |",
                name,
                md_coef(r.coefficient, r.se, r.p),
                md_num(r.ci95_lower),
                md_num(r.ci95_upper),
                r.tolerance.map(md_num).unwrap_or_else(|| "-".into()),
                r.vif.map(md_num).unwrap_or_else(|| "-".into()),
            );
        }
        let _ = writeln!(md, "\nobs: {}\n", rep.n_obs);
    }
    md.push_str("Note: * p<0.10, ** p<0.05, *** p<0.01.\n");
    Ok(Artifact {
        name: "table2_reference_panels",
        csv,
        md,
        json: to_json(&reports)?,
    })
}

#[derive(Debug, Clone, Serialize)]
struct EbaRow {
    ref_order: u8,
    estimate: f64,
    eba_se: f64,
    lower95: f64,
    upper95: f64,
    lower90: f64,
    upper90: f64,
    classification: Robustness,
    watchlist: bool,
}

pub fn table3_artifact(set: &PanelSet) -> Result<Artifact> {
    // The published robustness table reports the reference term of each
    // panel; that is the intercept's EBA entry.
    let mut rows = Vec::new();
    for (watchlist, panel) in set
        .panels
        .iter()
        .map(|p| (false, p))
        .chain(set.watchlist.iter().map(|p| (true, p)))
    {
        let e = &panel.eba.entries[0];
        rows.push(EbaRow {
            ref_order: panel.reference.ref_order,
            estimate: e.estimate,
            eba_se: e.eba_se,
            lower95: e.bounds95.0,
            upper95: e.bounds95.1,
            lower90: e.bounds90.0,
            upper90: e.bounds90.1,
            classification: e.classification,
            watchlist,
        });
    }
    let mut csv = String::from(
        "ref_order,estimate,eba_se,lower95,upper95,lower90,upper90,classification,watchlist\n",
    );
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{:?},{}",
            r.ref_order,
            csv_num(r.estimate),
            csv_num(r.eba_se),
            csv_num(r.lower95),
            csv_num(r.upper95),
            csv_num(r.lower90),
            csv_num(r.upper90),
            r.classification,
            r.watchlist,
        );
    }
    let mut md = String::from(
        "| reference term | estimate (EBA error) | 95% lower | 95% upper | 90% lower | 90% upper | robustness |\n\
         | --- | --- | --- | --- | --- | --- | --- |\n",
    );
    for r in &rows {
        let star = match r.classification {
            Robustness::Robust95 => "**",
            Robustness::Robust90 => "*",
            Robustness::Fragile => "",
        };
        let _ = writeln!(
            md,
            "| No.{}{} | {}{} ({}) | {} | {} | {} | {} | {:?} |",
            r.ref_order,
            if r.watchlist { " (watchlist)" } else { "" },
            md_num(r.estimate),
            star,
            md_num(r.eba_se),
            md_num(r.lower95),
            md_num(r.upper95),
            md_num(r.lower90),
            md_num(r.upper90),
            r.classification,
        );
    }
    md.push_str(
        "\nNote: * robust at the 10% level under EBA, ** robust at the 5% level under EBA; errors from the HC3 covariance.\n",
    );
    Ok(Artifact {
        name: "table3_eba",
        csv,
        md,
        json: to_json(&rows)?,
    })
}

// ------------------------------------------------------------ full-mean

#[derive(Debug, Clone, Serialize)]
struct MeanRow {
    label: String,
    order: Option<u8>,
    estimate: f64,
    se: f64,
    t: f64,
    p: f64,
}

#[derive(Debug, Clone, Serialize)]
struct MeanReport {
    rows: Vec<MeanRow>,
    dropped_terms: Vec<u8>,
    n_obs: usize,
}

fn mean_report(fit: &MeanFit) -> MeanReport {
    let ols = &fit.ols;
    let rows = ols
        .design_columns
        .iter()
        .enumerate()
        .map(|(j, label)| MeanRow {
            label: label.clone(),
            order: label
                .strip_prefix("st")
                .and_then(|s| s.parse::<u8>().ok()),
            estimate: ols.coefficients[j],
            se: ols.se_ols[j],
            t: ols.t[j],
            p: ols.p[j],
        })
        .collect();
    MeanReport {
        rows,
        dropped_terms: fit.dropped.clone(),
        n_obs: fit.n_obs,
    }
}

fn mean_artifact(name: &'static str, fit: &MeanFit) -> Result<Artifact> {
    let report = mean_report(fit);
    let mut csv = String::from("coefficient,order,estimate,se,t,p\n");
    for r in &report.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.label,
            r.order.map(|o| o.to_string()).unwrap_or_default(),
            csv_num(r.estimate),
            csv_num(r.se),
            csv_num(r.t),
            csv_num(r.p),
        );
    }
    let mut md = String::from(
        "| coefficient | estimate | std error | t | p |\n| --- | --- | --- | --- | --- |\n",
    );
    for r in &report.rows {
        let _ = writeln!(
            md,
            "| {} | {}{} | {} | {} | {} |",
            r.label,
            md_num(r.estimate),
            stars(r.p),
            md_num(r.se),
            md_num(r.t),
            md_num(r.p),
        );
    }
    let _ = writeln!(md, "\nobs: {}", report.n_obs);
    if !report.dropped_terms.is_empty() {
        let _ = writeln!(
            md,
            "\nDropped (no occurrences): {:?}",
            report.dropped_terms
        );
    }
    md.push_str("\nNote: * p<0.10, ** p<0.05, *** p<0.01.\n");
    Ok(Artifact {
        name,
        csv,
        md,
        json: to_json(&report)?,
    })
}

pub fn table5_artifact(fit: &MeanFit) -> Result<Artifact> {
    mean_artifact("table5_mean_full", fit)
}

pub fn table6_artifact(fit: &MeanFit) -> Result<Artifact> {
    mean_artifact("table6_mean_refined", fit)
}

pub fn table7_artifact(test: &ArchTestResult) -> Result<Artifact> {
    let mut csv = String::from("lag,lm,p,reject_at_1pct\n");
    for r in &test.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            r.lag,
            csv_num(r.lm),
            csv_num(r.p),
            r.reject_at_1pct
        );
    }
    let mut md = String::from("| lag | LM | p | |\n| --- | --- | --- | --- |\n");
    for r in &test.rows {
        let _ = writeln!(
            md,
            "| {} | {}{} | {} | {} |",
            r.lag,
            md_num(r.lm),
            stars(r.p),
            md_num(r.p),
            if r.reject_at_1pct { "reject" } else { "" },
        );
    }
    md.push_str("\nNull hypothesis: no ARCH effect. * p<0.10, ** p<0.05, *** p<0.01.\n");
    Ok(Artifact {
        name: "table7_arch_test",
        csv,
        md,
        json: to_json(test)?,
    })
}

// ------------------------------------------------------------- full-vol

#[derive(Debug, Clone, Serialize)]
struct GarchParamRow {
    label: String,
    estimate: f64,
    se: f64,
    p: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GarchReport {
    dist: ErrorDist,
    rows: Vec<GarchParamRow>,
    gamma: f64,
    beta: f64,
    dist_param: Option<f64>,
    lambda: Option<f64>,
    loglik: f64,
    n_obs: usize,
    floor_hits: usize,
    flagged: bool,
    opg_fallback: bool,
    max_scaled_grad: f64,
    pruning_initial: Vec<u8>,
    pruning_steps: Vec<PruneStep>,
    surviving_terms: Vec<u8>,
}

fn garch_report(pruned: &PrunedFit) -> GarchReport {
    let fit = &pruned.fit;
    let mut rows: Vec<GarchParamRow> = fit
        .labels
        .iter()
        .enumerate()
        .map(|(j, label)| GarchParamRow {
            label: label.clone(),
            estimate: fit.params[j],
            se: fit.se[j],
            p: fit.p[j],
        })
        .collect();
    // β row mirrors γ's uncertainty (β = 1-γ exactly).
    if let Some(pos) = rows.iter().position(|r| r.label == "gamma") {
        let g = rows[pos].clone();
        rows.insert(
            pos + 1,
            GarchParamRow {
                label: "beta".into(),
                estimate: 1.0 - g.estimate,
                se: g.se,
                p: g.p,
            },
        );
    }
    GarchReport {
        dist: fit.dist,
        rows,
        gamma: fit.gamma,
        beta: fit.beta,
        dist_param: fit.dist_param,
        lambda: fit.lambda,
        loglik: fit.loglik,
        n_obs: fit.n_obs,
        floor_hits: fit.floor_hits,
        flagged: fit.flagged,
        opg_fallback: fit.opg_fallback,
        max_scaled_grad: fit.max_scaled_grad,
        pruning_initial: pruned.initial.clone(),
        pruning_steps: pruned.steps.clone(),
        surviving_terms: pruned.surviving(),
    }
}

/// Shared renderer for the volatility tables: one column block per error
/// distribution, `estimate (se) [p]` cells.
fn volatility_artifact(
    name: &'static str,
    fits: &[(ErrorDist, PrunedFit)],
    strongly_efficient: Option<&[u8]>,
) -> Result<Artifact> {
    let reports: Vec<GarchReport> = fits.iter().map(|(_, pf)| garch_report(pf)).collect();

    let mut csv = String::from("dist,label,estimate,se,p\n");
    for rep in &reports {
        for r in &rep.rows {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                rep.dist.name(),
                r.label,
                csv_num(r.estimate),
                csv_num(r.se),
                csv_num(r.p),
            );
        }
    }

    // Union of parameter labels, in the first-report order then extras.
    let mut labels: Vec<String> = Vec::new();
    for rep in &reports {
        for r in &rep.rows {
            if !labels.contains(&r.label) {
                labels.push(r.label.clone());
            }
        }
    }
    let mut md = String::from("| coefficient |");
    for rep in &reports {
        let _ = write!(md, " {} |", rep.dist.name());
    }
    md.push_str("\n| --- |");
    for _ in &reports {
        md.push_str(" --- |");
    }
    md.push('\n');
    for label in &labels {
        let display = match label.as_str() {
            "nu" | "shape" => "distribution-specific parameter",
            other => other,
        };
        let _ = write!(md, "| {display} |");
        for rep in &reports {
            match rep.rows.iter().find(|r| &r.label == label) {
                Some(r) => {
                    let star = if r.p.is_nan() { "" } else { stars(r.p) };
                    let _ = write!(
                        md,
                        " {}{} ({}) [{}] |",
                        md_num(r.estimate),
                        star,
                        md_num(r.se),
                        md_num(r.p)
                    );
                }
                None => {
                    let _ = write!(md, " - |");
                }
            }
        }
        md.push('\n');
    }
    let _ = writeln!(
        md,
        "| obs |{}",
        reports
            .iter()
            .map(|r| format!(" {} |", r.n_obs))
            .collect::<String>()
    );
    md.push_str(
        "\nStandard errors are reported in parentheses and p values are reported in brackets.\n\
         * p<0.10, ** p<0.05, *** p<0.01.\n",
    );
    for rep in &reports {
        if rep.flagged {
            let _ = writeln!(
                md,
                "\nWarning ({}): variance floor hit on {} of {} observations; fit flagged invalid.",
                rep.dist.name(),
                rep.floor_hits,
                rep.n_obs
            );
        }
        if rep.opg_fallback {
            let _ = writeln!(
                md,
                "\nNote ({}): Hessian not positive definite; standard errors from outer product of gradients.",
                rep.dist.name()
            );
        }
    }
    if let Some(strong) = strongly_efficient {
        let list = strong
            .iter()
            .map(|o| format!("No.{o}"))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(
            md,
            "\nStrongly efficient terms (significant under every distribution): {}",
            if list.is_empty() { "none" } else { &list }
        );
    }

    #[derive(Serialize)]
    struct VolJson<'a> {
        fits: &'a [GarchReport],
        strongly_efficient: Option<&'a [u8]>,
    }
    let json = to_json(&VolJson {
        fits: &reports,
        strongly_efficient,
    })?;
    Ok(Artifact {
        name,
        csv,
        md,
        json,
    })
}

pub fn table8_artifact(fits: &[(ErrorDist, PrunedFit)]) -> Result<Artifact> {
    volatility_artifact("table8_volatility", fits, None)
}

pub fn turn_artifact(summary: &TurnSummary) -> Result<Artifact> {
    let name = match summary.radius {
        1 => "table9_turn1",
        _ => "table10_turn2",
    };
    volatility_artifact(name, &summary.fits, Some(&summary.strongly_efficient))
}

/// Per-fit convergence warnings surfaced into the manifest.
pub fn garch_warnings(dist: ErrorDist, fit: &GarchFit) -> Vec<String> {
    let mut out = Vec::new();
    if fit.flagged {
        out.push(format!(
            "{}: variance floor hit on {} of {} observations ({:.3}%); fit flagged invalid",
            dist.name(),
            fit.floor_hits,
            fit.n_obs,
            100.0 * fit.floor_hits as f64 / fit.n_obs as f64
        ));
    }
    if fit.opg_fallback {
        out.push(format!(
            "{}: standard errors from OPG fallback (Hessian not positive definite)",
            dist.name()
        ));
    }
    out
}
