//! `solterm` — solar-term calendar anomaly analyses over daily price data.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 estimation
//! failure.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use solterm::igarch::ErrorDist;
use solterm::ingest::ReturnMethod;
use solterm::pipeline::{run_pipeline, Analysis, RunConfig};
use solterm::report::OutputFormat;
use solterm::synth::{synth_generate, SynthSpec, VarInjection};
use solterm::{Error, ErrorCategory};

#[derive(Parser)]
#[command(
    name = "solterm",
    version,
    about = "Detects solar-term calendar anomalies in daily return series",
    after_help = "Values may also come from a TOML config file (--config); \
                  explicit flags override file values."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the solar-term calendar aligned to the trading days
    Terms(AnalysisArgs),
    /// Per-term descriptive statistics and overall return moments
    Describe(AnalysisArgs),
    /// Inter-term reference regressions with VIF and EBA robustness
    Inter(AnalysisArgs),
    /// Full-sample AR(1)+dummies mean fit, refinement, and ARCH test
    FullMean(AnalysisArgs),
    /// IGARCH(1,1) variance fits with dummy pruning per distribution
    FullVol(AnalysisArgs),
    /// Turn-of-term volatility windows around each term instant
    Turn(TurnArgs),
    /// Every analysis in dependency order
    Run(AnalysisArgs),
    /// Generate a seeded synthetic dataset with known injected anomalies
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
struct AnalysisArgs {
    /// TOML config file; flags given explicitly take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV of daily prices (or returns with --returns-col)
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    date_col: Option<String>,
    #[arg(long)]
    close_col: Option<String>,
    /// Column of precomputed returns; skips the price-to-return step
    #[arg(long)]
    returns_col: Option<String>,
    /// chrono strftime pattern for the date column
    #[arg(long)]
    date_format: Option<String>,
    #[arg(long, value_enum)]
    return_method: Option<MethodArg>,
    /// Term-calendar year range as A:B; inferred from the data when absent
    #[arg(long)]
    years: Option<String>,
    /// Error distributions for the volatility fits (repeat or comma-list)
    #[arg(long = "dist", value_enum, value_delimiter = ',')]
    dists: Vec<DistArg>,
    /// Backward-elimination threshold for variance dummies
    #[arg(long)]
    prune_p: Option<f64>,
    /// Reference-term significance threshold for panels
    #[arg(long)]
    ref_p: Option<f64>,
    /// Display threshold for relative terms within a panel
    #[arg(long)]
    display_p: Option<f64>,
    /// Near-miss threshold for the reference watchlist
    #[arg(long)]
    watchlist_p: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the report bundle
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "format", value_enum, value_delimiter = ',')]
    formats: Vec<FormatArg>,
    /// Fit the variance level on fixed least-squares residuals
    #[arg(long)]
    two_step: bool,
}

#[derive(Args)]
struct TurnArgs {
    /// Window radius in calendar days
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
    radius: u32,
    #[command(flatten)]
    args: AnalysisArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1995)]
    start_year: i32,
    /// Number of simulated years
    #[arg(long, default_value_t = 10)]
    years: u32,
    #[arg(long, default_value_t = 3e-4)]
    mean: f64,
    #[arg(long, default_value_t = 0.015)]
    std: f64,
    /// AR(1) coefficient of the return equation
    #[arg(long, default_value_t = 0.0)]
    ar: f64,
    /// IGARCH innovation weight
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Additive mean injection on a term's days, as ORDER:VALUE
    #[arg(long = "mean-inj")]
    mean_inj: Vec<String>,
    /// Multiplicative variance injection, as ORDER:FACTOR:RADIUS
    #[arg(long = "var-inj")]
    var_inj: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for prices.csv and ground_truth.json
    #[arg(long, default_value = "synth-out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Log,
    Simple,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Normal,
    #[value(alias = "student-t")]
    T,
    Ged,
}

impl From<DistArg> for ErrorDist {
    fn from(d: DistArg) -> Self {
        match d {
            DistArg::Normal => ErrorDist::Normal,
            DistArg::T => ErrorDist::StudentT,
            DistArg::Ged => ErrorDist::Ged,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Md,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Md => OutputFormat::Md,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

fn parse_years(s: &str) -> Result<(i32, i32), Error> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("years must look like 1995:2022, got {s:?}")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<i32>()
            .map_err(|_| Error::Config(format!("bad year {v:?}")))
    };
    Ok((parse(a)?, parse(b)?))
}

/// Applies a TOML config file under the explicit flags. Keys mirror the
/// long flag names.
fn apply_config_file(cfg: &mut RunConfig, path: &PathBuf) -> Result<(), Error> {
    let text = std::fs::read_to_string(path)?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| Error::Config(format!("config file {}: {e}", path.display())))?;
    let bad = |key: &str| Error::Config(format!("config key {key:?} has the wrong type"));
    for (key, value) in &table {
        match key.as_str() {
            "input" => cfg.input = value.as_str().ok_or_else(|| bad(key))?.into(),
            "out" => cfg.out_dir = value.as_str().ok_or_else(|| bad(key))?.into(),
            "date-col" => cfg.csv.date_col = value.as_str().ok_or_else(|| bad(key))?.into(),
            "close-col" => cfg.csv.close_col = value.as_str().ok_or_else(|| bad(key))?.into(),
            "returns-col" => {
                cfg.csv.returns_col = Some(value.as_str().ok_or_else(|| bad(key))?.into())
            }
            "date-format" => cfg.csv.date_format = value.as_str().ok_or_else(|| bad(key))?.into(),
            "return-method" => {
                cfg.method = match value.as_str().ok_or_else(|| bad(key))? {
                    "log" => ReturnMethod::Log,
                    "simple" => ReturnMethod::Simple,
                    other => {
                        return Err(Error::Config(format!("unknown return method {other:?}")))
                    }
                }
            }
            "years" => cfg.years = Some(parse_years(value.as_str().ok_or_else(|| bad(key))?)?),
            "seed" => cfg.seed = value.as_integer().ok_or_else(|| bad(key))? as u64,
            "two-step" => cfg.two_step = value.as_bool().ok_or_else(|| bad(key))?,
            "prune-p" => cfg.thresholds.prune_p = value.as_float().ok_or_else(|| bad(key))?,
            "ref-p" => cfg.thresholds.ref_p = value.as_float().ok_or_else(|| bad(key))?,
            "display-p" => cfg.thresholds.display_p = value.as_float().ok_or_else(|| bad(key))?,
            "watchlist-p" => {
                cfg.thresholds.watchlist_p = value.as_float().ok_or_else(|| bad(key))?
            }
            "dist" => {
                let list = value.as_array().ok_or_else(|| bad(key))?;
                cfg.dists.clear();
                for v in list {
                    cfg.dists.push(match v.as_str().ok_or_else(|| bad(key))? {
                        "normal" => ErrorDist::Normal,
                        "t" | "student-t" => ErrorDist::StudentT,
                        "ged" => ErrorDist::Ged,
                        other => {
                            return Err(Error::Config(format!("unknown distribution {other:?}")))
                        }
                    });
                }
            }
            "format" => {
                let list = value.as_array().ok_or_else(|| bad(key))?;
                cfg.formats.clear();
                for v in list {
                    cfg.formats.push(match v.as_str().ok_or_else(|| bad(key))? {
                        "csv" => OutputFormat::Csv,
                        "md" => OutputFormat::Md,
                        "json" => OutputFormat::Json,
                        other => return Err(Error::Config(format!("unknown format {other:?}"))),
                    });
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown config key {other:?} in {}",
                    path.display()
                )))
            }
        }
    }
    Ok(())
}

fn build_run_config(args: &AnalysisArgs, analyses: BTreeSet<Analysis>) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::new("", "solterm-out");
    if let Some(path) = &args.config {
        apply_config_file(&mut cfg, path)?;
    }
    if let Some(v) = &args.input {
        cfg.input = v.clone();
    }
    if let Some(v) = &args.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = &args.date_col {
        cfg.csv.date_col = v.clone();
    }
    if let Some(v) = &args.close_col {
        cfg.csv.close_col = v.clone();
    }
    if let Some(v) = &args.returns_col {
        cfg.csv.returns_col = Some(v.clone());
    }
    if let Some(v) = &args.date_format {
        cfg.csv.date_format = v.clone();
    }
    if let Some(v) = args.return_method {
        cfg.method = match v {
            MethodArg::Log => ReturnMethod::Log,
            MethodArg::Simple => ReturnMethod::Simple,
        };
    }
    if let Some(v) = &args.years {
        cfg.years = Some(parse_years(v)?);
    }
    if !args.dists.is_empty() {
        cfg.dists = args.dists.iter().map(|&d| d.into()).collect();
    }
    if let Some(v) = args.prune_p {
        cfg.thresholds.prune_p = v;
    }
    if let Some(v) = args.ref_p {
        cfg.thresholds.ref_p = v;
    }
    if let Some(v) = args.display_p {
        cfg.thresholds.display_p = v;
    }
    if let Some(v) = args.watchlist_p {
        cfg.thresholds.watchlist_p = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if !args.formats.is_empty() {
        cfg.formats = args.formats.iter().map(|&f| f.into()).collect();
    }
    if args.two_step {
        cfg.two_step = true;
    }
    if cfg.input.as_os_str().is_empty() {
        return Err(Error::Config(
            "no input file: pass --input or set `input` in the config file".into(),
        ));
    }
    cfg.analyses = analyses;
    Ok(cfg)
}

fn run_analyses(args: &AnalysisArgs, analyses: BTreeSet<Analysis>) -> Result<(), Error> {
    let cfg = build_run_config(args, analyses)?;
    let bundle = run_pipeline(&cfg)?;
    println!(
        "wrote {} artifact file(s) to {}",
        bundle.written.len(),
        cfg.out_dir.display()
    );
    for w in &bundle.manifest.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn parse_injection_pair(s: &str) -> Result<(u8, f64), Error> {
    let (order, value) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("expected ORDER:VALUE, got {s:?}")))?;
    Ok((
        order
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad term order {order:?}")))?,
        value
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad value {value:?}")))?,
    ))
}

fn run_synth(args: &SynthArgs) -> Result<(), Error> {
    let mut spec = SynthSpec {
        start_year: args.start_year,
        n_years: args.years,
        base_mean: args.mean,
        base_std: args.std,
        ar: args.ar,
        gamma: args.gamma,
        seed: args.seed,
        ..SynthSpec::default()
    };
    for s in &args.mean_inj {
        let (order, value) = parse_injection_pair(s)?;
        spec.mean_injections.insert(order, value);
    }
    for s in &args.var_inj {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "expected ORDER:FACTOR:RADIUS, got {s:?}"
            )));
        }
        let order: u8 = parts[0]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad term order {:?}", parts[0])))?;
        let factor: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad factor {:?}", parts[1])))?;
        let radius: u32 = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad radius {:?}", parts[2])))?;
        spec.var_injections.insert(order, VarInjection { factor, radius });
    }
    let out = synth_generate(&spec)?;
    std::fs::create_dir_all(&args.out)?;
    let prices = args.out.join("prices.csv");
    std::fs::write(&prices, out.price_csv())?;
    std::fs::write(args.out.join("ground_truth.json"), out.truth_json()?)?;
    println!(
        "wrote {} trading days ({} returns) to {}",
        out.truth.n_trading_days,
        out.truth.n_returns,
        prices.display()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    let single = |a: Analysis| [a].into_iter().collect::<BTreeSet<_>>();
    match cli.command {
        Command::Terms(args) => run_analyses(&args, single(Analysis::Terms)),
        Command::Describe(args) => run_analyses(&args, single(Analysis::Describe)),
        Command::Inter(args) => run_analyses(&args, single(Analysis::Inter)),
        Command::FullMean(args) => run_analyses(&args, single(Analysis::FullMean)),
        Command::FullVol(args) => run_analyses(&args, single(Analysis::FullVol)),
        Command::Turn(turn) => {
            let analysis = if turn.radius == 1 {
                Analysis::Turn1
            } else {
                Analysis::Turn2
            };
            run_analyses(&turn.args, single(analysis))
        }
        Command::Run(args) => run_analyses(&args, Analysis::all()),
        Command::Synth(args) => run_synth(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's default exit code for usage errors is 2; this tool
            // reserves 2 for data errors, so print and exit 1 (help and
            // version displays still exit 0).
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(match e.category() {
                ErrorCategory::Usage => 1u8,
                ErrorCategory::Data => 2,
                ErrorCategory::Estimation => 3,
            })
        }
    }
}
