//! Command-line surface: `fit`, `select-bins`, `simulate`, `experiment`,
//! and `diagnostics` subcommands.
//!
//! Exit codes: 0 success, 2 usage/configuration, 3 data/io, 4 numerical.
//! Stochastic subcommands require `--seed` unless `--no-seed` is passed
//! explicitly, in which case a fresh seed is drawn and echoed in the output.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::conjugate::{
    calibrate_beta, credible_band, fit_conjugate, select_bins_empirical_bayes, IndepGammaPrior,
    PosteriorBand,
};
use crate::diagnostics::{autocorrelation, effective_sample_size, quantile_type7};
use crate::error::{Error, Result};
use crate::gmc::{
    rule_of_thumb_bins, run_gmc_counts, summarize_chain, AlphaPrior, ChainOutput, Coupling,
    GmcHyperparams, GmcOptions,
};
use crate::ingest::{ingest_events, ingest_events_path, write_events_csv, EventFormat, Ingested};
use crate::model::{bin_events, fold_periodic, BinGrid};
use crate::report::{
    bands_from_posterior, write_report, write_report_path, FitReport, ReportBand,
    ReportDiagnostics, ReportFormat,
};
use crate::rj::{run_rj, ModelIndexPrior, RjConfig, RjOutput};
use crate::rng::RngStream;
use crate::sim::{
    contraction_experiment, mse_experiment, simulate_poisson, BinRule, NamedIntensity,
};

#[derive(Parser)]
#[command(
    name = "ppinfer",
    version,
    about = "Bayesian intensity estimation for replicated Poisson point processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit an intensity estimate and write a report.
    Fit(Box<FitArgs>),
    /// Evidence profile over candidate bin counts (empirical Bayes).
    SelectBins(SelectBinsArgs),
    /// Simulate replicated observations of a named intensity.
    Simulate(SimulateArgs),
    /// Consistency/contraction experiment tables.
    Experiment(ExperimentArgs),
    /// Autocorrelation and effective-sample-size extraction from a saved chain.
    Diagnostics(DiagnosticsArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Event input path ('-' for stdin).
    #[arg(long)]
    input: Option<String>,
    /// Input format: csv | plain.
    #[arg(long)]
    format: Option<String>,
    /// Observation horizon T (otherwise from the file or the data maximum).
    #[arg(long)]
    horizon: Option<f64>,
    /// Key=value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Estimation method: conjugate | gmc | rj.
    #[arg(long)]
    method: Option<String>,
    /// Bin spec: an integer, 'rule', or 'ebayes:LO..HI'.
    #[arg(long)]
    bins: Option<String>,
    /// Independent-gamma prior shape (conjugate and rj).
    #[arg(long)]
    alpha: Option<f64>,
    /// Independent-gamma prior rate (conjugate and rj).
    #[arg(long)]
    beta: Option<f64>,
    /// Replace --beta by the evidence fixed point for the given alpha.
    #[arg(long)]
    calibrate_beta: bool,
    /// Chain-prior shape at the origin (gmc).
    #[arg(long)]
    alpha1: Option<f64>,
    /// Chain-prior rate at the origin (gmc).
    #[arg(long)]
    beta1: Option<f64>,
    /// Coupling prior: exp:RATE | gamma:SHAPE:RATE | uniform:UPPER | levy |
    /// fixed:VALUE (gmc).
    #[arg(long)]
    alpha_prior: Option<String>,
    /// MCMC iterations (gmc and rj).
    #[arg(long)]
    iters: Option<usize>,
    /// Burn-in fraction in [0, 1).
    #[arg(long)]
    burn_frac: Option<f64>,
    /// Credible levels, comma separated.
    #[arg(long)]
    levels: Option<String>,
    /// Fold event times modulo this period before fitting.
    #[arg(long)]
    period: Option<f64>,
    /// Up/down proposal probability (rj), in (0, 1/2).
    #[arg(long)]
    eta: Option<f64>,
    /// Model-index prior: uniform:NMAX | shiftpoisson:MEAN:NMAX (rj).
    #[arg(long)]
    model_prior: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Allow running a stochastic method without a pinned seed.
    #[arg(long)]
    no_seed: bool,
    /// Report output path ('-' for stdout).
    #[arg(long)]
    output: Option<String>,
    /// Report format: json | csv.
    #[arg(long)]
    report_format: Option<String>,
    /// Also write the kept chain as CSV (gmc: alpha and bin traces; rj: model index).
    #[arg(long)]
    save_chain: Option<PathBuf>,
}

#[derive(Args)]
struct SelectBinsArgs {
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    /// Candidate range LO..HI (default 1..min(200, total events)).
    #[arg(long)]
    candidates: Option<String>,
    #[arg(long)]
    output: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Intensity spec: oscillating_exponential | bart_simpson | step_sine |
    /// constant:LEVEL:HORIZON | linear:INTERCEPT:SLOPE:HORIZON.
    #[arg(long)]
    intensity: String,
    /// Number of replicates.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_seed: bool,
    #[arg(long)]
    output: Option<String>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// mse | contraction.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    intensity: String,
    /// Comma-separated sample sizes.
    #[arg(long, default_value = "50,500,5000")]
    sizes: String,
    #[arg(long, default_value_t = 50)]
    replications: usize,
    /// Holder regularity of the truth, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    h: f64,
    /// Proportionality constant in the bin schedule N = round(c n^{1/(2h+1)}).
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Fix the bin count instead of scaling it with n.
    #[arg(long)]
    fixed_bins: Option<usize>,
    /// Ball radius multiplier (contraction).
    #[arg(long, default_value_t = 3.0)]
    m: f64,
    /// Posterior draws per dataset (contraction).
    #[arg(long, default_value_t = 1000)]
    draws: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_seed: bool,
    #[arg(long)]
    output: Option<String>,
}

#[derive(Args)]
struct DiagnosticsArgs {
    /// Chain CSV written by `fit --save-chain`.
    #[arg(long)]
    chain: PathBuf,
    /// Column to analyse (default: alpha if present, else the first trace).
    #[arg(long)]
    column: Option<String>,
    #[arg(long, default_value_t = 20)]
    max_lag: usize,
    #[arg(long)]
    output: Option<String>,
}

/// Entry point used by the binary and by tests. Returns the process exit
/// status.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Fit(args) => run_fit(*args),
        Command::SelectBins(args) => run_select_bins(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Experiment(args) => run_experiment(args),
        Command::Diagnostics(args) => run_diagnostics(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn open_output(path: Option<&str>) -> Result<Box<dyn Write>> {
    match path {
        None | Some("-") => Ok(Box::new(std::io::stdout().lock())),
        Some(p) => Ok(Box::new(File::create(p)?)),
    }
}

fn ingest_from(spec: &str, format: EventFormat, horizon: Option<f64>) -> Result<Ingested> {
    if spec == "-" {
        let mut buf = Vec::new();
        std::io::stdin().lock().read_to_end(&mut buf)?;
        ingest_events(BufReader::new(&buf[..]), format, horizon)
    } else {
        ingest_events_path(Path::new(spec), format, horizon)
    }
}

fn resolve_seed(seed: Option<u64>, no_seed: bool, what: &str) -> Result<u64> {
    match seed {
        Some(s) => Ok(s),
        None if no_seed => Ok(rand::random()),
        None => Err(Error::Config(format!(
            "{what} is stochastic: pass --seed <u64>, or --no-seed to draw one"
        ))),
    }
}

fn parse_levels(spec: &str) -> Result<Vec<f64>> {
    let levels: Vec<f64> = spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad credible level '{s}'")))
        })
        .collect::<Result<_>>()?;
    for &l in &levels {
        if !(l > 0.0 && l < 1.0) {
            return Err(Error::Config(format!("credible level {l} outside (0,1)")));
        }
    }
    Ok(levels)
}

fn parse_range(spec: &str) -> Result<Vec<usize>> {
    let (lo, hi) = spec
        .split_once("..")
        .ok_or_else(|| Error::Config(format!("expected LO..HI, got '{spec}'")))?;
    let lo: usize =
        lo.parse().map_err(|_| Error::Config(format!("bad range start '{lo}'")))?;
    let hi: usize = hi.parse().map_err(|_| Error::Config(format!("bad range end '{hi}'")))?;
    if lo == 0 || hi < lo {
        return Err(Error::Config(format!("range {spec} must satisfy 1 <= LO <= HI")));
    }
    Ok((lo..=hi).collect())
}

fn parse_alpha_prior(spec: &str) -> Result<Coupling> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| -> Result<f64> {
        s.parse().map_err(|_| Error::Config(format!("bad number '{s}' in '{spec}'")))
    };
    let coupling = match parts.as_slice() {
        ["exp", rate] => {
            Coupling::Tied { prior: AlphaPrior::Exponential { rate: num(rate)? }, init: 1.0 }
        }
        ["gamma", shape, rate] => Coupling::Tied {
            prior: AlphaPrior::Gamma { shape: num(shape)?, rate: num(rate)? },
            init: 1.0,
        },
        ["uniform", upper] => {
            Coupling::Tied { prior: AlphaPrior::Uniform { upper: num(upper)? }, init: 1.0 }
        }
        ["levy"] => Coupling::Tied { prior: AlphaPrior::Levy, init: 1.0 },
        ["fixed", value] => {
            let v = num(value)?;
            Coupling::Fixed { alpha_zeta: v, alpha_psi: v }
        }
        ["fixed", az, ap] => Coupling::Fixed { alpha_zeta: num(az)?, alpha_psi: num(ap)? },
        _ => return Err(Error::Config(format!("unknown coupling prior '{spec}'"))),
    };
    Ok(coupling)
}

fn parse_model_prior(spec: &str) -> Result<ModelIndexPrior> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["uniform", n_max] => {
            let n_max: usize = n_max
                .parse()
                .map_err(|_| Error::Config(format!("bad n_max in '{spec}'")))?;
            Ok(ModelIndexPrior::Uniform { n_max })
        }
        ["shiftpoisson", mean, n_max] => {
            let mean: f64 =
                mean.parse().map_err(|_| Error::Config(format!("bad mean in '{spec}'")))?;
            let n_max: usize = n_max
                .parse()
                .map_err(|_| Error::Config(format!("bad n_max in '{spec}'")))?;
            Ok(ModelIndexPrior::ShiftedPoisson { mean, n_max })
        }
        _ => Err(Error::Config(format!("unknown model prior '{spec}'"))),
    }
}

/// Flat key=value config file; '#' comments and blank lines ignored.
fn read_config_file(path: &Path) -> Result<HashMap<String, String>> {
    let file = File::open(path)
        .map_err(|e| Error::Config(format!("cannot open config {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| {
            Error::Config(format!("config line {}: expected key=value, got '{trimmed}'", idx + 1))
        })?;
        map.insert(key.trim().replace('-', "_"), value.trim().to_string());
    }
    Ok(map)
}

fn config_get<T: std::str::FromStr>(
    cfg: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>> {
    match cfg.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|_| Error::Config(format!("config key '{key}': bad value '{raw}'"))),
    }
}

/// Fully resolved fit settings (flags override the config file; defaults
/// fill the rest).
struct FitSettings {
    input: String,
    format: EventFormat,
    horizon: Option<f64>,
    method: String,
    bins: String,
    alpha: f64,
    beta: f64,
    calibrate_beta: bool,
    alpha1: f64,
    beta1: f64,
    alpha_prior: String,
    iters: usize,
    burn_frac: f64,
    levels: Vec<f64>,
    period: Option<f64>,
    eta: f64,
    model_prior: String,
    seed: Option<u64>,
    no_seed: bool,
    output: Option<String>,
    report_format: ReportFormat,
    save_chain: Option<PathBuf>,
}

impl FitSettings {
    fn resolve(args: FitArgs) -> Result<Self> {
        let cfg = match &args.config {
            Some(path) => read_config_file(path)?,
            None => HashMap::new(),
        };
        let input = args
            .input
            .or(config_get(&cfg, "input")?)
            .ok_or_else(|| Error::Config("missing --input (or config key 'input')".into()))?;
        let format =
            EventFormat::parse(&args.format.or(config_get(&cfg, "format")?).unwrap_or_else(|| "csv".into()))?;
        let method = args.method.or(config_get(&cfg, "method")?).unwrap_or_else(|| "gmc".into());
        if !matches!(method.as_str(), "conjugate" | "gmc" | "rj") {
            return Err(Error::Config(format!("unknown method '{method}'")));
        }
        let burn_frac =
            args.burn_frac.or(config_get(&cfg, "burn_frac")?).unwrap_or(0.5);
        if !(0.0..1.0).contains(&burn_frac) {
            return Err(Error::Config(format!("burn fraction {burn_frac} outside [0,1)")));
        }
        let levels =
            parse_levels(&args.levels.or(config_get(&cfg, "levels")?).unwrap_or_else(|| "0.75,0.95".into()))?;
        Ok(FitSettings {
            input,
            format,
            horizon: args.horizon.or(config_get(&cfg, "horizon")?),
            method,
            bins: args.bins.or(config_get(&cfg, "bins")?).unwrap_or_else(|| "rule".into()),
            alpha: args.alpha.or(config_get(&cfg, "alpha")?).unwrap_or(0.1),
            beta: args.beta.or(config_get(&cfg, "beta")?).unwrap_or(0.1),
            calibrate_beta: args.calibrate_beta
                || config_get::<bool>(&cfg, "calibrate_beta")?.unwrap_or(false),
            alpha1: args.alpha1.or(config_get(&cfg, "alpha1")?).unwrap_or(0.1),
            beta1: args.beta1.or(config_get(&cfg, "beta1")?).unwrap_or(0.1),
            alpha_prior: args
                .alpha_prior
                .or(config_get(&cfg, "alpha_prior")?)
                .unwrap_or_else(|| "exp:0.1".into()),
            iters: args.iters.or(config_get(&cfg, "iters")?).unwrap_or(30_000),
            burn_frac,
            levels,
            period: args.period.or(config_get(&cfg, "period")?),
            eta: args.eta.or(config_get(&cfg, "eta")?).unwrap_or(0.45),
            model_prior: args
                .model_prior
                .or(config_get(&cfg, "model_prior")?)
                .unwrap_or_else(|| "uniform:50".into()),
            seed: args.seed.or(config_get(&cfg, "seed")?),
            no_seed: args.no_seed || config_get::<bool>(&cfg, "no_seed")?.unwrap_or(false),
            output: args.output.or(config_get(&cfg, "output")?),
            report_format: ReportFormat::parse(
                &args
                    .report_format
                    .or(config_get(&cfg, "report_format")?)
                    .unwrap_or_else(|| "json".into()),
            )?,
            save_chain: args.save_chain,
        })
    }

    fn echo(&self, n_bins: usize) -> Vec<(String, String)> {
        let mut pairs = vec![
            ("method".to_string(), self.method.clone()),
            ("bins".to_string(), self.bins.clone()),
            ("n_bins".to_string(), n_bins.to_string()),
            ("levels".to_string(), self.levels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",")),
        ];
        match self.method.as_str() {
            "conjugate" => {
                pairs.push(("alpha".into(), self.alpha.to_string()));
                pairs.push(("beta".into(), self.beta.to_string()));
                pairs.push(("calibrate_beta".into(), self.calibrate_beta.to_string()));
            }
            "gmc" => {
                pairs.push(("alpha1".into(), self.alpha1.to_string()));
                pairs.push(("beta1".into(), self.beta1.to_string()));
                pairs.push(("alpha_prior".into(), self.alpha_prior.clone()));
                pairs.push(("iters".into(), self.iters.to_string()));
                pairs.push(("burn_frac".into(), self.burn_frac.to_string()));
            }
            "rj" => {
                pairs.push(("alpha".into(), self.alpha.to_string()));
                pairs.push(("beta".into(), self.beta.to_string()));
                pairs.push(("eta".into(), self.eta.to_string()));
                pairs.push(("model_prior".into(), self.model_prior.clone()));
                pairs.push(("iters".into(), self.iters.to_string()));
                pairs.push(("burn_frac".into(), self.burn_frac.to_string()));
            }
            _ => unreachable!("validated"),
        }
        if let Some(p) = self.period {
            pairs.push(("period".into(), p.to_string()));
        }
        pairs
    }
}

fn run_fit(args: FitArgs) -> Result<()> {
    let settings = FitSettings::resolve(args)?;
    let started = Instant::now();
    let ingested = ingest_from(&settings.input, settings.format, settings.horizon)?;
    for w in &ingested.warnings {
        eprintln!("warning: {w}");
    }
    let mut warnings = ingested.warnings.clone();
    if ingested.horizon_from_data {
        warnings.push("horizon taken from the data maximum".into());
    }
    let data = match settings.period {
        Some(period) => fold_periodic(&ingested.series, period)?,
        None => ingested.series,
    };

    // Resolve the bin count.
    let prior = IndepGammaPrior::new(settings.alpha, settings.beta)?;
    let (n_bins, bin_selection) = match settings.bins.as_str() {
        "rule" => (rule_of_thumb_bins(&data), "rule".to_string()),
        spec if spec.starts_with("ebayes:") => {
            let candidates = parse_range(&spec["ebayes:".len()..])?;
            let (best, _) = select_bins_empirical_bayes(&data, prior, &candidates)?;
            (best, spec.to_string())
        }
        spec => {
            let n: usize = spec
                .parse()
                .map_err(|_| Error::Config(format!("bad bin spec '{spec}'")))?;
            if n == 0 {
                return Err(Error::Config("bin count must be >= 1".into()));
            }
            (n, format!("explicit:{n}"))
        }
    };

    let grid = BinGrid::uniform(data.horizon(), n_bins)?;
    let stochastic = matches!(settings.method.as_str(), "gmc" | "rj");
    let seed = if stochastic {
        Some(resolve_seed(settings.seed, settings.no_seed, "this fit")?)
    } else {
        settings.seed
    };

    let burn_in = |iters: usize| (iters as f64 * settings.burn_frac).floor() as usize;
    let mut diagnostics = ReportDiagnostics::default();
    let (mean, bands): (Vec<f64>, Vec<ReportBand>) = match settings.method.as_str() {
        "conjugate" => {
            let counts = bin_events(&data, &grid)?;
            let beta = if settings.calibrate_beta {
                let b = calibrate_beta(&counts, settings.alpha)?;
                warnings.push(format!("beta calibrated to {b}"));
                b
            } else {
                settings.beta
            };
            let post = fit_conjugate(&counts, IndepGammaPrior::new(settings.alpha, beta)?);
            let band = credible_band(&post, &settings.levels)?;
            bands_from_posterior(&band)
        }
        "gmc" => {
            let counts = bin_events(&data, &grid)?;
            let coupling = parse_alpha_prior(&settings.alpha_prior)?;
            let hp = GmcHyperparams::new(settings.alpha1, settings.beta1, coupling)?;
            let opts = GmcOptions::with_iterations(settings.iters, burn_in(settings.iters));
            let out =
                run_gmc_counts(&counts, &hp, &opts, RngStream::new(seed.expect("stochastic")))?;
            gmc_diagnostics(&out, &mut diagnostics);
            if let Some(path) = &settings.save_chain {
                save_gmc_chain(&out, path)?;
            }
            let band = summarize_chain(&out, &grid, &settings.levels)?;
            bands_from_posterior(&band)
        }
        "rj" => {
            let model_prior = parse_model_prior(&settings.model_prior)?;
            let cfg = RjConfig {
                eta: settings.eta,
                prior,
                model_prior,
                iterations: settings.iters,
                burn_in: burn_in(settings.iters),
                draw_heights: true,
                init: None,
            };
            let out = run_rj(&data, &cfg, RngStream::new(seed.expect("stochastic")))?;
            if let Some(path) = &settings.save_chain {
                save_rj_chain(&out, path)?;
            }
            let band = rj_band(&out, &grid, &settings.levels)?;
            diagnostics.model_frequencies = Some(out.frequencies.clone());
            let chain_f64: Vec<f64> = out.chain.iter().map(|&n| n as f64).collect();
            diagnostics.acf_series = Some("model_index".into());
            diagnostics.acf = autocorrelation(&chain_f64, 20.min(chain_f64.len() - 1))[1..].to_vec();
            diagnostics.ess = Some(effective_sample_size(&chain_f64));
            bands_from_posterior(&band)
        }
        _ => unreachable!("validated"),
    };

    let report = FitReport {
        method: settings.method.clone(),
        seed,
        horizon: data.horizon(),
        n_replicates: data.n_replicates(),
        n_events: data.total_events(),
        n_bins,
        bin_selection,
        config: settings.echo(n_bins),
        warnings,
        grid_edges: grid.edges().to_vec(),
        mean,
        bands,
        diagnostics,
        timing_seconds: started.elapsed().as_secs_f64(),
    };
    match settings.output.as_deref() {
        None | Some("-") => {
            let mut out = std::io::stdout().lock();
            write_report(&report, &mut out, settings.report_format)?;
        }
        Some(path) => write_report_path(&report, Path::new(path), settings.report_format)?,
    }
    Ok(())
}

fn gmc_diagnostics(out: &ChainOutput, diagnostics: &mut ReportDiagnostics) {
    diagnostics.mwg_acceptance = out.mwg_acceptance_rate();
    let alpha = out.alpha_series();
    let series: Vec<f64> = if alpha.is_empty() { out.bin_series(0) } else { alpha.to_vec() };
    diagnostics.acf_series = Some(if alpha.is_empty() { "psi_1".into() } else { "alpha".into() });
    if !alpha.is_empty() {
        let mean = alpha.iter().sum::<f64>() / alpha.len() as f64;
        let var = alpha.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>()
            / (alpha.len() - 1).max(1) as f64;
        diagnostics.alpha_mean = Some(mean);
        diagnostics.alpha_sd = Some(var.sqrt());
    }
    let max_lag = 20.min(series.len().saturating_sub(1));
    diagnostics.acf = autocorrelation(&series, max_lag)[1..].to_vec();
    diagnostics.ess = Some(effective_sample_size(&series));
}

/// Pointwise summaries of reversible-jump height draws on a display grid:
/// every kept draw is a step function on its own model grid, evaluated here
/// at the display-bin midpoints.
fn rj_band(out: &RjOutput, display: &BinGrid, levels: &[f64]) -> Result<PosteriorBand> {
    let heights = out
        .heights
        .as_ref()
        .ok_or_else(|| Error::Config("reversible-jump run kept no height draws".into()))?;
    if heights.is_empty() {
        return Err(Error::Config("no kept draws to summarise".into()));
    }
    let n_bins = display.n_bins();
    let mut mean = vec![0.0; n_bins];
    let mut per_bin: Vec<Vec<f64>> = vec![Vec::with_capacity(heights.len()); n_bins];
    for draw in heights {
        for k in 0..n_bins {
            let mid = 0.5 * (display.edges()[k] + display.edges()[k + 1]);
            let v = draw.evaluate(mid);
            mean[k] += v;
            per_bin[k].push(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= heights.len() as f64);
    let mut bands = Vec::with_capacity(levels.len());
    for &level in levels {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Parameter(format!("credibility level must be in (0,1), got {level}")));
        }
        let mut lower = Vec::with_capacity(n_bins);
        let mut upper = Vec::with_capacity(n_bins);
        for series in per_bin.iter_mut() {
            series.sort_by(|a, b| a.partial_cmp(b).unwrap());
            lower.push(quantile_type7(series, (1.0 - level) / 2.0));
            upper.push(quantile_type7(series, (1.0 + level) / 2.0));
        }
        bands.push(crate::conjugate::BandLevel { level, lower, upper });
    }
    PosteriorBand::new(display.clone(), mean, bands)
}

fn save_gmc_chain(out: &ChainOutput, path: &Path) -> Result<()> {
    let mut file = File::create(path)?;
    let has_alpha = !out.alpha_series().is_empty();
    let mut header = String::from("iter");
    if has_alpha {
        header.push_str(",alpha");
    }
    for k in 0..out.n_bins() {
        header.push_str(&format!(",psi_{}", k + 1));
    }
    writeln!(file, "{header}")?;
    for i in 0..out.kept() {
        let mut row = format!("{}", i + 1);
        if has_alpha {
            row.push_str(&format!(",{}", out.alpha_series()[i]));
        }
        for &v in out.psi_row(i) {
            row.push_str(&format!(",{v}"));
        }
        writeln!(file, "{row}")?;
    }
    Ok(())
}

fn save_rj_chain(out: &RjOutput, path: &Path) -> Result<()> {
    let mut file = File::create(path)?;
    writeln!(file, "iter,model_index")?;
    for (i, &n) in out.chain.iter().enumerate() {
        writeln!(file, "{},{n}", i + 1)?;
    }
    Ok(())
}

fn run_select_bins(args: SelectBinsArgs) -> Result<()> {
    let input = args
        .input
        .ok_or_else(|| Error::Config("missing --input".into()))?;
    let format = EventFormat::parse(&args.format.unwrap_or_else(|| "csv".into()))?;
    let ingested = ingest_from(&input, format, args.horizon)?;
    for w in &ingested.warnings {
        eprintln!("warning: {w}");
    }
    let prior = IndepGammaPrior::new(args.alpha, args.beta)?;
    let candidates = match args.candidates {
        Some(spec) => parse_range(&spec)?,
        None => crate::conjugate::default_bin_candidates(&ingested.series),
    };
    let (best, profile) = select_bins_empirical_bayes(&ingested.series, prior, &candidates)?;
    let mut out = open_output(args.output.as_deref())?;
    writeln!(out, "# selected={best}")?;
    writeln!(out, "n_bins,log_marginal_likelihood")?;
    for (n, lml) in profile {
        writeln!(out, "{n},{lml}")?;
    }
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let intensity = NamedIntensity::parse(&args.intensity)?;
    let seed = resolve_seed(args.seed, args.no_seed, "simulate")?;
    let mut rng = RngStream::new(seed);
    let data = simulate_poisson(&mut rng, &intensity, args.n)?;
    let mut out = open_output(args.output.as_deref())?;
    writeln!(out, "# intensity={} seed={seed}", intensity.name())?;
    write_events_csv(&data, &mut out)?;
    Ok(())
}

fn run_experiment(args: ExperimentArgs) -> Result<()> {
    let intensity = NamedIntensity::parse(&args.intensity)?;
    let sizes: Vec<usize> = args
        .sizes
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad sample size '{s}'")))
        })
        .collect::<Result<_>>()?;
    let seed = resolve_seed(args.seed, args.no_seed, "experiment")?;
    let prior = IndepGammaPrior::new(args.alpha, args.beta)?;
    let root = RngStream::new(seed);
    let mut out = open_output(args.output.as_deref())?;
    writeln!(out, "n,N,metric,value,seed")?;
    match args.kind.as_str() {
        "mse" => {
            let rule = match args.fixed_bins {
                Some(n) => BinRule::Fixed(n),
                None => BinRule::RateScaled { h: args.h, c: args.c },
            };
            let rows =
                mse_experiment(&intensity, &sizes, rule, args.replications, prior, &root)?;
            for row in rows {
                writeln!(out, "{},{},mse,{},{seed}", row.n, row.n_bins, row.mean_sq_error)?;
            }
        }
        "contraction" => {
            let rows = contraction_experiment(
                &intensity, &sizes, args.h, args.c, args.m, args.draws, prior, &root,
            )?;
            for row in rows {
                writeln!(out, "{},{},epsilon,{},{seed}", row.n, row.n_bins, row.epsilon)?;
                writeln!(
                    out,
                    "{},{},mass_outside,{},{seed}",
                    row.n, row.n_bins, row.mass_outside
                )?;
            }
        }
        other => return Err(Error::Config(format!("unknown experiment kind '{other}'"))),
    }
    Ok(())
}

fn run_diagnostics(args: DiagnosticsArgs) -> Result<()> {
    let file = File::open(&args.chain)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", args.chain.display())))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data("empty chain file".into()))??;
    let columns: Vec<String> = header.trim().split(',').map(str::to_string).collect();
    let column = match args.column {
        Some(c) => c,
        None if columns.iter().any(|c| c == "alpha") => "alpha".into(),
        None => columns
            .iter()
            .find(|c| c.as_str() != "iter")
            .cloned()
            .ok_or_else(|| Error::Data("chain file has no trace columns".into()))?,
    };
    let idx = columns
        .iter()
        .position(|c| *c == column)
        .ok_or_else(|| Error::Data(format!("no column '{column}' in chain file")))?;
    let mut series = Vec::new();
    for (row_idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let field = line
            .trim()
            .split(',')
            .nth(idx)
            .ok_or_else(|| Error::Data(format!("row {}: missing column {column}", row_idx + 2)))?;
        series.push(field.parse::<f64>().map_err(|_| {
            Error::Data(format!("row {}: bad number '{field}'", row_idx + 2))
        })?);
    }
    if series.len() < 2 {
        return Err(Error::Data("chain too short for diagnostics".into()));
    }
    let max_lag = args.max_lag.min(series.len() - 1);
    let acf = autocorrelation(&series, max_lag);
    let ess = effective_sample_size(&series);
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
        / (series.len() - 1) as f64;
    let mut out = open_output(args.output.as_deref())?;
    writeln!(out, "series,stat,lag,value")?;
    for (lag, rho) in acf.iter().enumerate().skip(1) {
        writeln!(out, "{column},acf,{lag},{rho}")?;
    }
    writeln!(out, "{column},ess,,{ess}")?;
    writeln!(out, "{column},mean,,{mean}")?;
    writeln!(out, "{column},sd,,{}", var.sqrt())?;
    Ok(())
}
