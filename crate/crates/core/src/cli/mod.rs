//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a verification check fails, 2 on usage or
//! configuration errors. `CONTRARIAN_THREADS` caps the worker pool.

pub mod config;
pub mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::bonus::{posterior_cutoff, proxy_cutoff, BonusKind, Popularity, PopularitySource};
use crate::cascade::{simulate_ensemble, EnsembleSummary, PathDiagnostics, SimulationConfig};
use crate::error::ModelError;
use crate::gaussian::{signal_threshold, threshold_k_sensitivity, Belief};
use crate::precision::{investment_region, precision_profile};
use crate::verify::{parse_check_ids, run_all, Calibration, CheckReport, VerifyConfig};
use crate::welfare::{compare_published_table, detect_shape, uniform_grid, welfare_curves, BeliefDistribution};
use config::{OutputFormat, RunConfig};
use output::{curve_rows, region_rows, CurveRow, PathWriter, ProfileRow};

pub const THREADS_ENV: &str = "CONTRARIAN_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(
    name = "contrarian",
    version,
    about = "Social learning with nonconformist preferences"
)]
pub struct Cli {
    /// Flat JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_snake<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// `proportional` or `fixed-indicator`.
    #[arg(long, value_parser = parse_snake::<BonusKind>)]
    pub bonus_kind: Option<BonusKind>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub cost_c: Option<f64>,
    #[arg(long)]
    pub cost_f: Option<f64>,
    /// `proxy-from-belief` or `empirical-counts`.
    #[arg(long, value_parser = parse_snake::<PopularitySource>)]
    pub popularity_mode: Option<PopularitySource>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    /// Comma-separated k values.
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub k_lo: Option<f64>,
    #[arg(long)]
    pub k_hi: Option<f64>,
    #[arg(long)]
    pub k_points: Option<usize>,
    #[arg(long)]
    pub mu_lo: Option<f64>,
    #[arg(long)]
    pub mu_hi: Option<f64>,
    #[arg(long)]
    pub mu_points: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Posterior and proxy cutoffs at a belief.
    Cutoff {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        mu: f64,
        /// Share of earlier agents choosing 1; defaults to the belief.
        #[arg(long)]
        p1: Option<f64>,
    },
    /// Signal threshold and its sensitivity to k.
    Threshold {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
    },
    /// Chosen precision over a belief grid, per k.
    Precision {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Investment region endpoints per (k, F).
    InvestRegion {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_delimiter = ',')]
        cost_f_grid: Option<Vec<f64>>,
    },
    /// Aggregate welfare curves per evaluator weight.
    Welfare {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_delimiter = ',')]
        lambda_grid: Option<Vec<f64>>,
        /// Also write the published-table comparison here.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Monte Carlo ensemble of paths.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        n_paths: Option<usize>,
        /// Ensemble summary JSON; standard output when omitted.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run verification checks; exits 1 if any fails.
    Verify {
        /// Check id, repeatable; all checks when omitted.
        #[arg(long = "check")]
        checks: Vec<String>,
        /// Cost calibration(s) as `c:F`, repeatable; both standard ones when omitted.
        #[arg(long = "calibration", value_parser = parse_calibration)]
        calibrations: Vec<Calibration>,
        #[arg(long)]
        n_paths: Option<usize>,
    },
    /// Regenerate every artifact for the two standard calibrations.
    Reproduce {
        #[arg(long, default_value = "artifacts")]
        out_dir: PathBuf,
        #[arg(long)]
        n_paths: Option<usize>,
    },
}

fn parse_calibration(s: &str) -> Result<Calibration, String> {
    let (c, f) = s.split_once(':').ok_or("expected c:F")?;
    let cal = Calibration {
        cost_c: c.trim().parse().map_err(|e| format!("{e}"))?,
        cost_f: f.trim().parse().map_err(|e| format!("{e}"))?,
    };
    cal.params(0.0).map_err(|e| e.to_string())?;
    Ok(cal)
}

impl ModelArgs {
    fn layer(&self, cfg: &mut RunConfig) {
        cfg.bonus_kind = self.bonus_kind.or(cfg.bonus_kind);
        cfg.k = self.k.or(cfg.k);
        cfg.cost_c = self.cost_c.or(cfg.cost_c);
        cfg.cost_f = self.cost_f.or(cfg.cost_f);
        cfg.popularity_mode = self.popularity_mode.or(cfg.popularity_mode);
    }
}

impl GridArgs {
    fn layer(&self, cfg: &mut RunConfig) {
        if self.k_grid.is_some() {
            cfg.k_grid = self.k_grid.clone();
        }
        cfg.k_lo = self.k_lo.or(cfg.k_lo);
        cfg.k_hi = self.k_hi.or(cfg.k_hi);
        cfg.k_points = self.k_points.or(cfg.k_points);
        cfg.mu_lo = self.mu_lo.or(cfg.mu_lo);
        cfg.mu_hi = self.mu_hi.or(cfg.mu_hi);
        cfg.mu_points = self.mu_points.or(cfg.mu_points);
    }
}

impl Cli {
    /// File configuration with every flag layered on top.
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let mut flags = RunConfig {
            seed: self.seed,
            output: self.output.clone(),
            format: self.format,
            ..RunConfig::default()
        };
        match &self.command {
            Command::Cutoff { model, .. } | Command::Threshold { model, .. } => model.layer(&mut flags),
            Command::Precision { model, grid } => {
                model.layer(&mut flags);
                grid.layer(&mut flags);
            }
            Command::InvestRegion {
                model,
                grid,
                cost_f_grid,
            } => {
                model.layer(&mut flags);
                grid.layer(&mut flags);
                flags.cost_f_grid = cost_f_grid.clone();
            }
            Command::Welfare {
                model,
                grid,
                lambda_grid,
                ..
            } => {
                model.layer(&mut flags);
                grid.layer(&mut flags);
                flags.lambda_grid = lambda_grid.clone();
            }
            Command::Simulate {
                model,
                horizon,
                n_paths,
                ..
            } => {
                model.layer(&mut flags);
                flags.horizon = *horizon;
                flags.n_paths = *n_paths;
            }
            Command::Verify { n_paths, .. } | Command::Reproduce { n_paths, .. } => flags.n_paths = *n_paths,
        }
        Ok(file.overlay(&flags).validated()?)
    }
}

/// Standard output or a file, buffered.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize + ?Sized>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn write_key_values(cfg: &RunConfig, pairs: &[(&str, f64)]) -> Result<(), CliError> {
    match cfg.format() {
        OutputFormat::Json => {
            let map: serde_json::Map<String, serde_json::Value> = pairs
                .iter()
                .map(|&(k, v)| (k.to_string(), serde_json::json!(v)))
                .collect();
            write_json(cfg.output.as_deref(), &map)
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(sink(cfg.output.as_deref())?);
            w.write_record(pairs.iter().map(|p| p.0))?;
            w.write_record(pairs.iter().map(|p| output::fmt_f64(p.1)))?;
            w.flush()?;
            Ok(())
        }
    }
}

fn cmd_cutoff(cfg: &RunConfig, mu: f64, p1: Option<f64>) -> Result<(), CliError> {
    let params = cfg.params()?;
    let belief = Belief::new(mu)?;
    let pop = match p1 {
        Some(p) => Popularity::new(p, PopularitySource::EmpiricalCounts)?,
        None => Popularity::proxy(belief.value())?,
    };
    let c = posterior_cutoff(&params.bonus, &pop);
    let mut pairs = vec![("mu", mu), ("k", params.k()), ("p1", pop.p1()), ("cutoff", c.raw)];
    if params.bonus.kind == BonusKind::Proportional {
        pairs.push(("proxy_cutoff", proxy_cutoff(params.k(), mu)?));
    }
    write_key_values(cfg, &pairs)
}

fn cmd_threshold(cfg: &RunConfig, mu: f64, rho: f64) -> Result<(), CliError> {
    let params = cfg.params()?;
    if params.bonus.kind != BonusKind::Proportional {
        return Err(ModelError::ProportionalOnly("the threshold sensitivity").into());
    }
    let belief = Belief::new(mu)?;
    let c = proxy_cutoff(params.k(), mu)?;
    let s = signal_threshold(belief, c, rho)?;
    let ds = threshold_k_sensitivity(belief, params.k(), rho)?;
    write_key_values(
        cfg,
        &[
            ("mu", mu),
            ("k", params.k()),
            ("rho", rho),
            ("proxy_cutoff", c),
            ("s_star", s),
            ("ds_dk", ds),
        ],
    )
}

fn profile_rows(cfg: &RunConfig, ks: &[f64], mus: &[f64]) -> Result<Vec<ProfileRow>, CliError> {
    let mut rows = Vec::new();
    for &k in ks {
        rows.extend(precision_profile(&cfg.params_at(k)?, mus)?.iter().map(ProfileRow::from));
    }
    Ok(rows)
}

fn emit_profile(cfg: &RunConfig, path: Option<&Path>, rows: &[ProfileRow]) -> Result<(), CliError> {
    match cfg.format() {
        OutputFormat::Json => write_json(path, rows),
        OutputFormat::Csv => Ok(output::write_profile(sink(path)?, rows)?),
    }
}

fn cmd_precision(cfg: &RunConfig) -> Result<(), CliError> {
    let rows = profile_rows(cfg, &cfg.k_grid()?, &cfg.beliefs()?.points())?;
    emit_profile(cfg, cfg.output.as_deref(), &rows)
}

fn region_table(cfg: &RunConfig, ks: &[f64], fs: &[f64], mus: &[f64]) -> Result<Vec<output::RegionRow>, CliError> {
    let mut regions = Vec::new();
    for &f in fs {
        for &k in ks {
            regions.push(investment_region(&cfg.params_at(k)?.with_fixed_cost(f)?, mus)?);
        }
    }
    Ok(region_rows(&regions))
}

fn cmd_invest_region(cfg: &RunConfig) -> Result<(), CliError> {
    let rows = region_table(cfg, &cfg.k_grid()?, &cfg.cost_f_grid(), &cfg.beliefs()?.points())?;
    match cfg.format() {
        OutputFormat::Json => write_json(cfg.output.as_deref(), &rows),
        OutputFormat::Csv => Ok(output::write_regions(sink(cfg.output.as_deref())?, &rows)?),
    }
}

fn welfare_rows(cfg: &RunConfig, ks: &[f64], default_lambdas: &[f64]) -> Result<Vec<CurveRow>, CliError> {
    let lambdas = cfg.lambdas(default_lambdas)?;
    let curves = welfare_curves(ks, &lambdas, &cfg.params()?, &cfg.beliefs()?)?;
    for curve in &curves {
        let series: Vec<f64> = curve.iter().map(|a| a.average).collect();
        if let Ok(shape) = detect_shape(&series) {
            eprintln!("lambda={} shape={shape:?}", curve[0].lambda);
        }
    }
    Ok(curve_rows(&curves))
}

fn cmd_welfare(cfg: &RunConfig, table: Option<&Path>) -> Result<(), CliError> {
    let rows = welfare_rows(cfg, &cfg.k_grid()?, &[0.0, 0.5, 1.0])?;
    match cfg.format() {
        OutputFormat::Json => write_json(cfg.output.as_deref(), &rows)?,
        OutputFormat::Csv => output::write_curves(sink(cfg.output.as_deref())?, &rows)?,
    }
    if let Some(path) = table {
        let comparison = compare_published_table(&cfg.params()?, &cfg.beliefs()?)?;
        output::write_table(sink(Some(path))?, &comparison)?;
    }
    Ok(())
}

/// Simulates the ensemble, optionally writing every path, and summarizes it.
fn run_simulation(cfg: &RunConfig, paths_out: Option<&Path>) -> Result<EnsembleSummary, CliError> {
    let params = cfg.params()?;
    let sim = SimulationConfig::new(params, cfg.horizon()).validated()?;
    let seed = cfg.seed();
    let paths = simulate_ensemble(&sim, cfg.n_paths(), seed)?;
    if let Some(path) = paths_out {
        match cfg.format() {
            OutputFormat::Json => write_json(Some(path), &paths)?,
            OutputFormat::Csv => {
                let mut w = PathWriter::new(sink(Some(path))?)?;
                for (i, p) in paths.iter().enumerate() {
                    w.write_path(i, p)?;
                }
                w.finish()?;
            }
        }
    }
    let diags = paths
        .iter()
        .map(|p| PathDiagnostics::from_path(p, &params))
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(EnsembleSummary::from_diagnostics(&sim, seed, &diags))
}

fn cmd_simulate(cfg: &RunConfig, summary: Option<&Path>) -> Result<(), CliError> {
    let s = run_simulation(cfg, cfg.output.as_deref())?;
    write_json(summary, &s)
}

fn verify_config(cfg: &RunConfig) -> VerifyConfig {
    let mut v = VerifyConfig {
        seed: cfg.seed(),
        ..VerifyConfig::default()
    };
    if let Some(n) = cfg.n_paths {
        v.sim_paths = n;
    }
    if let Some(h) = cfg.horizon {
        v.sim_horizon = h;
    }
    v
}

fn report_lines(reports: &[CheckReport]) {
    for r in reports {
        let cal = r
            .calibration
            .map(|c| format!(" c={} F={}", c.cost_c, c.cost_f))
            .unwrap_or_default();
        eprintln!(
            "{} {}{cal} ({} violations, {} skipped)",
            if r.passed { "PASS" } else { "FAIL" },
            r.check_id,
            r.violations.len(),
            r.skipped.len()
        );
    }
}

fn cmd_verify(cfg: &RunConfig, checks: &[String], calibrations: &[Calibration]) -> Result<bool, CliError> {
    let ids = parse_check_ids((!checks.is_empty()).then_some(checks))?;
    let cals = if calibrations.is_empty() {
        vec![Calibration::LIGHT_COST, Calibration::HEAVY_COST]
    } else {
        calibrations.to_vec()
    };
    let reports = run_all(&cals, &ids, &verify_config(cfg))?;
    report_lines(&reports);
    write_json(cfg.output.as_deref(), &reports)?;
    Ok(reports.iter().all(|r| r.passed))
}

fn cmd_reproduce(cfg: &RunConfig, out_dir: &Path) -> Result<bool, CliError> {
    std::fs::create_dir_all(out_dir)?;
    let light = cfg.clone().overlay(&RunConfig {
        cost_c: Some(Calibration::LIGHT_COST.cost_c),
        cost_f: Some(Calibration::LIGHT_COST.cost_f),
        k: Some(0.0),
        ..RunConfig::default()
    });
    let heavy = light.clone().overlay(&RunConfig {
        cost_f: Some(Calibration::HEAVY_COST.cost_f),
        ..RunConfig::default()
    });
    let mus = BeliefDistribution::default().points();
    let k_grid = uniform_grid(0.0, 1.2, 13);
    let csv_cfg = RunConfig {
        format: Some(OutputFormat::Csv),
        ..light.clone()
    };

    let profile = profile_rows(&light, &[0.0, 0.4, 0.8, 1.2], &mus)?;
    emit_profile(&csv_cfg, Some(&out_dir.join("precision_profile.csv")), &profile)?;

    let regions = region_table(
        &light,
        &k_grid,
        &[Calibration::LIGHT_COST.cost_f, Calibration::HEAVY_COST.cost_f],
        &mus,
    )?;
    output::write_regions(sink(Some(&out_dir.join("investment_regions.csv")))?, &regions)?;

    let mut curve_ks = k_grid.clone();
    curve_ks.push(2.0);
    let curves = welfare_rows(
        &RunConfig {
            lambda_grid: Some(vec![0.0, 0.5, 1.0]),
            ..heavy.clone()
        },
        &curve_ks,
        &[],
    )?;
    output::write_curves(sink(Some(&out_dir.join("welfare_curves.csv")))?, &curves)?;

    let table = compare_published_table(&light.params()?, &BeliefDistribution::default())?;
    output::write_table(sink(Some(&out_dir.join("welfare_table.csv")))?, &table)?;

    let mut summaries = Vec::new();
    for k in [0.0, 0.3] {
        let sim_cfg = RunConfig {
            k: Some(k),
            ..light.clone()
        };
        summaries.push(run_simulation(&sim_cfg, None)?);
    }
    write_json(Some(&out_dir.join("cascade_summary.json")), &summaries)?;

    let reports = run_all(
        &[Calibration::LIGHT_COST, Calibration::HEAVY_COST],
        &crate::verify::CheckId::ALL,
        &verify_config(cfg),
    )?;
    report_lines(&reports);
    write_json(Some(&out_dir.join("verify.json")), &reports)?;
    Ok(reports.iter().all(|r| r.passed))
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

/// Runs a parsed command; `Ok(false)` means a check failed.
pub fn execute(cli: &Cli) -> Result<bool, CliError> {
    let cfg = cli.run_config()?;
    match &cli.command {
        Command::Cutoff { mu, p1, .. } => cmd_cutoff(&cfg, *mu, *p1)?,
        Command::Threshold { mu, rho, .. } => cmd_threshold(&cfg, *mu, *rho)?,
        Command::Precision { .. } => cmd_precision(&cfg)?,
        Command::InvestRegion { .. } => cmd_invest_region(&cfg)?,
        Command::Welfare { table, .. } => cmd_welfare(&cfg, table.as_deref())?,
        Command::Simulate { summary, .. } => cmd_simulate(&cfg, summary.as_deref())?,
        Command::Verify {
            checks, calibrations, ..
        } => return cmd_verify(&cfg, checks, calibrations),
        Command::Reproduce { out_dir, .. } => return cmd_reproduce(&cfg, out_dir),
    }
    Ok(true)
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
