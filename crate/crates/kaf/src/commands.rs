//! Command-line interface.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kaf_core::eval::evaluate_forecast;
use kaf_core::forecast::{clip_probability, mean_threshold};
use kaf_core::kernels::Points;
use kaf_core::systems::{generate_circle, generate_l63, random_angle, CovariateSelector, L63Config};
use kaf_core::{
    build_basis, delay_embed, empirical_moments, fit_kpcr, Bandwidth, Basis, BasisConfig, CircleOracle, CircleParams,
    KernelFamily, KernelSpec, NormalizationMode, RegressionOracle, ResponseTransform, SkillReport, TimeSeriesDataset,
};

use crate::config::{parse_config, parse_recipe, to_args};
use crate::model_file::{self, StoredModel};
use crate::{csv_io, experiments, report, UsageError};

#[derive(Debug, Parser)]
#[command(name = "kaf", version, about = "Kernel analog forecasting of time series")]
pub struct Cli {
    /// Read default options from a `key = value` file; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a circle or Lorenz 63 dataset.
    Generate(GenerateArgs),
    /// Fit a forecast model to a training dataset.
    Train(TrainArgs),
    /// Write forecasts for every sample of a dataset.
    Predict(PredictArgs),
    /// Score a model on verification data.
    Evaluate(EvaluateArgs),
    /// Train and score over a list of parameter values.
    Sweep(SweepArgs),
    /// Execute the sections of a recipe file in order.
    Run(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum System {
    Circle,
    L63,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub system: System,
    #[arg(long, value_parser = parse_count)]
    pub n: usize,
    #[arg(long, value_parser = parse_positive)]
    pub dt: f64,
    /// Circle angular frequency.
    #[arg(long, default_value_t = std::f64::consts::SQRT_2, value_parser = parse_finite)]
    pub alpha: f64,
    /// Circle initial phase; defaults to a phase drawn from `--seed`.
    #[arg(long, value_parser = parse_finite)]
    pub omega0: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Lorenz 63 spinup time discarded before sampling.
    #[arg(long, default_value_t = 100.0, value_parser = parse_nonnegative)]
    pub spinup: f64,
    /// Lorenz 63 covariate: `full` or a single component `x1`, `x2`, `x3`.
    #[arg(long, default_value = "full", value_parser = parse_covariate)]
    pub covariate: CovariateSelector,
    /// Lorenz 63 response component (1, 2 or 3).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub response: u8,
    #[arg(long)]
    pub out: PathBuf,
}

/// Kernel, basis and forecast options shared by `train` and `sweep`.
#[derive(Debug, Clone, Args)]
pub struct ModelOptions {
    /// `gaussian` or `vb`, optionally suffixed `-markov` or `-diffusion`.
    #[arg(long, default_value = "vb-markov", value_parser = parse_kernel)]
    pub kernel: KernelChoice,
    /// Kernel bandwidth or `auto`.
    #[arg(long, default_value = "auto", value_parser = parse_bandwidth)]
    pub eps: Bandwidth,
    /// Density-estimation bandwidth (vb kernels) or `auto`.
    #[arg(long, default_value = "auto", value_parser = parse_bandwidth)]
    pub eps_tilde: Bandwidth,
    /// Dimension estimate (vb kernels) or `auto`.
    #[arg(long, default_value = "auto", value_parser = parse_bandwidth)]
    pub m_tilde: Bandwidth,
    /// Exponent of the diffusion-maps normalization.
    #[arg(long, default_value_t = 1.0, value_parser = parse_finite)]
    pub diffusion_alpha: f64,
    /// Number of eigenfunctions.
    #[arg(long, default_value_t = 20, value_parser = parse_count)]
    pub l: usize,
    /// Number of delay-coordinate lags; 1 disables embedding.
    #[arg(long, default_value_t = 1, value_parser = parse_count)]
    pub delays: usize,
    /// Lead steps: `start:step:stop` (inclusive) or a comma list.
    #[arg(long, default_value = "0", value_parser = parse_leads)]
    pub leads: Leads,
    #[arg(long, value_enum, default_value_t = TransformKind::Identity)]
    pub transform: TransformKind,
    /// Indicator threshold: `mean` of the training responses or a value.
    #[arg(long, default_value = "mean", value_parser = parse_theta)]
    pub theta: Theta,
    /// Also fit the conditional-variance error model.
    #[arg(long)]
    pub variance: bool,
    /// Relative eigenvalue cutoff for rank deficiency.
    #[arg(long, default_value_t = kaf_core::spectral::RANK_TOLERANCE, value_parser = parse_rank_tol)]
    pub rank_tol: f64,
    /// Use fewer than `--l` eigenfunctions when fewer lie above the cutoff.
    #[arg(long)]
    pub truncate_rank: bool,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelOptions,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Analytic regression functions for scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    Circle,
}

#[derive(Debug, Clone, Args)]
pub struct OracleOptions {
    /// Report the excess generalization error against this regression function.
    #[arg(long, value_enum)]
    pub oracle: Option<OracleKind>,
    /// Circle angular frequency used by the oracle.
    #[arg(long, default_value_t = std::f64::consts::SQRT_2, value_parser = parse_finite)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub oracle: OracleOptions,
    /// Report CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report JSON with the parameter echo.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Epsilon,
    Ell,
    N,
    Delays,
    Eta,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SweepArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub verif: PathBuf,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// Comma list, or `start:step:stop` for integer parameters.
    #[arg(long)]
    pub values: String,
    #[command(flatten)]
    pub model: ModelOptions,
    #[command(flatten)]
    pub oracle: OracleOptions,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub recipe: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelChoice {
    pub family: KernelFamily,
    pub normalization: Normalization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    None,
    Markov,
    Diffusion,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Leads(pub Vec<usize>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransformKind {
    Identity,
    Indicator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Theta {
    Mean,
    Value(f64),
}

fn parse_finite(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("expected a finite number, got {s:?}")),
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match parse_finite(s)? {
        v if v > 0.0 => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

fn parse_nonnegative(s: &str) -> Result<f64, String> {
    match parse_finite(s)? {
        v if v >= 0.0 => Ok(v),
        _ => Err(format!("expected a nonnegative number, got {s:?}")),
    }
}

fn parse_rank_tol(s: &str) -> Result<f64, String> {
    match parse_finite(s)? {
        v if (0.0..1.0).contains(&v) => Ok(v),
        _ => Err(format!("expected a value in [0, 1), got {s:?}")),
    }
}

fn parse_count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("expected a positive integer, got {s:?}")),
    }
}

fn parse_bandwidth(s: &str) -> Result<Bandwidth, String> {
    match s {
        "auto" => Ok(Bandwidth::Auto),
        _ => parse_positive(s).map(Bandwidth::Fixed),
    }
}

fn parse_theta(s: &str) -> Result<Theta, String> {
    match s {
        "mean" => Ok(Theta::Mean),
        _ => parse_finite(s).map(Theta::Value),
    }
}

fn parse_covariate(s: &str) -> Result<CovariateSelector, String> {
    match s {
        "full" => Ok(CovariateSelector::Full),
        "x1" => Ok(CovariateSelector::Component(0)),
        "x2" => Ok(CovariateSelector::Component(1)),
        "x3" => Ok(CovariateSelector::Component(2)),
        _ => Err(format!("expected full, x1, x2 or x3, got {s:?}")),
    }
}

fn parse_kernel(s: &str) -> Result<KernelChoice, String> {
    let (base, norm) = match s.split_once('-') {
        Some((b, "markov")) => (b, Normalization::Markov),
        Some((b, "diffusion")) => (b, Normalization::Diffusion),
        Some(_) => return Err(format!("unknown normalization in {s:?}")),
        None => (s, Normalization::None),
    };
    let family = match base {
        "gaussian" => KernelFamily::Gaussian,
        "vb" => KernelFamily::VariableBandwidth,
        _ => return Err(format!("unknown kernel family in {s:?}")),
    };
    Ok(KernelChoice {
        family,
        normalization: norm,
    })
}

/// Parses `start:step:stop` (inclusive) or a comma list of nonnegative integers.
pub fn parse_steps(s: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("expected start:step:stop or a comma list of integers, got {s:?}");
    let values: Vec<usize> = if s.contains(':') {
        let parts: Vec<usize> = s
            .split(':')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let [start, step, stop] = parts[..] else {
            return Err(bad());
        };
        if step == 0 || stop < start {
            return Err(bad());
        }
        (start..=stop).step_by(step).collect()
    } else {
        s.split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?
    };
    Ok(values)
}

fn parse_leads(s: &str) -> Result<Leads, String> {
    let leads = parse_steps(s)?;
    let mut sorted = leads.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != leads.len() {
        return Err(format!("duplicate lead in {s:?}"));
    }
    Ok(Leads(leads))
}

fn parse_float_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|p| parse_positive(p.trim())).collect()
}

impl ModelOptions {
    fn mode(&self) -> NormalizationMode {
        match self.kernel.normalization {
            Normalization::None => NormalizationMode::None,
            Normalization::Markov => NormalizationMode::SymmetricMarkov,
            Normalization::Diffusion => NormalizationMode::Diffusion {
                alpha: self.diffusion_alpha,
            },
        }
    }

    fn basis_config(&self) -> BasisConfig {
        let spec = KernelSpec {
            family: self.kernel.family,
            epsilon: self.eps,
            epsilon_tilde: self.eps_tilde,
            m_tilde: self.m_tilde,
            delays: self.delays,
        };
        let mut cfg = BasisConfig::new(spec, self.mode(), self.l);
        cfg.rank_tolerance = self.rank_tol;
        cfg.truncate_to_rank = self.truncate_rank;
        cfg
    }

    fn transform(&self, ds: &TimeSeriesDataset) -> ResponseTransform {
        match (self.transform, self.theta) {
            (TransformKind::Identity, _) => ResponseTransform::Identity,
            (TransformKind::Indicator, Theta::Mean) => mean_threshold(ds),
            (TransformKind::Indicator, Theta::Value(threshold)) => ResponseTransform::Indicator { threshold },
        }
    }

    /// Resolved options in `key = value` form.
    fn echo(&self) -> Vec<(String, String)> {
        let bw = |b: Bandwidth| match b {
            Bandwidth::Auto => "auto".to_string(),
            Bandwidth::Fixed(v) => v.to_string(),
        };
        let family = match self.kernel.family {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::VariableBandwidth => "vb",
        };
        let norm = match self.kernel.normalization {
            Normalization::None => "",
            Normalization::Markov => "-markov",
            Normalization::Diffusion => "-diffusion",
        };
        let theta = match self.theta {
            Theta::Mean => "mean".to_string(),
            Theta::Value(v) => v.to_string(),
        };
        let transform = match self.transform {
            TransformKind::Identity => "identity",
            TransformKind::Indicator => "indicator",
        };
        vec![
            ("kernel".into(), format!("{family}{norm}")),
            ("eps".into(), bw(self.eps)),
            ("eps-tilde".into(), bw(self.eps_tilde)),
            ("m-tilde".into(), bw(self.m_tilde)),
            ("diffusion-alpha".into(), self.diffusion_alpha.to_string()),
            ("l".into(), self.l.to_string()),
            ("delays".into(), self.delays.to_string()),
            (
                "leads".into(),
                self.leads.0.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
            ),
            ("transform".into(), transform.into()),
            ("theta".into(), theta),
            ("variance".into(), self.variance.to_string()),
            ("rank-tol".into(), self.rank_tol.to_string()),
            ("truncate-rank".into(), self.truncate_rank.to_string()),
        ]
    }
}

/// Parses `args` (without the program name), expanding `--config FILE`.
pub fn parse_args(args: &[String]) -> Result<Cli, clap::Error> {
    let expanded = expand_config(args).map_err(|e| clap::Error::raw(clap::error::ErrorKind::Io, format!("{e:#}\n")))?;
    Cli::try_parse_from(std::iter::once("kaf".to_string()).chain(expanded))
}

/// Inserts the entries of a `--config` file right after the subcommand name
/// so that explicit flags, which come later, override them.
fn expand_config(args: &[String]) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            config = Some(
                it.next()
                    .ok_or_else(|| UsageError("--config needs a file".into()))?
                    .clone(),
            );
        } else if let Some(path) = a.strip_prefix("--config=") {
            config = Some(path.to_string());
        } else {
            rest.push(a.clone());
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let text = std::fs::read_to_string(&path).map_err(|e| UsageError(format!("cannot read config {path}: {e}")))?;
    let entries = parse_config(&text)?;
    let at = rest
        .iter()
        .position(|a| !a.starts_with('-'))
        .map_or(rest.len(), |p| p + 1);
    let mut out = rest[..at].to_vec();
    out.extend(to_args(&entries));
    out.extend_from_slice(&rest[at..]);
    Ok(out)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate(&a),
        Command::Train(a) => train(&a),
        Command::Predict(a) => predict(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Run(a) => run_recipe(&a.recipe),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let ds = match a.system {
        System::Circle => {
            let params = CircleParams::new(a.alpha)?;
            generate_circle(&params, a.n, a.dt, a.omega0.unwrap_or_else(|| random_angle(a.seed)))?
        }
        System::L63 => {
            let mut cfg = L63Config::new(a.n, a.dt, a.seed);
            cfg.spinup_time = a.spinup;
            generate_l63(&cfg, a.covariate, usize::from(a.response - 1))?
        }
    };
    csv_io::write_dataset(&a.out, &ds, 0.0)?;
    let (mean, std) = empirical_moments(&ds);
    println!(
        "n={} dt={} m={} response_mean={mean} response_std={std}",
        ds.n(),
        ds.dt(),
        ds.dim()
    );
    Ok(())
}

fn embed(ds: TimeSeriesDataset, delays: usize) -> Result<TimeSeriesDataset> {
    Ok(if delays > 1 { delay_embed(&ds, delays)? } else { ds })
}

fn fit(opts: &ModelOptions, train: &TimeSeriesDataset, basis: Arc<Basis>) -> Result<kaf_core::ForecastModel> {
    let model = fit_kpcr(basis, train, &opts.leads.0, opts.transform(train))?;
    Ok(if opts.variance {
        model.with_error_model(train)?
    } else {
        model
    })
}

fn describe_basis(basis: &Basis) {
    let ev = basis.eigenvalues();
    println!("lambda_1={} lambda_l={} l={}", ev[0], ev[ev.len() - 1], ev.len());
    let kernel = basis.normalized_kernel().kernel();
    match kernel.bandwidth() {
        Some(b) => println!(
            "epsilon={} epsilon_tilde={} m_tilde={}",
            b.epsilon, b.epsilon_tilde, b.m_tilde
        ),
        None => println!("epsilon={}", kernel.epsilon()),
    }
}

fn train(a: &TrainArgs) -> Result<()> {
    let (raw, _) = csv_io::read_dataset(&a.data)?;
    let train = embed(raw, a.model.delays)?;
    let basis = Arc::new(build_basis(train.covariates(), train.dim(), &a.model.basis_config())?);
    describe_basis(&basis);
    let model = fit(&a.model, &train, basis)?;
    let mut params = vec![("data".to_string(), a.data.display().to_string())];
    params.extend(a.model.echo());
    model_file::save(&a.out, &StoredModel { model, params })?;
    Ok(())
}

/// Loads verification data and embeds it with the model's delays.
fn load_for_model(stored: &StoredModel, path: &Path) -> Result<(TimeSeriesDataset, f64)> {
    let (raw, t0) = csv_io::read_dataset(path)?;
    let delays = stored.model.basis().normalized_kernel().kernel().delays();
    let dim = stored.model.basis().dim();
    if raw.dim() * delays != dim {
        bail!(
            "data has {} covariates per sample, model expects {}",
            raw.dim(),
            dim / delays
        );
    }
    Ok((embed(raw, delays)?, t0 + (delays - 1) as f64 * stored.model.dt()))
}

fn predict(a: &PredictArgs) -> Result<()> {
    let stored = model_file::load(&a.model)?;
    let model = &stored.model;
    let (data, t0) = load_for_model(&stored, &a.data)?;
    let features = model.features(Points::new(data.covariates(), data.dim()))?;
    let mut writer = csv::Writer::from_writer(output(a.out.as_deref())?);
    let with_error = model.error_model().is_some();
    let mut header = vec!["t", "lead_step", "lead_time", "forecast"];
    if with_error {
        header.push("error");
    }
    writer.write_record(&header)?;
    for (k, &q) in model.leads().iter().enumerate() {
        let mut pred = model.predict_from_features(features.as_ref(), k)?;
        if model.transform().is_indicator() {
            pred.iter_mut().for_each(|p| *p = clip_probability(*p));
        }
        let err = if with_error {
            Some(model.error_from_features(features.as_ref(), k)?)
        } else {
            None
        };
        let tau = q as f64 * model.dt();
        for (j, p) in pred.iter().enumerate() {
            let mut row = vec![
                (t0 + j as f64 * data.dt()).to_string(),
                q.to_string(),
                tau.to_string(),
                p.to_string(),
            ];
            if let Some(e) = &err {
                row.push(e[j].to_string());
            }
            writer.write_record(&row)?;
        }
    }
    writer.flush()?;
    Ok(())
}

fn oracle(opts: &OracleOptions) -> Result<Option<Box<dyn RegressionOracle>>> {
    Ok(match opts.oracle {
        Some(OracleKind::Circle) => Some(Box::new(CircleOracle {
            params: CircleParams::new(opts.alpha)?,
        })),
        None => None,
    })
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let stored = model_file::load(&a.model)?;
    let (data, _) = load_for_model(&stored, &a.data)?;
    let oracle = oracle(&a.oracle)?;
    let mut report = evaluate_forecast(&stored.model, &data, oracle.as_deref())?;
    report.params = stored.params.clone();
    report.params.push(("model".into(), a.model.display().to_string()));
    report
        .params
        .push(("verification".into(), a.data.display().to_string()));
    if let Some(o) = a.oracle.oracle {
        report.params.push(("oracle".into(), format!("{o:?}").to_lowercase()));
        report.params.push(("alpha".into(), a.oracle.alpha.to_string()));
    }
    report::write_csv(output(a.out.as_deref())?, &report)?;
    if let Some(path) = &a.json {
        report::write_json(create(path)?, &report)?;
    }
    Ok(())
}

const SWEEP_HEADER: [&str; 9] = [
    "param",
    "param_value",
    "lead_step",
    "lead_time",
    "rmse",
    "normalized_rmse",
    "estimated_error_rms",
    "excess_gen_error",
    "status",
];

fn sweep(a: &SweepArgs) -> Result<()> {
    let (raw_train, _) = csv_io::read_dataset(&a.train)?;
    let (raw_verif, _) = csv_io::read_dataset(&a.verif)?;
    let oracle = oracle(&a.oracle)?;
    let oracle = oracle.as_deref();
    let name = format!("{:?}", a.param).to_lowercase();
    let labels: Vec<String>;
    let results: Vec<Result<SkillReport>> = match a.param {
        SweepParam::Ell => {
            let ells = parse_steps(&a.values).map_err(UsageError)?;
            if ells.contains(&0) {
                bail!(UsageError("ell values must be positive".into()));
            }
            labels = ells.iter().map(usize::to_string).collect();
            let train = embed(raw_train, a.model.delays)?;
            let verif = embed(raw_verif, a.model.delays)?;
            let mut cfg = a.model.basis_config();
            cfg.ell = *ells.iter().max().unwrap();
            match build_basis(train.covariates(), train.dim(), &cfg) {
                Ok(basis) => {
                    let transform = a.model.transform(&train);
                    experiments::ell_sweep(&basis, &train, &verif, &a.model.leads.0, transform, &ells, oracle)
                }
                Err(e) => ells.iter().map(|_| Err(e.clone().into())).collect(),
            }
        }
        SweepParam::Eta => {
            let etas = parse_float_list(&a.values).map_err(UsageError)?;
            labels = etas.iter().map(f64::to_string).collect();
            let train = embed(raw_train, a.model.delays)?;
            let verif = embed(raw_verif, a.model.delays)?;
            let transform = a.model.transform(&train);
            match build_basis(train.covariates(), train.dim(), &a.model.basis_config()) {
                Ok(basis) => experiments::eta_sweep(
                    Arc::new(basis),
                    &train,
                    &verif,
                    &a.model.leads.0,
                    transform,
                    &etas,
                    oracle,
                )?,
                Err(e) => etas.iter().map(|_| Err(e.clone().into())).collect(),
            }
        }
        SweepParam::Epsilon => {
            let eps = parse_float_list(&a.values).map_err(UsageError)?;
            labels = eps.iter().map(f64::to_string).collect();
            let train = embed(raw_train, a.model.delays)?;
            let verif = embed(raw_verif, a.model.delays)?;
            eps.iter()
                .map(|&e| {
                    let opts = ModelOptions {
                        eps: Bandwidth::Fixed(e),
                        ..a.model.clone()
                    };
                    train_and_score(&opts, &train, &verif, oracle)
                })
                .collect()
        }
        SweepParam::N => {
            let ns = parse_steps(&a.values).map_err(UsageError)?;
            labels = ns.iter().map(usize::to_string).collect();
            let verif = embed(raw_verif, a.model.delays)?;
            ns.iter()
                .map(|&n| {
                    let train = embed(raw_train.head(n)?, a.model.delays)?;
                    train_and_score(&a.model, &train, &verif, oracle)
                })
                .collect()
        }
        SweepParam::Delays => {
            let ds = parse_steps(&a.values).map_err(UsageError)?;
            if ds.contains(&0) {
                bail!(UsageError("delay counts must be positive".into()));
            }
            labels = ds.iter().map(usize::to_string).collect();
            ds.iter()
                .map(|&d| {
                    let opts = ModelOptions {
                        delays: d,
                        ..a.model.clone()
                    };
                    let train = embed(raw_train.clone(), d)?;
                    let verif = embed(raw_verif.clone(), d)?;
                    train_and_score(&opts, &train, &verif, oracle)
                })
                .collect()
        }
    };
    let mut writer = csv::Writer::from_writer(create(&a.out)?);
    writer.write_record(SWEEP_HEADER)?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut failures = 0;
    for (label, result) in labels.iter().zip(&results) {
        match result {
            Ok(r) => {
                for k in 0..r.len() {
                    writer.write_record([
                        name.clone(),
                        label.clone(),
                        r.lead_steps[k].to_string(),
                        r.lead_times[k].to_string(),
                        r.rmse[k].to_string(),
                        r.normalized_rmse[k].to_string(),
                        cell(r.estimated_error_rms[k]),
                        cell(r.excess_gen_error[k]),
                        "ok".into(),
                    ])?;
                }
            }
            Err(e) => {
                failures += 1;
                eprintln!("{name}={label}: {e:#}");
                let status = format!("error: {e:#}");
                writer.write_record([name.as_str(), label, "", "", "", "", "", "", &status])?;
            }
        }
    }
    writer.flush()?;
    if failures > 0 {
        bail!("{failures} of {} sweep values failed", results.len());
    }
    Ok(())
}

fn train_and_score(
    opts: &ModelOptions,
    train: &TimeSeriesDataset,
    verif: &TimeSeriesDataset,
    oracle: Option<&dyn RegressionOracle>,
) -> Result<SkillReport> {
    let basis = Arc::new(build_basis(train.covariates(), train.dim(), &opts.basis_config())?);
    let model = fit(opts, train, basis)?;
    Ok(evaluate_forecast(&model, verif, oracle)?)
}

fn run_recipe(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read recipe {}", path.display()))?;
    let sections = parse_recipe(&text)?;
    for s in &sections {
        if s.command == "run" {
            bail!(UsageError("recipes cannot nest run sections".into()));
        }
    }
    // validate every section before running any
    let mut parsed = Vec::with_capacity(sections.len());
    for s in &sections {
        let args: Vec<String> = std::iter::once(s.command.clone()).chain(to_args(&s.entries)).collect();
        let name = s
            .label
            .as_ref()
            .map_or(s.command.clone(), |l| format!("{}:{l}", s.command));
        let cli = parse_args(&args).map_err(|e| UsageError(format!("section [{name}]: {}", e.render())))?;
        parsed.push((name, cli));
    }
    for (name, cli) in parsed {
        println!("== [{name}]");
        run(cli).with_context(|| format!("section [{name}]"))?;
    }
    Ok(())
}
