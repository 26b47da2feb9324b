//! `hierform`: parse formulas, compile designs, fit and inspect models.
//!
//! Exit codes: 0 success, 1 input/output failure, 2 formula parse error,
//! 3 validation error, 4 sampler failure, 5 fit finished without
//! convergence (some Rhat above 1.1).

mod bundle;
mod model;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hierform::codegen::emit_program;
use hierform::density::{DensityError, Posterior};
use hierform::design::{assemble, assemble_new, matrix_csv, DesignError, DesignSet};
use hierform::formula::{ast_json, parse_formula, parse_rhs, ParseError, ParseMode};
use hierform::infer::{
    effects_grid, fit_model, ic_compare, posterior_predict, smooth_grid, EffectsOptions, FitHeader,
    IcMethod, InferError, PredictKind, SamplerConfig,
};
use hierform::modelspec::{resolve_blocks, CheckedSpec, ModelSpec, SpecError};
use hierform::tabular::{
    read_csv_path, sim_multi_mem_with_latent, write_csv, Column, DataError, Dataset, SimTruth,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use crate::bundle::{loglik_text, write_atomic, write_json, Bundle, BundleConfig, Meta};
use crate::model::{normalize_extra, ModelInput};

const RHAT_LIMIT: f64 = 1.1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Usage(String),
    #[error("sampler failed: {0}")]
    Sampler(String),
    #[error("the chains did not converge (max Rhat {0:.3} > {RHAT_LIMIT}); rerun with more iterations or pass --allow-nonconverged")]
    NotConverged(f64),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Data(String),
    #[error("invalid bundle: {0}")]
    Bundle(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) | CliError::Usage(_) => 3,
            CliError::Sampler(_) => 4,
            CliError::NotConverged(_) => 5,
            CliError::Io(_) | CliError::Data(_) | CliError::Bundle(_) => 1,
        }
    }
}

/// Error message with its position followed by the caret lines.
fn parse_message(e: &ParseError, text: &str) -> CliError {
    let rendered = e.render(text);
    let caret = rendered.split_once('\n').map_or("", |(_, rest)| rest);
    CliError::Parse(format!("{e}\n{caret}"))
}

impl From<SpecError> for CliError {
    fn from(e: SpecError) -> Self {
        match e {
            SpecError::Parse { text, error, .. } => parse_message(&error, &text),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<DensityError> for CliError {
    fn from(e: DensityError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<InferError> for CliError {
    fn from(e: InferError) -> Self {
        match e {
            InferError::Spec(e) => e.into(),
            InferError::Design(e) => e.into(),
            InferError::Data(e) => e.into(),
            InferError::DrawFile(m) => CliError::Bundle(m),
            InferError::Init { .. } | InferError::StepSize { .. } | InferError::NonFiniteStart => {
                CliError::Sampler(e.to_string())
            }
            other => CliError::Validation(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hierform",
    version,
    about = "Multilevel formula compiler and Bayesian fitting engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a formula and print its syntax tree, model spec or group blocks as JSON.
    Parse(ParseArgs),
    /// Fit a model and write a bundle directory.
    Fit(FitArgs),
    /// Print the summary of a fitted bundle.
    Summary { bundle: PathBuf },
    /// Compare bundles by LOO or WAIC.
    Compare {
        #[arg(required = true, num_args = 2..)]
        bundles: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Method::Loo)]
        method: Method,
    },
    /// Posterior predictions per data row as CSV.
    Predict(PredictArgs),
    /// Conditional effects of focal variables as CSV.
    Effects(EffectsArgs),
    /// Print the model as a probabilistic program.
    Codegen {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print design dimensions as JSON; write the matrices as CSV with --out.
    DesignDump {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the log density and its gradient at an unconstrained point.
    Logdensity {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated coordinates; zero when omitted.
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
    },
    /// Simulate the multi-membership schools data.
    SimulateMm(SimArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Loo,
    Waic,
}

#[derive(Args)]
struct ParseArgs {
    #[arg(long)]
    formula: String,
    #[arg(long)]
    nl: bool,
    /// Additional formula, as `name=rhs` or `name ~ rhs`.
    #[arg(long)]
    extra: Vec<String>,
    #[arg(long, default_value = "gaussian")]
    family: String,
    /// Print the resolved group-level blocks.
    #[arg(long)]
    resolve: bool,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Main formula.
    #[arg(long, required_unless_present = "model")]
    formula: Option<String>,
    /// Model file: one formula per line, extras as `name: formula`.
    #[arg(long, conflicts_with = "formula")]
    model: Option<PathBuf>,
    /// Additional formula, e.g. `zi ~ child` or `ult = 1 + (1 | AY)`.
    #[arg(long)]
    extra: Vec<String>,
    /// gaussian, poisson or zero_inflated_poisson.
    #[arg(long)]
    family: Option<String>,
    /// Treat the main formula as non-linear.
    #[arg(long)]
    nl: bool,
    /// Prior such as `normal(5000, 1000), nlpar = ult`.
    #[arg(long)]
    prior: Vec<String>,
}

impl ModelArgs {
    fn input(&self) -> Result<ModelInput, CliError> {
        let mut input = match &self.model {
            Some(path) => {
                ModelInput::from_file(path, self.family.as_deref(), self.nl, &self.prior)?
            }
            None => ModelInput {
                formula: self.formula.clone().unwrap_or_default(),
                extra: Vec::new(),
                family: self.family.clone().unwrap_or_else(|| "gaussian".into()),
                nl: self.nl,
                priors: self.prior.clone(),
            },
        };
        input
            .extra
            .extend(self.extra.iter().map(|e| normalize_extra(e)));
        input.family()?;
        Ok(input)
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Training data as CSV.
    #[arg(long)]
    data: PathBuf,
    /// Bundle directory to create.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    chains: usize,
    #[arg(long, default_value_t = 2000)]
    iter: usize,
    #[arg(long, default_value_t = 1000)]
    warmup: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 4)]
    cores: usize,
    #[arg(long, default_value_t = 0.8)]
    adapt_delta: f64,
    #[arg(long, default_value_t = 10)]
    max_treedepth: usize,
    #[arg(long, env = "HIERFORM_SEED", default_value_t = 1)]
    seed: u64,
    /// Exit 0 even when max R-hat exceeds 1.1.
    #[arg(long)]
    allow_nonconverged: bool,
    /// Skip writing the pointwise log-likelihood.
    #[arg(long)]
    no_loglik: bool,
}

#[derive(Args)]
struct PredictArgs {
    bundle: PathBuf,
    #[arg(long)]
    newdata: Option<PathBuf>,
    /// Simulate responses instead of averaging their means.
    #[arg(long)]
    predictive: bool,
    /// Set every group-level effect to zero.
    #[arg(long)]
    no_groups: bool,
    #[arg(long, env = "HIERFORM_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EffectsArgs {
    bundle: PathBuf,
    #[arg(long, required = true)]
    focal: Vec<String>,
    #[arg(long)]
    conditions: Option<PathBuf>,
    /// Only the smooth term of the focal variable, centered.
    #[arg(long)]
    smooth_only: bool,
    #[arg(long)]
    predictive: bool,
    #[arg(long)]
    include_groups: bool,
    #[arg(long, default_value_t = 100)]
    resolution: usize,
    #[arg(long, env = "HIERFORM_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 10)]
    nschools: usize,
    #[arg(long, default_value_t = 1000)]
    nstudents: usize,
    #[arg(long, default_value_t = 0.1)]
    change: f64,
    #[arg(long, env = "HIERFORM_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 20.0)]
    intercept: f64,
    #[arg(long, default_value_t = 3.0)]
    sd_school: f64,
    #[arg(long, default_value_t = 3.5)]
    sigma: f64,
    /// Replace changer weights by w1 ~ U(0, 1), w2 = 1 - w1.
    #[arg(long)]
    random_weights: bool,
    #[arg(long)]
    out: PathBuf,
}

fn read_data(path: &Path) -> Result<Dataset, CliError> {
    read_csv_path(path, None).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn compile(
    input: &ModelInput,
    data: &Dataset,
) -> Result<(ModelSpec, CheckedSpec, Posterior), CliError> {
    let spec = input.spec()?;
    let checked = hierform::modelspec::validate(&spec, data)?;
    let design = assemble(&checked, data)?;
    let posterior = Posterior::new(design, &spec.priors)?;
    Ok((spec, checked, posterior))
}

fn json_text<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn cmd_parse(a: &ParseArgs) -> Result<(), CliError> {
    let mode = if a.nl {
        ParseMode::Nonlinear
    } else {
        ParseMode::Standard
    };
    if !a.formula.contains('~') {
        // A bare right-hand side such as `(1|g1/g2)`.
        let rhs = parse_rhs(&a.formula).map_err(|e| parse_message(&e, &a.formula))?;
        if a.resolve {
            let text = format!("y ~ {}", a.formula);
            let spec = ModelSpec::from_strings(
                &text,
                &[],
                hierform::modelspec::Family::Gaussian,
                false,
                vec![],
            )?;
            print!("{}", json_text(&resolve_blocks(&spec)?));
        } else {
            print!("{}", json_text(&rhs));
        }
        return Ok(());
    }
    if a.extra.is_empty() && !a.resolve {
        let ast = parse_formula(&a.formula, mode).map_err(|e| parse_message(&e, &a.formula))?;
        println!("{}", ast_json(&ast));
        return Ok(());
    }
    let input = ModelInput {
        formula: a.formula.clone(),
        extra: a.extra.iter().map(|e| normalize_extra(e)).collect(),
        family: a.family.clone(),
        nl: a.nl,
        priors: Vec::new(),
    };
    let spec = input.spec()?;
    if a.resolve {
        print!("{}", json_text(&resolve_blocks(&spec)?));
    } else {
        println!("{}", spec.to_json());
    }
    Ok(())
}

fn family_label(design: &DesignSet) -> String {
    let links: Vec<String> = design
        .predictors
        .iter()
        .filter(|p| design.family.has_dpar(&p.owner))
        .map(|p| format!("{} = {}", p.owner, p.link.name()))
        .collect();
    if links.len() <= 1 {
        let link = design.family.link("mu").map_or("identity", |l| l.name());
        format!("{} ({link})", design.family.name())
    } else {
        format!("{} ({})", design.family.name(), links.join("; "))
    }
}

fn formulas(spec: &ModelSpec) -> Vec<String> {
    let mut out = vec![spec.main_formula.to_string()];
    out.extend(
        spec.dpar_formulas
            .values()
            .chain(spec.nlpar_formulas.values())
            .map(|f| f.to_string()),
    );
    out
}

fn cmd_fit(a: &FitArgs) -> Result<(), CliError> {
    let input = a.model.input()?;
    let data = read_data(&a.data)?;
    let spec = input.spec()?;
    let config = SamplerConfig {
        chains: a.chains,
        iter: a.iter,
        warmup: a.warmup,
        adapt_delta: a.adapt_delta,
        max_treedepth: a.max_treedepth,
        seed: a.seed,
        thin: a.thin,
        cores: a.cores,
    };
    let start = Instant::now();
    let fitted = fit_model(&spec, &data, &config)?;
    let wall = start.elapsed().as_secs_f64();
    let design = fitted.posterior.design();
    let header = FitHeader {
        family: family_label(design),
        formulas: formulas(&spec),
        data_name: a
            .data
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("data")
            .to_string(),
        n_obs: design.n,
        chains: config.chains,
        iter: config.iter,
        warmup: config.warmup,
        thin: config.thin,
    };
    let table = fitted.summary();
    let rendered = table.render(&header);
    print!("{rendered}");

    let out = &a.out;
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let data_path = fs::canonicalize(&a.data).unwrap_or_else(|_| a.data.clone());
    write_atomic(&out.join(bundle::SPEC), spec.to_json().as_bytes())?;
    write_json(
        &out.join(bundle::CONFIG),
        &BundleConfig {
            model: input,
            data: data_path,
            sampler: config.clone(),
            header,
        },
    )?;
    let mut draws_csv = Vec::new();
    fitted.draws.write_csv(&mut draws_csv)?;
    write_atomic(&out.join(bundle::DRAWS), &draws_csv)?;
    write_atomic(&out.join(bundle::SUMMARY), rendered.as_bytes())?;
    if !a.no_loglik {
        write_atomic(
            &out.join(bundle::LOGLIK),
            loglik_text(&fitted.loglik()?).as_bytes(),
        )?;
    }
    let meta = Meta {
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: wall,
        divergences: table.divergences,
        treedepth_hits: table.treedepth_hits,
        step_sizes: fitted.draws.chains.iter().map(|c| c.step_size).collect(),
        mean_accept_stat: fitted.draws.mean_accept_stat(),
        max_rhat: table.max_rhat(),
    };
    write_json(&out.join(bundle::META), &meta)?;
    let max_rhat = table.max_rhat();
    if max_rhat > RHAT_LIMIT && !a.allow_nonconverged {
        return Err(CliError::NotConverged(max_rhat));
    }
    Ok(())
}

fn cmd_summary(dir: &Path) -> Result<(), CliError> {
    let b = Bundle::open(dir)?;
    print!("{}", b.summary().render(&b.config.header));
    Ok(())
}

fn cmd_compare(dirs: &[PathBuf], method: Method) -> Result<(), CliError> {
    let mut models = Vec::new();
    for d in dirs {
        let b = Bundle::open(d)?;
        models.push((b.name(), b.loglik()?));
    }
    let method = match method {
        Method::Loo => IcMethod::Loo,
        Method::Waic => IcMethod::Waic,
    };
    print!("{}", ic_compare(&models, method)?.render());
    Ok(())
}

fn interval_row(values: &mut [f64]) -> [f64; 4] {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    [
        mean,
        var.sqrt(),
        hierform::infer::quantile(values, 0.025),
        hierform::infer::quantile(values, 0.975),
    ]
}

fn cmd_predict(a: &PredictArgs) -> Result<(), CliError> {
    let b = Bundle::open(&a.bundle)?;
    let data = b.data()?;
    let fitted = b.model(&data)?;
    let new_design;
    let design = match &a.newdata {
        Some(p) => {
            new_design = assemble_new(&fitted.checked, fitted.posterior.design(), &read_data(p)?)?;
            &new_design
        }
        None => fitted.posterior.design(),
    };
    let kind = if a.predictive {
        PredictKind::Predictive
    } else {
        PredictKind::Expected
    };
    let pred = posterior_predict(
        &fitted.posterior,
        &fitted.draws,
        design,
        !a.no_groups,
        kind,
        a.seed,
    )?;
    let mut out = String::from("row,estimate,est_error,lower95,upper95\n");
    for i in 0..design.n {
        let mut col: Vec<f64> = pred.iter().map(|r| r[i]).collect();
        let [m, s, l, u] = interval_row(&mut col);
        let _ = writeln!(out, "{},{m},{s},{l},{u}", i + 1);
    }
    emit(a.out.as_deref(), &out)
}

fn cmd_effects(a: &EffectsArgs) -> Result<(), CliError> {
    let b = Bundle::open(&a.bundle)?;
    let data = b.data()?;
    let fitted = b.model(&data)?;
    let rows = if a.smooth_only {
        let [focal] = a.focal.as_slice() else {
            return Err(CliError::Usage(
                "--smooth-only takes exactly one --focal variable".into(),
            ));
        };
        smooth_grid(&fitted, focal, a.resolution)?
    } else {
        let opts = EffectsOptions {
            focal: a.focal.clone(),
            conditions: a.conditions.as_deref().map(read_data).transpose()?,
            resolution: a.resolution,
            include_groups: a.include_groups,
            kind: if a.predictive {
                PredictKind::Predictive
            } else {
                PredictKind::Expected
            },
            seed: a.seed,
        };
        effects_grid(&fitted, &data, &opts)?
    };
    let mut out = a.focal.join(",");
    out.push_str(",estimate,lower95,upper95,condition\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.focal.join(","),
            r.estimate,
            r.lower,
            r.upper,
            r.condition
        );
    }
    emit(a.out.as_deref(), &out)
}

fn cmd_codegen(model: &ModelArgs, data: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let data = read_data(data)?;
    let (_, checked, posterior) = compile(&model.input()?, &data)?;
    emit(out, &emit_program(&checked, &posterior).rendered())
}

fn cmd_design_dump(model: &ModelArgs, data: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let data = read_data(data)?;
    let (_, _, posterior) = compile(&model.input()?, &data)?;
    let design = posterior.design();
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        for p in &design.predictors {
            let text = matrix_csv(p.fixed.column_names(), &p.fixed.x);
            write_atomic(&dir.join(format!("X_{}.csv", p.owner)), text.as_bytes())?;
        }
        for (b, block) in design.random.iter().enumerate() {
            let names: Vec<String> = block
                .levels
                .iter()
                .flat_map(|l| block.coef_names.iter().map(move |c| format!("{l}:{c}")))
                .collect();
            let text = matrix_csv(&names, &block.dense_z());
            write_atomic(&dir.join(format!("Z_{}.csv", b + 1)), text.as_bytes())?;
        }
    }
    let overview = json!({
        "n": design.n,
        "family": design.family.name(),
        "predictors": design.predictors.iter().map(|p| json!({
            "owner": p.owner,
            "link": p.link.name(),
            "columns": p.fixed.column_names(),
            "smooths": p.smooths.iter().map(|s| &s.label).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "blocks": design.random.iter().map(|b| json!({
            "grouping": b.label(),
            "levels": b.levels,
            "coefficients": b.coef_names,
            "correlated": b.spec.correlated,
        })).collect::<Vec<_>>(),
        "parameters": posterior.space().draw_names(),
        "dim": posterior.dim(),
        "warnings": design.warnings,
    });
    print!("{}", json_text(&overview));
    Ok(())
}

fn cmd_logdensity(model: &ModelArgs, data: &Path, at: Option<&str>) -> Result<(), CliError> {
    let data = read_data(data)?;
    let (_, _, posterior) = compile(&model.input()?, &data)?;
    let dim = posterior.dim();
    let x: Vec<f64> = match at {
        Some(text) => text
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| CliError::Usage(format!("--at: `{v}`: {e}")))
            })
            .collect::<Result<_, _>>()?,
        None => vec![0.0; dim],
    };
    if x.len() != dim {
        return Err(CliError::Usage(format!(
            "--at has {} values, the model has {dim}",
            x.len()
        )));
    }
    let mut grad = vec![0.0; dim];
    let lp = posterior.log_density_grad(&x, &mut grad);
    let value = json!({
        "names": posterior.space().names(),
        "log_density": lp,
        "gradient": grad,
    });
    print!("{}", json_text(&value));
    Ok(())
}

fn cmd_simulate(a: &SimArgs) -> Result<(), CliError> {
    let truth = SimTruth {
        intercept: a.intercept,
        sd_school: a.sd_school,
        sigma: a.sigma,
    };
    let sim = sim_multi_mem_with_latent(a.nschools, a.nstudents, a.change, truth, a.seed)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let mut data = sim.data;
    if a.random_weights {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed.wrapping_add(1));
        let mut w1 = data.column("w1")?.as_f64().expect("numeric weights");
        for w in w1.iter_mut().take(sim.n_changers) {
            *w = rng.random::<f64>();
        }
        let w2: Vec<f64> = w1.iter().map(|w| 1.0 - w).collect();
        data = data
            .with_column("w1", Column::Numeric(w1))?
            .with_column("w2", Column::Numeric(w2))?;
    }
    let mut buf = Vec::new();
    write_csv(&data, &mut buf)?;
    write_atomic(&a.out, &buf)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Parse(a) => cmd_parse(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Summary { bundle } => cmd_summary(&bundle),
        Command::Compare { bundles, method } => cmd_compare(&bundles, method),
        Command::Predict(a) => cmd_predict(&a),
        Command::Effects(a) => cmd_effects(&a),
        Command::Codegen { model, data, out } => cmd_codegen(&model, &data, out.as_deref()),
        Command::DesignDump { model, data, out } => cmd_design_dump(&model, &data, out.as_deref()),
        Command::Logdensity { model, data, at } => cmd_logdensity(&model, &data, at.as_deref()),
        Command::SimulateMm(a) => cmd_simulate(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
