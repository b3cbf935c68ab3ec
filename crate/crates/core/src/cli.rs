//! Command-line front end. `run` parses arguments, executes one subcommand
//! and returns the process exit code.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::discrepancy::{efficiency_experiment, rphisd, RPhiSDConfig, Reference};
use crate::error::{invalid, Error, Result};
use crate::goftest::{
    calibrate_nominal_level, power_experiment, run_test, GofOptions, PowerOptions, DEFAULT_N_CAL, DEFAULT_N_SIMS,
};
use crate::hyper::{ConfigRecipe, Family, Overrides, Preset, DEFAULT_GAMMA};
use crate::io::{format_f64, read_sample_csv, result_json, sample_to_csv, table_csv, RunManifest};
use crate::kernels::{ksd_squared, BaseKernel};
use crate::models::{gaussian_model, sample_alternative, AltSampler, ModelSpec, SampleSet, ScoreModel};
use crate::numeric::derive_seed;
use crate::sgld::{run_sgld, select_step_size, Measure, SgldConfig, DEFAULT_MINIBATCH, DEFAULT_REPLICATES};

#[derive(Debug, Parser)]
#[command(name = "rfsd", version, about = "Random feature Stein discrepancies and goodness-of-fit tests")]
struct Cli {
    /// Base seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (stdout when absent). Tables are written as CSV when the
    /// name ends in `.csv`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Record wall-clock timings in the manifest.
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Goodness-of-fit test of a sample against a model.
    GofTest(GofArgs),
    /// Estimate the discrepancy between a sample and a model.
    Rphisd(RphisdArgs),
    /// Quadratic-time kernel Stein discrepancy.
    Ksd(KsdArgs),
    /// Draw a sample from a named distribution.
    Sample(SampleArgs),
    /// Run a stochastic gradient Langevin chain.
    Sgld(SgldArgs),
    /// Print the derived estimator configuration.
    Config(ConfigArgs),
    /// Select an SGLD step size with several quality measures.
    SampleQuality(SampleQualityArgs),
    /// Wall-clock comparison of the estimator and the kernel discrepancy.
    Benchmark(BenchmarkArgs),
    /// Probability that the estimate exceeds a quarter of the exact value.
    Efficiency(EfficiencyArgs),
    /// Rejection rates of the test on alternative samples.
    Power(PowerArgs),
}

#[derive(Debug, Args, Clone)]
struct FamilyArgs {
    #[arg(long, default_value = "l1-imq")]
    family: String,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    /// Importance sample size.
    #[arg(long = "M")]
    m: Option<usize>,
    /// Override the exponent r.
    #[arg(long)]
    r: Option<f64>,
    /// Bandwidth preset: gof, sample-quality or rbm.
    #[arg(long, default_value = "gof")]
    preset: String,
    #[arg(long, allow_hyphen_values = true)]
    c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long)]
    df: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long = "a-prime")]
    a_prime: Option<f64>,
}

#[derive(Debug, Args)]
struct GofArgs {
    #[arg(long)]
    sample: PathBuf,
    /// Model name (gaussian, gmm_posterior, rbm) or JSON model file.
    #[arg(long, default_value = "gaussian")]
    model: String,
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long = "n-sims", default_value_t = DEFAULT_N_SIMS)]
    n_sims: usize,
    /// Calibrate the nominal level with this many null datasets.
    #[arg(long, num_args = 0..=1, default_missing_value = "200")]
    calibrate: Option<usize>,
    /// Also write the simulated null draws to this CSV file.
    #[arg(long = "null-csv")]
    null_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RphisdArgs {
    #[arg(long)]
    sample: PathBuf,
    #[arg(long, default_value = "gaussian")]
    model: String,
    #[command(flatten)]
    family: FamilyArgs,
    /// Use a saved configuration instead of deriving one.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct KsdArgs {
    #[arg(long)]
    sample: PathBuf,
    #[arg(long, default_value = "gaussian")]
    model: String,
    /// imq or sech.
    #[arg(long, default_value = "imq")]
    kernel: String,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// gaussian, laplace, t, gmm_sgld_target, rbm_gibbs, or a JSON file.
    #[arg(long, default_value = "gaussian")]
    sampler: String,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 1000)]
    n: usize,
}

#[derive(Debug, Args)]
struct SgldArgs {
    #[arg(long, default_value = "gmm_posterior")]
    model: String,
    #[arg(long)]
    step: f64,
    /// Retained states.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Initial state, comma separated (default: origin).
    #[arg(long, allow_hyphen_values = true)]
    init: Option<String>,
    #[arg(long, default_value_t = DEFAULT_MINIBATCH)]
    minibatch: usize,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Sample used for median heuristics.
    #[arg(long)]
    sample: Option<PathBuf>,
    /// Dimension when no sample is given.
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Debug, Args)]
struct SampleQualityArgs {
    #[arg(long, default_value = "gmm_posterior")]
    model: String,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.01,0.005,0.001")]
    steps: Vec<f64>,
    #[arg(long = "M", value_delimiter = ',', default_value = "10,25,75")]
    m: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    replicates: usize,
    #[arg(long, allow_hyphen_values = true)]
    init: Option<String>,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long = "n", value_delimiter = ',', default_value = "500,1000,2000,3000,4000,5000")]
    sizes: Vec<usize>,
    #[arg(long = "M", default_value_t = 10)]
    m: usize,
    /// Timing repetitions per size; the minimum is reported.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
}

#[derive(Debug, Args)]
struct EfficiencyArgs {
    /// Sample CSV; when absent, `--n` points are drawn from the model.
    #[arg(long)]
    sample: Option<PathBuf>,
    #[arg(long, default_value = "gaussian")]
    model: String,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, value_delimiter = ',', default_value = "l1-imq,l2-sechexp")]
    families: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long = "M", value_delimiter = ',', default_value = "1,2,5,10,20,50,100")]
    m: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Reference computed with this many importance draws instead of the
    /// automatic choice (quadrature up to two dimensions).
    #[arg(long = "reference-M")]
    reference_m: Option<usize>,
}

#[derive(Debug, Args)]
struct PowerArgs {
    #[arg(long, default_value = "gaussian")]
    model: String,
    #[arg(long, default_value_t = 5)]
    dim: usize,
    /// Alternative sampler name or JSON file.
    #[arg(long, default_value = "laplace")]
    alt: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, value_delimiter = ',', default_value = "l1-imq")]
    families: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long = "M", default_value_t = 10)]
    m: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long = "n-sims", default_value_t = DEFAULT_N_SIMS)]
    n_sims: usize,
    /// Null datasets for level calibration; 0 disables calibration.
    #[arg(long = "n-cal", default_value_t = DEFAULT_N_CAL)]
    n_cal: usize,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let recorded: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli, recorded) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

struct Ctx {
    seed: u64,
    out: Option<PathBuf>,
    timings: bool,
    args: Vec<String>,
    started: Instant,
}

impl Ctx {
    fn manifest(&self, command: &str, config: serde_json::Value) -> RunManifest {
        let mut m = RunManifest::new(command, self.args.clone(), config, self.seed);
        if self.timings {
            m.timings.push(("total".into(), self.started.elapsed().as_secs_f64()));
        }
        m
    }

    fn wants_csv(&self) -> bool {
        self.out.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(p) => fs::write(p, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }

    fn emit_json<T: Serialize>(&self, manifest: &RunManifest, result: &T) -> Result<()> {
        self.emit(&result_json(manifest, result)?)
    }

    /// JSON by default, CSV when `--out` names a `.csv` file.
    fn emit_table<T: Serialize>(&self, manifest: &RunManifest, result: &T, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        if self.wants_csv() {
            self.emit(&table_csv(manifest, header, rows)?)
        } else {
            self.emit_json(manifest, result)
        }
    }
}

fn execute(cli: Cli, args: Vec<String>) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(invalid("--threads must be at least 1"));
        }
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let ctx = Ctx { seed: cli.seed, out: cli.out, timings: cli.timings, args, started: Instant::now() };
    match cli.command {
        Command::GofTest(a) => cmd_gof_test(&ctx, a),
        Command::Rphisd(a) => cmd_rphisd(&ctx, a),
        Command::Ksd(a) => cmd_ksd(&ctx, a),
        Command::Sample(a) => cmd_sample(&ctx, a),
        Command::Sgld(a) => cmd_sgld(&ctx, a),
        Command::Config(a) => cmd_config(&ctx, a),
        Command::SampleQuality(a) => cmd_sample_quality(&ctx, a),
        Command::Benchmark(a) => cmd_benchmark(&ctx, a),
        Command::Efficiency(a) => cmd_efficiency(&ctx, a),
        Command::Power(a) => cmd_power(&ctx, a),
    }
}

fn recipe(f: &FamilyArgs, seed: u64) -> Result<ConfigRecipe> {
    let family: Family = f.family.parse()?;
    let preset: Preset = f.preset.parse()?;
    if let Some(b) = f.beta {
        if b <= -1.0 {
            eprintln!("warning: IMQ beta = {b} <= -1; convergence detection is only guaranteed for beta in (-1, 0)");
        }
    }
    let overrides = Overrides {
        preset,
        c: f.c,
        beta: f.beta,
        df: f.df,
        a: f.a,
        a_prime: f.a_prime,
        r: f.r,
        m: f.m,
        seed: Some(seed),
        subsample: None,
    };
    Ok(ConfigRecipe::new(family, f.gamma, overrides))
}

fn load_model(name: &str, dim: usize) -> Result<(ModelSpec, Box<dyn ScoreModel>)> {
    let spec = ModelSpec::resolve(name, dim)?;
    let model = spec.build()?;
    Ok((spec, model))
}

fn resolve_sampler(name: &str, dim: usize) -> Result<AltSampler> {
    let p = Path::new(name);
    if name.ends_with(".json") || p.is_file() {
        Ok(serde_json::from_str(&fs::read_to_string(p)?)?)
    } else {
        AltSampler::from_name(name, dim)
    }
}

fn parse_point(s: Option<&str>, dim: usize) -> Result<Vec<f64>> {
    let Some(s) = s else { return Ok(vec![0.0; dim]) };
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("'{t}' is not a number"))))
        .collect::<Result<_>>()?;
    if v.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
    }
    Ok(v)
}

fn write_null_csv(path: &Path, manifest: &RunManifest, draws: &[f64]) -> Result<()> {
    let rows: Vec<Vec<String>> = draws.iter().map(|&v| vec![format_f64(v)]).collect();
    fs::write(path, table_csv(manifest, &["null_statistic"], &rows)?)?;
    Ok(())
}

#[derive(Serialize)]
struct GofOutput<'a> {
    #[serde(flatten)]
    test: &'a crate::goftest::GofTestResult,
    config: &'a RPhiSDConfig,
}

fn cmd_gof_test(ctx: &Ctx, a: GofArgs) -> Result<()> {
    let sample = read_sample_csv(&a.sample)?;
    let (spec, model) = load_model(&a.model, sample.dim())?;
    let rec = recipe(&a.family, ctx.seed)?;
    let cfg = rec.build(&sample)?;
    let alpha_nominal = match a.calibrate {
        Some(n_cal) => {
            let sampler = spec.null_sampler()?;
            Some(calibrate_nominal_level(model.as_ref(), &sampler, &rec, a.alpha, n_cal, sample.len(), derive_seed(ctx.seed, 3))?)
        }
        None => None,
    };
    let opts = GofOptions { alpha: a.alpha, alpha_nominal, n_sims: a.n_sims, ..Default::default() };
    let res = run_test(&sample, model.as_ref(), &cfg, &opts)?;
    let manifest = ctx.manifest("gof-test", serde_json::to_value(&cfg)?);
    if let Some(p) = &a.null_csv {
        write_null_csv(p, &manifest, &res.null_draws)?;
    }
    ctx.emit_json(&manifest, &GofOutput { test: &res, config: &cfg })
}

fn cmd_rphisd(ctx: &Ctx, a: RphisdArgs) -> Result<()> {
    let sample = read_sample_csv(&a.sample)?;
    let (_, model) = load_model(&a.model, sample.dim())?;
    let cfg = match &a.config {
        Some(p) => RPhiSDConfig::from_json(&fs::read_to_string(p)?)?,
        None => recipe(&a.family, ctx.seed)?.build(&sample)?,
    };
    let mut res = rphisd(&sample, model.as_ref(), &cfg)?;
    if !ctx.timings {
        res.elapsed_s = 0.0;
    }
    let manifest = ctx.manifest("rphisd", serde_json::to_value(&cfg)?);
    ctx.emit_json(&manifest, &res)
}

#[derive(Serialize)]
struct KsdOutput {
    ksd_squared: f64,
    ksd: f64,
}

fn cmd_ksd(ctx: &Ctx, a: KsdArgs) -> Result<()> {
    let sample = read_sample_csv(&a.sample)?;
    let (_, model) = load_model(&a.model, sample.dim())?;
    let kernel = match a.kernel.as_str() {
        "imq" => {
            if a.beta <= -1.0 {
                eprintln!("warning: IMQ beta = {} <= -1; convergence detection is only guaranteed for beta in (-1, 0)", a.beta);
            }
            BaseKernel::imq(a.c, a.beta)?
        }
        "sech" => BaseKernel::sech(a.a)?,
        other => return Err(invalid(format!("unknown kernel '{other}' (expected imq or sech)"))),
    };
    let k2 = ksd_squared(&sample, model.as_ref(), &kernel)?;
    let manifest = ctx.manifest("ksd", serde_json::to_value(&kernel)?);
    ctx.emit_json(&manifest, &KsdOutput { ksd_squared: k2, ksd: k2.max(0.0).sqrt() })
}

fn emit_sample(ctx: &Ctx, command: &str, config: serde_json::Value, sample: &SampleSet) -> Result<()> {
    let manifest = ctx.manifest(command, config);
    let mut text = format!("# {}\n", serde_json::to_string(&manifest)?);
    let header: Vec<String> = (1..=sample.dim()).map(|d| format!("x{d}")).collect();
    text.push_str(&sample_to_csv(sample, Some(&header)));
    ctx.emit(&text)
}

fn cmd_sample(ctx: &Ctx, a: SampleArgs) -> Result<()> {
    let sampler = resolve_sampler(&a.sampler, a.dim)?;
    let sample = sample_alternative(&sampler, a.n, ctx.seed)?;
    emit_sample(ctx, "sample", serde_json::to_value(&sampler)?, &sample)
}

fn cmd_sgld(ctx: &Ctx, a: SgldArgs) -> Result<()> {
    let (_, model) = load_model(&a.model, 2)?;
    let init = parse_point(a.init.as_deref(), model.dim())?;
    let mut cfg = SgldConfig::retained(a.step, a.n, init, ctx.seed);
    cfg.minibatch = Some(a.minibatch);
    let chain = run_sgld(model.as_ref(), &cfg)?;
    emit_sample(ctx, "sgld", serde_json::to_value(&cfg)?, &chain)
}

fn cmd_config(ctx: &Ctx, a: ConfigArgs) -> Result<()> {
    let rec = recipe(&a.family, ctx.seed)?;
    let cfg = match (&a.sample, a.dim) {
        (Some(p), _) => rec.build(&read_sample_csv(p)?)?,
        (None, Some(d)) => crate::hyper::default_config(rec.gamma, d, rec.family, None, &rec.overrides)?,
        (None, None) => return Err(invalid("config needs --sample or --dim")),
    };
    ctx.emit(&(cfg.to_json()? + "\n"))
}

fn cmd_sample_quality(ctx: &Ctx, a: SampleQualityArgs) -> Result<()> {
    let (_, model) = load_model(&a.model, 2)?;
    let init = parse_point(a.init.as_deref(), model.dim())?;
    let mut measures = vec![Measure::Ksd { label: "ksd-imq".into(), kernel: BaseKernel::imq(1.0, -0.5)? }];
    for &m in &a.m {
        for family in [Family::L1Imq, Family::L2Sechexp] {
            let overrides = Overrides { preset: Preset::SampleQuality, m: Some(m), ..Default::default() };
            measures.push(Measure::Rphisd {
                label: format!("{family}-M{m}"),
                recipe: ConfigRecipe::new(family, a.gamma, overrides),
            });
        }
    }
    let base = SgldConfig::retained(a.steps[0], a.n, init, ctx.seed);
    let table = select_step_size(&a.steps, model.as_ref(), &base, &measures, a.replicates)?;
    let config = serde_json::json!({ "sgld": base, "steps": a.steps, "measures": measures, "replicates": a.replicates });
    let manifest = ctx.manifest("sample-quality", config);
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            let sel = table.selected.iter().any(|(m, s)| *m == r.measure && *s == r.step);
            vec![r.measure.clone(), r.step.to_string(), format_f64(r.median), sel.to_string()]
        })
        .collect();
    ctx.emit_table(&manifest, &table, &["measure", "step", "median", "selected"], &rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub ksd_s: f64,
    pub rphisd_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub dim: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub rows: Vec<BenchRow>,
    pub ksd_slope: f64,
    pub rphisd_slope: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Times `ksd_squared` (IMQ, c = 1, β = −½) against `rphisd` (L1 IMQ,
/// `m` draws) on standard Gaussian samples, single-threaded, keeping the
/// fastest of `repeats` runs per size.
pub fn timing_benchmark(dim: usize, sizes: &[usize], m: usize, repeats: usize, seed: u64) -> Result<BenchReport> {
    if sizes.len() < 2 || repeats == 0 {
        return Err(invalid("benchmark needs at least two sizes and one repeat"));
    }
    let model = gaussian_model(dim)?;
    let kernel = BaseKernel::imq(1.0, -0.5)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
    let rows = pool.install(|| -> Result<Vec<BenchRow>> {
        let mut rows = Vec::new();
        for (i, &n) in sizes.iter().enumerate() {
            let sample = sample_alternative(&AltSampler::Gaussian { dim }, n, derive_seed(seed, i as u64))?;
            let overrides = Overrides { m: Some(m), seed: Some(seed), ..Default::default() };
            let cfg = ConfigRecipe::new(Family::L1Imq, DEFAULT_GAMMA, overrides).build(&sample)?;
            let (mut tk, mut tr) = (f64::INFINITY, f64::INFINITY);
            for _ in 0..repeats {
                let t = Instant::now();
                std::hint::black_box(ksd_squared(&sample, &model, &kernel)?);
                tk = tk.min(t.elapsed().as_secs_f64());
                let t = Instant::now();
                std::hint::black_box(rphisd(&sample, &model, &cfg)?);
                tr = tr.min(t.elapsed().as_secs_f64());
            }
            rows.push(BenchRow { n, ksd_s: tk, rphisd_s: tr });
        }
        Ok(rows)
    })?;
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ks: Vec<f64> = rows.iter().map(|r| r.ksd_s).collect();
    let rs: Vec<f64> = rows.iter().map(|r| r.rphisd_s).collect();
    Ok(BenchReport { dim, m, ksd_slope: loglog_slope(&ns, &ks), rphisd_slope: loglog_slope(&ns, &rs), rows })
}

fn cmd_benchmark(ctx: &Ctx, a: BenchmarkArgs) -> Result<()> {
    let report = timing_benchmark(a.dim, &a.sizes, a.m, a.repeats, ctx.seed)?;
    let config = serde_json::json!({ "dim": a.dim, "sizes": a.sizes, "M": a.m, "repeats": a.repeats });
    let manifest = ctx.manifest("benchmark", config);
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| vec![r.n.to_string(), format_f64(r.ksd_s), format_f64(r.rphisd_s)])
        .collect();
    ctx.emit_table(&manifest, &report, &["n", "ksd_s", "rphisd_s"], &rows)
}

fn cmd_efficiency(ctx: &Ctx, a: EfficiencyArgs) -> Result<()> {
    let (spec, model) = load_model(&a.model, a.dim)?;
    let sample = match &a.sample {
        Some(p) => read_sample_csv(p)?,
        None => sample_alternative(&spec.null_sampler()?, a.n, derive_seed(ctx.seed, 0))?,
    };
    let mut cfgs = Vec::new();
    for f in &a.families {
        let family: Family = f.parse()?;
        let overrides = Overrides { seed: Some(ctx.seed), ..Default::default() };
        cfgs.push((family.to_string(), ConfigRecipe::new(family, a.gamma, overrides).build(&sample)?));
    }
    let reference = match a.reference_m {
        Some(m) => Reference::LargeM(m),
        None => Reference::for_dim(sample.dim()),
    };
    let rows = efficiency_experiment(&sample, model.as_ref(), &cfgs, &a.m, a.trials, reference, derive_seed(ctx.seed, 1))?;
    let config = serde_json::json!({ "configs": cfgs.iter().map(|(l, c)| (l, c)).collect::<Vec<_>>(), "reference": reference, "N": sample.len(), "trials": a.trials });
    let manifest = ctx.manifest("efficiency", config);
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.label.clone(), r.m.to_string(), format_f64(r.reference), r.prob.to_string(), format_f64(r.se)])
        .collect();
    ctx.emit_table(&manifest, &rows, &["label", "M", "reference", "prob", "se"], &table)
}

fn cmd_power(ctx: &Ctx, a: PowerArgs) -> Result<()> {
    let (spec, model) = load_model(&a.model, a.dim)?;
    let null_sampler = spec.null_sampler()?;
    let alt = resolve_sampler(&a.alt, a.dim)?;
    let mut recipes = Vec::new();
    for f in &a.families {
        let family: Family = f.parse()?;
        let overrides = Overrides { m: Some(a.m), ..Default::default() };
        recipes.push((family.to_string(), ConfigRecipe::new(family, a.gamma, overrides)));
    }
    let opts = PowerOptions {
        n: a.n,
        trials: a.trials,
        alpha: a.alpha,
        n_sims: a.n_sims,
        n_cal: (a.n_cal > 0).then_some(a.n_cal),
        seed: ctx.seed,
    };
    let rows = power_experiment(model.as_ref(), &null_sampler, &alt, &recipes, &opts)?;
    let config = serde_json::json!({ "null": spec, "alt": alt, "recipes": recipes, "options": opts });
    let manifest = ctx.manifest("power", config);
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![r.label.clone(), r.n.to_string(), r.alpha_nominal.to_string(), r.rejection_rate.to_string(), format_f64(r.se)]
        })
        .collect();
    ctx.emit_table(&manifest, &rows, &["label", "n", "alpha_nominal", "rejection_rate", "se"], &table)
}
