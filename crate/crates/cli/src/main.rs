//! Command-line driver for tensor permanent estimation.
//!
//! One binary, eight subcommands covering the full pipeline: `sample`
//! (seeded random tensors), `exact` (permanent kernels), `coeffs` /
//! `identity-check` (the coefficient series and its defining identity),
//! `stats` (hyperplane-score statistics), `approx` (truncated-series and
//! closed-form estimators), `verify` (Monte Carlo experiments) and `bench`
//! (coefficient timing against the predicted work count).
//!
//! Values and reports are JSON; bulk experiment and timing rows are CSV.
//! Tensors read from `--input` (default `-` for stdin) use the same JSON
//! layout `sample` writes, so subcommands pipe into each other.  Errors are
//! reported as an `{"error":{"kind","message"}}` object on stderr with exit
//! status 1; usage problems exit 2.
//!
//! `--threads` caps the worker pool.  `--deterministic` zeroes every
//! wall-clock field (and skips `bench` measurements), making output files
//! byte-identical across runs and thread counts for a fixed seed.

use std::fs;
use std::io::{self, Read as _, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::json;
use tenperm_core::approx;
use tenperm_core::exact;
use tenperm_core::numeric::{binomial_u128, coefficient_work};
use tenperm_core::sampling::{sample_tensor, DistributionKind, EntryDistribution, SeedSpec};
use tenperm_core::series;
use tenperm_core::symmetric;
use tenperm_core::verify::{self, ExperimentReport, VerifyOptions};
use tenperm_core::Tensor;

#[derive(Parser)]
#[command(
    name = "tenperm",
    version,
    about = "Exact and approximate permanents of random order-d complex tensors"
)]
struct Cli {
    /// Worker threads (0 keeps the library default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Byte-stable output: zero wall-clock fields, skip bench measurement.
    #[arg(long, global = true)]
    deterministic: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a seeded random tensor and write it as JSON.
    Sample(SampleArgs),
    /// Exact permanent of a tensor.
    Exact(ExactArgs),
    /// Coefficients a_0 ..= a_t of per(J + zA) / (n!)^(d-1).
    Coeffs(CoeffsArgs),
    /// Residual of the series identity at a point z.
    IdentityCheck(IdentityArgs),
    /// Hyperplane scores and their V / D / V' statistics.
    Stats(StatsArgs),
    /// Estimate the permanent of a shifted random tensor.
    Approx(ApproxArgs),
    /// Run a Monte Carlo verification experiment.
    Verify(VerifyArgs),
    /// Time coefficient extraction against the predicted work count.
    Bench(BenchArgs),
}

/// Noise kinds exposed on the command line.
#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    ComplexGaussian,
    RealGaussian,
    ShiftedRademacher,
}

impl From<KindArg> for DistributionKind {
    fn from(k: KindArg) -> DistributionKind {
        match k {
            KindArg::ComplexGaussian => DistributionKind::ComplexGaussian,
            KindArg::RealGaussian => DistributionKind::RealGaussian,
            KindArg::ShiftedRademacher => DistributionKind::ShiftedRademacher,
        }
    }
}

#[derive(Args)]
struct SampleArgs {
    /// Entry distribution.
    #[arg(long, value_enum, default_value_t = KindArg::ComplexGaussian)]
    kind: KindArg,
    /// Entry mean, as RE or RE,IM.
    #[arg(long, value_parser = parse_complex, default_value = "0")]
    mu: Complex64,
    /// Tensor order d >= 2.
    #[arg(long)]
    d: usize,
    /// Dimension n of every mode.
    #[arg(long)]
    n: usize,
    /// Master seed.
    #[arg(long)]
    seed: u64,
    /// Stream id under the master seed.
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExactArgs {
    /// Tensor JSON path, or - for stdin.
    #[arg(long, default_value = "-")]
    input: String,
    /// Also print the log-polar form.
    #[arg(long)]
    log: bool,
    /// Work budget in elementary products.
    #[arg(long, default_value_t = exact::DEFAULT_WORK_BUDGET)]
    budget: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoeffsArgs {
    #[arg(long, default_value = "-")]
    input: String,
    /// Highest coefficient order to extract.
    #[arg(long)]
    t: usize,
    #[arg(long, default_value_t = exact::DEFAULT_WORK_BUDGET)]
    budget: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IdentityArgs {
    #[arg(long, default_value = "-")]
    input: String,
    /// Evaluation point, as RE or RE,IM.
    #[arg(long, value_parser = parse_complex)]
    z: Complex64,
    #[arg(long, default_value_t = exact::DEFAULT_WORK_BUDGET)]
    budget: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long, default_value = "-")]
    input: String,
    /// Highest statistic order (V_k, D_k, V'_k for k <= kmax).
    #[arg(long, default_value_t = 3)]
    kmax: usize,
    /// Squared-entry mean used for the V' recursion, as RE or RE,IM.
    #[arg(long, value_parser = parse_complex, default_value = "0")]
    xi: Complex64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Estimator selection.
#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum MethodArg {
    /// Truncated coefficient series.
    Series,
    /// Closed form mu^n (n!)^(d-1) exp(V_1 z - xi z^2/2).
    Ptas,
    /// Closed form when epsilon > n^(-rho), series otherwise.
    Auto,
}

#[derive(Args)]
struct ApproxArgs {
    #[arg(long, default_value = "-")]
    input: String,
    /// Entry mean of the sampled tensor, as RE or RE,IM.
    #[arg(long, value_parser = parse_complex)]
    mu: Complex64,
    /// Accuracy target in (0, 1).
    #[arg(long)]
    epsilon: f64,
    /// Truncation override (series method only).
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    method: MethodArg,
    /// Squared-entry mean of the noise, as RE or RE,IM (ptas/auto).
    #[arg(long, value_parser = parse_complex, default_value = "0")]
    xi: Complex64,
    /// Admissibility exponent c in (0, 1/8); diagnostic only.
    #[arg(long, default_value_t = 0.1)]
    c: f64,
    /// Dispatch exponent rho in (0, 1/8) for the auto method.
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = exact::DEFAULT_WORK_BUDGET)]
    budget: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Experiment selection.
#[derive(Clone, Copy, ValueEnum)]
enum ExperimentArg {
    Moments,
    Concentration,
    Closeness,
    EndToEnd,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    experiment: ExperimentArg,
    #[arg(long, value_enum, default_value_t = KindArg::ComplexGaussian)]
    kind: KindArg,
    #[arg(long, default_value_t = 3)]
    d: usize,
    /// Dimension(s): one value, or a comma list for concentration.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Highest coefficient / moment order (moments, concentration).
    #[arg(long, default_value_t = 2)]
    kmax: usize,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Entry mean for end-to-end, as RE or RE,IM.
    #[arg(long, value_parser = parse_complex, default_value = "1")]
    mu: Complex64,
    /// Accuracy target for closeness / end-to-end.
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    /// Evaluation point for closeness, as RE or RE,IM.
    #[arg(long, value_parser = parse_complex, default_value = "1")]
    z: Complex64,
    /// Truncation override for end-to-end.
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, default_value_t = exact::DEFAULT_WORK_BUDGET)]
    budget: f64,
    /// Report JSON path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-statistic rows as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also write per-trial rows as CSV (end-to-end only).
    #[arg(long)]
    trial_csv: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 12)]
    n: usize,
    /// Lowest coefficient order timed.
    #[arg(long, default_value_t = 1)]
    kmin: usize,
    /// Highest coefficient order timed (kmax < kmin gives the empty grid).
    #[arg(long, default_value_t = 4)]
    kmax: usize,
    #[arg(long, default_value_t = exact::DEFAULT_WORK_BUDGET)]
    budget: f64,
    /// Seed for the timed tensor.
    #[arg(long, default_value_t = 12345)]
    seed: u64,
    /// CSV path; when set, the slope summary JSON goes to stdout.
    /// When omitted, CSV goes to stdout and the summary to stderr.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = err
                .downcast_ref::<tenperm_core::Error>()
                .map(|e| e.kind())
                .unwrap_or_else(|| {
                    if err.downcast_ref::<io::Error>().is_some() {
                        "io"
                    } else {
                        "cli"
                    }
                });
            let payload = json!({"error": {"kind": kind, "message": format!("{err:#}")}});
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("thread pool already initialized")?;
    }
    let deterministic = cli.deterministic;
    match cli.command {
        Command::Sample(args) => cmd_sample(args),
        Command::Exact(args) => cmd_exact(args),
        Command::Coeffs(args) => cmd_coeffs(args),
        Command::IdentityCheck(args) => cmd_identity(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Approx(args) => cmd_approx(args),
        Command::Verify(args) => cmd_verify(args, deterministic),
        Command::Bench(args) => cmd_bench(args, deterministic),
    }
}

/// Parse "RE" or "RE,IM" into a complex number.
fn parse_complex(s: &str) -> Result<Complex64, String> {
    let mut parts = s.splitn(2, ',');
    let re: f64 = parts
        .next()
        .unwrap_or("")
        .trim()
        .parse()
        .map_err(|_| format!("bad real part in '{s}'"))?;
    let im: f64 = match parts.next() {
        Some(p) => p
            .trim()
            .parse()
            .map_err(|_| format!("bad imaginary part in '{s}'"))?,
        None => 0.0,
    };
    Ok(Complex64::new(re, im))
}

fn read_tensor(input: &str) -> anyhow::Result<Tensor> {
    let text = if input == "-" {
        let mut buf = String::new();
        io::stdin()
            .read_to_string(&mut buf)
            .context("reading tensor from stdin")?;
        buf
    } else {
        fs::read_to_string(input).with_context(|| format!("reading {input}"))?
    };
    let tensor: Tensor = serde_json::from_str(&text)
        .with_context(|| format!("parsing tensor JSON from {input}"))?;
    Ok(tensor)
}

/// Write `payload` (already newline-terminated) to `out` or stdout.
fn emit(out: &Option<PathBuf>, payload: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, payload)
            .with_context(|| format!("writing {}", path.display()))?,
        None => io::stdout()
            .write_all(payload.as_bytes())
            .context("writing stdout")?,
    }
    Ok(())
}

fn pretty(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON value serializes");
    s.push('\n');
    s
}

fn cmd_sample(args: SampleArgs) -> anyhow::Result<()> {
    let dist = EntryDistribution::new(args.kind.into(), args.mu);
    let seed = SeedSpec::new(args.seed, args.stream);
    let tensor = sample_tensor(&dist, args.d, args.n, &seed)?;
    let mut payload = serde_json::to_string(&tensor)?;
    payload.push('\n');
    emit(&args.out, &payload)
}

fn cmd_exact(args: ExactArgs) -> anyhow::Result<()> {
    let tensor = read_tensor(&args.input)?;
    let value = exact::permanent_with_budget(&tensor, args.budget)?;
    let payload = if args.log {
        json!({
            "value": [value.value.re, value.value.im],
            "log_magnitude": value.log_magnitude,
            "argument": value.argument,
        })
    } else {
        json!({"value": [value.value.re, value.value.im]})
    };
    emit(&args.out, &pretty(&payload))
}

fn cmd_coeffs(args: CoeffsArgs) -> anyhow::Result<()> {
    let tensor = read_tensor(&args.input)?;
    let series = series::coefficients_upto_with_budget(&tensor, args.t, args.budget)?;
    emit(&args.out, &pretty(&serde_json::to_value(&series)?))
}

fn cmd_identity(args: IdentityArgs) -> anyhow::Result<()> {
    let tensor = read_tensor(&args.input)?;
    let residual = series::identity_residual_with_budget(&tensor, args.z, args.budget)?;
    let payload = json!({"z": [args.z.re, args.z.im], "residual": residual});
    emit(&args.out, &pretty(&payload))
}

fn cmd_stats(args: StatsArgs) -> anyhow::Result<()> {
    let tensor = read_tensor(&args.input)?;
    let scores = symmetric::hyperplane_scores(&tensor);
    let v_coeffs = symmetric::elementary_coeffs(&tensor, args.kmax)?;
    let d_moments = symmetric::power_moments(&tensor, args.kmax);
    let v1 = v_coeffs.coefficients()[1];
    let v_prime = symmetric::gaussian_series(v1, args.xi, args.kmax);
    let pairs = |xs: &[Complex64]| -> Vec<[f64; 2]> {
        xs.iter().map(|x| [x.re, x.im]).collect()
    };
    let payload = json!({
        "kmax": args.kmax,
        "xi": [args.xi.re, args.xi.im],
        "c_scores": pairs(scores.scores()),
        "v_coeffs": serde_json::to_value(&v_coeffs)?,
        "d_moments": pairs(&d_moments),
        "v_prime_coeffs": serde_json::to_value(&v_prime)?,
    });
    emit(&args.out, &pretty(&payload))
}

fn cmd_approx(args: ApproxArgs) -> anyhow::Result<()> {
    let tensor = read_tensor(&args.input)?;
    if args.t.is_some() && args.method != MethodArg::Series {
        anyhow::bail!("--t only applies to --method series");
    }
    let result = match args.method {
        MethodArg::Series => {
            approx::permanent_series_with(&tensor, args.mu, args.epsilon, args.t, args.budget)?
        }
        MethodArg::Ptas => approx::permanent_gaussian(&tensor, args.mu, args.xi)?,
        MethodArg::Auto => {
            approx::permanent_auto(&tensor, args.mu, args.xi, args.epsilon, args.rho)?
        }
    };
    let admissibility = approx::admissibility(tensor.dim(), tensor.order(), args.mu, args.c);
    let mut payload = serde_json::to_value(&result)?;
    payload["admissibility"] = serde_json::to_value(&admissibility)?;
    emit(&args.out, &pretty(&payload))
}

/// One dimension for experiments that take exactly one.
fn single_n(n: &[usize], experiment: &str) -> anyhow::Result<usize> {
    match n {
        [one] => Ok(*one),
        _ => anyhow::bail!("{experiment} takes exactly one --n value, got {}", n.len()),
    }
}

fn cmd_verify(args: VerifyArgs, deterministic: bool) -> anyhow::Result<()> {
    let opts = VerifyOptions {
        budget: args.budget,
        record_timing: !deterministic,
    };
    let kind: DistributionKind = args.kind.into();
    let seed = SeedSpec::new(args.seed, args.stream);
    let report = match args.experiment {
        ExperimentArg::Moments => verify::moment_experiment(
            kind,
            args.d,
            single_n(&args.n, "moments")?,
            args.kmax,
            args.trials,
            seed,
            &opts,
        )?,
        ExperimentArg::Concentration => verify::concentration_experiment(
            kind, args.d, &args.n, args.kmax, args.trials, seed, &opts,
        )?,
        ExperimentArg::Closeness => verify::closeness_experiment(
            kind,
            args.d,
            single_n(&args.n, "closeness")?,
            args.epsilon,
            args.z,
            args.trials,
            seed,
            &opts,
        )?,
        ExperimentArg::EndToEnd => verify::end_to_end_experiment(
            kind,
            args.d,
            single_n(&args.n, "end-to-end")?,
            args.mu,
            args.epsilon,
            args.trials,
            seed,
            args.t,
            &opts,
        )?,
    };
    if let Some(path) = &args.csv {
        write_stat_csv(path, &report)?;
    }
    if let Some(path) = &args.trial_csv {
        write_trial_csv(path, &report)?;
    }
    emit(&args.out, &pretty(&serde_json::to_value(&report)?))
}

/// Quote a CSV field if it contains a delimiter, quote or newline.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn write_stat_csv(path: &Path, report: &ExperimentReport) -> anyhow::Result<()> {
    let mut out = String::from("name,empirical,target,standard_error,tolerance,band,pass\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{:e},{},{},{},{},{}\n",
            csv_field(&row.name),
            row.empirical,
            fmt_opt(row.target),
            fmt_opt(row.standard_error),
            fmt_opt(row.tolerance),
            row.band,
            row.pass
        ));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn write_trial_csv(path: &Path, report: &ExperimentReport) -> anyhow::Result<()> {
    let Some(trials) = &report.trial_rows else {
        anyhow::bail!("--trial-csv is only available for the end-to-end experiment");
    };
    let mut out = String::from("trial,method,abs_error,within_epsilon\n");
    for row in trials {
        out.push_str(&format!(
            "{},{},{:e},{}\n",
            row.trial, row.method, row.abs_error, row.within_epsilon
        ));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn cmd_bench(args: BenchArgs, deterministic: bool) -> anyhow::Result<()> {
    let d = args.d;
    let n = args.n;
    let dist = EntryDistribution::new(
        DistributionKind::ComplexGaussian,
        Complex64::new(0.0, 0.0),
    );
    // The tensor is only materialized when something will actually be timed.
    let tensor = if deterministic || args.kmin > args.kmax {
        None
    } else {
        Some(sample_tensor(&dist, d, n, &SeedSpec::new(args.seed, 0))?)
    };

    let mut csv = String::from("d,n,k,subtensor_count,seconds\n");
    let mut points = Vec::new(); // (ln predicted work, ln seconds)
    let mut rows = 0u32;
    let mut skipped = Vec::new();
    for k in args.kmin..=args.kmax.min(n) {
        let work = coefficient_work(n, k, d);
        if work as f64 > args.budget {
            skipped.push(json!({
                "k": k,
                "reason": format!("predicted work {work} exceeds budget {:.0}", args.budget),
            }));
            continue;
        }
        let count = (0..d).fold(1u128, |acc, _| acc.saturating_mul(binomial_u128(n, k)));
        let seconds = match &tensor {
            Some(a) => time_coefficient(a, k, args.budget)?,
            None => 0.0,
        };
        csv.push_str(&format!("{d},{n},{k},{count},{seconds:.6e}\n"));
        rows += 1;
        if seconds > 0.0 {
            points.push(((work as f64).ln(), seconds.ln()));
        }
    }

    let slope = fit_slope(&points);
    let summary = json!({
        "d": d,
        "n": n,
        "rows": rows,
        "predicted_work_model": "C(n,k)^d * (k!)^(d-1)",
        "log_log_slope": slope,
        "skipped": skipped,
    });
    match &args.csv {
        Some(path) => {
            fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
            io::stdout().write_all(pretty(&summary).as_bytes())?;
        }
        None => {
            io::stdout().write_all(csv.as_bytes())?;
            eprintln!("{summary}");
        }
    }
    Ok(())
}

/// Average seconds per call of coefficient extraction at order k, repeating
/// until at least 0.1 s has elapsed so small orders are resolvable.
fn time_coefficient(a: &Tensor, k: usize, budget: f64) -> anyhow::Result<f64> {
    let start = Instant::now();
    let mut reps = 0u32;
    loop {
        let value = series::coefficient_with_budget(a, k, budget)?;
        anyhow::ensure!(value.norm().is_finite(), "non-finite coefficient at k={k}");
        reps += 1;
        if start.elapsed() >= Duration::from_millis(100) {
            break;
        }
    }
    Ok(start.elapsed().as_secs_f64() / reps as f64)
}

/// Least-squares slope of y against x; None below two points.
fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let xbar = points.iter().map(|p| p.0).sum::<f64>() / m;
    let ybar = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - xbar).powi(2)).sum();
    Some(sxy / sxx)
}
