//! `hd-mmd`: command-line front end for the high-dimensional kernel
//! two-sample testing library.
//!
//! Five subcommands cover the pipeline end to end:
//!
//! * `test` — run the studentized two-sample test on two CSV samples;
//! * `sample` — draw synthetic observations from a JSON model description;
//! * `simulate` — run a Monte Carlo experiment from a JSON config, writing
//!   a summary document plus replicate-level tables;
//! * `predict-power` — evaluate the theoretical power predictions of an
//!   experiment config without drawing any data;
//! * `kernel-impact` — tabulate the kernel-choice and bandwidth-response
//!   ratios `h₁`/`h₂` that rank kernels for covariance alternatives.
//!
//! # Output conventions
//!
//! Every JSON document carries `schema_version` and `kind` fields and
//! validates against the matching file in the repository's `schemas/`
//! directory. All fractional numbers — JSON and CSV alike — are written in
//! plain decimal with 12 significant digits (no exponent notation), so
//! repeated runs produce byte-identical files; integers are written exactly.
//! Non-finite numbers become `null` in JSON and empty cells in CSV. CSV files
//! use `,` separators, `.` decimal points, and LF line endings.
//!
//! # Reproducibility
//!
//! Randomness is opt-in: seeds default to a fixed documented constant, and
//! `--seed random` draws one from the operating system (reporting it on
//! stderr so the run can be replayed). The environment variable
//! `HD_MMD_THREADS` caps the worker-thread count; results are bit-identical
//! for every thread count.

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hd_mmd_core::datagen::{ModelSpec, Sampler};
use hd_mmd_core::kernels::{resolve_bandwidth, BandwidthPolicy, KernelFamily, KernelSpec};
use hd_mmd_core::montecarlo::{self, ExperimentConfig, ExperimentOutput};
use hd_mmd_core::numfmt::{format_significant, OUTPUT_SIG_DIGITS};
use hd_mmd_core::rng::derive_rng;
use hd_mmd_core::{theory, Error, Result, SampleMatrix};
use serde::Serialize;
use serde_json::{Map, Value};

/// Version string embedded in every JSON document this binary writes.
const SCHEMA_VERSION: &str = "1";

const AFTER_HELP: &str = "Environment:\n  HD_MMD_THREADS  cap on worker threads (default: all hardware threads)\n\nNumbers in output files are plain decimal with 12 significant digits;\nseeds default to a fixed constant, so identical invocations produce\nbyte-identical files.";

#[derive(Parser)]
#[command(
    name = "hd-mmd",
    version,
    about = "Kernel two-sample testing tuned for the high-dimensional regime",
    after_help = AFTER_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the studentized two-sample test on two CSV samples
    Test(TestArgs),
    /// Draw synthetic observations from a JSON model description
    Sample(SampleArgs),
    /// Run a Monte Carlo experiment described by a JSON config file
    Simulate(SimulateArgs),
    /// Evaluate theoretical power predictions without drawing any data
    PredictPower(PredictPowerArgs),
    /// Tabulate kernel second-order signal ratios h1 (and optionally h2)
    KernelImpact(KernelImpactArgs),
}

#[derive(Args)]
struct TestArgs {
    /// First sample: CSV with one observation per row
    #[arg(long, value_name = "FILE")]
    x: PathBuf,
    /// Second sample: CSV with one observation per row
    #[arg(long, value_name = "FILE")]
    y: PathBuf,
    /// Kernel family: gaussian | laplace | rq:<alpha> | energy
    #[arg(long, default_value = "gaussian", value_parser = parse_kernel)]
    kernel: KernelFamily,
    /// Bandwidth policy: fixed:<gamma> | scaled:<c> (gamma = c·p) | median
    #[arg(long, default_value = "scaled:2", value_parser = parse_bandwidth)]
    bandwidth: BandwidthPolicy,
    /// Test level in (0, 1)
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Emit the result as JSON (the default and only output format)
    #[arg(long)]
    json: bool,
    /// Write the JSON document here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// Model description: JSON file with entry_dist/covariance/mean/transform
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Number of observations to draw
    #[arg(long)]
    n: usize,
    /// Dimension (required when the model file omits p; must agree otherwise)
    #[arg(long)]
    p: Option<usize>,
    /// Output CSV path
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// u64 seed, or the word `random` (drawn from the OS, reported on stderr)
    #[arg(long, default_value_t = Seed::Fixed(montecarlo::DEFAULT_SEED), value_parser = parse_seed)]
    seed: Seed,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment description: JSON file (see ExperimentConfig)
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Output directory (created if missing); receives summary.json,
    /// replicates.csv, and qq.csv
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Worker threads (default: HD_MMD_THREADS capped by hardware);
    /// output is bit-identical for every value
    #[arg(long)]
    threads: Option<usize>,
    /// Override the config's seed: u64, or the word `random`
    #[arg(long, value_parser = parse_seed)]
    seed: Option<Seed>,
}

#[derive(Args)]
struct PredictPowerArgs {
    /// Experiment description: JSON file; the mode field is ignored
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Write the JSON document here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KernelImpactArgs {
    /// Squared-distance scale at which the curvature ratio h1 is evaluated
    #[arg(long)]
    tau: f64,
    /// Bandwidth for the h2 column (requires --trace-sigma)
    #[arg(long)]
    gamma: Option<f64>,
    /// Trace of the first covariance for the h2 column (requires --gamma)
    #[arg(long, value_name = "TRACE")]
    trace_sigma: Option<f64>,
    /// Exponent of the rational quadratic row
    #[arg(long, default_value_t = 0.5)]
    rq_alpha: f64,
    /// Output format
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
    /// Write the table here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

/// Seed argument: a literal value, or one drawn from the OS at dispatch.
#[derive(Debug, Clone, Copy)]
enum Seed {
    Fixed(u64),
    Random,
}

impl Seed {
    /// Concrete seed; drawing a random one reports it on stderr so the run
    /// can be replayed with `--seed <value>`.
    fn resolve(self) -> u64 {
        match self {
            Seed::Fixed(v) => v,
            Seed::Random => {
                let v: u64 = rand::random();
                eprintln!("drew seed {v}");
                v
            }
        }
    }
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Seed::Fixed(v) => write!(f, "{v}"),
            Seed::Random => write!(f, "random"),
        }
    }
}

fn parse_kernel(s: &str) -> std::result::Result<KernelFamily, String> {
    match s {
        "gaussian" => Ok(KernelFamily::Gaussian),
        "laplace" => Ok(KernelFamily::Laplace),
        "energy" => Ok(KernelFamily::Energy),
        _ => {
            if let Some(rest) = s.strip_prefix("rq:") {
                let alpha: f64 = rest
                    .parse()
                    .map_err(|_| format!("rq exponent is not a number: {rest:?}"))?;
                if !alpha.is_finite() || alpha <= 0.0 {
                    return Err(format!("rq exponent must be finite and > 0, got {alpha}"));
                }
                Ok(KernelFamily::RationalQuadratic { alpha })
            } else {
                Err(format!(
                    "expected gaussian | laplace | rq:<alpha> | energy, got {s:?}"
                ))
            }
        }
    }
}

fn parse_bandwidth(s: &str) -> std::result::Result<BandwidthPolicy, String> {
    if s == "median" {
        return Ok(BandwidthPolicy::MedianHeuristic);
    }
    let parse_value = |rest: &str, what: &str| -> std::result::Result<f64, String> {
        let v: f64 = rest
            .parse()
            .map_err(|_| format!("{what} is not a number: {rest:?}"))?;
        if !v.is_finite() || v <= 0.0 {
            return Err(format!("{what} must be finite and > 0, got {v}"));
        }
        Ok(v)
    };
    if let Some(rest) = s.strip_prefix("fixed:") {
        return Ok(BandwidthPolicy::Fixed(parse_value(rest, "fixed bandwidth")?));
    }
    if let Some(rest) = s.strip_prefix("scaled:") {
        return Ok(BandwidthPolicy::ScaledDimension(parse_value(
            rest,
            "bandwidth scale",
        )?));
    }
    Err(format!(
        "expected fixed:<gamma> | scaled:<c> | median, got {s:?}"
    ))
}

fn parse_seed(s: &str) -> std::result::Result<Seed, String> {
    if s == "random" {
        return Ok(Seed::Random);
    }
    s.parse()
        .map(Seed::Fixed)
        .map_err(|_| format!("expected a u64 seed or the word `random`, got {s:?}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Test(args) => cmd_test(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::PredictPower(args) => cmd_predict_power(args),
        Command::KernelImpact(args) => cmd_kernel_impact(args),
    }
}

fn cmd_test(args: TestArgs) -> Result<()> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(Error::Config {
            message: format!("flag --alpha: must lie in (0, 1), got {}", args.alpha),
        });
    }
    let x = read_sample(&args.x, "--x")?;
    let y = read_sample(&args.y, "--y")?;
    let gamma = resolve_bandwidth(&args.bandwidth, &[&x, &y])?;
    let kernel = KernelSpec::new(args.kernel, gamma)?;
    let result = hd_mmd_core::mmd::two_sample_test(&x, &y, &kernel, args.alpha)?;
    let mut body = to_object(&result)?;
    body.insert(
        "kernel".to_string(),
        serde_json::to_value(kernel).map_err(std::io::Error::from)?,
    );
    emit_json("test_result", body, args.out.as_deref())
}

fn cmd_sample(args: SampleArgs) -> Result<()> {
    if args.n == 0 {
        return Err(Error::Config {
            message: "flag --n: must be >= 1".into(),
        });
    }
    let spec: ModelSpec = read_json_file(&args.model, "model")?;
    let p = spec.effective_p(args.p)?;
    let sampler = Sampler::new(&spec, p)?;
    let mut rng = derive_rng(args.seed.resolve(), &[]);
    let mut data = vec![0.0; args.n * p];
    sampler.fill_rows(&mut rng, &mut data);
    SampleMatrix::new(args.n, p, data)?.write_csv(&args.out)
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut config: ExperimentConfig = read_json_file(&args.config, "config")?;
    if let Some(seed) = args.seed {
        config.seed = seed.resolve();
    }
    let output = match args.threads {
        Some(0) => {
            return Err(Error::Config {
                message: "flag --threads: must be >= 1".into(),
            });
        }
        Some(t) => montecarlo::run_experiment_threaded(&config, t)?,
        None => montecarlo::run_experiment(&config)?,
    };
    std::fs::create_dir_all(&args.out)?;
    emit_json(
        "experiment_summary",
        to_object(&output.summary)?,
        Some(&args.out.join("summary.json")),
    )?;
    write_replicates_csv(&args.out.join("replicates.csv"), &output)?;
    write_qq_csv(&args.out.join("qq.csv"), &output)
}

fn cmd_predict_power(args: PredictPowerArgs) -> Result<()> {
    let config: ExperimentConfig = read_json_file(&args.config, "config")?;
    let cells = montecarlo::predict_power(&config)?;
    #[derive(Serialize)]
    struct Body {
        cells: Vec<montecarlo::PredictedCell>,
    }
    emit_json(
        "power_prediction",
        to_object(&Body { cells })?,
        args.out.as_deref(),
    )
}

fn cmd_kernel_impact(args: KernelImpactArgs) -> Result<()> {
    if !args.rq_alpha.is_finite() || args.rq_alpha <= 0.0 {
        return Err(Error::Config {
            message: format!(
                "flag --rq-alpha: must be finite and > 0, got {}",
                args.rq_alpha
            ),
        });
    }
    let h2_at = match (args.gamma, args.trace_sigma) {
        (Some(gamma), Some(trace)) => Some((gamma, trace)),
        (None, None) => None,
        _ => {
            return Err(Error::Config {
                message: "flags --gamma and --trace-sigma must be given together".into(),
            });
        }
    };

    #[derive(Serialize)]
    struct Row {
        kernel: String,
        h1: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        h2: Option<f64>,
    }
    let families = [
        ("gaussian".to_string(), KernelFamily::Gaussian),
        ("laplace".to_string(), KernelFamily::Laplace),
        (
            format!("rq:{}", format_significant(args.rq_alpha, OUTPUT_SIG_DIGITS)),
            KernelFamily::RationalQuadratic {
                alpha: args.rq_alpha,
            },
        ),
        ("energy".to_string(), KernelFamily::Energy),
    ];
    let mut rows = Vec::with_capacity(families.len());
    for (kernel, family) in families {
        rows.push(Row {
            kernel,
            h1: theory::h1(&family, args.tau)?,
            h2: match h2_at {
                Some((gamma, trace)) => Some(theory::h2(&family, gamma, trace)?),
                None => None,
            },
        });
    }

    match args.format {
        OutputFormat::Csv => {
            let mut text = String::from(if h2_at.is_some() {
                "kernel,h1,h2\n"
            } else {
                "kernel,h1\n"
            });
            for row in &rows {
                text.push_str(&row.kernel);
                text.push(',');
                text.push_str(&format_significant(row.h1, OUTPUT_SIG_DIGITS));
                if let Some(h2) = row.h2 {
                    text.push(',');
                    text.push_str(&format_significant(h2, OUTPUT_SIG_DIGITS));
                }
                text.push('\n');
            }
            write_text(args.out.as_deref(), &text)
        }
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct Body {
                tau: f64,
                #[serde(skip_serializing_if = "Option::is_none")]
                gamma: Option<f64>,
                #[serde(skip_serializing_if = "Option::is_none")]
                trace_sigma: Option<f64>,
                rows: Vec<Row>,
            }
            let body = Body {
                tau: args.tau,
                gamma: args.gamma,
                trace_sigma: args.trace_sigma,
                rows,
            };
            emit_json("kernel_impact", to_object(&body)?, args.out.as_deref())
        }
    }
}

/// Read a CSV sample, reclassifying open/parse failures as configuration
/// errors that cite the file (bad input paths are usage mistakes, exit 2).
fn read_sample(path: &Path, which: &str) -> Result<SampleMatrix> {
    SampleMatrix::read_csv(path).map_err(|e| match e {
        Error::Io(_) | Error::CsvFormat { .. } | Error::EmptyInput { .. } => Error::Config {
            message: format!("{which} file {}: {e}", path.display()),
        },
        other => other,
    })
}

/// Read and deserialize a JSON config file; failures are configuration
/// errors citing the file and (via serde) the offending field.
fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        message: format!("cannot read {what} file {}: {e}", path.display()),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config {
        message: format!("{what} file {}: {e}", path.display()),
    })
}

/// Serialize to a JSON object map (all document bodies are structs).
fn to_object<T: Serialize>(body: &T) -> Result<Map<String, Value>> {
    match serde_json::to_value(body).map_err(std::io::Error::from)? {
        Value::Object(map) => Ok(map),
        other => Err(Error::Config {
            message: format!("internal: JSON document body is not an object: {other}"),
        }),
    }
}

/// Attach the document envelope, rewrite every fractional number to 12
/// significant digits, and write pretty-printed JSON (trailing newline).
fn emit_json(kind: &str, body: Map<String, Value>, out: Option<&Path>) -> Result<()> {
    let mut doc = body;
    doc.insert(
        "schema_version".to_string(),
        Value::String(SCHEMA_VERSION.to_string()),
    );
    doc.insert("kind".to_string(), Value::String(kind.to_string()));
    let mut value = Value::Object(doc);
    round_numbers(&mut value);
    let mut text = serde_json::to_string_pretty(&value).map_err(std::io::Error::from)?;
    text.push('\n');
    write_text(out, &text)
}

/// Rewrite every fractional JSON number in place to the workspace's
/// 12-significant-digit plain-decimal form; integers stay exact.
fn round_numbers(value: &mut Value) {
    match value {
        Value::Number(n) => {
            if n.is_u64() || n.is_i64() {
                return;
            }
            if let Some(x) = n.as_f64() {
                if let Ok(short) = format_significant(x, OUTPUT_SIG_DIGITS).parse() {
                    *n = short;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_numbers),
        Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Finite numbers in CSV cells are plain decimal (12 significant digits);
/// non-finite values are empty cells, per the workspace convention.
fn csv_number(x: f64) -> String {
    if x.is_finite() {
        format_significant(x, OUTPUT_SIG_DIGITS)
    } else {
        String::new()
    }
}

/// Minimal CSV quoting: only fields containing a comma, quote, or line
/// break are wrapped, with inner quotes doubled.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per (replicate, kernel) record: indices, resolved bandwidth, the
/// statistic triple, one 0/1 rejection column per level, and the error
/// message for failed replicates.
fn write_replicates_csv(path: &Path, output: &ExperimentOutput) -> Result<()> {
    let mut text = String::from("grid_index,kernel_index,replicate,bandwidth,mmd_stat,var_hat,z_score");
    for alpha in &output.summary.alphas {
        text.push_str(",reject_");
        text.push_str(&format_significant(*alpha, OUTPUT_SIG_DIGITS));
    }
    text.push_str(",error\n");
    for r in &output.records {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}",
            r.grid_index,
            r.kernel_index,
            r.replicate,
            r.bandwidth.map_or_else(String::new, csv_number),
            csv_number(r.mmd_stat),
            csv_number(r.var_hat),
            csv_number(r.z_score),
        ));
        for reject in &r.reject {
            text.push(',');
            text.push(if *reject { '1' } else { '0' });
        }
        text.push(',');
        text.push_str(&csv_field(r.error.as_deref().unwrap_or("")));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// One row per (cell, percentile): the z-score QQ table against `N(0, 1)`.
fn write_qq_csv(path: &Path, output: &ExperimentOutput) -> Result<()> {
    let mut text = String::from("grid_index,kernel_index,prob,theoretical,empirical\n");
    for cell in &output.summary.grid {
        for q in &cell.z_quantiles {
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                cell.grid_index,
                cell.kernel_index,
                csv_number(q.prob),
                csv_number(q.theoretical),
                csv_number(q.empirical),
            ));
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}
